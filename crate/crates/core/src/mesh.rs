//! Conforming triangulations of polygonal domains with labelled boundary
//! segments.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub type Point = [f64; 2];

pub const UNIT_SQUARE_SIDES: [&str; 4] = ["bottom", "right", "top", "left"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("triangle {element} has non-positive signed area {area}")]
    Degenerate { element: usize, area: f64 },
    #[error("triangle {element} references vertex {vertex} out of range")]
    VertexOutOfRange { element: usize, vertex: usize },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifold(usize, usize),
    #[error("boundary edge ({0}, {1}) does not lie on the boundary of the triangulation")]
    NotBoundary(usize, usize),
    #[error("boundary edge ({0}, {1}) carries no label")]
    Untagged(usize, usize),
    #[error("boundary edge ({0}, {1}) is tagged twice")]
    DuplicateTag(usize, usize),
    #[error("boundary segment `{0}` is not a connected polyline")]
    DisconnectedLabel(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    /// Index into [`Mesh::labels`].
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    labels: Vec<String>,
    edges: Vec<[usize; 2]>,
    edge_lookup: BTreeMap<(usize, usize), usize>,
    triangle_edges: Vec<[usize; 3]>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Local edge `k` of a triangle joins local vertices `LOCAL_EDGES[k]`.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

impl Mesh {
    /// Builds and validates a mesh. Boundary edges are given as vertex pairs
    /// with a segment label.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], String)>,
    ) -> Result<Self, MeshError> {
        for (e, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange {
                        element: e,
                        vertex: v,
                    });
                }
            }
            let area = signed_area(&vertices, t);
            if !(area > 0.0) {
                return Err(MeshError::Degenerate { element: e, area });
            }
        }

        let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut edge_count: Vec<u8> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let mut te = [0; 3];
            for (k, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let key = edge_key(t[*a], t[*b]);
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_count.push(0);
                    edges.len() - 1
                });
                edge_count[idx] += 1;
                if edge_count[idx] > 2 {
                    return Err(MeshError::NonManifold(key.0, key.1));
                }
                te[k] = idx;
            }
            triangle_edges.push(te);
        }

        let mut labels: Vec<String> = Vec::new();
        let mut tagged = vec![false; edges.len()];
        let mut bedges = Vec::with_capacity(boundary.len());
        for ([a, b], label) in boundary {
            let key = edge_key(a, b);
            let idx = match edge_index.get(&key) {
                Some(&i) if edge_count[i] == 1 => i,
                _ => return Err(MeshError::NotBoundary(a, b)),
            };
            if tagged[idx] {
                return Err(MeshError::DuplicateTag(a, b));
            }
            tagged[idx] = true;
            let li = match labels.iter().position(|l| *l == label) {
                Some(i) => i,
                None => {
                    labels.push(label);
                    labels.len() - 1
                }
            };
            bedges.push(BoundaryEdge {
                vertices: [a, b],
                label: li,
            });
        }
        for (i, e) in edges.iter().enumerate() {
            if edge_count[i] == 1 && !tagged[i] {
                return Err(MeshError::Untagged(e[0], e[1]));
            }
        }

        let mesh = Self {
            vertices,
            triangles,
            boundary: bedges,
            labels,
            edges,
            edge_lookup: edge_index,
            triangle_edges,
        };
        for (li, l) in mesh.labels.iter().enumerate() {
            if !mesh.label_is_connected(li) {
                return Err(MeshError::DisconnectedLabel(l.clone()));
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self, label: usize) -> &str {
        &self.labels[label]
    }

    /// Unique undirected edges, each stored with ascending vertex indices.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge index of each local edge, see [`LOCAL_EDGES`].
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&edge_key(a, b)).copied()
    }

    /// Largest edge length.
    pub fn h_max(&self) -> f64 {
        self.edges
            .iter()
            .map(|[a, b]| {
                let (pa, pb) = (self.vertices[*a], self.vertices[*b]);
                libm::hypot(pa[0] - pb[0], pa[1] - pb[1])
            })
            .fold(0.0, f64::max)
    }

    fn label_is_connected(&self, label: usize) -> bool {
        let segs: Vec<[usize; 2]> = self
            .boundary
            .iter()
            .filter(|e| e.label == label)
            .map(|e| e.vertices)
            .collect();
        if segs.is_empty() {
            return true;
        }
        let mut reached = vec![false; segs.len()];
        reached[0] = true;
        let mut stack = vec![0usize];
        while let Some(s) = stack.pop() {
            for (j, o) in segs.iter().enumerate() {
                if !reached[j] && o.iter().any(|v| segs[s].contains(v)) {
                    reached[j] = true;
                    stack.push(j);
                }
            }
        }
        reached.iter().all(|&r| r)
    }

    /// Splits every triangle into four through its edge midpoints. Boundary
    /// edges are halved and keep their labels.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        for [a, b] in &self.edges {
            let (pa, pb) = (self.vertices[*a], self.vertices[*b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        let mid = |e: usize| nv + e;
        let mut triangles = Vec::with_capacity(4 * self.num_triangles());
        for (t, te) in self.triangles.iter().zip(&self.triangle_edges) {
            let [a, b, c] = *t;
            let (ab, bc, ca) = (mid(te[0]), mid(te[1]), mid(te[2]));
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for be in &self.boundary {
            let [a, b] = be.vertices;
            let m = mid(self.edge_index(a, b).expect("boundary edge is a mesh edge"));
            let label = self.labels[be.label].clone();
            boundary.push(([a, m], label.clone()));
            boundary.push(([m, b], label));
        }
        Mesh::new(vertices, triangles, boundary).expect("refinement preserves validity")
    }
}

fn signed_area(vertices: &[Point], t: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// `n × n` squares on [0,1]², each cut along its bottom-left to top-right
/// diagonal. Sides are labelled `bottom`, `right`, `top`, `left`.
pub fn unit_square_mesh(n: usize) -> Mesh {
    assert!(n >= 1, "unit_square_mesh needs n >= 1");
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary.push(([idx(i, 0), idx(i + 1, 0)], "bottom".to_string()));
    }
    for j in 0..n {
        boundary.push(([idx(n, j), idx(n, j + 1)], "right".to_string()));
    }
    for i in (0..n).rev() {
        boundary.push(([idx(i + 1, n), idx(i, n)], "top".to_string()));
    }
    for j in (0..n).rev() {
        boundary.push(([idx(0, j + 1), idx(0, j)], "left".to_string()));
    }
    Mesh::new(vertices, triangles, boundary).expect("unit square mesh is valid")
}
