//! Discrete operators for the four-field system: quadratic vector
//! displacements, linear pressure, total pressure and fluid content.

mod loads;
pub mod quadrature;

pub use loads::{
    assemble_loads, assemble_scalar_functional, energy_error_p, energy_error_u, interpolate_p1,
    interpolate_p2, l2_error_scalar, LoadFields, LoadVectors, ScalarField, VectorField,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::dot;
use crate::mesh::{Mesh, Point};
use crate::problem::{BoundaryConfig, MaterialParams, ProblemError, SpaceConfig, Tag};
use crate::sparse::{CsrMatrix, SparseSym, TripletBuilder};
use quadrature::{barycentric_gradients, p2_gradients, p2_values, TRIANGLE_RULE};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("triangle {element} is degenerate (signed area {area})")]
    Degenerate { element: usize, area: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{field} data given on segment `{label}`, which is essential for that field")]
    DataOnEssentialSegment { field: &'static str, label: String },
    #[error("{field} data given on unknown segment `{label}`")]
    UnknownSegment { field: &'static str, label: String },
    #[error("initial fluid content has mean {mean:e}, but the fluid-content space is mean-free")]
    InitialMeanNonzero { mean: f64 },
}

/// Numbering of the free degrees of freedom.
///
/// Displacement dofs are interleaved, `2 * node + component`, over quadratic
/// nodes (vertices first, then edge midpoints). Pressure dofs are vertices
/// not on the essential pressure boundary. Total pressure and fluid content
/// live on all vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    n_vertices: usize,
    n_edges: usize,
    u_index: Vec<usize>,
    u_global: Vec<usize>,
    p_index: Vec<usize>,
    p_global: Vec<usize>,
    bc: BoundaryConfig,
}

impl DofMap {
    pub fn new(mesh: &Mesh, bc: &BoundaryConfig) -> Result<Self, AssemblyError> {
        bc.validate_labels(mesh.labels().iter().map(|s| s.as_str()))?;
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let mut u_ess = vec![false; nv + ne];
        let mut p_ess = vec![false; nv];
        for be in mesh.boundary() {
            let tags = bc
                .get(mesh.label_name(be.label))
                .expect("labels validated above");
            let [a, b] = be.vertices;
            if tags.displacement == Tag::Essential {
                u_ess[a] = true;
                u_ess[b] = true;
                u_ess[nv + mesh.edge_index(a, b).expect("boundary edge is a mesh edge")] = true;
            }
            if tags.pressure == Tag::Essential {
                p_ess[a] = true;
                p_ess[b] = true;
            }
        }
        let mut u_index = vec![NONE; 2 * (nv + ne)];
        let mut u_global = Vec::new();
        for node in 0..nv + ne {
            if !u_ess[node] {
                for c in 0..2 {
                    u_index[2 * node + c] = u_global.len();
                    u_global.push(2 * node + c);
                }
            }
        }
        let mut p_index = vec![NONE; nv];
        let mut p_global = Vec::new();
        for v in 0..nv {
            if !p_ess[v] {
                p_index[v] = p_global.len();
                p_global.push(v);
            }
        }
        Ok(Self {
            n_vertices: nv,
            n_edges: ne,
            u_index,
            u_global,
            p_index,
            p_global,
            bc: bc.clone(),
        })
    }

    /// Number of free displacement dofs.
    pub fn n_u(&self) -> usize {
        self.u_global.len()
    }

    /// Number of free pressure dofs.
    pub fn n_p(&self) -> usize {
        self.p_global.len()
    }

    /// Number of total-pressure (and fluid-content) dofs.
    pub fn n_s(&self) -> usize {
        self.n_vertices
    }

    pub fn n_u_nodes(&self) -> usize {
        self.n_vertices + self.n_edges
    }

    pub fn u_free(&self, global: usize) -> Option<usize> {
        Some(self.u_index[global]).filter(|&i| i != NONE)
    }

    pub fn p_free(&self, vertex: usize) -> Option<usize> {
        Some(self.p_index[vertex]).filter(|&i| i != NONE)
    }

    pub fn u_essential(&self, global: usize) -> bool {
        self.u_index[global] == NONE
    }

    pub fn p_essential(&self, vertex: usize) -> bool {
        self.p_index[vertex] == NONE
    }

    /// Global dof of each free displacement dof.
    pub fn u_global(&self) -> &[usize] {
        &self.u_global
    }

    /// Vertex of each free pressure dof.
    pub fn p_global(&self) -> &[usize] {
        &self.p_global
    }

    pub fn bc(&self) -> &BoundaryConfig {
        &self.bc
    }

    /// Position of a quadratic node.
    pub fn node_position(&self, mesh: &Mesh, node: usize) -> Point {
        if node < self.n_vertices {
            mesh.vertices()[node]
        } else {
            let [a, b] = mesh.edges()[node - self.n_vertices];
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        }
    }

    /// Expands free displacement coefficients to all global dofs (zero on
    /// the essential boundary).
    pub fn expand_u(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.u_index.len()];
        for (i, &g) in self.u_global.iter().enumerate() {
            out[g] = u[i];
        }
        out
    }

    /// Expands free pressure coefficients to all vertices.
    pub fn expand_p(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vertices];
        for (i, &g) in self.p_global.iter().enumerate() {
            out[g] = p[i];
        }
        out
    }

    /// Restricts a vertex vector to the free pressure dofs.
    pub fn restrict_p(&self, v: &[f64]) -> Vec<f64> {
        self.p_global.iter().map(|&g| v[g]).collect()
    }

    pub(crate) fn local_u_dofs(&self, mesh: &Mesh, t: usize) -> [usize; 12] {
        let tri = mesh.triangles()[t];
        let te = mesh.triangle_edges()[t];
        let nodes = [
            tri[0],
            tri[1],
            tri[2],
            self.n_vertices + te[0],
            self.n_vertices + te[1],
            self.n_vertices + te[2],
        ];
        let mut out = [0; 12];
        for (a, n) in nodes.iter().enumerate() {
            out[2 * a] = 2 * n;
            out[2 * a + 1] = 2 * n + 1;
        }
        out
    }
}

/// Assembled operators on the free dofs of a [`DofMap`].
#[derive(Debug, Clone)]
pub struct OperatorSet {
    /// `∫ 2μ ε(φ_i) : ε(φ_j)` on free displacement dofs.
    pub e: SparseSym,
    /// `∫ κ ∇ψ_i · ∇ψ_j` on free pressure dofs.
    pub l: SparseSym,
    /// `∫ ψ_i div φ_j`, rows over all vertices, columns over free displacement dofs.
    pub b: CsrMatrix,
    /// Scalar mass matrix over all vertices.
    pub m: SparseSym,
    /// Columns of the mass matrix belonging to free pressure dofs.
    pub m_sp: CsrMatrix,
    /// Mass matrix restricted to free pressure dofs.
    pub m_pp: SparseSym,
    /// `∫ div φ_i div φ_j` on free displacement dofs.
    pub divdiv: SparseSym,
    /// Vector mass matrix on free displacement dofs.
    pub mass_u: SparseSym,
    /// `∫ ψ_i` over all vertices.
    pub mean_vec: Vec<f64>,
    /// `∫ ψ_i` over free pressure dofs.
    pub mean_vec_p: Vec<f64>,
    /// Rigid-motion coefficient vectors (two translations, one rotation) when
    /// displacements are taken modulo rigid motions; empty otherwise.
    pub rigid_motions: Vec<Vec<f64>>,
    /// Vertex of each free pressure dof.
    pub p_vertices: Vec<usize>,
    pub area: f64,
    pub spaces: SpaceConfig,
    pub params: MaterialParams,
}

/// Assembles every operator of the discrete four-field problem.
pub fn assemble_operators(
    mesh: &Mesh,
    params: &MaterialParams,
    bc: &BoundaryConfig,
    spaces: SpaceConfig,
) -> Result<(DofMap, OperatorSet), AssemblyError> {
    params.validate()?;
    let dofs = DofMap::new(mesh, bc)?;
    let (nu, np, ns) = (dofs.n_u(), dofs.n_p(), dofs.n_s());
    let nt = mesh.num_triangles();
    let mut te = TripletBuilder::with_capacity(nu, nu, 144 * nt);
    let mut tdd = TripletBuilder::with_capacity(nu, nu, 144 * nt);
    let mut tmu = TripletBuilder::with_capacity(nu, nu, 72 * nt);
    let mut tb = TripletBuilder::with_capacity(ns, nu, 36 * nt);
    let mut tm = TripletBuilder::with_capacity(ns, ns, 9 * nt);
    let mut tl = TripletBuilder::with_capacity(np, np, 9 * nt);
    let (mu, kappa) = (params.mu, params.kappa);

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = [
            mesh.vertices()[tri[0]],
            mesh.vertices()[tri[1]],
            mesh.vertices()[tri[2]],
        ];
        let (area, g) = barycentric_gradients(pts);
        if !(area > 0.0) {
            return Err(AssemblyError::Degenerate { element: t, area });
        }
        let ldofs = dofs.local_u_dofs(mesh, t);
        let mut ke = [[0.0; 12]; 12];
        let mut kdd = [[0.0; 12]; 12];
        let mut kmu = [[0.0; 12]; 12];
        let mut kb = [[0.0; 12]; 3];
        let mut km = [[0.0; 3]; 3];
        for (l, w) in TRIANGLE_RULE {
            let wa = w * area;
            let n = p2_values(l);
            let dn = p2_gradients(l, &g);
            for a in 0..6 {
                for b in 0..6 {
                    let gg = dn[a][0] * dn[b][0] + dn[a][1] * dn[b][1];
                    for c in 0..2 {
                        for d in 0..2 {
                            // 2μ ε(N_a e_c) : ε(N_b e_d)
                            let mut v = dn[a][d] * dn[b][c];
                            if c == d {
                                v += gg;
                            }
                            ke[2 * a + c][2 * b + d] += wa * mu * v;
                            kdd[2 * a + c][2 * b + d] += wa * dn[a][c] * dn[b][d];
                        }
                        kmu[2 * a + c][2 * b + c] += wa * n[a] * n[b];
                    }
                }
            }
            for i in 0..3 {
                for b in 0..6 {
                    for d in 0..2 {
                        kb[i][2 * b + d] += wa * l[i] * dn[b][d];
                    }
                }
                for j in 0..3 {
                    km[i][j] += wa * l[i] * l[j];
                }
            }
        }
        for a in 0..12 {
            let Some(ia) = dofs.u_free(ldofs[a]) else { continue };
            for b in 0..12 {
                let Some(ib) = dofs.u_free(ldofs[b]) else { continue };
                te.push(ia, ib, ke[a][b]);
                tdd.push(ia, ib, kdd[a][b]);
                if kmu[a][b] != 0.0 {
                    tmu.push(ia, ib, kmu[a][b]);
                }
            }
            for i in 0..3 {
                tb.push(tri[i], ia, kb[i][a]);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                tm.push(tri[i], tri[j], km[i][j]);
                if let (Some(pi), Some(pj)) = (dofs.p_free(tri[i]), dofs.p_free(tri[j])) {
                    let gij = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                    tl.push(pi, pj, kappa * area * gij);
                }
            }
        }
    }

    let e = symmetrize(te.build());
    let divdiv = symmetrize(tdd.build());
    let mass_u = symmetrize(tmu.build());
    let l = symmetrize(tl.build());
    let m = symmetrize(tm.build());
    let b = tb.build();
    let all_s: Vec<usize> = (0..ns).collect();
    let m_sp = m.submatrix(&all_s, dofs.p_global());
    let m_pp = symmetrize(m.submatrix(dofs.p_global(), dofs.p_global()));
    let mean_vec = m.mul_vec(&vec![1.0; ns]);
    let mean_vec_p = dofs.restrict_p(&mean_vec);
    let area = mean_vec.iter().sum();

    let rigid_motions = if spaces.u_quotient_rigid_motions {
        let mut tx = vec![0.0; nu];
        let mut ty = vec![0.0; nu];
        let mut rot = vec![0.0; nu];
        for (i, &gdof) in dofs.u_global().iter().enumerate() {
            let (node, c) = (gdof / 2, gdof % 2);
            let x = dofs.node_position(mesh, node);
            if c == 0 {
                tx[i] = 1.0;
                rot[i] = -x[1];
            } else {
                ty[i] = 1.0;
                rot[i] = x[0];
            }
        }
        vec![tx, ty, rot]
    } else {
        Vec::new()
    };

    let ops = OperatorSet {
        e,
        l,
        b,
        m,
        m_sp,
        m_pp,
        divdiv,
        mass_u,
        mean_vec,
        mean_vec_p,
        rigid_motions,
        p_vertices: dofs.p_global().to_vec(),
        area,
        spaces,
        params: *params,
    };
    Ok((dofs, ops))
}

// Removes rounding-level asymmetry so the result passes the symmetry check.
fn symmetrize(a: CsrMatrix) -> SparseSym {
    let at = a.transpose();
    let n = a.nrows();
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..n {
        for (j, v) in a.row(i) {
            t.push((i, j, 0.5 * (v + at.get(i, j))));
        }
    }
    SparseSym::new(CsrMatrix::from_triplets(n, n, t)).expect("symmetrized matrix")
}

fn remove_mean(q: &[f64], c: &[f64], area: f64) -> Vec<f64> {
    let mean = dot(c, q) / area;
    q.iter().map(|v| v - mean).collect()
}

impl OperatorSet {
    pub fn n_u(&self) -> usize {
        self.e.dim()
    }

    pub fn n_p(&self) -> usize {
        self.l.dim()
    }

    pub fn n_s(&self) -> usize {
        self.m.dim()
    }

    /// Mean value `∫q / |Ω|` of a vertex field.
    pub fn mean(&self, q: &[f64]) -> f64 {
        dot(&self.mean_vec, q) / self.area
    }

    /// L²-orthogonal projection onto the total-pressure space.
    pub fn apply_pd(&self, q: &[f64]) -> Vec<f64> {
        if self.spaces.d_zero_mean {
            remove_mean(q, &self.mean_vec, self.area)
        } else {
            q.to_vec()
        }
    }

    /// L²-orthogonal projection onto the fluid-content space.
    pub fn apply_pbar(&self, q: &[f64]) -> Vec<f64> {
        if self.spaces.pbar_zero_mean {
            remove_mean(q, &self.mean_vec, self.area)
        } else {
            q.to_vec()
        }
    }

    /// Whether the pressure stiffness has the constants in its kernel
    /// (no essential pressure dofs).
    pub fn l_has_constant_kernel(&self) -> bool {
        self.n_p() == self.n_s()
    }

    /// `‖q‖²_Ω = qᵀ M q` for a vertex field.
    pub fn l2_sq(&self, q: &[f64]) -> f64 {
        self.m.quad_form(q)
    }

    /// `‖p‖²_Ω` for a pressure field on free dofs.
    pub fn l2_sq_p(&self, p: &[f64]) -> f64 {
        self.m_pp.quad_form(p)
    }

    /// `‖v‖²_𝕌 = vᵀ E v`.
    pub fn u_norm_sq(&self, v: &[f64]) -> f64 {
        self.e.quad_form(v)
    }

    /// `‖n‖²_ℙ = nᵀ L n`.
    pub fn p_norm_sq(&self, n: &[f64]) -> f64 {
        self.l.quad_form(n)
    }

    /// `‖div v‖²_Ω`.
    pub fn div_sq(&self, v: &[f64]) -> f64 {
        self.divdiv.quad_form(v)
    }

    /// Free-pressure field as a vertex field (zero on the essential boundary).
    pub fn p_to_s(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_s()];
        for (k, &v) in self.p_vertices.iter().enumerate() {
            out[v] = p[k];
        }
        out
    }

    /// Restriction of a vertex vector to the free pressure dofs.
    pub fn s_to_p(&self, q: &[f64]) -> Vec<f64> {
        self.p_vertices.iter().map(|&v| q[v]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use crate::problem::select_spaces;

    fn setup(n: usize, u: Tag, p: Tag) -> (Mesh, DofMap, OperatorSet) {
        let mesh = unit_square_mesh(n);
        let bc = BoundaryConfig::unit_square_uniform(u, p);
        let params = MaterialParams::unit();
        let spaces = select_spaces(&bc, &params);
        let (d, o) = assemble_operators(&mesh, &params, &bc, spaces).unwrap();
        (mesh, d, o)
    }

    #[test]
    fn dof_counts() {
        let (mesh, d, _) = setup(4, Tag::Essential, Tag::Essential);
        let nodes = mesh.num_vertices() + mesh.num_edges();
        assert_eq!(nodes, 81);
        assert_eq!(d.n_u(), 2 * 49);
        assert_eq!(d.n_p(), 9);
        assert_eq!(d.n_s(), 25);
    }

    #[test]
    fn constant_pressure_in_kernel() {
        let (_, _, o) = setup(4, Tag::Essential, Tag::Natural);
        let r = o.l.mul_vec(&vec![1.0; o.n_p()]);
        assert!(r.iter().all(|v| v.abs() < 1e-13));
        assert!(o.l_has_constant_kernel());
    }

    #[test]
    fn divergence_of_linear_field() {
        let (mesh, d, o) = setup(3, Tag::Natural, Tag::Natural);
        let u = interpolate_p2(&mesh, &d, |x| [x[0], 0.0]);
        let bu = o.b.mul_vec(&u);
        assert!((bu.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mass_sums_to_area() {
        let (_, _, o) = setup(5, Tag::Essential, Tag::Natural);
        assert!((o.area - 1.0).abs() < 1e-14);
    }
}
