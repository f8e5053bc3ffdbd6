use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::quadrature::{barycentric_gradients, map_point, p2_gradients, p2_values, TRIANGLE_RULE};
use super::{AssemblyError, DofMap};
use crate::math::sqrt;
use crate::mesh::{Mesh, Point};
use crate::problem::Tag;
use crate::time::gauss_on;

pub type VectorField = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Body forces, fluid sources and natural boundary data as functions of
/// position and time. Absent entries are zero.
#[derive(Clone, Default)]
pub struct LoadFields {
    pub f_u: Option<VectorField>,
    pub f_p: Option<ScalarField>,
    /// Traction per boundary segment label.
    pub g_u: Vec<(String, VectorField)>,
    /// Normal flux per boundary segment label.
    pub g_p: Vec<(String, ScalarField)>,
}

impl core::fmt::Debug for LoadFields {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("LoadFields")
            .field("f_u", &self.f_u.is_some())
            .field("f_p", &self.f_p.is_some())
            .field("g_u", &self.g_u.iter().map(|(l, _)| l).collect::<Vec<_>>())
            .field("g_p", &self.g_p.iter().map(|(l, _)| l).collect::<Vec<_>>())
            .finish()
    }
}

impl LoadFields {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_f_u(mut self, f: impl Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.f_u = Some(Arc::new(f));
        self
    }

    pub fn with_f_p(mut self, f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.f_p = Some(Arc::new(f));
        self
    }

    pub fn with_g_u(mut self, label: &str, g: impl Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.g_u.push((label.to_string(), Arc::new(g)));
        self
    }

    pub fn with_g_p(mut self, label: &str, g: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.g_p.push((label.to_string(), Arc::new(g)));
        self
    }
}

/// Load functionals at one time instant, on free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVectors {
    pub lu: Vec<f64>,
    pub lp: Vec<f64>,
}

impl LoadVectors {
    pub fn zeros(n_u: usize, n_p: usize) -> Self {
        Self {
            lu: vec![0.0; n_u],
            lp: vec![0.0; n_p],
        }
    }
}

fn check_segments<T>(
    mesh: &Mesh,
    dofs: &DofMap,
    data: &[(String, T)],
    field: &'static str,
    essential: impl Fn(crate::problem::SegmentTags) -> bool,
) -> Result<(), AssemblyError> {
    for (label, _) in data {
        if !mesh.labels().iter().any(|l| l == label) {
            return Err(AssemblyError::UnknownSegment {
                field,
                label: label.clone(),
            });
        }
        let tags = dofs.bc().get(label).ok_or_else(|| AssemblyError::UnknownSegment {
            field,
            label: label.clone(),
        })?;
        if essential(tags) {
            return Err(AssemblyError::DataOnEssentialSegment {
                field,
                label: label.clone(),
            });
        }
    }
    Ok(())
}

/// Assembles `ℓ_u(v) = ∫ f_u·v + ∫_{Γ_{u,N}} g_u·v` and
/// `ℓ_p(n) = ∫ f_p n + ∫_{Γ_{p,N}} g_p n` at time `t`.
pub fn assemble_loads(
    mesh: &Mesh,
    dofs: &DofMap,
    fields: &LoadFields,
    t: f64,
) -> Result<LoadVectors, AssemblyError> {
    check_segments(mesh, dofs, &fields.g_u, "traction", |s| s.displacement == Tag::Essential)?;
    check_segments(mesh, dofs, &fields.g_p, "flux", |s| s.pressure == Tag::Essential)?;
    let mut out = LoadVectors::zeros(dofs.n_u(), dofs.n_p());
    if fields.f_u.is_some() || fields.f_p.is_some() {
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let pts = [
                mesh.vertices()[tri[0]],
                mesh.vertices()[tri[1]],
                mesh.vertices()[tri[2]],
            ];
            let (area, _) = barycentric_gradients(pts);
            if !(area > 0.0) {
                return Err(AssemblyError::Degenerate { element: k, area });
            }
            let ldofs = dofs.local_u_dofs(mesh, k);
            for (l, w) in TRIANGLE_RULE {
                let x = map_point(&pts, l);
                let wa = w * area;
                if let Some(f) = &fields.f_u {
                    let fv = f(x, t);
                    let n = p2_values(l);
                    for a in 0..6 {
                        for c in 0..2 {
                            if let Some(i) = dofs.u_free(ldofs[2 * a + c]) {
                                out.lu[i] += wa * fv[c] * n[a];
                            }
                        }
                    }
                }
                if let Some(f) = &fields.f_p {
                    let fv = f(x, t);
                    for i in 0..3 {
                        if let Some(j) = dofs.p_free(tri[i]) {
                            out.lp[j] += wa * fv * l[i];
                        }
                    }
                }
            }
        }
    }
    let rule = gauss_on(0.0, 1.0, 3);
    let nv = mesh.num_vertices();
    for be in mesh.boundary() {
        let label = mesh.label_name(be.label);
        let [a, b] = be.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = libm::hypot(pb[0] - pa[0], pb[1] - pa[1]);
        let mid = nv + mesh.edge_index(a, b).expect("boundary edge is a mesh edge");
        for (_, g) in fields.g_u.iter().filter(|(l, _)| l == label) {
            for &(s, w) in &rule {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let gv = g(x, t);
                let basis = [(a, (1.0 - s) * (1.0 - 2.0 * s)), (b, s * (2.0 * s - 1.0)), (mid, 4.0 * s * (1.0 - s))];
                for (node, nval) in basis {
                    for c in 0..2 {
                        if let Some(i) = dofs.u_free(2 * node + c) {
                            out.lu[i] += w * len * gv[c] * nval;
                        }
                    }
                }
            }
        }
        for (_, g) in fields.g_p.iter().filter(|(l, _)| l == label) {
            for &(s, w) in &rule {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let gv = g(x, t);
                for (v, nval) in [(a, 1.0 - s), (b, s)] {
                    if let Some(j) = dofs.p_free(v) {
                        out.lp[j] += w * len * gv * nval;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `∫ f ψ_i` for every vertex basis function `ψ_i`.
pub fn assemble_scalar_functional(mesh: &Mesh, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for tri in mesh.triangles() {
        let pts = [
            mesh.vertices()[tri[0]],
            mesh.vertices()[tri[1]],
            mesh.vertices()[tri[2]],
        ];
        let (area, _) = barycentric_gradients(pts);
        for (l, w) in TRIANGLE_RULE {
            let fv = f(map_point(&pts, l));
            for i in 0..3 {
                out[tri[i]] += w * area * fv * l[i];
            }
        }
    }
    out
}

/// Nodal interpolant of a scalar function in the linear space (all vertices).
pub fn interpolate_p1(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    mesh.vertices().iter().map(|&x| f(x)).collect()
}

/// Nodal interpolant of a vector function in the quadratic space, restricted
/// to free dofs.
pub fn interpolate_p2(mesh: &Mesh, dofs: &DofMap, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    dofs.u_global()
        .iter()
        .map(|&g| f(dofs.node_position(mesh, g / 2))[g % 2])
        .collect()
}

/// `‖u_h − U‖_𝕌 = (∫ 2μ |ε(u_h − U)|²)^{1/2}` given the exact gradient
/// `grad[i][j] = ∂_j U_i`.
pub fn energy_error_u(
    mesh: &Mesh,
    dofs: &DofMap,
    mu: f64,
    u: &[f64],
    grad: impl Fn(Point) -> [[f64; 2]; 2],
) -> f64 {
    let full = dofs.expand_u(u);
    let mut sum = 0.0;
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let pts = [
            mesh.vertices()[tri[0]],
            mesh.vertices()[tri[1]],
            mesh.vertices()[tri[2]],
        ];
        let (area, g) = barycentric_gradients(pts);
        let ldofs = dofs.local_u_dofs(mesh, k);
        for (l, w) in TRIANGLE_RULE {
            let dn = p2_gradients(l, &g);
            let mut gh = [[0.0; 2]; 2];
            for a in 0..6 {
                for c in 0..2 {
                    let coef = full[ldofs[2 * a + c]];
                    gh[c][0] += coef * dn[a][0];
                    gh[c][1] += coef * dn[a][1];
                }
            }
            let ge = grad(map_point(&pts, l));
            let d = [
                [gh[0][0] - ge[0][0], gh[0][1] - ge[0][1]],
                [gh[1][0] - ge[1][0], gh[1][1] - ge[1][1]],
            ];
            let e01 = 0.5 * (d[0][1] + d[1][0]);
            let eps_sq = d[0][0] * d[0][0] + d[1][1] * d[1][1] + 2.0 * e01 * e01;
            sum += w * area * 2.0 * mu * eps_sq;
        }
    }
    sqrt(sum)
}

/// `‖p_h − P‖_ℙ = (∫ κ |∇(p_h − P)|²)^{1/2}`.
pub fn energy_error_p(
    mesh: &Mesh,
    dofs: &DofMap,
    kappa: f64,
    p: &[f64],
    grad: impl Fn(Point) -> [f64; 2],
) -> f64 {
    let full = dofs.expand_p(p);
    let mut sum = 0.0;
    for tri in mesh.triangles() {
        let pts = [
            mesh.vertices()[tri[0]],
            mesh.vertices()[tri[1]],
            mesh.vertices()[tri[2]],
        ];
        let (area, g) = barycentric_gradients(pts);
        let mut gh = [0.0; 2];
        for i in 0..3 {
            gh[0] += full[tri[i]] * g[i][0];
            gh[1] += full[tri[i]] * g[i][1];
        }
        for (l, w) in TRIANGLE_RULE {
            let ge = grad(map_point(&pts, l));
            let (dx, dy) = (gh[0] - ge[0], gh[1] - ge[1]);
            sum += w * area * kappa * (dx * dx + dy * dy);
        }
    }
    sqrt(sum)
}

/// `‖q_h − Q‖_Ω` for a vertex field `q_h`.
pub fn l2_error_scalar(mesh: &Mesh, q: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut sum = 0.0;
    for tri in mesh.triangles() {
        let pts = [
            mesh.vertices()[tri[0]],
            mesh.vertices()[tri[1]],
            mesh.vertices()[tri[2]],
        ];
        let (area, _) = barycentric_gradients(pts);
        for (l, w) in TRIANGLE_RULE {
            let qh = l[0] * q[tri[0]] + l[1] * q[tri[1]] + l[2] * q[tri[2]];
            let d = qh - exact(map_point(&pts, l));
            sum += w * area * d * d;
        }
    }
    sqrt(sum)
}
