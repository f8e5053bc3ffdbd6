//! Symmetric quadrature on the reference triangle.

/// Six-point rule exact for polynomials of degree 4. Entries are barycentric
/// coordinates and a weight; weights sum to one (multiply by the area).
pub const TRIANGLE_RULE: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_965;
    const B: f64 = 0.108_103_018_168_070;
    const C: f64 = 0.091_576_213_509_771;
    const D: f64 = 0.816_847_572_980_459;
    const WA: f64 = 0.223_381_589_678_011;
    const WB: f64 = 0.109_951_743_655_322;
    [
        ([A, A, B], WA),
        ([A, B, A], WA),
        ([B, A, A], WA),
        ([C, C, D], WB),
        ([C, D, C], WB),
        ([D, C, C], WB),
    ]
};

/// Degree of polynomials integrated exactly by [`TRIANGLE_RULE`].
pub const TRIANGLE_RULE_DEGREE: usize = 4;

/// Quadratic Lagrange basis on a triangle: vertex functions first, then the
/// edge functions in [`crate::mesh::LOCAL_EDGES`] order.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Gradients of the quadratic basis given the (constant) gradients of the
/// barycentric coordinates.
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * g[i][0], s * g[i][1]];
    }
    for (k, [i, j]) in crate::mesh::LOCAL_EDGES.iter().enumerate() {
        out[3 + k] = [
            4.0 * (l[*i] * g[*j][0] + l[*j] * g[*i][0]),
            4.0 * (l[*i] * g[*j][1] + l[*j] * g[*i][1]),
        ];
    }
    out
}

/// Signed area and barycentric gradients of a triangle.
pub fn barycentric_gradients(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let [[x0, y0], [x1, y1], [x2, y2]] = p;
    let two_a = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    let g = [
        [(y1 - y2) / two_a, (x2 - x1) / two_a],
        [(y2 - y0) / two_a, (x0 - x2) / two_a],
        [(y0 - y1) / two_a, (x1 - x0) / two_a],
    ];
    (0.5 * two_a, g)
}

pub fn map_point(p: &[[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn monomials_up_to_degree_four() {
        // ∫_T λ0^a λ1^b λ2^c = 2|T| a! b! c! / (a+b+c+2)!
        for a in 0..=4usize {
            for b in 0..=(4 - a) {
                for c in 0..=(4 - a - b) {
                    let q: f64 = TRIANGLE_RULE
                        .iter()
                        .map(|(l, w)| w * libm::pow(l[0], a as f64) * libm::pow(l[1], b as f64) * libm::pow(l[2], c as f64))
                        .sum();
                    let exact = 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
                    assert!((q - exact).abs() < 1e-14, "({a},{b},{c}): {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn p2_partition_of_unity() {
        let g = barycentric_gradients([[0.0, 0.0], [2.0, 0.0], [0.5, 1.0]]).1;
        for (l, _) in TRIANGLE_RULE {
            let v = p2_values(l);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let d = p2_gradients(l, &g);
            let sx: f64 = d.iter().map(|x| x[0]).sum();
            let sy: f64 = d.iter().map(|x| x[1]).sum();
            assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13);
        }
    }
}
