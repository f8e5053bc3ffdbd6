//! Seeded smooth random load fields built from low-order Fourier modes.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::LoadFields;
use crate::math::{cos, PI};
use crate::mesh::Point;

/// `Σ a_ij cos(iπx + φ_ij) cos(jπy + ψ_ij)` times a smooth time profile
/// `c_0 + c_1 cos(2π t / T + θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothField {
    terms: Vec<(f64, f64, f64, f64, f64)>,
    time: (f64, f64, f64),
    t_final: f64,
}

impl SmoothField {
    pub fn random(rng: &mut impl Rng, max_freq: usize, t_final: f64) -> Self {
        let mut terms = Vec::new();
        for i in 0..=max_freq {
            for j in 0..=max_freq {
                let decay = 1.0 / (1.0 + (i * i + j * j) as f64);
                let a = decay * rng.random_range(-1.0..1.0);
                let phi = rng.random_range(0.0..2.0 * PI);
                let psi = rng.random_range(0.0..2.0 * PI);
                terms.push((a, i as f64, j as f64, phi, psi));
            }
        }
        let time = (
            rng.random_range(0.5..1.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.0..2.0 * PI),
        );
        Self { terms, time, t_final }
    }

    pub fn space(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|(a, i, j, phi, psi)| a * cos(i * PI * x[0] + phi) * cos(j * PI * x[1] + psi))
            .sum()
    }

    pub fn time_profile(&self, t: f64) -> f64 {
        self.time.0 + self.time.1 * cos(2.0 * PI * t / self.t_final + self.time.2)
    }

    pub fn eval(&self, x: Point, t: f64) -> f64 {
        self.space(x) * self.time_profile(t)
    }
}

/// Seeded random loads: body force, fluid source and an initial datum.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomLoads {
    pub fu: [SmoothField; 2],
    pub fp: SmoothField,
    pub l0: SmoothField,
}

impl RandomLoads {
    pub fn new(seed: u64, t_final: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fu = [
            SmoothField::random(&mut rng, 3, t_final),
            SmoothField::random(&mut rng, 3, t_final),
        ];
        let fp = SmoothField::random(&mut rng, 3, t_final);
        let l0 = SmoothField::random(&mut rng, 3, t_final);
        Self { fu, fp, l0 }
    }

    pub fn fields(&self) -> LoadFields {
        let fu = self.fu.clone();
        let fp = self.fp.clone();
        LoadFields::zero()
            .with_f_u(move |x, t| [fu[0].eval(x, t), fu[1].eval(x, t)])
            .with_f_p(move |x, t| fp.eval(x, t))
    }

    /// Spatial part of the initial datum.
    pub fn initial(&self, x: Point) -> f64 {
        self.l0.space(x)
    }
}
