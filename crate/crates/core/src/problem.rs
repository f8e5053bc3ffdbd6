//! Material parameters, boundary tagging and the resulting choice of
//! function spaces for the four fields.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("parameter {name} = {value} violates {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("boundary segment `{0}` has no displacement/pressure tags")]
    MissingSegment(String),
    #[error("boundary configuration tags unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("boundary configuration is empty")]
    EmptyBoundary,
}

/// Physical constants of the poroelastic medium plus the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Shear modulus.
    pub mu: f64,
    /// Lamé's first parameter.
    pub lambda: f64,
    /// Biot–Willis coefficient.
    pub alpha: f64,
    /// Constrained specific storage. May be exactly zero.
    pub sigma: f64,
    /// Hydraulic conductivity.
    pub kappa: f64,
    /// Final time.
    pub t_final: f64,
}

impl MaterialParams {
    pub fn new(
        mu: f64,
        lambda: f64,
        alpha: f64,
        sigma: f64,
        kappa: f64,
        t_final: f64,
    ) -> Result<Self, ProblemError> {
        let p = Self {
            mu,
            lambda,
            alpha,
            sigma,
            kappa,
            t_final,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let positive = [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("T", self.t_final),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ProblemError::InvalidParameter {
                    name,
                    value,
                    constraint: "> 0",
                });
            }
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(ProblemError::InvalidParameter {
                name: "sigma",
                value: self.sigma,
                constraint: ">= 0",
            });
        }
        Ok(())
    }

    /// Unit parameters: mu = lambda = alpha = kappa = T = 1, sigma = 0.
    pub fn unit() -> Self {
        Self {
            mu: 1.0,
            lambda: 1.0,
            alpha: 1.0,
            sigma: 0.0,
            kappa: 1.0,
            t_final: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Essential,
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentTags {
    pub displacement: Tag,
    pub pressure: Tag,
}

impl SegmentTags {
    pub const fn new(displacement: Tag, pressure: Tag) -> Self {
        Self {
            displacement,
            pressure,
        }
    }
}

/// Displacement and pressure boundary-condition type for every labelled
/// boundary segment of a mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConfig {
    segments: BTreeMap<String, SegmentTags>,
}

impl BoundaryConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: &str, tags: SegmentTags) -> Self {
        self.set(label, tags);
        self
    }

    pub fn set(&mut self, label: &str, tags: SegmentTags) {
        self.segments.insert(label.to_string(), tags);
    }

    /// Same tags on every side of the unit square.
    pub fn unit_square_uniform(displacement: Tag, pressure: Tag) -> Self {
        let mut bc = Self::new();
        for side in crate::mesh::UNIT_SQUARE_SIDES {
            bc.set(side, SegmentTags::new(displacement, pressure));
        }
        bc
    }

    pub fn get(&self, label: &str) -> Option<SegmentTags> {
        self.segments.get(label).copied()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.segments.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SegmentTags)> {
        self.segments.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Checks that the tagged segments are exactly the labelled boundary
    /// segments of the mesh.
    pub fn validate_labels<'a>(
        &self,
        mesh_labels: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), ProblemError> {
        if self.segments.is_empty() {
            return Err(ProblemError::EmptyBoundary);
        }
        let mesh_labels: Vec<&str> = mesh_labels.into_iter().collect();
        for l in &mesh_labels {
            if !self.segments.contains_key(*l) {
                return Err(ProblemError::MissingSegment(l.to_string()));
            }
        }
        for k in self.segments.keys() {
            if !mesh_labels.contains(&k.as_str()) {
                return Err(ProblemError::UnknownSegment(k.clone()));
            }
        }
        Ok(())
    }

    fn all(&self, f: impl Fn(&SegmentTags) -> bool) -> bool {
        !self.segments.is_empty() && self.segments.values().all(f)
    }

    /// Γ_{u,E} = ∂Ω
    pub fn displacement_clamped_everywhere(&self) -> bool {
        self.all(|t| t.displacement == Tag::Essential)
    }

    /// Γ_{u,N} = ∂Ω
    pub fn displacement_free_everywhere(&self) -> bool {
        self.all(|t| t.displacement == Tag::Natural)
    }

    /// Γ_{p,N} = ∂Ω
    pub fn pressure_natural_everywhere(&self) -> bool {
        self.all(|t| t.pressure == Tag::Natural)
    }
}

/// Mean-value constraints carried by the four discrete fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceConfig {
    /// Displacements are taken modulo rigid body motions.
    pub u_quotient_rigid_motions: bool,
    /// Pressure space carries the zero-mean constraint.
    pub p_zero_mean: bool,
    /// Total-pressure space is L²₀ instead of L².
    pub d_zero_mean: bool,
    /// Total-fluid-content space is L²₀ instead of L².
    pub pbar_zero_mean: bool,
}

impl SpaceConfig {
    /// Whether the fluid-content space is contained in the total-pressure space.
    pub fn pbar_in_d(&self) -> bool {
        self.pbar_zero_mean || !self.d_zero_mean
    }
}

/// Case split for the function spaces. Only whether σ is exactly zero
/// matters.
pub fn select_spaces(bc: &BoundaryConfig, params: &MaterialParams) -> SpaceConfig {
    let u_clamped = bc.displacement_clamped_everywhere();
    let p_natural = bc.pressure_natural_everywhere();
    let sigma_zero = params.sigma == 0.0;
    SpaceConfig {
        u_quotient_rigid_motions: bc.displacement_free_everywhere(),
        p_zero_mean: p_natural || (u_clamped && sigma_zero),
        d_zero_mean: u_clamped,
        pbar_zero_mean: p_natural || (u_clamped && sigma_zero),
    }
}

/// Weight of the fluid-content constraint residual in the trial norm.
pub fn gamma(params: &MaterialParams, spaces: &SpaceConfig) -> f64 {
    let stiff = (params.mu + params.lambda) / (params.alpha * params.alpha);
    if params.sigma == 0.0 {
        stiff
    } else if spaces.pbar_in_d() {
        stiff.min(1.0 / params.sigma)
    } else {
        stiff + 1.0 / params.sigma
    }
}
