//! Finite-element discretisation and stability verification for the
//! quasi-static Biot equations written in displacement / total pressure /
//! fluid pressure / total fluid content form.
//!
//! The crate is `no_std` (with `alloc`). File formats, the experiment
//! runner and parallel sweeps live in the `biot` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
// NaN-rejecting comparisons and index loops over several arrays are intended
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod assembly;
pub mod counterexample;
pub mod manufactured;
pub mod mesh;
pub mod norms;
pub mod problem;
pub mod random;
pub mod solver;
pub mod sparse;
pub mod time;
pub mod verification;

mod math;

pub use assembly::{assemble_operators, DofMap, OperatorSet};
pub use mesh::Mesh;
pub use norms::{NormReport, Riesz};
pub use problem::{
    gamma, select_spaces, BoundaryConfig, MaterialParams, SegmentTags, SpaceConfig, Tag,
};
pub use solver::{run_trajectory, FourFieldTrajectory, StepSystem};
