//! Entangled neutral-kaon pairs and local hidden-variable tests.
//!
//! `kaon-core` is the allocation-only (`no_std` + `alloc`) half of the
//! toolkit. It contains:
//!
//! - [`constants`]: physical inputs (lifetimes, mass difference, K_S/K_L
//!   overlap, branching table) normalised to τ_S units;
//! - [`kaon_state`]: single-kaon two-level algebra with decaying evolution;
//! - [`pair`]: two-kaon states, reduced density matrices and entropy;
//! - [`qm`]: joint detection probabilities, the CH-like margin and the
//!   efficiency thresholds;
//! - [`decay`]: survival and misidentification budgets over a tagging window
//!   and the K_L → 2π contamination histogram;
//! - [`lhv`]: discrete hidden-variable ensembles, the Hardy-type constraint
//!   and an ensemble that exploits the detection loophole;
//! - [`montecarlo`]: a chunked, seedable event generator and the verdict.
//!
//! Time is measured in units of the K_S lifetime everywhere, so Γ_S = 1.
//!
//! Reading, writing and scheduling live in the `kaon-lhv` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod constants;
pub mod decay;
mod error;
pub mod kaon_state;
pub mod lhv;
pub mod montecarlo;
pub mod pair;
pub mod qm;

pub use constants::{Channel, Parent, PhysicalConstants, TagClass};
pub use error::Error;
pub use kaon_state::{Basis, ComplexAmplitude, SingleKaonState};
pub use pair::{DensityMatrix2, RegenerationParams, Side, TwoKaonState};
pub use qm::{DetectionModel, Outcome, ProbabilitySet};

pub type Result<T, E = Error> = core::result::Result<T, E>;
