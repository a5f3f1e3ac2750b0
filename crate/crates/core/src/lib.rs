//! Simulation and verification toolkit for the Gap Hamming Relation (GHR).
//!
//! The crate is organised bottom-up:
//!
//! * [`bitkit`]: packed bit strings, cyclic shifts, Fourier patterns and the
//!   replayable random generator.
//! * [`ghr`]: the distances `Δ_{j,s}`, the typicality predicate `ℵ` and the
//!   relation checkers (GHD, tGHR, GHR).
//! * [`qsmp`]: the quantum simultaneous-message protocol, simulated through
//!   its exact outcome law, with explicit state vectors as a small-n oracle.
//! * [`classical`]: the shared-randomness tGHR baseline, relative weights of
//!   rectangles and the disjointness reduction `Ξ`.
//! * [`coupling`]: the two-stage coupling that decorrelates `|A ⊕ Ã ⊕ s|`
//!   from `|A|`, with an exact dynamic-programming verifier.
//! * [`bounds`]: tail-bound calculators, exact binomial oracles and empirical
//!   validators.
//! * [`cli`]: the reproducible experiment driver behind the `ghrlab` binary.

pub mod bitkit;
pub mod bounds;
pub mod classical;
pub mod cli;
pub mod coupling;
mod error;
pub mod ghr;
pub mod mc;
pub mod qsmp;
pub mod rational;

pub use bitkit::{BitString, Rng};
pub use error::{GhrError, Result};
pub use ghr::{McEstimate, TransformIndex};
