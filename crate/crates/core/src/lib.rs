//! Finite-alphabet toolkit for interactive channel simulation.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure computation:
//!
//! - [`prob`]: dense joint pmfs over named axes, entropies, mutual information,
//!   total variation, Markov-chain tests and the mutual-information bound checkers
//!   used by the converse.
//! - [`region`]: auxiliary schemes, the rate-region inequality systems, membership
//!   tests and the witness search over schemes.
//! - [`lp`]: a small dense simplex solver, generic over exact and floating arithmetic.
//! - [`polytope`]: linear systems over named rate variables, Fourier-Motzkin
//!   elimination and support-function comparison of polyhedra.
//! - [`osrb`]: seeded random binning codes, the Slepian-Wolf typicality decoder and the
//!   interactive protocol, both sampled and computed exactly.
//!
//! File formats, parallel orchestration and the command line live in the companion
//! `coordsim` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod lp;
pub mod math;
pub mod osrb;
pub mod polytope;
pub mod prob;
pub mod region;
pub mod rng;

pub use prob::{Alphabet, Axis, DenseJoint, InfoKind, InfoValue, ProbError};
pub use region::{AuxScheme, ChannelSpec, RatePoint, RegionError, RegionEval};

