//! Exact probability calculus over finite alphabets.
//!
//! All information quantities are in bits. Total variation is ½·L1. Conditioning on
//! zero-probability cells contributes nothing (`0·log 0 = 0`).

mod bounds;
mod info;
mod joint;
mod sweep;

use alloc::string::String;

pub use bounds::{
    conditional_product_tv, entropy_gap_bound, lemma4_check, lemma5_check, GapBound, Lemma4Report,
    Lemma5Report,
};
pub use info::{
    binary_entropy, conditional_mutual_information, entropy, entropy_of, is_markov,
    mutual_information, total_variation, tv_slices, InfoKind, InfoValue, MarkovCheck, NEG_SLACK,
};
pub use sweep::{sweep_entropy_gap, sweep_lemma4, sweep_lemma5, SweepOptions, SweepReport};
pub use joint::{for_each_index, Alphabet, Axis, DenseJoint, MASS_TOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProbError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("empty variable set")]
    EmptyVariableSet,
    #[error("variable sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("duplicate axis `{0}`")]
    DuplicateAxis(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,
    #[error("mass table has {found} entries, axes require {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("negative or non-finite probability {0}")]
    NegativeMass(f64),
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("distributions are defined over different axes or alphabets")]
    AxisMismatch,
    #[error("argument {0} is outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("information value {0} is below the numerical slack; internal inconsistency")]
    NegativeInformation(f64),
}
