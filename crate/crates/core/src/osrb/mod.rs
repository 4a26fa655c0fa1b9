//! Finite-blocklength random-binning protocols.
//!
//! A [`BinningCode`] realizes the bin maps `ω`, `b_i`, `k_i` for one blocklength. The
//! protocol runs interactively: the active terminal samples its round sequence from
//! the i.i.d. scheme law restricted to the shared bins, sends `k_i`, and the other side
//! recovers it with a typicality decoder. [`exact_induced_pmf`] sums over every
//! trajectory to get the total variation to the i.i.d. target; [`run_protocol_b`]
//! samples single runs.

mod code;
mod decode;
mod exact;
mod gf2;
mod model;
mod protocol;
mod stats;

use alloc::string::String;

pub use code::{make_code, make_code_with, BinFamily, BinValue, BinningCode, CodeRates, MapId, MAX_BIN_LOG2};
pub use decode::{sw_decode, DecodeStatus, Decoded, ObservedBins, SideInfo, TypicalityParams, ENUM_LIMIT, NULLITY_LIMIT};
pub use exact::{
    candidate_b_vectors, exact_induced_pmf, find_good_b, monte_carlo, omega_mode_gap, select_good_b, summarize_traces,
    ExactOptions, ExactPartial, ExactPlan, GoodB, ModeGap, OmegaMode, ProtocolResult, RangeRates, RunMode,
    DEFAULT_BUDGET,
};
pub use model::ProtocolModel;
pub use protocol::{
    monte_carlo_trial, run_protocol_b, sample_inputs, sample_target_trace, BVector, ProtocolRun, RoundTrace, Trace,
};
pub use stats::{
    empirical_coordination_stats, empirical_tv, rate_margin_report, ConstraintMargin, EmpiricalStats, MarginClass,
    MarginReport, MarginStatus,
};

use crate::prob::ProbError;
use crate::region::RegionError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OsrbError {
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("bin range of {map:?} needs 2^{log2_bins} bins, above 2^62")]
    Overflow { map: MapId, log2_bins: f64 },
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("enumeration needs {needed:e} terms, budget is {budget:e}")]
    Budget { needed: f64, budget: f64 },
    #[error("typicality slack must be positive, got {0}")]
    InvalidDelta(f64),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}
