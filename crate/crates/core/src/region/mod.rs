//! Auxiliary schemes, the rate-region inequality systems and the witness search.
//!
//! A scheme fixes `p(f_i | f_{<i}, x_owner)` for each round plus the two output
//! kernels; together with the channel's input law this determines the joint over
//! `(F1..Fr, X1, X2, Y1, Y2)`. Region membership is always certified by such an
//! explicit joint.

mod channel;
mod eval;
mod scheme;
pub mod search;

use alloc::string::String;

use crate::prob::ProbError;

pub use channel::{f_name, ChannelSpec, Sizes, X1, X2, Y1, Y2};
pub use eval::{
    assemble_joint, corollary1_eval, induced_channel, epsilon_region_membership, g_eps, joint_axis_names, membership,
    padding_embed, rounds_of, theorem1_eval, theorem2_eval, validate_t_r, validate_t_r_with, ChainSlack,
    ComputationEval, EpsilonMembership, Membership, RatePoint, RegionEval, TrReport, ValidateOptions,
    RATE_SLACK, UNLIMITED_RATE,
};
pub use scheme::{cardinality_bounds, AuxScheme, CardinalityPreset, CondTable, Terminal};
pub use search::{
    min_rate, search_membership, MinRateResult, Objective, SearchConfig, SearchOutcome, Witness,
};

pub(crate) use eval::{joint_mass, FDigits};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("joint is missing axis `{0}`")]
    MissingAxis(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("channel is not deterministic")]
    NonDeterministic,
    #[error("epsilon {0} must lie in (0, 1/2)")]
    EpsilonOutOfRange(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid search configuration: {0}")]
    SearchConfig(String),
    #[error("fixed rates admit no feasible point: {0}")]
    InfeasibleObjective(String),
}
