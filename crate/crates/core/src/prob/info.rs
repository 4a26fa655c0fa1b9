use alloc::string::ToString;
use alloc::vec::Vec;

use super::{DenseJoint, ProbError};
use crate::math::hb;

/// Values in `[-NEG_SLACK, 0)` are rounding noise and clamp to zero; anything lower is an error.
pub const NEG_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoKind {
    Entropy,
    ConditionalEntropy,
    MutualInformation,
    ConditionalMutualInformation,
}

/// An information quantity in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoValue {
    pub bits: f64,
    pub kind: InfoKind,
}

impl InfoValue {
    fn clamped(bits: f64, kind: InfoKind) -> Result<Self, ProbError> {
        if bits < -NEG_SLACK {
            return Err(ProbError::NegativeInformation(bits));
        }
        Ok(Self {
            bits: bits.max(0.0),
            kind,
        })
    }
}

/// Entropy of the marginal on `names`; an empty list has entropy zero.
pub fn entropy_of(dist: &DenseJoint, names: &[&str]) -> Result<f64, ProbError> {
    if names.is_empty() {
        return Ok(0.0);
    }
    Ok(dist.marginal(names)?.entropy_bits())
}

fn check_disjoint(sets: &[&[&str]]) -> Result<(), ProbError> {
    for (i, s) in sets.iter().enumerate() {
        for (k, name) in s.iter().enumerate() {
            if s[..k].contains(name) || sets[..i].iter().any(|t| t.contains(name)) {
                return Err(ProbError::OverlappingSets(name.to_string()));
            }
        }
    }
    Ok(())
}

fn union<'a>(sets: &[&[&'a str]]) -> Vec<&'a str> {
    sets.iter().flat_map(|s| s.iter().copied()).collect()
}

/// `H(vars | given)` in bits.
pub fn entropy(dist: &DenseJoint, vars: &[&str], given: &[&str]) -> Result<InfoValue, ProbError> {
    if vars.is_empty() {
        return Err(ProbError::EmptyVariableSet);
    }
    dist.indices_of(vars)?;
    dist.indices_of(given)?;
    check_disjoint(&[vars, given])?;
    let joint = entropy_of(dist, &union(&[vars, given]))?;
    let cond = entropy_of(dist, given)?;
    let kind = if given.is_empty() {
        InfoKind::Entropy
    } else {
        InfoKind::ConditionalEntropy
    };
    InfoValue::clamped(joint - cond, kind)
}

/// `I(a; b | given)` in bits.
pub fn mutual_information(
    dist: &DenseJoint,
    a: &[&str],
    b: &[&str],
    given: &[&str],
) -> Result<InfoValue, ProbError> {
    if a.is_empty() || b.is_empty() {
        return Err(ProbError::EmptyVariableSet);
    }
    dist.indices_of(a)?;
    dist.indices_of(b)?;
    dist.indices_of(given)?;
    check_disjoint(&[a, b, given])?;
    let hac = entropy_of(dist, &union(&[a, given]))?;
    let hbc = entropy_of(dist, &union(&[b, given]))?;
    let habc = entropy_of(dist, &union(&[a, b, given]))?;
    let hc = entropy_of(dist, given)?;
    let kind = if given.is_empty() {
        InfoKind::MutualInformation
    } else {
        InfoKind::ConditionalMutualInformation
    };
    InfoValue::clamped(hac + hbc - habc - hc, kind)
}

/// Shorthand for `mutual_information(..).bits`.
pub fn conditional_mutual_information(
    dist: &DenseJoint,
    a: &[&str],
    b: &[&str],
    given: &[&str],
) -> Result<f64, ProbError> {
    Ok(mutual_information(dist, a, b, given)?.bits)
}

/// ½·Σ|p − q| over identical axes.
pub fn total_variation(p: &DenseJoint, q: &DenseJoint) -> Result<f64, ProbError> {
    if !p.same_axes(q) {
        return Err(ProbError::AxisMismatch);
    }
    Ok(tv_slices(p.mass(), q.mass()))
}

/// ½·Σ|p − q| over raw mass slices of equal length, clamped to `[0, 1]`.
pub fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// `h_b(eps)` in bits, with `h_b(0) = h_b(1) = 0`.
pub fn binary_entropy(eps: f64) -> Result<f64, ProbError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(ProbError::OutOfUnitInterval(eps));
    }
    Ok(hb(eps))
}

/// Outcome of a Markov-chain test `a − b − c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovCheck {
    pub holds: bool,
    /// `I(a; c | b)` in bits.
    pub slack: f64,
}

/// Tests the chain `a − b − c`, i.e. `I(a; c | b) ≤ tol`. `b` may be empty.
pub fn is_markov(
    dist: &DenseJoint,
    a: &[&str],
    b: &[&str],
    c: &[&str],
    tol: f64,
) -> Result<MarkovCheck, ProbError> {
    let slack = mutual_information(dist, a, c, b)?.bits;
    Ok(MarkovCheck {
        holds: slack <= tol,
        slack,
    })
}
