use alloc::vec;
use alloc::vec::Vec;

use super::{LinearSystem, PolytopeError};
use crate::lp::{Field, Lp, LpOutcome, Relation};
use crate::math::sqrt;
use crate::rng::Stream;

/// One support-function evaluation on both polyhedra.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportProbe {
    /// Non-negative unit vector.
    pub direction: Vec<f64>,
    /// `min direction·x` over each polyhedron intersected with `x ≥ 0`; `-inf` if unbounded.
    pub value_a: f64,
    pub value_b: f64,
}

impl SupportProbe {
    pub fn gap(&self) -> f64 {
        if self.value_a == self.value_b {
            0.0
        } else {
            (self.value_a - self.value_b).abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyComparison {
    pub equal: bool,
    pub worst_gap: f64,
    pub probes: Vec<SupportProbe>,
}

/// Probe `index`: the first `dim` probes are the coordinate axes, the rest are random
/// non-negative unit vectors drawn from `(seed, index)`.
pub fn probe_direction(seed: u64, index: usize, dim: usize) -> Vec<f64> {
    if index < dim {
        let mut d = vec![0.0; dim];
        d[index] = 1.0;
        return d;
    }
    let mut rng = Stream::derive(seed, index as u64, 0x5eed);
    let mut d: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
    let norm = sqrt(d.iter().map(|v| v * v).sum());
    d.iter_mut().for_each(|v| *v /= norm);
    d
}

/// `min dir·x` over the closure of `system` intersected with the non-negative orthant.
pub fn support_value<F: Field>(system: &LinearSystem<F>, dir: &[f64]) -> Result<f64, PolytopeError> {
    let mut lp: Lp<F> = Lp::new(system.vars.len(), false);
    for q in &system.ineqs {
        lp.push(q.coef.clone(), Relation::Ge, q.rhs.clone());
    }
    let c: Vec<F> = dir.iter().map(|&v| F::from_f64(v)).collect();
    match lp.minimize(&c) {
        LpOutcome::Optimal { value, .. } => Ok(value.to_f64()),
        LpOutcome::Unbounded => Ok(f64::NEG_INFINITY),
        LpOutcome::Infeasible => Err(PolytopeError::Empty("system")),
    }
}

/// Compares support functions in the axis directions plus `directions` random ones.
pub fn polyhedra_equal<F: Field>(
    a: &LinearSystem<F>,
    b: &LinearSystem<F>,
    directions: usize,
    tol: f64,
    seed: u64,
) -> Result<PolyComparison, PolytopeError> {
    let mut names: Vec<&str> = a.vars.iter().map(|s| s.as_str()).collect();
    let mut other: Vec<&str> = b.vars.iter().map(|s| s.as_str()).collect();
    names.sort_unstable();
    other.sort_unstable();
    if names != other {
        return Err(PolytopeError::VariableMismatch);
    }
    let order: Vec<&str> = a.vars.iter().map(|s| s.as_str()).collect();
    let b = b.reordered(&order)?;
    let dim = order.len();
    let mut probes = Vec::with_capacity(dim + directions);
    let mut worst: f64 = 0.0;
    for i in 0..dim + directions {
        let direction = probe_direction(seed, i, dim);
        let value_a = support_value(a, &direction).map_err(|_| PolytopeError::Empty("a"))?;
        let value_b = support_value(&b, &direction).map_err(|_| PolytopeError::Empty("b"))?;
        let p = SupportProbe {
            direction,
            value_a,
            value_b,
        };
        worst = worst.max(p.gap());
        probes.push(p);
    }
    Ok(PolyComparison {
        equal: worst <= tol,
        worst_gap: worst,
        probes,
    })
}
