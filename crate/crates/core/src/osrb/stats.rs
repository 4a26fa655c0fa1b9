use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::code::CodeRates;
use super::model::ProtocolModel;
use super::protocol::Trace;
use super::OsrbError;
use crate::polytope::round_entropies;
use crate::prob::DenseJoint;

/// Summary of a (possibly weighted) sample of single-letter TV values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    /// Number of traces, or of distinct joint types in exact mode.
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub min: f64,
    pub max: f64,
}

/// Weighted quantiles: the smallest value whose cumulative weight reaches `p`.
pub(crate) fn weighted_stats(mut v: Vec<(f64, f64)>) -> Option<EmpiricalStats> {
    v.retain(|(_, w)| *w > 0.0);
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|p| p.1).sum();
    let quantile = |p: f64| {
        let target = p * total;
        let mut acc = 0.0;
        for &(x, w) in &v {
            acc += w;
            if acc >= target * (1.0 - 1e-12) {
                return x;
            }
        }
        v[v.len() - 1].0
    };
    Some(EmpiricalStats {
        count: v.len(),
        mean: v.iter().map(|(x, w)| x * w).sum::<f64>() / total,
        median: quantile(0.5),
        q10: quantile(0.1),
        q90: quantile(0.9),
        min: v[0].0,
        max: v[v.len() - 1].0,
    })
}

/// TV between the joint type of `(x1, x2, y1, y2)` and `q(x)q(y|x)`.
pub fn empirical_tv(model: &ProtocolModel, x1: &[u32], x2: &[u32], y1: &[u32], y2: &[u32]) -> f64 {
    let s = model.sizes;
    let n = x1.len();
    let mut counts = vec![0usize; s.x() * s.y()];
    for t in 0..n {
        let x = x1[t] as usize * s.x2 + x2[t] as usize;
        let y = y1[t] as usize * s.y2 + y2[t] as usize;
        counts[x * s.y() + y] += 1;
    }
    let target = model.target_letter();
    let l1: f64 = counts
        .iter()
        .zip(&target)
        .map(|(&c, &q)| (c as f64 / n as f64 - q).abs())
        .sum();
    (0.5 * l1).clamp(0.0, 1.0)
}

/// Per-trace single-letter TV and its quantiles.
pub fn empirical_coordination_stats(model: &ProtocolModel, traces: &[Trace]) -> Result<(Vec<f64>, EmpiricalStats), OsrbError> {
    if traces.is_empty() {
        return Err(OsrbError::Incompatible("no traces".into()));
    }
    let tvs: Vec<f64> = traces
        .iter()
        .map(|t| empirical_tv(model, &t.x1, &t.x2, &t.y1, &t.y2))
        .collect();
    let stats = weighted_stats(tvs.iter().map(|&v| (v, 1.0)).collect()).expect("non-empty");
    Ok((tvs, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginStatus {
    Met,
    Boundary,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginClass {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMargin {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Positive when satisfied: `lhs − rhs` for `≥` rows, `rhs − lhs` for `<` rows.
    pub slack: f64,
    pub strict: bool,
    pub status: MarginStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub constraints: Vec<ConstraintMargin>,
    /// Implied `R12 = Σ_{i odd} R_i` and `R21 = Σ_{i even} R_i`.
    pub r12: f64,
    pub r21: f64,
    pub class: MarginClass,
}

impl MarginReport {
    pub fn get(&self, name: &str) -> Option<&ConstraintMargin> {
        self.constraints.iter().find(|c| c.name == name)
    }

    /// Smallest slack over all constraints.
    pub fn min_slack(&self) -> f64 {
        self.constraints.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min)
    }
}

const MARGIN_TOL: f64 = 1e-9;

/// Slack of each binning constraint at the given rates.
pub fn rate_margin_report(joint: &DenseJoint, rates: &CodeRates) -> Result<MarginReport, OsrbError> {
    let r = rates.rounds();
    let h = round_entropies(joint, r)?;
    let mut out = Vec::new();
    let mut push = |name: String, lhs: f64, rhs: f64, strict: bool| {
        let slack = if strict { rhs - lhs } else { lhs - rhs };
        let status = if slack > MARGIN_TOL {
            MarginStatus::Met
        } else if slack >= -MARGIN_TOL {
            MarginStatus::Boundary
        } else {
            MarginStatus::Violated
        };
        out.push(ConstraintMargin { name, lhs, rhs, slack, strict, status });
    };
    push("c1".into(), rates.r[0] + rates.r0 + rates.rt[0], h.decode[0], false);
    for i in 2..=r {
        push(format!("c2[{i}]"), rates.r[i - 1] + rates.rt[i - 1], h.decode[i - 1], false);
    }
    push("c3v1".into(), rates.r0 + rates.rt[0], h.own[0], true);
    for i in 2..=r {
        push(format!("c3v2[{i}]"), rates.rt[i - 1], h.own[i - 1], true);
    }
    let mut cum = 0.0;
    for i in 1..=r {
        cum += rates.rt[i - 1];
        push(format!("c44[{i}]"), cum, h.cum_xy[i - 1], true);
    }
    let class = if out.iter().any(|c| c.status == MarginStatus::Violated) {
        MarginClass::Exterior
    } else if out.iter().any(|c| c.status == MarginStatus::Boundary) {
        MarginClass::Boundary
    } else {
        MarginClass::Interior
    };
    Ok(MarginReport { constraints: out, r12: rates.r12(), r21: rates.r21(), class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osrb::protocol::sample_target_trace;
    use crate::region::{assemble_joint, AuxScheme, ChannelSpec, CondTable, Sizes};
    use crate::rng::Stream;

    fn bsc(p: f64) -> ChannelSpec {
        ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![1.0 - p, p, p, 1.0 - p], 1, 2).unwrap()
    }

    /// `F = X` and `Y2 = F` through BSC(0.1).
    fn one_way_scheme() -> AuxScheme {
        let s = Sizes { x1: 2, x2: 1, y1: 1, y2: 2 };
        AuxScheme::new(
            s,
            vec![2],
            vec![CondTable::deterministic(2, 2, |x| x).unwrap()],
            CondTable::repeated(4, &[1.0]).unwrap(),
            CondTable::new(2, 2, vec![0.9, 0.1, 0.1, 0.9]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn one_way_margins() {
        let joint = assemble_joint(&bsc(0.1), &one_way_scheme()).unwrap();
        let rep = rate_margin_report(&joint, &CodeRates::new(2.0, vec![0.7], vec![0.4]).unwrap()).unwrap();
        assert!((rep.get("c1").unwrap().slack - 2.1).abs() < 1e-12);
        let c3 = rep.get("c3v1").unwrap();
        // H(F | X1) = 0 for F = X1
        assert!((c3.slack - (0.0 - 2.4)).abs() < 1e-12);
        assert_eq!(c3.status, MarginStatus::Violated);
        assert_eq!(rep.class, MarginClass::Exterior);
    }

    #[test]
    fn constant_scheme_at_zero_rates_is_on_the_boundary() {
        let ch = bsc(0.2);
        let joint = assemble_joint(&ch, &AuxScheme::constant(&ch, 2)).unwrap();
        let rep = rate_margin_report(&joint, &CodeRates::new(0.0, vec![0.0; 2], vec![0.0; 2]).unwrap()).unwrap();
        assert!(rep.constraints.iter().all(|c| c.status != MarginStatus::Violated));
        assert_eq!(rep.class, MarginClass::Boundary);
    }

    #[test]
    fn margins_move_linearly() {
        let ch = bsc(0.1);
        let mut rng = Stream::new(4, 0);
        let sch = AuxScheme::random(ch.sizes(), &[2, 2], &mut rng).unwrap();
        let joint = assemble_joint(&ch, &sch).unwrap();
        let a = rate_margin_report(&joint, &CodeRates::new(0.3, vec![0.2, 0.1], vec![0.1, 0.05]).unwrap()).unwrap();
        let b = rate_margin_report(&joint, &CodeRates::new(0.3, vec![0.2, 0.1], vec![0.1 + 0.01, 0.05]).unwrap()).unwrap();
        // R̃1 appears in c1, c3v1 and every c44 row; nothing else moves
        for (x, y) in a.constraints.iter().zip(&b.constraints) {
            let d = y.slack - x.slack;
            let touched = x.name == "c1" || x.name == "c3v1" || x.name.starts_with("c44");
            let expect = if touched { 0.01 } else { 0.0 };
            assert!((d.abs() - expect).abs() < 1e-12, "{}: {d}", x.name);
        }
    }

    #[test]
    fn single_symbol_tv() {
        let ch = bsc(0.1);
        let model = ProtocolModel::new(&ch, &one_way_scheme()).unwrap();
        // point mass on (x=0, y=0) versus target (0.45, 0.05, 0.05, 0.45)
        let tv = empirical_tv(&model, &[0], &[0], &[0], &[0]);
        assert!((tv - 0.55).abs() < 1e-12);
    }

    #[test]
    fn target_traces_concentrate() {
        let ch = bsc(0.1);
        let model = ProtocolModel::new(&ch, &one_way_scheme()).unwrap();
        let traces: Vec<Trace> = (0..200).map(|u| sample_target_trace(&model, 100, &mut Stream::new(1, u))).collect();
        let (_, st) = empirical_coordination_stats(&model, &traces).unwrap();
        assert!(st.median < 0.15, "{st:?}");
    }
}
