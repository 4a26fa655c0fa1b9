//! Parallel drivers for the core computations.
//!
//! Every driver splits its work into units whose random streams depend only on
//! `(seed, unit)` and merges unit results in index order, so results do not depend on
//! the number of worker threads.

use coordsim_core::osrb::{
    candidate_b_vectors, monte_carlo_trial, select_good_b, summarize_traces, BVector, BinningCode, ExactOptions,
    ExactPlan, GoodB, OsrbError, ProtocolModel, ProtocolResult, Trace, TypicalityParams,
};
use coordsim_core::polytope::{probe_direction, support_value, LinearSystem, PolyComparison, PolytopeError, SupportProbe};
use coordsim_core::region::search::SearchProblem;
use coordsim_core::region::{MinRateResult, Objective, SearchConfig, SearchOutcome};
use coordsim_core::{ChannelSpec, RatePoint, RegionError};
use rayon::prelude::*;

/// Runs `f` on a pool of `workers` threads; zero uses the rayon default.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub fn exact_induced_pmf(model: &ProtocolModel, code: &BinningCode, opts: &ExactOptions) -> Result<ProtocolResult, OsrbError> {
    let plan = ExactPlan::new(model, code, opts.clone())?;
    let parts = (0..plan.chunks()).into_par_iter().map(|c| plan.run_chunk(c)).collect::<Result<Vec<_>, _>>()?;
    Ok(plan.finish(parts))
}

pub fn monte_carlo(
    model: &ProtocolModel,
    code: &BinningCode,
    params: &TypicalityParams,
    trials: usize,
    seed: u64,
    b_fixed: Option<&BVector>,
) -> Result<(ProtocolResult, Vec<Trace>), OsrbError> {
    let traces = (0..trials as u64)
        .into_par_iter()
        .map(|u| monte_carlo_trial(model, code, params, b_fixed, seed, u))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((summarize_traces(model, code, &traces, b_fixed), traces))
}

/// Evaluates candidate shared-bin vectors concurrently and keeps the best.
pub fn find_good_b(
    model: &ProtocolModel,
    code: &BinningCode,
    opts: &ExactOptions,
    candidates: usize,
    seed: u64,
) -> Result<GoodB, OsrbError> {
    let (cands, exhaustive) = candidate_b_vectors(code, candidates, seed)?;
    let evaluated = cands
        .into_par_iter()
        .map(|b| {
            let o = ExactOptions { b_fixed: Some(b.clone()), empirical: false, keep_joint: false, ..opts.clone() };
            let tv = exact_induced_pmf(model, code, &o)?.tv_to_target.unwrap_or(1.0);
            Ok((b, tv))
        })
        .collect::<Result<Vec<_>, OsrbError>>()?;
    Ok(select_good_b(evaluated, exhaustive))
}

pub fn run_search(problem: &SearchProblem) -> SearchOutcome {
    let results: Vec<_> = (0..problem.units()).into_par_iter().map(|u| problem.run_unit(u)).collect();
    SearchOutcome { witness: problem.select(results), units_run: problem.units() }
}

pub fn search_membership(
    channel: &ChannelSpec,
    point: RatePoint,
    rounds: usize,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, RegionError> {
    Ok(run_search(&SearchProblem::membership(channel, point, rounds, cfg)?))
}

pub fn min_rate(
    channel: &ChannelSpec,
    rounds: usize,
    objective: Objective,
    cfg: &SearchConfig,
) -> Result<Option<MinRateResult>, RegionError> {
    let p = SearchProblem::min_rate(channel, rounds, objective, cfg)?;
    let out = run_search(&p);
    Ok(p.into_min_rate(out.witness))
}

/// Support-function comparison with the probe directions evaluated concurrently.
pub fn polyhedra_equal(
    a: &LinearSystem<f64>,
    b: &LinearSystem<f64>,
    directions: usize,
    tol: f64,
    seed: u64,
) -> Result<PolyComparison, PolytopeError> {
    let order: Vec<&str> = a.vars().iter().map(String::as_str).collect();
    let mut sorted = order.clone();
    let mut other: Vec<&str> = b.vars().iter().map(String::as_str).collect();
    sorted.sort_unstable();
    other.sort_unstable();
    if sorted != other {
        return Err(PolytopeError::VariableMismatch);
    }
    let b = b.reordered(&order)?;
    let dim = order.len();
    let probes = (0..dim + directions)
        .into_par_iter()
        .map(|i| {
            let direction = probe_direction(seed, i, dim);
            let value_a = support_value(a, &direction).map_err(|_| PolytopeError::Empty("a"))?;
            let value_b = support_value(&b, &direction).map_err(|_| PolytopeError::Empty("b"))?;
            Ok(SupportProbe { direction, value_a, value_b })
        })
        .collect::<Result<Vec<_>, PolytopeError>>()?;
    let worst_gap = probes.iter().map(SupportProbe::gap).fold(0.0, f64::max);
    Ok(PolyComparison { equal: worst_gap <= tol, worst_gap, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use coordsim_core::osrb::{make_code, CodeRates};
    use coordsim_core::region::{AuxScheme, CondTable, Sizes};

    fn setup() -> (ChannelSpec, AuxScheme) {
        let (a, b) = (0.25, 0.1);
        let s = Sizes { x1: 2, x2: 1, y1: 1, y2: 2 };
        let sch = AuxScheme::new(
            s,
            vec![2],
            vec![CondTable::new(2, 2, vec![1.0 - a, a, a, 1.0 - a]).unwrap()],
            CondTable::repeated(4, &[1.0]).unwrap(),
            CondTable::new(2, 2, vec![1.0 - b, b, b, 1.0 - b]).unwrap(),
        )
        .unwrap();
        let p = a * (1.0 - b) + (1.0 - a) * b;
        let ch = ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![1.0 - p, p, p, 1.0 - p], 1, 2).unwrap();
        (ch, sch)
    }

    #[test]
    fn parallel_runs_match_sequential_ones() {
        let (ch, sch) = setup();
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code(&sch, &CodeRates::new(0.5, vec![0.75], vec![0.25]).unwrap(), 6, 5).unwrap();
        let opts = ExactOptions::default();
        let seq = coordsim_core::osrb::exact_induced_pmf(&model, &code, &opts).unwrap();
        for w in [1, 3] {
            assert_eq!(with_workers(w, || exact_induced_pmf(&model, &code, &opts)).unwrap(), seq);
        }
        let params = TypicalityParams::default();
        let (seq, _) = coordsim_core::osrb::monte_carlo(&model, &code, &params, 50, 9, None).unwrap();
        let (par, _) = with_workers(3, || monte_carlo(&model, &code, &params, 50, 9, None)).unwrap();
        assert_eq!(par, seq);
        let seq = coordsim_core::osrb::find_good_b(&model, &code, &opts, 4, 2).unwrap();
        assert_eq!(with_workers(2, || find_good_b(&model, &code, &opts, 4, 2)).unwrap(), seq);
    }
}
