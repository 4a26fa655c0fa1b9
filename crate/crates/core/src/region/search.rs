//! Witness search over factorized schemes.
//!
//! Each search unit starts from one scheme (a structured guess or a random one),
//! runs Adam on per-row softmax logits against a merit built from the four region
//! right-hand sides plus an augmented-Lagrangian penalty on the `(X, Y)` marginal,
//! then drives the marginal residual to zero with Levenberg-Marquardt steps and
//! finally tries snapping tiny entries to zero. Only schemes whose marginal is within
//! `marginal_tol` of the target and that pass `T(r)` validation count as witnesses.
//!
//! Units are independent and seeded by `(seed, unit index)`, so they may run in any
//! order or in parallel; [`SearchProblem::select`] picks the lowest score, then the
//! lowest unit index.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::eval::{RatePoint, RegionEval, RATE_SLACK};
use super::scheme::{cardinality_bounds, AuxScheme, CardinalityPreset, CondTable, Terminal};
use super::{assemble_joint, joint_mass, theorem1_eval, validate_t_r_with, ChannelSpec, FDigits, RegionError, ValidateOptions};
use crate::lp::{Lp, LpOutcome, Relation};
use crate::math::{exp, log2, sqrt};
use crate::prob::tv_slices;
use crate::rng::Stream;

/// Knobs for [`search_membership`] and [`min_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Explicit auxiliary alphabet sizes; `None` uses the cardinality bounds capped at `cap`.
    pub f_sizes: Option<Vec<usize>>,
    pub cap: usize,
    pub preset: CardinalityPreset,
    /// Permit alphabets above the cardinality bounds.
    pub allow_large: bool,
    /// Random restarts, run after the structured starting points.
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    /// A scheme is a witness only if its `(X, Y)` marginal is this close to the target.
    pub marginal_tol: f64,
    /// Run the exhaustive grid when it has at most this many points.
    pub grid_budget: usize,
    /// Grid entries are multiples of `1 / grid_resolution`.
    pub grid_resolution: usize,
    /// Guard on the number of joint cells per evaluation.
    pub max_cells: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            f_sizes: None,
            cap: 4,
            preset: CardinalityPreset::Theorem,
            allow_large: false,
            restarts: 8,
            iterations: 300,
            seed: 0,
            marginal_tol: 1e-6,
            grid_budget: 100_000,
            grid_resolution: 2,
            max_cells: 1 << 20,
        }
    }
}

impl SearchConfig {
    /// Auxiliary alphabet sizes for an `r`-round search, after validation.
    pub fn resolve_f_sizes(&self, channel: &ChannelSpec, rounds: usize) -> Result<Vec<usize>, RegionError> {
        let bad = |m: &str| Err(RegionError::SearchConfig(m.into()));
        if rounds == 0 {
            return bad("at least one round is required");
        }
        if !(self.marginal_tol > 0.0) {
            return bad("marginal_tol must be positive");
        }
        if self.grid_resolution == 0 {
            return bad("grid_resolution must be positive");
        }
        let s = channel.sizes();
        let sizes = match &self.f_sizes {
            Some(f) => {
                if f.len() != rounds {
                    return Err(RegionError::SearchConfig(format!(
                        "{} alphabet sizes given for {rounds} rounds",
                        f.len()
                    )));
                }
                if f.contains(&0) {
                    return bad("alphabet sizes must be positive");
                }
                let bounds = cardinality_bounds(s, f, self.preset);
                if !self.allow_large && f.iter().zip(&bounds).any(|(a, b)| a > b) {
                    return Err(RegionError::SearchConfig(format!(
                        "alphabets {f:?} exceed the bounds {bounds:?}; set allow_large to override"
                    )));
                }
                f.clone()
            }
            None => {
                if self.cap == 0 {
                    return bad("cap must be positive");
                }
                let mut f = Vec::with_capacity(rounds);
                for _ in 0..rounds {
                    f.push(0);
                    let b = cardinality_bounds(s, &f, self.preset);
                    let last = f.len() - 1;
                    f[last] = b[last].min(self.cap);
                }
                f
            }
        };
        let cells = sizes
            .iter()
            .try_fold(s.product(), |acc, &f| acc.checked_mul(f))
            .filter(|&c| c <= self.max_cells);
        if cells.is_none() {
            return bad("joint is too large for max_cells");
        }
        Ok(sizes)
    }
}

/// A linear objective `w · (R₀, R₁₂, R₂₁)` with some coordinates pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub weights: [f64; 3],
    pub fixed: [Option<f64>; 3],
}

impl Objective {
    /// Minimize `R₁₂` with `R₀` pinned.
    pub fn min_r12_at_r0(r0: f64) -> Self {
        Self {
            weights: [0.0, 1.0, 0.0],
            fixed: [Some(r0), None, None],
        }
    }

    /// Minimize `R₁₂ + R₂₁` with `R₀` pinned.
    pub fn min_sum_at_r0(r0: f64) -> Self {
        Self {
            weights: [0.0, 1.0, 1.0],
            fixed: [Some(r0), None, None],
        }
    }

    fn check(&self) -> Result<(), RegionError> {
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(RegionError::InfeasibleObjective(
                "objective weights must be finite and non-negative".into(),
            ));
        }
        if self.fixed.iter().flatten().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(RegionError::InfeasibleObjective(
                "fixed rates must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Optimal value and point for the given right-hand sides. With `elastic`, each
    /// inequality may be violated at a cost of `ELASTIC_PENALTY` per bit.
    fn solve(&self, rhs: [f64; 4], elastic: bool) -> Option<(f64, [f64; 3])> {
        const ROWS: [[f64; 3]; 4] = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]];
        let n = if elastic { 7 } else { 3 };
        let mut lp: Lp<f64> = Lp::new(n, false);
        for (k, row) in ROWS.iter().enumerate() {
            let mut c = vec![0.0; n];
            c[..3].copy_from_slice(row);
            if elastic {
                c[3 + k] = 1.0;
            }
            let b = if elastic { rhs[k] } else { rhs[k] - RATE_SLACK };
            lp.push(c, Relation::Ge, b);
        }
        for (j, f) in self.fixed.iter().enumerate() {
            if let Some(v) = f {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                lp.push(c, Relation::Eq, *v);
            }
        }
        let mut cost = vec![ELASTIC_PENALTY; n];
        cost[..3].copy_from_slice(&self.weights);
        match lp.minimize(&cost) {
            LpOutcome::Optimal { value, x } => Some((value, [x[0], x[1], x[2]])),
            _ => None,
        }
    }
}

const ELASTIC_PENALTY: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
enum Goal {
    Member(RatePoint),
    MinRate(Objective),
}

impl Goal {
    /// Weights `d_k` of the linearized merit `Σ d_k · RHS_k`.
    fn linearize(&self, rhs: [f64; 4]) -> [f64; 4] {
        match self {
            Goal::Member(p) => {
                let lhs = p.lhs();
                core::array::from_fn(|k| 2.0 * (rhs[k] - lhs[k] + 1e-3).max(0.0) + 1e-3)
            }
            Goal::MinRate(obj) => {
                let base = obj.solve(rhs, true).map_or(0.0, |v| v.0);
                core::array::from_fn(|k| {
                    let h = 1e-5;
                    let mut r = rhs;
                    r[k] += h;
                    let up = obj.solve(r, true).map_or(base, |v| v.0);
                    ((up - base) / h).max(0.0)
                })
            }
        }
    }

    /// Score of a validated candidate; `None` when it is not admissible.
    fn score(&self, eval: &RegionEval) -> Option<f64> {
        match self {
            Goal::Member(p) => eval.contains(p).member.then_some(0.0),
            Goal::MinRate(obj) => obj.solve(eval.rhs, false).map(|v| v.0),
        }
    }
}

/// A scheme certified by exact validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub scheme: AuxScheme,
    pub eval: RegionEval,
    pub marginal_tv: f64,
    pub score: f64,
    /// Search unit that produced it; the grid is the last unit.
    pub unit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub witness: Option<Witness>,
    pub units_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinRateResult {
    /// Best objective value found; an upper bound on the true minimum.
    pub value: f64,
    pub point: RatePoint,
    pub witness: Witness,
}

/// A fully specified search, split into independent units.
#[derive(Debug, Clone)]
pub struct SearchProblem {
    channel: ChannelSpec,
    rounds: usize,
    f_sizes: Vec<usize>,
    goal: Goal,
    cfg: SearchConfig,
    seeds: usize,
    grid_points: Option<usize>,
}

impl SearchProblem {
    pub fn membership(channel: &ChannelSpec, point: RatePoint, rounds: usize, cfg: &SearchConfig) -> Result<Self, RegionError> {
        Self::new(channel, Goal::Member(point), rounds, cfg)
    }

    pub fn min_rate(channel: &ChannelSpec, rounds: usize, objective: Objective, cfg: &SearchConfig) -> Result<Self, RegionError> {
        objective.check()?;
        Self::new(channel, Goal::MinRate(objective), rounds, cfg)
    }

    fn new(channel: &ChannelSpec, goal: Goal, rounds: usize, cfg: &SearchConfig) -> Result<Self, RegionError> {
        let f_sizes = cfg.resolve_f_sizes(channel, rounds)?;
        let mut p = Self {
            channel: channel.clone(),
            rounds,
            f_sizes,
            goal,
            cfg: cfg.clone(),
            seeds: 0,
            grid_points: None,
        };
        p.seeds = p.structured_seeds().len();
        p.grid_points = Some(p.grid_size()).filter(|&g| g <= cfg.grid_budget);
        Ok(p)
    }

    pub fn f_sizes(&self) -> &[usize] {
        &self.f_sizes
    }

    /// Number of units: structured starts, random restarts and possibly the grid.
    pub fn units(&self) -> usize {
        self.seeds + self.cfg.restarts + usize::from(self.grid_points.is_some())
    }

    pub fn grid_points(&self) -> Option<usize> {
        self.grid_points
    }

    pub fn is_membership(&self) -> bool {
        matches!(self.goal, Goal::Member(_))
    }

    /// Runs one unit; deterministic in `(config, unit)`.
    pub fn run_unit(&self, unit: usize) -> Option<Witness> {
        if unit < self.seeds {
            let start = self.structured_seeds().swap_remove(unit);
            self.optimize(start, unit)
        } else if unit < self.seeds + self.cfg.restarts {
            let mut rng = Stream::new(self.cfg.seed, unit as u64);
            let mut scheme = self.blank();
            for t in scheme.tables_mut() {
                let cols = t.cols();
                for row in t.data_mut().chunks_mut(cols) {
                    let z: Vec<f64> = (0..cols).map(|_| 2.0 * rng.normal()).collect();
                    softmax_into(&z, row);
                }
            }
            self.optimize(scheme, unit)
        } else if unit == self.seeds + self.cfg.restarts && self.grid_points.is_some() {
            self.grid(unit)
        } else {
            None
        }
    }

    /// Lowest score wins, ties go to the lowest unit.
    pub fn select(&self, results: impl IntoIterator<Item = Option<Witness>>) -> Option<Witness> {
        let mut best: Option<Witness> = None;
        for w in results.into_iter().flatten() {
            let better = match &best {
                None => true,
                Some(b) => w.score < b.score || (w.score == b.score && w.unit < b.unit),
            };
            if better {
                best = Some(w);
            }
        }
        best
    }

    /// Runs all units in order. Membership stops at the first witness, which is the
    /// one [`select`](Self::select) would pick.
    pub fn run_sequential(&self) -> SearchOutcome {
        let mut found = Vec::new();
        let mut units_run = 0;
        for u in 0..self.units() {
            units_run += 1;
            let w = self.run_unit(u);
            let hit = w.is_some();
            found.push(w);
            if hit && self.is_membership() {
                break;
            }
        }
        SearchOutcome {
            witness: self.select(found),
            units_run,
        }
    }

    pub fn into_min_rate(&self, witness: Option<Witness>) -> Option<MinRateResult> {
        let Goal::MinRate(obj) = &self.goal else { return None };
        let w = witness?;
        let (value, x) = obj.solve(w.eval.rhs, false)?;
        Some(MinRateResult {
            value,
            point: RatePoint {
                r0: x[0].max(0.0),
                r12: x[1].max(0.0),
                r21: x[2].max(0.0),
            },
            witness: w,
        })
    }

    fn blank(&self) -> AuxScheme {
        let s = self.channel.sizes();
        let fc: usize = self.f_sizes.iter().product();
        let mut prefix = 1;
        let mut rounds = Vec::with_capacity(self.rounds);
        for (i, &f) in self.f_sizes.iter().enumerate() {
            let own = owner_size(s, i + 1);
            rounds.push(CondTable::from_raw(prefix * own, f, vec![1.0 / f as f64; prefix * own * f]));
            prefix *= f;
        }
        let (y1, y2) = local_output_tables(&self.channel, fc);
        AuxScheme::new(s, self.f_sizes.clone(), rounds, y1, y2).expect("blank scheme has valid shapes")
    }

    /// Constant rounds, input exchange, and one terminal sending a sample of the outputs.
    fn structured_seeds(&self) -> Vec<AuxScheme> {
        let s = self.channel.sizes();
        let fs = &self.f_sizes;
        let digits = FDigits::new(fs);
        let fc: usize = fs.iter().product();
        let kfull = &self.channel.kernel();
        let mut out = Vec::new();

        // constant
        let mut sch = self.blank();
        set_rounds(&mut sch, |_, _, _| 0);
        out.push(sch);

        // exchange: round 1 carries x1, round 2 carries x2
        let mut sch = self.blank();
        set_rounds(&mut sch, |i, _, x| if i <= 2 { x % fs[i - 1] } else { 0 });
        let knows_x1 = fs[0] >= s.x1;
        let knows_x2 = self.rounds >= 2 && fs[1] >= s.x2;
        {
            let mut f = vec![0; self.rounds];
            let y1t = sch.y1_table().clone();
            let y2t = sch.y2_table().clone();
            let mut y1d = y1t.data().to_vec();
            let mut y2d = y2t.data().to_vec();
            for ff in 0..fc {
                digits.split(ff, &mut f);
                for x1 in 0..s.x1 {
                    let row = &mut y1d[(ff * s.x1 + x1) * s.y1..(ff * s.x1 + x1 + 1) * s.y1];
                    if knows_x2 && f[1] < s.x2 {
                        let sl = &kfull[(x1 * s.x2 + f[1]) * s.y()..(x1 * s.x2 + f[1] + 1) * s.y()];
                        for (y1, v) in row.iter_mut().enumerate() {
                            *v = sl[y1 * s.y2..(y1 + 1) * s.y2].iter().sum();
                        }
                    }
                }
                for x2 in 0..s.x2 {
                    let row = &mut y2d[(ff * s.x2 + x2) * s.y2..(ff * s.x2 + x2 + 1) * s.y2];
                    if knows_x1 && f[0] < s.x1 {
                        let sl = &kfull[(f[0] * s.x2 + x2) * s.y()..(f[0] * s.x2 + x2 + 1) * s.y()];
                        for (y2, v) in row.iter_mut().enumerate() {
                            *v = (0..s.y1).map(|y1| sl[y1 * s.y2 + y2]).sum();
                        }
                    }
                }
            }
            replace_outputs(&mut sch, y1d, y2d);
        }
        out.push(sch);

        // a terminal samples the output pair and sends it in its first round
        for round in 1..=self.rounds.min(2) {
            let fsz = fs[round - 1];
            let kown = match Terminal::owner(round) {
                Terminal::One => cond_yy_given(&self.channel, Terminal::One),
                Terminal::Two => cond_yy_given(&self.channel, Terminal::Two),
            };
            let mut sch = self.blank();
            for (i, t) in sch.tables_mut().enumerate().take(self.rounds) {
                let cols = t.cols();
                for (r, row) in t.data_mut().chunks_mut(cols).enumerate() {
                    row.fill(0.0);
                    if i + 1 == round {
                        let x = r % owner_size(s, round);
                        for (y, &p) in kown[x].iter().enumerate() {
                            row[y % fsz] += p;
                        }
                    } else {
                        row[0] = 1.0;
                    }
                }
            }
            let mut y1d = sch.y1_table().data().to_vec();
            let mut y2d = sch.y2_table().data().to_vec();
            for ff in 0..fc {
                let fv = digits.digit(ff, round - 1);
                if fv >= s.y() {
                    continue;
                }
                let (y1, y2) = (fv / s.y2, fv % s.y2);
                for x1 in 0..s.x1 {
                    let row = &mut y1d[(ff * s.x1 + x1) * s.y1..(ff * s.x1 + x1 + 1) * s.y1];
                    row.fill(0.0);
                    row[y1] = 1.0;
                }
                for x2 in 0..s.x2 {
                    let row = &mut y2d[(ff * s.x2 + x2) * s.y2..(ff * s.x2 + x2 + 1) * s.y2];
                    row.fill(0.0);
                    row[y2] = 1.0;
                }
            }
            replace_outputs(&mut sch, y1d, y2d);
            out.push(sch);
        }
        out
    }

    /// Exact check of one scheme.
    fn certify(&self, scheme: &AuxScheme, unit: usize) -> Option<Witness> {
        let p = joint_mass(&self.channel, scheme);
        let tv = tv_slices(&xy_marginal(&p, self.channel.sizes().product()), &self.channel.target_mass());
        if !(tv < self.cfg.marginal_tol) {
            return None;
        }
        let joint = assemble_joint(&self.channel, scheme).ok()?;
        let report = validate_t_r_with(
            &self.channel,
            &joint,
            ValidateOptions {
                tol: self.cfg.marginal_tol,
                enforce_cardinality: !self.cfg.allow_large,
            },
        )
        .ok()?;
        if !report.pass {
            return None;
        }
        let eval = theorem1_eval(&joint).ok()?;
        let score = self.goal.score(&eval)?;
        Some(Witness {
            scheme: scheme.clone(),
            eval,
            marginal_tv: tv,
            score,
            unit,
        })
    }

    fn better(a: Option<Witness>, b: Option<Witness>) -> Option<Witness> {
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.score < a.score { b } else { a }),
            (a, b) => a.or(b),
        }
    }

    fn optimize(&self, start: AuxScheme, unit: usize) -> Option<Witness> {
        let mut best = self.certify(&start, unit);
        if best.is_some() && self.is_membership() {
            return best;
        }
        let mut model = Model::new(&self.channel, start);
        let iters = self.cfg.iterations;
        let checkpoint = if iters >= 2 { iters / 2 } else { usize::MAX };
        let mut adam = Adam::new(model.z.iter().map(Vec::len).collect());
        let rho = 50.0;
        let mut lambda = vec![0.0; model.xy_cells()];
        for it in 0..iters {
            let st = model.stats();
            let d = self.goal.linearize(st.rhs);
            let g = model.cell_gradient(&st, d, &lambda, rho);
            let grad = model.logit_gradient(&st.p, &g);
            adam.step(&mut model.z, &grad, 0.05);
            model.refresh();
            if (it + 1) % 50 == 0 {
                let st = model.stats();
                for (l, c) in lambda.iter_mut().zip(&st.resid) {
                    *l += rho * c;
                }
            }
            if it + 1 == checkpoint {
                best = Self::better(best, self.finish(&model, unit));
                if best.is_some() && self.is_membership() {
                    return best;
                }
            }
        }
        Self::better(best, self.finish(&model, unit))
    }

    /// Polishes the marginal, then certifies the polished and snapped schemes.
    fn finish(&self, model: &Model<'_>, unit: usize) -> Option<Witness> {
        let mut m = model.clone();
        m.polish();
        let polished = self.certify(&m.scheme, unit);
        let mut snapped = m.scheme.clone();
        snap(&mut snapped, 1e-7);
        Self::better(polished, self.certify(&snapped, unit))
    }

    fn grid_rows(&self) -> Vec<usize> {
        self.blank().tables().flat_map(|t| core::iter::repeat(t.cols()).take(t.rows())).collect()
    }

    fn grid_size(&self) -> usize {
        let m = self.cfg.grid_resolution;
        self.grid_rows()
            .iter()
            .try_fold(1usize, |acc, &cols| acc.checked_mul(binomial(m + cols - 1, cols - 1)?))
            .unwrap_or(usize::MAX)
    }

    fn grid(&self, unit: usize) -> Option<Witness> {
        let m = self.cfg.grid_resolution;
        let rows = self.grid_rows();
        let mut comp_cache: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
        let choices: Vec<usize> = rows
            .iter()
            .map(|&c| {
                if let Some(i) = comp_cache.iter().position(|(cc, _)| *cc == c) {
                    i
                } else {
                    comp_cache.push((c, compositions(m, c)));
                    comp_cache.len() - 1
                }
            })
            .collect();
        let mut idx = vec![0usize; rows.len()];
        let mut scheme = self.blank();
        let mut best: Option<Witness> = None;
        loop {
            let mut r = 0;
            for t in scheme.tables_mut() {
                let cols = t.cols();
                for row in t.data_mut().chunks_mut(cols) {
                    row.copy_from_slice(&comp_cache[choices[r]].1[idx[r]]);
                    r += 1;
                }
            }
            if let Some(w) = self.certify(&scheme, unit) {
                if best.as_ref().map_or(true, |b| w.score < b.score) {
                    best = Some(w);
                    if self.is_membership() {
                        return best;
                    }
                }
            }
            // odometer, last row fastest
            let mut k = rows.len();
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < comp_cache[choices[k]].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Searches for a scheme whose region contains `point`. Absence is inconclusive.
pub fn search_membership(
    channel: &ChannelSpec,
    point: RatePoint,
    rounds: usize,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, RegionError> {
    Ok(SearchProblem::membership(channel, point, rounds, cfg)?.run_sequential())
}

/// Smallest objective value found over certified schemes, or `None` if no unit produced one.
pub fn min_rate(
    channel: &ChannelSpec,
    rounds: usize,
    objective: Objective,
    cfg: &SearchConfig,
) -> Result<Option<MinRateResult>, RegionError> {
    let p = SearchProblem::min_rate(channel, rounds, objective, cfg)?;
    let out = p.run_sequential();
    Ok(p.into_min_rate(out.witness))
}

/// Output tables drawing `Y1 ~ q(y1|x1)` and `Y2 ~ q(y2|x2)` regardless of the auxiliaries.
pub(crate) fn local_output_tables(channel: &ChannelSpec, f_cells: usize) -> (CondTable, CondTable) {
    let s = channel.sizes();
    let k1 = cond_y_given(channel, Terminal::One);
    let k2 = cond_y_given(channel, Terminal::Two);
    let d1 = (0..f_cells).flat_map(|_| k1.iter().flatten().copied()).collect::<Vec<_>>();
    let d2 = (0..f_cells).flat_map(|_| k2.iter().flatten().copied()).collect::<Vec<_>>();
    (
        CondTable::from_raw(f_cells * s.x1, s.y1, d1),
        CondTable::from_raw(f_cells * s.x2, s.y2, d2),
    )
}

fn owner_size(s: super::Sizes, round: usize) -> usize {
    match Terminal::owner(round) {
        Terminal::One => s.x1,
        Terminal::Two => s.x2,
    }
}

/// `q(y_j | x_j)` as `[x_j][y_j]`; inputs of zero mass get the uniform row.
fn cond_y_given(channel: &ChannelSpec, t: Terminal) -> Vec<Vec<f64>> {
    let s = channel.sizes();
    let yy = cond_yy_given(channel, t);
    yy.iter()
        .map(|row| match t {
            Terminal::One => (0..s.y1).map(|y1| row[y1 * s.y2..(y1 + 1) * s.y2].iter().sum()).collect(),
            Terminal::Two => (0..s.y2).map(|y2| (0..s.y1).map(|y1| row[y1 * s.y2 + y2]).sum()).collect(),
        })
        .collect()
}

/// `q(y1, y2 | x_j)` as `[x_j][y1 * |Y2| + y2]`.
fn cond_yy_given(channel: &ChannelSpec, t: Terminal) -> Vec<Vec<f64>> {
    let s = channel.sizes();
    let nx = match t {
        Terminal::One => s.x1,
        Terminal::Two => s.x2,
    };
    let mut out = vec![vec![0.0; s.y()]; nx];
    let mut mass = vec![0.0; nx];
    for x1 in 0..s.x1 {
        for x2 in 0..s.x2 {
            let q = channel.qx(x1, x2);
            let x = if t == Terminal::One { x1 } else { x2 };
            mass[x] += q;
            for (y, o) in out[x].iter_mut().enumerate() {
                *o += q * channel.kernel()[(x1 * s.x2 + x2) * s.y() + y];
            }
        }
    }
    for (row, m) in out.iter_mut().zip(mass) {
        if m > 0.0 {
            row.iter_mut().for_each(|v| *v /= m);
        } else {
            row.fill(1.0 / s.y() as f64);
        }
    }
    out
}

fn set_rounds(scheme: &mut AuxScheme, f: impl Fn(usize, usize, usize) -> usize) {
    let s = scheme.sizes();
    let r = scheme.rounds();
    for (i, t) in scheme.tables_mut().enumerate().take(r) {
        let own = owner_size(s, i + 1);
        let cols = t.cols();
        for (row_idx, row) in t.data_mut().chunks_mut(cols).enumerate() {
            row.fill(0.0);
            row[f(i + 1, row_idx / own, row_idx % own)] = 1.0;
        }
    }
}

fn replace_outputs(scheme: &mut AuxScheme, y1: Vec<f64>, y2: Vec<f64>) {
    let r = scheme.rounds();
    let mut it = scheme.tables_mut().skip(r);
    it.next().expect("Y1 table").data_mut().copy_from_slice(&y1);
    it.next().expect("Y2 table").data_mut().copy_from_slice(&y2);
}

fn softmax_into(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = exp(v - m);
        s += *o;
    }
    out.iter_mut().for_each(|o| *o /= s);
}

fn snap(scheme: &mut AuxScheme, eps: f64) {
    for t in scheme.tables_mut() {
        let cols = t.cols();
        for row in t.data_mut().chunks_mut(cols) {
            row.iter_mut().filter(|v| **v < eps).for_each(|v| *v = 0.0);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

fn xy_marginal(p: &[f64], xy_cells: usize) -> Vec<f64> {
    let mut out = vec![0.0; xy_cells];
    for (c, &v) in p.iter().enumerate() {
        out[c % xy_cells] += v;
    }
    out
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All pmfs on `cols` points with entries in multiples of `1/m`, lexicographic.
fn compositions(m: usize, cols: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, cols: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cols == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in 0..=left {
            cur.push(a);
            rec(left - a, cols - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, cols, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|c| c.into_iter().map(|a| a as f64 / m as f64).collect())
        .collect()
}

/// Marginals and region quantities of the current joint.
struct Stats {
    p: Vec<f64>,
    fx: Vec<f64>,
    fx1: Vec<f64>,
    fx2: Vec<f64>,
    f1x: Vec<f64>,
    f1xy: Vec<f64>,
    xy: Vec<f64>,
    resid: Vec<f64>,
    rhs: [f64; 4],
}

/// Scheme plus its softmax logits.
#[derive(Clone)]
struct Model<'a> {
    channel: &'a ChannelSpec,
    scheme: AuxScheme,
    z: Vec<Vec<f64>>,
    digits: FDigits,
    target: Vec<f64>,
    h_x: f64,
    h_x1: f64,
    h_x2: f64,
}

fn h(v: &[f64]) -> f64 {
    v.iter().filter(|&&p| p > 0.0).map(|&p| -p * log2(p)).sum()
}

fn neg_log(p: f64) -> f64 {
    -log2(p.max(1e-300))
}

impl<'a> Model<'a> {
    fn new(channel: &'a ChannelSpec, scheme: AuxScheme) -> Self {
        let z = scheme
            .tables()
            .map(|t| t.data().iter().map(|&p| crate::math::ln(p.max(1e-6))).collect())
            .collect();
        let s = channel.sizes();
        let qx = channel.q_x().mass();
        let x1: Vec<f64> = (0..s.x1).map(|a| (0..s.x2).map(|b| qx[a * s.x2 + b]).sum()).collect();
        let x2: Vec<f64> = (0..s.x2).map(|b| (0..s.x1).map(|a| qx[a * s.x2 + b]).sum()).collect();
        let mut m = Self {
            channel,
            digits: FDigits::new(scheme.f_sizes()),
            scheme,
            z,
            target: channel.target_mass(),
            h_x: h(qx),
            h_x1: h(&x1),
            h_x2: h(&x2),
        };
        m.refresh();
        m
    }

    fn xy_cells(&self) -> usize {
        self.channel.sizes().product()
    }

    fn refresh(&mut self) {
        for (t, z) in self.scheme.tables_mut().zip(&self.z) {
            let cols = t.cols();
            for (row, zr) in t.data_mut().chunks_mut(cols).zip(z.chunks(cols)) {
                softmax_into(zr, row);
            }
        }
    }

    fn stats(&self) -> Stats {
        let s = self.channel.sizes();
        let p = joint_mass(self.channel, &self.scheme);
        let (ny, nx, nxy) = (s.y(), s.x(), s.product());
        let fc = self.scheme.f_cells();
        let f1div = fc / self.scheme.f_sizes()[0];
        let mut fx = vec![0.0; fc * nx];
        let mut fx1 = vec![0.0; fc * s.x1];
        let mut fx2 = vec![0.0; fc * s.x2];
        let mut f1x = vec![0.0; self.scheme.f_sizes()[0] * nx];
        let mut f1xy = vec![0.0; self.scheme.f_sizes()[0] * nxy];
        let mut xy = vec![0.0; nxy];
        for (c, &v) in p.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (ff, rem) = (c / nxy, c % nxy);
            let x = rem / ny;
            let f1 = ff / f1div;
            fx[c / ny] += v;
            fx1[ff * s.x1 + x / s.x2] += v;
            fx2[ff * s.x2 + x % s.x2] += v;
            f1x[f1 * nx + x] += v;
            f1xy[f1 * nxy + rem] += v;
            xy[rem] += v;
        }
        let (hfx, hfxy, hxy) = (h(&fx), h(&p), h(&xy));
        let i_x1 = self.h_x + h(&fx2) - hfx - self.h_x2;
        let i_x2 = self.h_x + h(&fx1) - hfx - self.h_x1;
        let i_f1y = h(&f1x) + hxy - h(&f1xy) - self.h_x;
        let i_fy = hfx + hxy - hfxy - self.h_x;
        let resid = xy.iter().zip(&self.target).map(|(a, b)| a - b).collect();
        Stats {
            rhs: [i_x1, i_x2, i_x1 + i_f1y, i_x1 + i_x2 + i_fy],
            p,
            fx,
            fx1,
            fx2,
            f1x,
            f1xy,
            xy,
            resid,
        }
    }

    /// `∂ merit / ∂ p(cell)` up to an additive constant.
    fn cell_gradient(&self, st: &Stats, d: [f64; 4], lambda: &[f64], rho: f64) -> Vec<f64> {
        let s = self.channel.sizes();
        let (ny, nx, nxy) = (s.y(), s.x(), s.product());
        let f1div = self.scheme.f_cells() / self.scheme.f_sizes()[0];
        let a1 = d[0] + d[2] + d[3];
        let a2 = d[1] + d[3];
        let (b1, bf) = (d[2], d[3]);
        st.p
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                if v == 0.0 {
                    return 0.0;
                }
                let (ff, rem) = (c / nxy, c % nxy);
                let x = rem / ny;
                let f1 = ff / f1div;
                a1 * neg_log(st.fx2[ff * s.x2 + x % s.x2])
                    + a2 * neg_log(st.fx1[ff * s.x1 + x / s.x2])
                    + (bf - a1 - a2) * neg_log(st.fx[c / ny])
                    + b1 * neg_log(st.f1x[f1 * nx + x])
                    + (b1 + bf) * neg_log(st.xy[rem])
                    - b1 * neg_log(st.f1xy[f1 * nxy + rem])
                    - bf * neg_log(v)
                    + lambda[rem]
                    + rho * st.resid[rem]
            })
            .collect()
    }

    /// Chain rule from cell gradients through the product form and the softmax.
    fn logit_gradient(&self, p: &[f64], g: &[f64]) -> Vec<Vec<f64>> {
        let s = self.channel.sizes();
        let sch = &self.scheme;
        let r = sch.rounds();
        let fc = sch.f_cells();
        let mut acc: Vec<Vec<f64>> = sch.tables().map(|t| vec![0.0; t.data().len()]).collect();
        let mut f = vec![0usize; r];
        let mut sy1 = vec![0.0; s.y1];
        let mut sy2 = vec![0.0; s.y2];
        for ff in 0..fc {
            self.digits.split(ff, &mut f);
            for x1 in 0..s.x1 {
                for x2 in 0..s.x2 {
                    let base = ((ff * s.x1 + x1) * s.x2 + x2) * s.y();
                    sy1.fill(0.0);
                    sy2.fill(0.0);
                    let mut tot = 0.0;
                    for y1 in 0..s.y1 {
                        for y2 in 0..s.y2 {
                            let c = base + y1 * s.y2 + y2;
                            let gp = g[c] * p[c];
                            sy1[y1] += gp;
                            sy2[y2] += gp;
                            tot += gp;
                        }
                    }
                    if tot == 0.0 && sy1.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for (i, a) in acc.iter_mut().enumerate().take(r) {
                        let x_own = if Terminal::owner(i + 1) == Terminal::One { x1 } else { x2 };
                        let row = sch.round_row(i + 1, self.digits.prefix(ff, i), x_own);
                        a[row * sch.f_sizes()[i] + f[i]] += tot;
                    }
                    for (y1, v) in sy1.iter().enumerate() {
                        acc[r][(ff * s.x1 + x1) * s.y1 + y1] += v;
                    }
                    for (y2, v) in sy2.iter().enumerate() {
                        acc[r + 1][(ff * s.x2 + x2) * s.y2 + y2] += v;
                    }
                }
            }
        }
        for (a, t) in acc.iter_mut().zip(sch.tables()) {
            let cols = t.cols();
            for (ar, tr) in a.chunks_mut(cols).zip(t.data().chunks(cols)) {
                let sum: f64 = ar.iter().sum();
                for (av, tv) in ar.iter_mut().zip(tr) {
                    *av -= tv * sum;
                }
            }
        }
        acc
    }

    /// Levenberg-Marquardt on the marginal residual with minimum-norm steps.
    fn polish(&mut self) {
        let m = self.xy_cells();
        let mut mu = 1e-6;
        let mut st = self.stats();
        let mut cost: f64 = st.resid.iter().map(|c| c * c).sum();
        for _ in 0..60 {
            if sqrt(cost) < 1e-14 || mu > 1e6 {
                break;
            }
            // Jacobian rows via one backward pass per output cell
            let jac: Vec<Vec<f64>> = (0..m)
                .map(|k| {
                    let g: Vec<f64> = (0..st.p.len()).map(|c| if c % m == k { 1.0 } else { 0.0 }).collect();
                    self.logit_gradient(&st.p, &g).concat()
                })
                .collect();
            let mut jjt = vec![vec![0.0; m]; m];
            for a in 0..m {
                for b in a..m {
                    let v: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
                    jjt[a][b] = v;
                    jjt[b][a] = v;
                }
            }
            let mut improved = false;
            while mu <= 1e6 {
                let mut sys = jjt.clone();
                for (i, row) in sys.iter_mut().enumerate() {
                    row[i] += mu;
                }
                let Some(y) = solve_dense(sys, st.resid.clone()) else {
                    mu *= 10.0;
                    continue;
                };
                let saved = self.z.clone();
                let mut off = 0;
                for zt in self.z.iter_mut() {
                    for (j, zv) in zt.iter_mut().enumerate() {
                        let step: f64 = (0..m).map(|k| jac[k][off + j] * y[k]).sum();
                        *zv -= step;
                    }
                    off += zt.len();
                }
                self.refresh();
                let trial = self.stats();
                let tcost: f64 = trial.resid.iter().map(|c| c * c).sum();
                if tcost < cost {
                    st = trial;
                    cost = tcost;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
                self.z = saved;
                self.refresh();
                mu *= 10.0;
            }
            if !improved {
                break;
            }
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(lens: Vec<usize>) -> Self {
        Self {
            m: lens.iter().map(|&l| vec![0.0; l]).collect(),
            v: lens.iter().map(|&l| vec![0.0; l]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, z: &mut [Vec<f64>], g: &[Vec<f64>], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - libm::pow(B1, self.t as f64);
        let c2 = 1.0 - libm::pow(B2, self.t as f64);
        for (((zt, gt), mt), vt) in z.iter_mut().zip(g).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..zt.len() {
                mt[i] = B1 * mt[i] + (1.0 - B1) * gt[i];
                vt[i] = B2 * vt[i] + (1.0 - B2) * gt[i] * gt[i];
                zt[i] -= lr * (mt[i] / c1) / (sqrt(vt[i] / c2) + 1e-9);
            }
        }
    }
}
