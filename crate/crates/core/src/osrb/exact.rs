//! Exact induced distribution of the protocol under a fixed code, and Monte-Carlo summaries.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::code::{prf_finish, prf_step, BinFamily, BinValue, BinningCode, MapId};
use super::decode::{DecodeStatus, DecoderTable, SideInfo, TypicalityParams};
use super::model::ProtocolModel;
use super::protocol::{monte_carlo_trial, BVector, Trace};
use super::stats::{empirical_tv, weighted_stats, EmpiricalStats};
use super::OsrbError;
use crate::math::neg_xlogx;
use crate::region::Terminal;
use crate::rng::Stream;

/// Default cap on enumerated trajectory terms.
pub const DEFAULT_BUDGET: f64 = 1e8;
/// Largest dense output tensor per input sequence.
const MAX_TENSOR: usize = 1 << 24;
/// Largest induced joint kept in the result.
const MAX_JOINT: usize = 1 << 22;
/// Input sequences per work unit; fixed so results do not depend on worker count.
const CHUNK: usize = 64;

/// How the common randomness index is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaMode {
    /// `f₁ⁿ` drawn i.i.d. and `ω`, `b`, `k` computed from it; decoders and outputs are
    /// operational. Isolates decoding losses.
    BinOfF,
    /// `ω` and `b` uniform and independent of the inputs; the encoder samples inside
    /// the shared bins. This is the protocol proper.
    Exogenous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOptions {
    /// Condition on these `b_1..b_r` instead of averaging over them.
    pub b_fixed: Option<Vec<u64>>,
    pub omega_mode: OmegaMode,
    pub params: TypicalityParams,
    pub budget: f64,
    /// Also compute the distribution of the single-letter empirical TV.
    pub empirical: bool,
    /// Keep the induced joint when it has at most 2²² cells.
    pub keep_joint: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            b_fixed: None,
            omega_mode: OmegaMode::Exogenous,
            params: TypicalityParams::default(),
            budget: DEFAULT_BUDGET,
            empirical: true,
            keep_joint: false,
        }
    }
}

/// Outcome of an exact or sampled evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub mode: RunMode,
    pub omega_mode: OmegaMode,
    pub n: usize,
    /// TV of the induced `(Xⁿ, Yⁿ)` law to the i.i.d. target (exact mode).
    pub tv_to_target: Option<f64>,
    /// Total induced mass; one up to rounding (exact mode).
    pub total_mass: Option<f64>,
    /// Per round, probability that the passive terminal's estimate is wrong.
    pub sw_error_rate: Vec<f64>,
    /// Per round, probability that the decoder flagged an error.
    pub decode_failure_rate: Vec<f64>,
    /// Per round, probability that the shared bins held no reachable sequence.
    pub empty_bin_rate: Vec<f64>,
    /// Single-letter empirical TV; weighted by the induced law in exact mode.
    pub empirical: Option<EmpiricalStats>,
    /// `log₂` bin range over `n` for `ω`, then `(k_i, b_i)` per round.
    pub range_rates: RangeRates,
    /// `H(K_i)/n` (exact) or its plug-in estimate over trials.
    pub k_entropy_rate: Vec<f64>,
    pub trials: usize,
    /// Mass indexed by `(x-sequence, y-sequence)`, pair symbols, time 0 most significant.
    pub induced: Option<Vec<f64>>,
    pub b_fixed: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeRates {
    pub r0: f64,
    pub r: Vec<f64>,
    pub rt: Vec<f64>,
}

impl RangeRates {
    fn of(code: &BinningCode) -> Self {
        Self {
            r0: code.effective_rate(MapId::Omega),
            r: (1..=code.rounds()).map(|i| code.effective_rate(MapId::K(i))).collect(),
            rt: (1..=code.rounds()).map(|i| code.effective_rate(MapId::B(i))).collect(),
        }
    }
}

/// Digits of sequence indices in a fixed base, time 0 most significant.
#[derive(Debug, Clone)]
struct Radix {
    base: u64,
    n: usize,
}

impl Radix {
    fn digits(&self, mut idx: u64, out: &mut [u32]) {
        for t in (0..self.n).rev() {
            out[t] = (idx % self.base) as u32;
            idx /= self.base;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Leaf {
    f: u64,
    q: f64,
    b: u64,
    k: u64,
    w: u64,
    own_new: u64,
}

#[derive(Debug, Clone)]
enum TypeAcc {
    Dense(Vec<f64>),
    Sparse(BTreeMap<u128, f64>),
    Off,
}

impl TypeAcc {
    fn add(&mut self, key: u128, m: f64) {
        match self {
            TypeAcc::Dense(v) => v[key as usize] += m,
            TypeAcc::Sparse(s) => *s.entry(key).or_insert(0.0) += m,
            TypeAcc::Off => {}
        }
    }

    fn merge(&mut self, other: TypeAcc) {
        match (self, other) {
            (TypeAcc::Dense(a), TypeAcc::Dense(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (TypeAcc::Sparse(a), TypeAcc::Sparse(b)) => {
                for (k, v) in b {
                    *a.entry(k).or_insert(0.0) += v;
                }
            }
            _ => {}
        }
    }
}

/// Accumulated results over a range of input sequences.
#[derive(Debug, Clone)]
pub struct ExactPartial {
    tv: f64,
    mass: f64,
    sw_err: Vec<f64>,
    fail: Vec<f64>,
    empty: Vec<f64>,
    k_mass: Vec<BTreeMap<u64, f64>>,
    types: TypeAcc,
    joint: Option<Vec<f64>>,
    work: f64,
}

impl ExactPartial {
    /// Adds `other`, which must cover the input range right after `self`.
    pub fn merge(&mut self, other: ExactPartial) {
        self.tv += other.tv;
        self.mass += other.mass;
        for (a, b) in [(&mut self.sw_err, &other.sw_err), (&mut self.fail, &other.fail), (&mut self.empty, &other.empty)] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.k_mass.iter_mut().zip(other.k_mass) {
            for (k, v) in b {
                *a.entry(k).or_insert(0.0) += v;
            }
        }
        self.types.merge(other.types);
        if let (Some(a), Some(b)) = (&mut self.joint, other.joint) {
            a.extend(b);
        }
        self.work += other.work;
    }
}

type Memo = BTreeMap<(usize, Vec<u32>, Vec<u32>), DecoderTable>;

/// Validated exact-mode computation, split into input-sequence chunks that can be
/// evaluated independently and merged in chunk order.
#[derive(Debug, Clone)]
pub struct ExactPlan<'a> {
    model: &'a ProtocolModel,
    code: &'a BinningCode,
    opts: ExactOptions,
    n: usize,
    x_count: usize,
    /// `Π_{j<i}|ℱ_j|` for `i = 1..r+1`.
    view_base: Vec<u64>,
    normalizer: f64,
    /// `(n+1)^c` for each single-letter cell `c`, when types are tracked.
    type_pow: Option<Vec<u128>>,
    type_cells: usize,
}

impl<'a> ExactPlan<'a> {
    pub fn new(model: &'a ProtocolModel, code: &'a BinningCode, opts: ExactOptions) -> Result<Self, OsrbError> {
        if code.family() != BinFamily::Prf {
            return Err(OsrbError::Unsupported("exact enumeration needs hashed bins".into()));
        }
        if code.f_sizes() != model.f_sizes() {
            return Err(OsrbError::Incompatible("code and scheme disagree on auxiliary alphabets".into()));
        }
        let r = code.rounds();
        if let Some(b) = &opts.b_fixed {
            if b.len() != r || b.iter().enumerate().any(|(i, &v)| v >= code.count(MapId::B(i + 1)).unwrap_or(0)) {
                return Err(OsrbError::Incompatible(format!("fixed bins {b:?} do not fit the code")));
            }
        }
        let n = code.n();
        let s = model.sizes;
        let n32 = n as u32;
        let too_big = |what: &str| OsrbError::Unsupported(format!("{what} do not fit in 64-bit sequence indices"));
        let x_count = (s.x() as u64).checked_pow(n32).filter(|&c| c <= usize::MAX as u64 / 2).ok_or_else(|| too_big("inputs"))? as usize;
        (model.f_cells as u64).checked_pow(n32).filter(|&c| c < 1 << 62).ok_or_else(|| too_big("views"))?;
        let mut view_base = vec![1u64];
        for &f in model.f_sizes() {
            view_base.push(view_base.last().unwrap() * f as u64);
        }
        // trajectory terms: per round, positive-probability prefixes per letter, to the n
        let mut estimate = 0.0;
        for i in 1..=r {
            let per_letter: f64 = (0..s.x())
                .filter(|&x| model.qx[x] > 0.0)
                .map(|x| {
                    let (x1, x2) = model.split_x(x);
                    let mut c = 0usize;
                    for ff in 0..view_base[i] as usize {
                        let mut p = 1.0;
                        let mut rest = ff;
                        let mut digits = vec![0usize; i];
                        for j in (0..i).rev() {
                            digits[j] = rest % model.f_sizes[j];
                            rest /= model.f_sizes[j];
                        }
                        let mut prefix = 0usize;
                        for j in 0..i {
                            let own = if Terminal::owner(j + 1) == Terminal::One { x1 } else { x2 };
                            p *= model.enc_p(j + 1, prefix, own, digits[j]);
                            prefix = prefix * model.f_sizes[j] + digits[j];
                        }
                        if p > 0.0 {
                            c += 1;
                        }
                    }
                    c as f64
                })
                .sum();
            estimate += libm::pow(per_letter, n as f64);
        }
        if estimate > opts.budget {
            return Err(OsrbError::Budget { needed: estimate, budget: opts.budget });
        }
        let sigma = Self::sigma_dims(model);
        let tensor = libm::pow(sigma.0.max(s.y()) as f64 * sigma.1 as f64, n as f64);
        if tensor > MAX_TENSOR as f64 {
            return Err(OsrbError::Budget { needed: tensor, budget: MAX_TENSOR as f64 });
        }
        let type_cells = s.x() * s.y();
        let type_pow = if opts.empirical {
            let mut pows = Vec::with_capacity(type_cells);
            let mut p: Option<u128> = Some(1);
            for _ in 0..type_cells {
                pows.push(p);
                p = p.and_then(|v| v.checked_mul(n as u128 + 1));
            }
            p.map(|_| pows.into_iter().map(|v| v.unwrap()).collect())
        } else {
            None
        };
        let mut plan = Self {
            model,
            code,
            opts,
            n,
            x_count,
            view_base,
            normalizer: 1.0,
            type_pow,
            type_cells,
        };
        if plan.opts.omega_mode == OmegaMode::BinOfF && plan.opts.b_fixed.is_some() {
            // P(b) must be known before conditional TVs can be formed
            let mut total = 0.0;
            let mut scratch = plan.empty_partial();
            for c in 0..plan.chunks() {
                let mut memo = Memo::new();
                for xi in plan.chunk_range(c) {
                    total += plan.run_x(xi, &mut memo, &mut scratch, false)?;
                }
            }
            if !(total > 0.0) {
                return Err(OsrbError::Incompatible("the fixed bins have probability zero".into()));
            }
            plan.normalizer = total;
        }
        Ok(plan)
    }

    /// `(a, b)`: view symbols of terminal 1 and 2 that affect the outputs.
    fn sigma_dims(model: &ProtocolModel) -> (usize, usize) {
        let a = if model.sizes.y1 > 1 { model.f_cells } else { 1 };
        let b = if model.sizes.y2 > 1 { model.f_cells } else { 1 };
        (a, b)
    }

    pub fn chunks(&self) -> usize {
        self.x_count.div_ceil(CHUNK)
    }

    fn chunk_range(&self, c: usize) -> core::ops::Range<usize> {
        c * CHUNK..((c + 1) * CHUNK).min(self.x_count)
    }

    fn empty_partial(&self) -> ExactPartial {
        let r = self.code.rounds();
        let types = match &self.type_pow {
            Some(p) if (p[self.type_cells - 1] * (self.n as u128 + 1)) <= 1 << 22 => {
                TypeAcc::Dense(vec![0.0; (p[self.type_cells - 1] * (self.n as u128 + 1)) as usize])
            }
            Some(_) => TypeAcc::Sparse(BTreeMap::new()),
            None => TypeAcc::Off,
        };
        let cells = self.x_count.saturating_mul(self.model.sizes.y().saturating_pow(self.n as u32));
        ExactPartial {
            tv: 0.0,
            mass: 0.0,
            sw_err: vec![0.0; r],
            fail: vec![0.0; r],
            empty: vec![0.0; r],
            k_mass: vec![BTreeMap::new(); r],
            types,
            joint: (self.opts.keep_joint && cells <= MAX_JOINT).then(Vec::new),
            work: 0.0,
        }
    }

    /// Evaluates chunk `c`.
    pub fn run_chunk(&self, c: usize) -> Result<ExactPartial, OsrbError> {
        let mut acc = self.empty_partial();
        let mut memo = Memo::new();
        for xi in self.chunk_range(c) {
            self.run_x(xi, &mut memo, &mut acc, true)?;
        }
        Ok(acc)
    }

    /// Enumerates round `i` sequences with positive encoder probability, hashing as it goes.
    fn enumerate(&self, i: usize, own: &[u32], x_own: &[u32], out: &mut Vec<Leaf>) {
        struct Ctx<'c> {
            model: &'c ProtocolModel,
            i: usize,
            fs: u64,
            base_new: u64,
            own: &'c [u32],
            x_own: &'c [u32],
            counts: (u64, u64, u64),
            out: &'c mut Vec<Leaf>,
        }
        fn dfs(c: &mut Ctx, t: usize, q: f64, f: u64, own_new: u64, h: (u64, u64, u64)) {
            if t == c.own.len() {
                c.out.push(Leaf {
                    f,
                    q,
                    b: prf_finish(h.0, c.counts.0),
                    k: prf_finish(h.1, c.counts.1),
                    w: if c.i == 1 { prf_finish(h.2, c.counts.2) } else { 0 },
                    own_new,
                });
                return;
            }
            let p_row = c.own[t] as usize;
            for v in 0..c.fs {
                let p = c.model.enc_p(c.i, p_row, c.x_own[t] as usize, v as usize);
                if p == 0.0 {
                    continue;
                }
                let s = c.own[t] as u64 * c.fs + v;
                let h2 = (prf_step(h.0, s), prf_step(h.1, s), if c.i == 1 { prf_step(h.2, s) } else { 0 });
                dfs(c, t + 1, q * p, f * c.fs + v, own_new * c.base_new + s, h2);
            }
        }
        let (hb, nb) = self.code.prf_parts(MapId::B(i));
        let (hk, nk) = self.code.prf_parts(MapId::K(i));
        let (hw, nw) = if i == 1 { self.code.prf_parts(MapId::Omega) } else { (0, 1) };
        let mut ctx = Ctx {
            model: self.model,
            i,
            fs: self.model.f_sizes[i - 1] as u64,
            base_new: self.view_base[i],
            own,
            x_own,
            counts: (nb, nk, nw),
            out,
        };
        dfs(&mut ctx, 0, 1.0, 0, 0, (hb, hk, hw));
    }

    /// Runs every round for input sequence `xi`; returns the final state mass.
    fn run_x(&self, xi: usize, memo: &mut Memo, acc: &mut ExactPartial, outputs: bool) -> Result<f64, OsrbError> {
        let model = self.model;
        let code = self.code;
        let n = self.n;
        let s = model.sizes;
        let mut xd = vec![0u32; n];
        Radix { base: s.x() as u64, n }.digits(xi as u64, &mut xd);
        let qx: f64 = xd.iter().map(|&x| model.qx[x as usize]).product();
        let ny_n = s.y().pow(n as u32);
        if qx == 0.0 {
            if outputs {
                if let Some(j) = &mut acc.joint {
                    j.extend(core::iter::repeat_n(0.0, ny_n));
                }
            }
            return Ok(0.0);
        }
        let x1: Vec<u32> = xd.iter().map(|&x| model.split_x(x as usize).0 as u32).collect();
        let x2: Vec<u32> = xd.iter().map(|&x| model.split_x(x as usize).1 as u32).collect();
        let scale = qx / self.normalizer;
        let mut states: Vec<(u64, u64, f64)> = vec![(0, 0, 1.0)];
        let mut leaves: Vec<Leaf> = Vec::new();
        let mut own_d = vec![0u32; n];
        let mut oth_d = vec![0u32; n];
        for i in 1..=code.rounds() {
            let fs = model.f_sizes[i - 1] as u64;
            let old = Radix { base: self.view_base[i - 1], n };
            let base_new = self.view_base[i];
            let owner = Terminal::owner(i);
            let (x_own, x_other) = if owner == Terminal::One { (&x1, &x2) } else { (&x2, &x1) };
            let mut next: Vec<(u64, u64, f64)> = Vec::new();
            for &(v1, v2, w) in &states {
                let (own_v, oth_v) = if owner == Terminal::One { (v1, v2) } else { (v2, v1) };
                old.digits(own_v, &mut own_d);
                old.digits(oth_v, &mut oth_d);
                leaves.clear();
                self.enumerate(i, &own_d, x_own, &mut leaves);
                acc.work += leaves.len() as f64;
                let key = (i, x_other.clone(), oth_d.clone());
                if !memo.contains_key(&key) {
                    let side = SideInfo { x_other, prefix: &oth_d };
                    let t = DecoderTable::build(model, code, i, &side, &self.opts.params)?;
                    memo.insert(key.clone(), t);
                }
                let table = &memo[&key];
                let mut emit = |leaf: &Leaf, bw: (u64, u64), wt: f64, empty: bool, acc: &mut ExactPartial| {
                    let (est, status) = table.lookup((bw.0, leaf.k, bw.1));
                    let mut fhat = 0u64;
                    let mut other_new = 0u64;
                    for t in 0..n {
                        fhat = fhat * fs + est[t] as u64;
                        other_new = other_new * base_new + oth_d[t] as u64 * fs + est[t] as u64;
                    }
                    let mass = w * wt;
                    let m = mass * scale;
                    if fhat != leaf.f {
                        acc.sw_err[i - 1] += m;
                    }
                    if status != DecodeStatus::Unique {
                        acc.fail[i - 1] += m;
                    }
                    if empty {
                        acc.empty[i - 1] += m;
                    }
                    *acc.k_mass[i - 1].entry(leaf.k).or_insert(0.0) += m;
                    next.push(if owner == Terminal::One { (leaf.own_new, other_new, mass) } else { (other_new, leaf.own_new, mass) });
                };
                let fixed = self.opts.b_fixed.as_ref().map(|b| b[i - 1]);
                match self.opts.omega_mode {
                    OmegaMode::BinOfF => {
                        for leaf in &leaves {
                            if fixed.is_none_or(|b| b == leaf.b) {
                                emit(leaf, (leaf.b, leaf.w), leaf.q, false, acc);
                            }
                        }
                    }
                    OmegaMode::Exogenous => {
                        let nb = if fixed.is_some() { 1 } else { code.count(MapId::B(i)).unwrap() };
                        let nw = if i == 1 { code.count(MapId::Omega).unwrap() } else { 1 };
                        let u = 1.0 / (nb as f64 * nw as f64);
                        let mut z: BTreeMap<(u64, u64), f64> = BTreeMap::new();
                        for leaf in leaves.iter().filter(|l| fixed.is_none_or(|b| b == l.b)) {
                            *z.entry((leaf.b, leaf.w)).or_insert(0.0) += leaf.q;
                        }
                        for leaf in leaves.iter().filter(|l| fixed.is_none_or(|b| b == l.b)) {
                            emit(leaf, (leaf.b, leaf.w), u * leaf.q / z[&(leaf.b, leaf.w)], false, acc);
                        }
                        let pairs = nb as u128 * nw as u128;
                        if (z.len() as u128) < pairs {
                            let extra = (pairs - z.len() as u128) as f64 * leaves.len() as f64;
                            acc.work += extra;
                            if acc.work > self.opts.budget {
                                return Err(OsrbError::Budget { needed: acc.work, budget: self.opts.budget });
                            }
                            // empty shared bins: the encoder falls back to the unconstrained law
                            let bs: Vec<u64> = match fixed {
                                Some(b) => vec![b],
                                None => (0..nb).collect(),
                            };
                            for &b in &bs {
                                for wv in 0..nw {
                                    if z.contains_key(&(b, wv)) {
                                        continue;
                                    }
                                    for leaf in &leaves {
                                        emit(leaf, (b, wv), u * leaf.q, true, acc);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if acc.work > self.opts.budget {
                return Err(OsrbError::Budget { needed: acc.work, budget: self.opts.budget });
            }
            next.sort_unstable_by_key(|e| (e.0, e.1));
            states.clear();
            for e in next {
                match states.last_mut() {
                    Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                    _ => states.push(e),
                }
            }
        }
        let total: f64 = states.iter().map(|e| e.2).sum();
        if !outputs {
            return Ok(qx * total);
        }
        let p = self.output_law(&xd, &states);
        let mut target = vec![1.0f64];
        let ny = s.y();
        for &x in &xd {
            let row = &model.kernel[x as usize * ny..(x as usize + 1) * ny];
            target = target.iter().flat_map(|&a| row.iter().map(move |&b| a * b)).collect();
        }
        let inv = 1.0 / self.normalizer;
        let l1: f64 = p.iter().zip(&target).map(|(a, b)| (a * inv - b).abs()).sum();
        acc.tv += qx * 0.5 * l1;
        acc.mass += qx * p.iter().sum::<f64>() * inv;
        if let Some(pows) = &self.type_pow {
            // key = Σ_t (n+1)^{cell_t}, maintained across an odometer over y
            let contrib: Vec<Vec<u128>> = xd.iter().map(|&x| (0..ny).map(|y| pows[x as usize * ny + y]).collect()).collect();
            let mut yd = vec![0usize; n];
            let mut key: u128 = contrib.iter().map(|c| c[0]).sum();
            for (yi, &m) in p.iter().enumerate() {
                if m > 0.0 {
                    acc.types.add(key, qx * m * inv);
                }
                if yi + 1 == p.len() {
                    break;
                }
                for t in (0..n).rev() {
                    key -= contrib[t][yd[t]];
                    yd[t] += 1;
                    if yd[t] < ny {
                        key += contrib[t][yd[t]];
                        break;
                    }
                    yd[t] = 0;
                    key += contrib[t][0];
                }
            }
        }
        if let Some(j) = &mut acc.joint {
            j.extend(p.iter().map(|&m| qx * m * inv));
        }
        Ok(qx * total)
    }

    /// `P(yⁿ | xⁿ)` (unnormalized in conditional mode) from the final views.
    fn output_law(&self, xd: &[u32], states: &[(u64, u64, f64)]) -> Vec<f64> {
        let model = self.model;
        let n = self.n;
        let (a1, a2) = Self::sigma_dims(model);
        let sig = a1 * a2;
        let ny = model.sizes.y();
        let views = Radix { base: model.f_cells as u64, n };
        let mut d1 = vec![0u32; n];
        let mut d2 = vec![0u32; n];
        let mut cur = vec![0.0f64; sig.pow(n as u32)];
        for &(v1, v2, w) in states {
            views.digits(v1, &mut d1);
            views.digits(v2, &mut d2);
            let mut idx = 0usize;
            for t in 0..n {
                let a = if a1 > 1 { d1[t] as usize } else { 0 };
                let b = if a2 > 1 { d2[t] as usize } else { 0 };
                idx = idx * sig + a * a2 + b;
            }
            cur[idx] += w;
        }
        for (t, &x) in xd.iter().enumerate() {
            let outer = ny.pow(t as u32);
            let inner = sig.pow((n - 1 - t) as u32);
            let m: Vec<f64> = (0..ny * sig)
                .map(|c| {
                    let (y, s) = (c / sig, c % sig);
                    model.out_p(s / a2, s % a2, x as usize, y)
                })
                .collect();
            let mut nxt = vec![0.0f64; outer * ny * inner];
            for o in 0..outer {
                for s in 0..sig {
                    let src = &cur[(o * sig + s) * inner..(o * sig + s + 1) * inner];
                    if src.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for y in 0..ny {
                        let c = m[y * sig + s];
                        if c == 0.0 {
                            continue;
                        }
                        let dst = &mut nxt[(o * ny + y) * inner..(o * ny + y + 1) * inner];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d += c * v;
                        }
                    }
                }
            }
            cur = nxt;
        }
        cur
    }

    /// Combines chunk results given in chunk order.
    pub fn finish(&self, parts: Vec<ExactPartial>) -> ProtocolResult {
        let mut acc = self.empty_partial();
        for p in parts {
            acc.merge(p);
        }
        let n = self.n;
        let k_entropy_rate = acc
            .k_mass
            .iter()
            .map(|m| {
                let total: f64 = m.values().sum();
                if total > 0.0 {
                    m.values().map(|&v| neg_xlogx(v / total)).sum::<f64>() / n as f64
                } else {
                    0.0
                }
            })
            .collect();
        let empirical = match (&self.type_pow, acc.types) {
            (Some(pows), types) => {
                let target = self.model.target_letter();
                let tv_of = |key: u128| {
                    let l1: f64 = pows
                        .iter()
                        .zip(&target)
                        .map(|(&p, &q)| {
                            let c = (key / p) % (n as u128 + 1);
                            (c as f64 / n as f64 - q).abs()
                        })
                        .sum();
                    (0.5 * l1).clamp(0.0, 1.0)
                };
                let pairs: Vec<(f64, f64)> = match types {
                    TypeAcc::Dense(v) => v.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(k, &m)| (tv_of(k as u128), m)).collect(),
                    TypeAcc::Sparse(s) => s.into_iter().map(|(k, m)| (tv_of(k), m)).collect(),
                    TypeAcc::Off => Vec::new(),
                };
                weighted_stats(pairs)
            }
            (None, _) => None,
        };
        ProtocolResult {
            mode: RunMode::Exact,
            omega_mode: self.opts.omega_mode,
            n,
            tv_to_target: Some(acc.tv.clamp(0.0, 1.0)),
            total_mass: Some(acc.mass),
            sw_error_rate: acc.sw_err.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            decode_failure_rate: acc.fail.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            empty_bin_rate: acc.empty.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            empirical,
            range_rates: RangeRates::of(self.code),
            k_entropy_rate,
            trials: 0,
            induced: acc.joint,
            b_fixed: self.opts.b_fixed.clone(),
        }
    }
}

/// Exact induced law of the protocol under `code`, evaluated sequentially.
pub fn exact_induced_pmf(model: &ProtocolModel, code: &BinningCode, opts: &ExactOptions) -> Result<ProtocolResult, OsrbError> {
    let plan = ExactPlan::new(model, code, opts.clone())?;
    let parts = (0..plan.chunks()).map(|c| plan.run_chunk(c)).collect::<Result<Vec<_>, _>>()?;
    Ok(plan.finish(parts))
}

/// TVs of both common-randomness realizations and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGap {
    pub tv_bin_of_f: f64,
    pub tv_exogenous: f64,
    pub gap: f64,
}

pub fn omega_mode_gap(model: &ProtocolModel, code: &BinningCode, opts: &ExactOptions) -> Result<ModeGap, OsrbError> {
    let run = |mode| {
        let o = ExactOptions { omega_mode: mode, empirical: false, keep_joint: false, ..opts.clone() };
        exact_induced_pmf(model, code, &o).map(|r| r.tv_to_target.unwrap_or(1.0))
    };
    let a = run(OmegaMode::BinOfF)?;
    let b = run(OmegaMode::Exogenous)?;
    Ok(ModeGap { tv_bin_of_f: a, tv_exogenous: b, gap: b - a })
}

/// The all-zero bin vector followed by `candidates` uniform draws, or every vector when
/// there are at most `candidates + 1` of them.
pub fn candidate_b_vectors(code: &BinningCode, candidates: usize, seed: u64) -> Result<(Vec<Vec<u64>>, bool), OsrbError> {
    if code.family() != BinFamily::Prf {
        return Err(OsrbError::Unsupported("bin vectors are enumerated for hashed bins only".into()));
    }
    let counts: Vec<u64> = (1..=code.rounds()).map(|i| code.count(MapId::B(i)).unwrap()).collect();
    let total = counts.iter().fold(1u128, |a, &c| a.saturating_mul(c as u128));
    if total <= candidates as u128 + 1 {
        let mut out = Vec::with_capacity(total as usize);
        for mut idx in 0..total as u64 {
            let mut v = vec![0u64; counts.len()];
            for j in (0..counts.len()).rev() {
                v[j] = idx % counts[j];
                idx /= counts[j];
            }
            out.push(v);
        }
        return Ok((out, true));
    }
    let mut out = vec![vec![0u64; counts.len()]];
    for c in 0..candidates {
        let mut rng = Stream::derive(seed, c as u64, 0xb5e1);
        out.push(counts.iter().map(|&m| rng.below(m)).collect());
    }
    Ok((out, false))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodB {
    pub b: Vec<u64>,
    pub tv: f64,
    /// Mean TV over every evaluated vector.
    pub mean_tv: f64,
    pub evaluated: Vec<(Vec<u64>, f64)>,
    pub exhaustive: bool,
}

/// Picks the evaluated bin vector with the smallest conditional TV (ties: first evaluated).
pub fn select_good_b(evaluated: Vec<(Vec<u64>, f64)>, exhaustive: bool) -> GoodB {
    let mut best = 0;
    for (i, e) in evaluated.iter().enumerate() {
        if e.1 < evaluated[best].1 {
            best = i;
        }
    }
    let mean_tv = evaluated.iter().map(|e| e.1).sum::<f64>() / evaluated.len() as f64;
    GoodB { b: evaluated[best].0.clone(), tv: evaluated[best].1, mean_tv, evaluated, exhaustive }
}

/// Derandomizes the shared bins by evaluating candidate vectors exactly.
pub fn find_good_b(
    model: &ProtocolModel,
    code: &BinningCode,
    opts: &ExactOptions,
    candidates: usize,
    seed: u64,
) -> Result<GoodB, OsrbError> {
    let (cands, exhaustive) = candidate_b_vectors(code, candidates, seed)?;
    let mut evaluated = Vec::with_capacity(cands.len());
    for b in cands {
        let o = ExactOptions { b_fixed: Some(b.clone()), empirical: false, keep_joint: false, ..opts.clone() };
        let tv = exact_induced_pmf(model, code, &o)?.tv_to_target.unwrap_or(1.0);
        evaluated.push((b, tv));
    }
    Ok(select_good_b(evaluated, exhaustive))
}

/// Summarizes Monte-Carlo traces (in trial order).
pub fn summarize_traces(model: &ProtocolModel, code: &BinningCode, traces: &[Trace], b_fixed: Option<&BVector>) -> ProtocolResult {
    let r = code.rounds();
    let count = traces.len().max(1) as f64;
    let rate = |pred: &dyn Fn(&super::protocol::RoundTrace) -> bool, i: usize| {
        traces.iter().filter(|t| pred(&t.rounds[i])).count() as f64 / count
    };
    let mut k_entropy_rate = Vec::with_capacity(r);
    for i in 0..r {
        let mut m: BTreeMap<&BinValue, usize> = BTreeMap::new();
        for t in traces {
            *m.entry(&t.rounds[i].k).or_insert(0) += 1;
        }
        let h: f64 = m.values().map(|&c| neg_xlogx(c as f64 / count)).sum();
        k_entropy_rate.push(h / code.n() as f64);
    }
    let tvs: Vec<(f64, f64)> = traces.iter().map(|t| (empirical_tv(model, &t.x1, &t.x2, &t.y1, &t.y2), 1.0)).collect();
    ProtocolResult {
        mode: RunMode::MonteCarlo,
        omega_mode: OmegaMode::Exogenous,
        n: code.n(),
        tv_to_target: None,
        total_mass: None,
        sw_error_rate: (0..r).map(|i| rate(&|rt| rt.failed(), i)).collect(),
        decode_failure_rate: (0..r).map(|i| rate(&|rt| rt.status.is_error(), i)).collect(),
        empty_bin_rate: (0..r).map(|i| rate(&|rt| rt.empty_bin, i)).collect(),
        empirical: weighted_stats(tvs),
        range_rates: RangeRates::of(code),
        k_entropy_rate,
        trials: traces.len(),
        induced: None,
        b_fixed: b_fixed.and_then(|b| {
            b.iter()
                .map(|v| match v {
                    BinValue::Index(i) => Some(*i),
                    BinValue::Syndrome(_) => None,
                })
                .collect()
        }),
    }
}

/// Sequential Monte-Carlo run: trial `u` uses the stream `(seed, u)`.
pub fn monte_carlo(
    model: &ProtocolModel,
    code: &BinningCode,
    params: &TypicalityParams,
    trials: usize,
    seed: u64,
    b_fixed: Option<&BVector>,
) -> Result<(ProtocolResult, Vec<Trace>), OsrbError> {
    let traces = (0..trials as u64)
        .map(|u| monte_carlo_trial(model, code, params, b_fixed, seed, u))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((summarize_traces(model, code, &traces, b_fixed), traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osrb::code::{make_code, CodeRates};
    use crate::region::{induced_channel, AuxScheme, ChannelSpec, CondTable, Sizes};

    fn bsc_scheme(a: f64, b: f64) -> (ChannelSpec, AuxScheme) {
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
    fn constant_scheme_with_exact_marginal_has_zero_tv() {
        let base = ChannelSpec::from_tables(&[0.3, 0.7], 2, 1, vec![0.8, 0.2, 0.4, 0.6], 1, 2).unwrap();
        let sch = AuxScheme::constant(&base, 1);
        // the target is whatever the local outputs realize
        let ch = induced_channel(base.q_x(), &sch).unwrap();
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code(&sch, &CodeRates::new(0.5, vec![0.5], vec![0.25]).unwrap(), 5, 3).unwrap();
        let r = exact_induced_pmf(&model, &code, &ExactOptions::default()).unwrap();
        assert!(r.tv_to_target.unwrap() < 1e-12);
        assert!((r.total_mass.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.sw_error_rate, vec![0.0]);
    }

    #[test]
    fn mass_is_conserved() {
        let (ch, sch) = bsc_scheme(0.3, 0.05);
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        for (seed, n) in [(1u64, 3usize), (2, 5), (3, 6)] {
            let code = make_code(&sch, &CodeRates::new(0.4, vec![0.5], vec![0.3]).unwrap(), n, seed).unwrap();
            for opts in [
                ExactOptions::default(),
                ExactOptions { b_fixed: Some(vec![0]), ..Default::default() },
                ExactOptions { omega_mode: OmegaMode::BinOfF, ..Default::default() },
                ExactOptions { omega_mode: OmegaMode::BinOfF, b_fixed: Some(vec![1]), ..Default::default() },
            ] {
                let r = exact_induced_pmf(&model, &code, &opts).unwrap();
                assert!((r.total_mass.unwrap() - 1.0).abs() < 1e-9, "{opts:?}: {:?}", r.total_mass);
                let tv = r.tv_to_target.unwrap();
                assert!((0.0..=1.0).contains(&tv));
            }
        }
    }

    #[test]
    fn degenerate_last_round_changes_nothing() {
        let mut rng = Stream::new(12, 0);
        let ch = ChannelSpec::from_tables(&[0.25, 0.25, 0.25, 0.25], 2, 2, {
            let mut k = Vec::new();
            for _ in 0..4 {
                k.extend(rng.simplex(2));
            }
            k
        }, 1, 2)
        .unwrap();
        let one = AuxScheme::random(ch.sizes(), &[2], &mut rng).unwrap();
        // same first round, a constant second round, and outputs that ignore it
        let two = AuxScheme::new(
            ch.sizes(),
            vec![2, 1],
            vec![one.round_table(1).clone(), CondTable::repeated(4, &[1.0]).unwrap()],
            one.y1_table().clone(),
            one.y2_table().clone(),
        )
        .unwrap();
        let m1 = ProtocolModel::new(&ch, &one).unwrap();
        let m2 = ProtocolModel::new(&ch, &two).unwrap();
        let c1 = make_code(&one, &CodeRates::new(0.3, vec![0.6], vec![0.2]).unwrap(), 4, 8).unwrap();
        let c2 = make_code(&two, &CodeRates::new(0.3, vec![0.6, 0.5], vec![0.2, 0.4]).unwrap(), 4, 8).unwrap();
        let opts = ExactOptions { keep_joint: true, ..Default::default() };
        let a = exact_induced_pmf(&m1, &c1, &opts).unwrap().induced.unwrap();
        let b = exact_induced_pmf(&m2, &c2, &opts).unwrap().induced.unwrap();
        assert_eq!(a.len(), b.len());
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn chunked_evaluation_matches_sequential() {
        let (ch, sch) = bsc_scheme(0.3, 0.05);
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code(&sch, &CodeRates::new(0.4, vec![0.5], vec![0.3]).unwrap(), 7, 4).unwrap();
        let opts = ExactOptions::default();
        let plan = ExactPlan::new(&model, &code, opts.clone()).unwrap();
        assert!(plan.chunks() > 1);
        let parts: Vec<_> = (0..plan.chunks()).rev().map(|c| plan.run_chunk(c).unwrap()).collect();
        let parts: Vec<_> = parts.into_iter().rev().collect();
        assert_eq!(plan.finish(parts), exact_induced_pmf(&model, &code, &opts).unwrap());
    }

    #[test]
    fn good_b_is_no_worse_than_average() {
        let (ch, sch) = bsc_scheme(0.3, 0.05);
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code(&sch, &CodeRates::new(0.3, vec![0.5], vec![0.4]).unwrap(), 5, 2).unwrap();
        let g = find_good_b(&model, &code, &ExactOptions::default(), 100, 1).unwrap();
        assert!(g.exhaustive);
        assert_eq!(g.evaluated.len() as u64, code.count(MapId::B(1)).unwrap());
        assert!(g.tv <= g.mean_tv);
        assert!(g.evaluated.iter().all(|e| e.1 >= g.tv));
    }

    #[test]
    fn exact_scheme_induced_channel_is_reproduced_with_plenty_of_rate() {
        // F = X passed through BSC; with both rates large every decode is exact and the
        // shared bins only see uniform noise
        let (_, sch) = bsc_scheme(0.0, 0.2);
        let ch = induced_channel(&ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![1.0, 0.0, 0.0, 1.0], 1, 2).unwrap().q_x().clone(), &sch).unwrap();
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code(&sch, &CodeRates::new(0.0, vec![3.0], vec![0.0]).unwrap(), 6, 1).unwrap();
        let r = exact_induced_pmf(&model, &code, &ExactOptions::default()).unwrap();
        assert!(r.tv_to_target.unwrap() < 1e-12, "{r:?}");
        assert!(r.sw_error_rate[0] < 1e-12);
        let gap = omega_mode_gap(&model, &code, &ExactOptions::default()).unwrap();
        assert!(gap.gap.abs() < 1e-12);
    }
}
