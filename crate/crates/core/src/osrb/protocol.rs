//! Sampled runs of the interactive protocol.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::code::{BinFamily, BinValue, BinningCode, MapId};
use super::decode::{sw_decode, DecodeStatus, ObservedBins, SideInfo, TypicalityParams, ENUM_LIMIT};
use super::gf2;
use super::model::ProtocolModel;
use super::OsrbError;
use crate::region::Terminal;
use crate::rng::Stream;

/// Rejection-sampling attempts before a bin is treated as empty.
const REJECTION_TRIES: usize = 1 << 20;

/// Shared bin indices `b_1..b_r`.
pub type BVector = Vec<BinValue>;

/// What happened in one round of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    /// Sequence drawn by the active terminal.
    pub f: Vec<u32>,
    /// The passive terminal's estimate of it.
    pub f_hat: Vec<u32>,
    pub k: BinValue,
    pub status: DecodeStatus,
    /// The shared bins held no sequence of positive probability, so the encoder drew
    /// from the unconstrained law.
    pub empty_bin: bool,
}

impl RoundTrace {
    /// The estimate differs from the transmitted sequence.
    pub fn failed(&self) -> bool {
        self.f != self.f_hat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub x1: Vec<u32>,
    pub x2: Vec<u32>,
    pub y1: Vec<u32>,
    pub y2: Vec<u32>,
    pub rounds: Vec<RoundTrace>,
}

impl Trace {
    pub fn n(&self) -> usize {
        self.x1.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub y1: Vec<u32>,
    pub y2: Vec<u32>,
    pub trace: Trace,
}

/// Draws `(x1ⁿ, x2ⁿ)` i.i.d. from the channel input law.
pub fn sample_inputs(model: &ProtocolModel, n: usize, rng: &mut Stream) -> (Vec<u32>, Vec<u32>) {
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.categorical(&model.qx).expect("input law has mass");
        let (a, b) = model.split_x(x);
        x1.push(a as u32);
        x2.push(b as u32);
    }
    (x1, x2)
}

/// A trace drawn straight from the i.i.d. target `q(x)q(y|x)`, with no rounds.
pub fn sample_target_trace(model: &ProtocolModel, n: usize, rng: &mut Stream) -> Trace {
    let (x1, x2) = sample_inputs(model, n, rng);
    let ny = model.sizes.y();
    let (mut y1, mut y2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for t in 0..n {
        let x = x1[t] as usize * model.sizes.x2 + x2[t] as usize;
        let y = rng.categorical(&model.kernel[x * ny..(x + 1) * ny]).expect("kernel row is a pmf");
        let (a, b) = model.split_y(y);
        y1.push(a as u32);
        y2.push(b as u32);
    }
    Trace { x1, x2, y1, y2, rounds: Vec::new() }
}

/// A uniformly drawn bin index of map `id`.
pub(crate) fn draw_bin(code: &BinningCode, id: MapId, rng: &mut Stream) -> BinValue {
    match code.family() {
        BinFamily::Prf => BinValue::Index(rng.below(code.count(id).expect("hashed counts fit"))),
        BinFamily::Linear => {
            let bits = code.parity_bits(id);
            let mut v = vec![0u64; gf2::words(bits)];
            for t in 0..bits {
                gf2::set(&mut v, t, rng.below(2) == 1);
            }
            BinValue::Syndrome(v)
        }
    }
}

/// Uniform `ω` and `b_1..b_r`.
pub(crate) fn draw_shared(code: &BinningCode, rng: &mut Stream) -> (BinValue, BVector) {
    let omega = draw_bin(code, MapId::Omega, rng);
    let b = (1..=code.rounds()).map(|i| draw_bin(code, MapId::B(i), rng)).collect();
    (omega, b)
}

fn trivial(code: &BinningCode, id: MapId) -> bool {
    match code.family() {
        BinFamily::Prf => code.count(id) == Some(1),
        BinFamily::Linear => code.parity_bits(id) == 0,
    }
}

/// Draws round `i`'s sequence from the scheme law restricted to the shared bins.
fn encode(
    model: &ProtocolModel,
    code: &BinningCode,
    round: usize,
    prefix: &[u32],
    x_own: &[u32],
    shared: &[(MapId, &BinValue)],
    rng: &mut Stream,
) -> (Vec<u32>, bool) {
    let n = code.n();
    let row = |t: usize| {
        let p = if round == 1 { 0 } else { prefix[t] as usize };
        model.enc[round - 1].row(p * model.own_size(round) + x_own[t] as usize)
    };
    let iid = |rng: &mut Stream| -> Vec<u32> {
        (0..n).map(|t| rng.categorical(row(t)).expect("table rows are pmfs") as u32).collect()
    };
    let active: Vec<(MapId, &BinValue)> = shared.iter().copied().filter(|(id, _)| !trivial(code, *id)).collect();
    if active.is_empty() {
        return (iid(rng), false);
    }
    let matches = |f: &[u32]| active.iter().all(|(id, v)| code.bin(*id, prefix, f) == **v);
    let sup: Vec<Vec<u32>> = (0..n)
        .map(|t| row(t).iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(f, _)| f as u32).collect())
        .collect();
    let size = sup.iter().fold(1u64, |a, s| a.saturating_mul(s.len() as u64));
    if size <= ENUM_LIMIT {
        let weight = |f: &[u32]| -> f64 { f.iter().enumerate().map(|(t, &s)| row(t)[s as usize]).product() };
        let mut total = 0.0;
        odometer(&sup, |f| {
            if matches(f) {
                total += weight(f);
            }
        });
        if !(total > 0.0) {
            return (iid(rng), true);
        }
        let mut u = rng.uniform() * total;
        let mut pick: Option<Vec<u32>> = None;
        let mut last: Option<Vec<u32>> = None;
        odometer(&sup, |f| {
            if pick.is_some() || !matches(f) {
                return;
            }
            let w = weight(f);
            if w > 0.0 {
                last = Some(f.to_vec());
                if u < w {
                    pick = Some(f.to_vec());
                }
                u -= w;
            }
        });
        return (pick.or(last).expect("positive total"), false);
    }
    let mut draw = iid(rng);
    for _ in 0..REJECTION_TRIES {
        if matches(&draw) {
            return (draw, false);
        }
        draw = iid(rng);
    }
    (draw, true)
}

fn odometer(sup: &[Vec<u32>], mut visit: impl FnMut(&[u32])) {
    if sup.iter().any(|s| s.is_empty()) {
        return;
    }
    let n = sup.len();
    let mut idx = vec![0usize; n];
    let mut cur: Vec<u32> = sup.iter().map(|s| s[0]).collect();
    'outer: loop {
        visit(&cur);
        for t in (0..n).rev() {
            idx[t] += 1;
            if idx[t] < sup[t].len() {
                cur[t] = sup[t][idx[t]];
                continue 'outer;
            }
            idx[t] = 0;
            cur[t] = sup[t][0];
        }
        return;
    }
}

/// One run with shared randomness `ω` and bins `b`, inputs given.
///
/// Decode errors do not stop the run: the passive terminal continues with the
/// substitute estimate and the event is recorded in the trace.
#[allow(clippy::too_many_arguments)]
pub fn run_protocol_b(
    model: &ProtocolModel,
    code: &BinningCode,
    x1: &[u32],
    x2: &[u32],
    omega: &BinValue,
    b: &BVector,
    params: &TypicalityParams,
    rng: &mut Stream,
) -> Result<ProtocolRun, OsrbError> {
    let n = code.n();
    if x1.len() != n || x2.len() != n {
        return Err(OsrbError::Incompatible(format!("inputs must have length {n}")));
    }
    if b.len() != code.rounds() || code.f_sizes() != model.f_sizes() {
        return Err(OsrbError::Incompatible("code, scheme and bin vector disagree on rounds".into()));
    }
    if !code.in_range(MapId::Omega, omega) || b.iter().enumerate().any(|(i, v)| !code.in_range(MapId::B(i + 1), v)) {
        return Err(OsrbError::Incompatible("shared index out of range".into()));
    }
    let s = model.sizes;
    if x1.iter().any(|&v| v as usize >= s.x1) || x2.iter().any(|&v| v as usize >= s.x2) {
        return Err(OsrbError::Incompatible("input symbol outside its alphabet".into()));
    }
    // flattened (f_1..f_i) as seen by each terminal
    let mut view1 = vec![0u32; n];
    let mut view2 = vec![0u32; n];
    let mut rounds = Vec::with_capacity(code.rounds());
    for i in 1..=code.rounds() {
        let (own_view, other_view, x_own, x_other) = match Terminal::owner(i) {
            Terminal::One => (&view1, &view2, x1, x2),
            Terminal::Two => (&view2, &view1, x2, x1),
        };
        let mut shared = vec![(MapId::B(i), &b[i - 1])];
        if i == 1 {
            shared.push((MapId::Omega, omega));
        }
        let (f, empty_bin) = encode(model, code, i, own_view, x_own, &shared, rng);
        let k = code.bin(MapId::K(i), own_view, &f);
        let bins = ObservedBins {
            b: b[i - 1].clone(),
            k: k.clone(),
            omega: (i == 1).then(|| omega.clone()),
        };
        let side = SideInfo { x_other, prefix: other_view };
        let d = sw_decode(model, code, i, &bins, &side, params)?;
        let fs = model.f_sizes[i - 1] as u32;
        let (new_own, new_other): (Vec<u32>, Vec<u32>) = (
            own_view.iter().zip(&f).map(|(p, v)| p * fs + v).collect(),
            other_view.iter().zip(&d.estimate).map(|(p, v)| p * fs + v).collect(),
        );
        match Terminal::owner(i) {
            Terminal::One => (view1, view2) = (new_own, new_other),
            Terminal::Two => (view2, view1) = (new_own, new_other),
        }
        rounds.push(RoundTrace { f, f_hat: d.estimate, k, status: d.status, empty_bin });
    }
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    for t in 0..n {
        let r1 = model.out1.row(view1[t] as usize * s.x1 + x1[t] as usize);
        let r2 = model.out2.row(view2[t] as usize * s.x2 + x2[t] as usize);
        y1.push(rng.categorical(r1).expect("pmf row") as u32);
        y2.push(rng.categorical(r2).expect("pmf row") as u32);
    }
    let trace = Trace { x1: x1.to_vec(), x2: x2.to_vec(), y1: y1.clone(), y2: y2.clone(), rounds };
    Ok(ProtocolRun { y1, y2, trace })
}

/// Trial `unit` of a Monte-Carlo experiment: fresh inputs and shared randomness (unless
/// `b_fixed`) from the stream `(seed, unit)`.
pub fn monte_carlo_trial(
    model: &ProtocolModel,
    code: &BinningCode,
    params: &TypicalityParams,
    b_fixed: Option<&BVector>,
    seed: u64,
    unit: u64,
) -> Result<Trace, OsrbError> {
    let mut rng = Stream::new(seed, unit);
    let (x1, x2) = sample_inputs(model, code.n(), &mut rng);
    let (omega, b) = draw_shared(code, &mut rng);
    let b = b_fixed.cloned().unwrap_or(b);
    Ok(run_protocol_b(model, code, &x1, &x2, &omega, &b, params, &mut rng)?.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osrb::code::{make_code, make_code_with, CodeRates};
    use crate::region::{AuxScheme, ChannelSpec, CondTable, Sizes};

    fn copy_setup() -> (ChannelSpec, AuxScheme) {
        let ch = ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![1.0, 0.0, 0.0, 1.0], 1, 2).unwrap();
        let s = Sizes { x1: 2, x2: 1, y1: 1, y2: 2 };
        let sch = AuxScheme::new(
            s,
            vec![2],
            vec![CondTable::deterministic(2, 2, |x| x).unwrap()],
            CondTable::repeated(4, &[1.0]).unwrap(),
            CondTable::deterministic(2, 2, |f| f).unwrap(),
        )
        .unwrap();
        (ch, sch)
    }

    fn copy_match_rate(rate: f64, n: usize, trials: u64) -> f64 {
        let (ch, sch) = copy_setup();
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code_with(&sch, &CodeRates::new(0.0, vec![rate], vec![0.0]).unwrap(), n, 7, BinFamily::Linear)
            .unwrap();
        let hits = (0..trials)
            .filter(|&u| {
                let t = monte_carlo_trial(&model, &code, &TypicalityParams::default(), None, 3, u).unwrap();
                t.y2 == t.x1
            })
            .count();
        hits as f64 / trials as f64
    }

    #[test]
    fn copy_target_succeeds_above_entropy() {
        assert!(copy_match_rate(1.2, 100, 100) > 0.9);
    }

    #[test]
    fn copy_target_fails_without_rate() {
        assert!(copy_match_rate(0.0, 100, 50) < 0.05);
    }

    #[test]
    fn constant_auxiliary_outputs_are_local() {
        let ch = ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![0.7, 0.3, 0.2, 0.8], 1, 2).unwrap();
        let sch = AuxScheme::constant(&ch, 1);
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code(&sch, &CodeRates::new(0.0, vec![0.0], vec![0.0]).unwrap(), 6, 1).unwrap();
        let mut rng = Stream::new(1, 1);
        let run = run_protocol_b(
            &model,
            &code,
            &[0, 1, 0, 1, 1, 0],
            &[0; 6],
            &BinValue::Index(0),
            &vec![BinValue::Index(0)],
            &TypicalityParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(run.trace.rounds[0].f, vec![0; 6]);
        assert!(!run.trace.rounds[0].failed());
    }

    #[test]
    fn encoder_respects_shared_bins() {
        let (ch, _) = copy_setup();
        // F1 uniform and independent of X1, so every bin is reachable
        let s = Sizes { x1: 2, x2: 1, y1: 1, y2: 2 };
        let sch = AuxScheme::new(
            s,
            vec![2],
            vec![CondTable::repeated(2, &[0.5, 0.5]).unwrap()],
            CondTable::repeated(4, &[1.0]).unwrap(),
            CondTable::repeated(2, &[0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let code = make_code(&sch, &CodeRates::new(0.25, vec![0.5], vec![0.25]).unwrap(), 8, 5).unwrap();
        for u in 0..30 {
            let mut rng = Stream::new(2, u);
            let (omega, b) = draw_shared(&code, &mut rng);
            let run = run_protocol_b(&model, &code, &[0; 8], &[0; 8], &omega, &b, &TypicalityParams::default(), &mut rng)
                .unwrap();
            let f = &run.trace.rounds[0].f;
            if !run.trace.rounds[0].empty_bin {
                assert_eq!(code.bin(MapId::B(1), &[], f), b[0]);
                assert_eq!(code.bin(MapId::Omega, &[], f), omega);
            }
        }
    }
}
