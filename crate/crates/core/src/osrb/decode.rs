//! Slepian–Wolf decoding by weak joint typicality.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::code::{BinFamily, BinValue, BinningCode, MapId};
use super::gf2;
use super::model::ProtocolModel;
use super::OsrbError;
use crate::rng::{mix64, Stream};

/// Most candidate sequences enumerated by one decode.
pub const ENUM_LIMIT: u64 = 1 << 22;
/// Largest null-space dimension enumerated exhaustively by the linear decoder.
pub const NULLITY_LIMIT: usize = 16;
const PROBES: usize = 64;
const PROBE_TRIES: usize = 1 << 16;

/// Typical-set slack `δ` in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalityParams {
    delta: f64,
}

impl TypicalityParams {
    pub fn new(delta: f64) -> Result<Self, OsrbError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(OsrbError::InvalidDelta(delta));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for TypicalityParams {
    fn default() -> Self {
        Self { delta: 0.05 }
    }
}

/// Bin indices seen by the decoder of one round; `omega` only in round 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedBins {
    pub b: BinValue,
    pub k: BinValue,
    pub omega: Option<BinValue>,
}

/// What the decoding terminal knows: its own input and its estimates of earlier rounds
/// as flattened prefix symbols (ignored in round 1).
#[derive(Debug, Clone, Copy)]
pub struct SideInfo<'a> {
    pub x_other: &'a [u32],
    pub prefix: &'a [u32],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    /// Exactly one typical candidate matches every bin.
    Unique,
    /// Several typical candidates; the smallest is returned.
    Ambiguous,
    /// Matching candidates exist but none is typical; the smallest is returned.
    NotTypical,
    /// No support-consistent sequence matches the bins.
    Empty,
    /// The candidate set was too large to settle either way.
    Unresolved,
}

impl DecodeStatus {
    pub fn is_error(self) -> bool {
        self != DecodeStatus::Unique
    }
}

/// Decoder output. On error `estimate` is the substitute the protocol continues with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub estimate: Vec<u32>,
    pub status: DecodeStatus,
}

/// Per-position symbols with positive joint probability given the side information.
fn support(model: &ProtocolModel, round: usize, side: &SideInfo, n: usize) -> Vec<Vec<u32>> {
    let fs = model.f_sizes[round - 1];
    (0..n)
        .map(|t| {
            let p = if round == 1 { 0 } else { side.prefix[t] as usize };
            (0..fs as u32)
                .filter(|&f| model.dec_p(round, p, side.x_other[t] as usize, f as usize) > 0.0)
                .collect()
        })
        .collect()
}

fn fallback(sup: &[Vec<u32>]) -> Vec<u32> {
    sup.iter().map(|s| s.first().copied().unwrap_or(0)).collect()
}

/// `−log₂ p(prefix, f, x_other)` summed over the block.
fn neg_loglik(model: &ProtocolModel, round: usize, side: &SideInfo, cand: &[u32]) -> f64 {
    cand.iter()
        .enumerate()
        .map(|(t, &f)| {
            let p = if round == 1 { 0 } else { side.prefix[t] as usize };
            -libm::log2(model.dec_p(round, p, side.x_other[t] as usize, f as usize))
        })
        .sum()
}

#[inline]
fn typical(model: &ProtocolModel, round: usize, ll: f64, n: usize, delta: f64) -> bool {
    (ll / n as f64 - model.decoder_entropy(round)).abs() <= delta
}

fn support_size(sup: &[Vec<u32>]) -> u64 {
    sup.iter().fold(1u64, |acc, s| acc.saturating_mul(s.len() as u64))
}

/// Visits every sequence of the support product in lexicographic order.
fn for_each_candidate(sup: &[Vec<u32>], mut visit: impl FnMut(&[u32])) {
    if sup.iter().any(|s| s.is_empty()) {
        return;
    }
    let n = sup.len();
    let mut idx = vec![0usize; n];
    let mut cand: Vec<u32> = sup.iter().map(|s| s[0]).collect();
    loop {
        visit(&cand);
        let mut t = n;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < sup[t].len() {
                cand[t] = sup[t][idx[t]];
                break;
            }
            idx[t] = 0;
            cand[t] = sup[t][0];
        }
    }
}

fn check_inputs(model: &ProtocolModel, code: &BinningCode, round: usize, bins: &ObservedBins, side: &SideInfo) -> Result<(), OsrbError> {
    let n = code.n();
    if round == 0 || round > code.rounds() || code.f_sizes() != model.f_sizes() {
        return Err(OsrbError::Incompatible(format!("round {round} is not part of this code")));
    }
    if side.x_other.len() != n || (round > 1 && side.prefix.len() != n) {
        return Err(OsrbError::Incompatible("side information length differs from the blocklength".into()));
    }
    let mut checks = vec![(MapId::B(round), &bins.b), (MapId::K(round), &bins.k)];
    match (&bins.omega, round) {
        (Some(w), 1) => checks.push((MapId::Omega, w)),
        (None, 1) => return Err(OsrbError::Incompatible("round 1 needs the common-randomness index".into())),
        _ => {}
    }
    for (id, v) in checks {
        if !code.in_range(id, v) {
            return Err(OsrbError::Incompatible(format!("bin {v:?} out of range for {id:?}")));
        }
    }
    Ok(())
}

/// Recovers round `round`'s sequence from its bins and the decoder's side information.
///
/// A decode error is reported through [`Decoded::status`], not as `Err`.
pub fn sw_decode(
    model: &ProtocolModel,
    code: &BinningCode,
    round: usize,
    bins: &ObservedBins,
    side: &SideInfo,
    params: &TypicalityParams,
) -> Result<Decoded, OsrbError> {
    check_inputs(model, code, round, bins, side)?;
    let sup = support(model, round, side, code.n());
    Ok(match code.family() {
        BinFamily::Prf => decode_prf(model, code, round, bins, side, params, &sup),
        BinFamily::Linear => decode_linear(model, code, round, bins, side, params, &sup),
    })
}

fn prf_bins(bins: &ObservedBins) -> (u64, u64, u64) {
    let idx = |v: &BinValue| match v {
        BinValue::Index(i) => *i,
        BinValue::Syndrome(_) => unreachable!("checked by in_range"),
    };
    (idx(&bins.b), idx(&bins.k), bins.omega.as_ref().map_or(0, idx))
}

fn prf_key(code: &BinningCode, round: usize, prefix: &[u32], cand: &[u32]) -> (u64, u64, u64) {
    let w = if round == 1 { code.prf_index(MapId::Omega, prefix, cand) } else { 0 };
    (code.prf_index(MapId::B(round), prefix, cand), code.prf_index(MapId::K(round), prefix, cand), w)
}

fn decode_prf(
    model: &ProtocolModel,
    code: &BinningCode,
    round: usize,
    bins: &ObservedBins,
    side: &SideInfo,
    params: &TypicalityParams,
    sup: &[Vec<u32>],
) -> Decoded {
    let n = code.n();
    let want = prf_bins(bins);
    if support_size(sup) > ENUM_LIMIT {
        let seed = mix64(want.0 ^ mix64(want.1 ^ mix64(want.2 ^ round as u64)));
        let mut rng = Stream::derive(code.seed(), seed, 0xdec0);
        let mut found: Vec<Vec<u32>> = Vec::new();
        for _ in 0..PROBE_TRIES {
            let cand: Vec<u32> = sup.iter().map(|s| s[rng.below(s.len() as u64) as usize]).collect();
            if prf_key(code, round, side.prefix, &cand) == want
                && typical(model, round, neg_loglik(model, round, side, &cand), n, params.delta)
                && !found.contains(&cand)
            {
                found.push(cand);
                if found.len() >= 2 {
                    break;
                }
            }
        }
        found.sort();
        let status = if found.len() >= 2 { DecodeStatus::Ambiguous } else { DecodeStatus::Unresolved };
        let estimate = found.into_iter().next().unwrap_or_else(|| fallback(sup));
        return Decoded { estimate, status };
    }
    let mut first_typical: Option<Vec<u32>> = None;
    let mut typical_count = 0usize;
    let mut first_any: Option<Vec<u32>> = None;
    for_each_candidate(sup, |cand| {
        if prf_key(code, round, side.prefix, cand) != want {
            return;
        }
        if first_any.is_none() {
            first_any = Some(cand.to_vec());
        }
        if typical(model, round, neg_loglik(model, round, side, cand), n, params.delta) {
            typical_count += 1;
            if first_typical.is_none() {
                first_typical = Some(cand.to_vec());
            }
        }
    });
    classify(first_typical, typical_count, first_any, sup)
}

fn classify(first_typical: Option<Vec<u32>>, typical_count: usize, first_any: Option<Vec<u32>>, sup: &[Vec<u32>]) -> Decoded {
    match (first_typical, first_any) {
        (Some(e), _) => Decoded {
            estimate: e,
            status: if typical_count == 1 { DecodeStatus::Unique } else { DecodeStatus::Ambiguous },
        },
        (None, Some(e)) => Decoded { estimate: e, status: DecodeStatus::NotTypical },
        (None, None) => Decoded { estimate: fallback(sup), status: DecodeStatus::Empty },
    }
}

fn decode_linear(
    model: &ProtocolModel,
    code: &BinningCode,
    round: usize,
    bins: &ObservedBins,
    side: &SideInfo,
    params: &TypicalityParams,
    sup: &[Vec<u32>],
) -> Decoded {
    let n = code.n();
    if sup.iter().any(|s| s.is_empty()) {
        return Decoded { estimate: fallback(sup), status: DecodeStatus::Empty };
    }
    let free: Vec<usize> = (0..n).filter(|&t| sup[t].len() > 1).collect();
    let base: Vec<u32> = fallback(sup);
    let mut base_bits = vec![0u64; gf2::words(n)];
    for (t, &f) in base.iter().enumerate() {
        gf2::set(&mut base_bits, t, f == 1);
    }
    // Stack `H z = s ⊕ g(prefix) ⊕ H·base` over every map of the round, restricted to free positions.
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let mut rhs: Vec<bool> = Vec::new();
    let mut observed = vec![(MapId::B(round), &bins.b), (MapId::K(round), &bins.k)];
    if let Some(w) = &bins.omega {
        observed.push((MapId::Omega, w));
    }
    for (id, v) in observed {
        let BinValue::Syndrome(s) = v else { unreachable!("checked by in_range") };
        let h = code.matrix(id).expect("linear family");
        let g = code.offset(id, side.prefix);
        let hb = h.mul(&base_bits);
        for r in 0..h.nrows() {
            let mut row = vec![0u64; gf2::words(free.len())];
            for (j, &t) in free.iter().enumerate() {
                if h.entry(r, t) {
                    gf2::set(&mut row, j, true);
                }
            }
            rows.push(row);
            rhs.push(gf2::get(s, r) ^ gf2::get(&g, r) ^ gf2::get(&hb, r));
        }
    }
    let Some(space) = gf2::solve(rows, &rhs, free.len()) else {
        return Decoded { estimate: base, status: DecodeStatus::Empty };
    };
    let assemble = |z: &[u64]| -> Vec<u32> {
        let mut c = base.clone();
        for (j, &t) in free.iter().enumerate() {
            c[t] = gf2::get(z, j) as u32;
        }
        c
    };
    let combine = |mask: u64| -> Vec<u64> {
        let mut z = space.particular.clone();
        for (j, b) in space.basis.iter().enumerate() {
            if (mask >> j) & 1 == 1 {
                for (a, w) in z.iter_mut().zip(b) {
                    *a ^= w;
                }
            }
        }
        z
    };
    let is_typ = |c: &[u32]| typical(model, round, neg_loglik(model, round, side, c), n, params.delta);
    let nullity = space.basis.len();
    if nullity <= NULLITY_LIMIT {
        let mut all: Vec<Vec<u32>> = (0..1u64 << nullity).map(|m| assemble(&combine(m))).collect();
        all.sort();
        let typ: Vec<&Vec<u32>> = all.iter().filter(|c| is_typ(c)).collect();
        return classify(typ.first().map(|c| (*c).clone()), typ.len(), all.first().cloned(), sup);
    }
    let mut rng = Stream::derive(code.seed(), round as u64, 0xdec1);
    let mut found: Vec<Vec<u32>> = Vec::new();
    for _ in 0..PROBES {
        let mut z = space.particular.clone();
        for b in &space.basis {
            if rng.below(2) == 1 {
                for (a, w) in z.iter_mut().zip(b) {
                    *a ^= w;
                }
            }
        }
        let c = assemble(&z);
        if is_typ(&c) && !found.contains(&c) {
            found.push(c);
        }
    }
    found.sort();
    let status = if found.len() >= 2 { DecodeStatus::Ambiguous } else { DecodeStatus::Unresolved };
    let estimate = found.into_iter().next().unwrap_or_else(|| assemble(&space.particular));
    Decoded { estimate, status }
}

/// All decodes of one round for fixed side information, precomputed by a single pass
/// over the candidate space. Used by the exact enumeration with hashed bins.
#[derive(Debug, Clone)]
pub(crate) struct DecoderTable {
    entries: BTreeMap<(u64, u64, u64), TableEntry>,
    fallback: Vec<u32>,
}

#[derive(Debug, Clone)]
struct TableEntry {
    first_typical: Option<Vec<u32>>,
    typical: usize,
    first_any: Vec<u32>,
}

impl DecoderTable {
    pub(crate) fn build(
        model: &ProtocolModel,
        code: &BinningCode,
        round: usize,
        side: &SideInfo,
        params: &TypicalityParams,
    ) -> Result<Self, OsrbError> {
        let n = code.n();
        let sup = support(model, round, side, n);
        let size = support_size(&sup);
        if size > ENUM_LIMIT {
            return Err(OsrbError::Budget { needed: size as f64, budget: ENUM_LIMIT as f64 });
        }
        let mut entries: BTreeMap<(u64, u64, u64), TableEntry> = BTreeMap::new();
        for_each_candidate(&sup, |cand| {
            let key = prf_key(code, round, side.prefix, cand);
            let typ = typical(model, round, neg_loglik(model, round, side, cand), n, params.delta);
            let e = entries.entry(key).or_insert_with(|| TableEntry {
                first_typical: None,
                typical: 0,
                first_any: cand.to_vec(),
            });
            if typ {
                e.typical += 1;
                if e.first_typical.is_none() {
                    e.first_typical = Some(cand.to_vec());
                }
            }
        });
        Ok(Self { entries, fallback: fallback(&sup) })
    }

    pub(crate) fn lookup(&self, key: (u64, u64, u64)) -> (&[u32], DecodeStatus) {
        match self.entries.get(&key) {
            Some(e) => match &e.first_typical {
                Some(t) if e.typical == 1 => (t, DecodeStatus::Unique),
                Some(t) => (t, DecodeStatus::Ambiguous),
                None => (&e.first_any, DecodeStatus::NotTypical),
            },
            None => (&self.fallback, DecodeStatus::Empty),
        }
    }
}
