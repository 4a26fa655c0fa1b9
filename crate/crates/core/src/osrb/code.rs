use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gf2::{self, BitMatrix};
use super::OsrbError;
use crate::region::AuxScheme;
use crate::rng::{mix64, Stream};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const MATRIX_PURPOSE: u64 = 0xb1a5_0001;
const OFFSET_PURPOSE: u64 = 0xb1a5_0002;
/// Largest admissible bin range for the hashed family.
pub const MAX_BIN_LOG2: f64 = 62.0;

/// Rates of one code in bits per symbol: common randomness `R₀`, and per round the
/// message rate `R_i` and the shared-bin rate `R̃_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeRates {
    pub r0: f64,
    pub r: Vec<f64>,
    pub rt: Vec<f64>,
}

impl CodeRates {
    pub fn new(r0: f64, r: Vec<f64>, rt: Vec<f64>) -> Result<Self, OsrbError> {
        if r.is_empty() || r.len() != rt.len() {
            return Err(OsrbError::InvalidRates(format!(
                "{} message rates and {} bin rates",
                r.len(),
                rt.len()
            )));
        }
        for &v in core::iter::once(&r0).chain(&r).chain(&rt) {
            if !v.is_finite() || v < 0.0 {
                return Err(OsrbError::InvalidRates(format!("rate {v} is not a finite nonnegative number")));
            }
        }
        Ok(Self { r0, r, rt })
    }

    pub fn rounds(&self) -> usize {
        self.r.len()
    }

    /// `Σ_{i odd} R_i`.
    pub fn r12(&self) -> f64 {
        self.r.iter().step_by(2).sum()
    }

    /// `Σ_{i even} R_i`.
    pub fn r21(&self) -> f64 {
        self.r.iter().skip(1).step_by(2).sum()
    }
}

/// How bin indices are computed from sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinFamily {
    /// Keyed hash of the whole sequence reduced to `⌈2^{nR}⌉` bins.
    Prf,
    /// Random parity checks `H f ⊕ g(prefix)` with `⌈nR⌉` rows; binary auxiliaries only.
    /// Decoding then reduces to linear algebra, which keeps long blocks tractable.
    Linear,
}

/// One of the `2r + 1` bin maps of a code. Rounds are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MapId {
    Omega,
    B(usize),
    K(usize),
}

impl MapId {
    fn tag(self) -> u64 {
        match self {
            MapId::Omega => 1,
            MapId::B(i) => 2 * i as u64,
            MapId::K(i) => 2 * i as u64 + 1,
        }
    }

    pub fn round(self) -> usize {
        match self {
            MapId::Omega => 1,
            MapId::B(i) | MapId::K(i) => i,
        }
    }
}

/// A bin index; the hashed family uses 0-based integers, the linear family syndromes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinValue {
    Index(u64),
    Syndrome(Vec<u64>),
}

#[derive(Debug, Clone)]
struct BinMap {
    key: u64,
    /// Number of bins (hashed family).
    count: u64,
    /// Parity rows (linear family).
    bits: usize,
    matrix: Option<BitMatrix>,
}

/// A realized random binning for blocklength `n`.
#[derive(Debug, Clone)]
pub struct BinningCode {
    n: usize,
    seed: u64,
    family: BinFamily,
    rates: CodeRates,
    f_sizes: Vec<usize>,
    prefix_sizes: Vec<usize>,
    omega: BinMap,
    b: Vec<BinMap>,
    k: Vec<BinMap>,
}

/// `n·R` with float noise near integers removed.
fn exponent(n: usize, rate: f64) -> f64 {
    let e = n as f64 * rate;
    let r = libm::round(e);
    if (e - r).abs() < 1e-9 {
        r
    } else {
        e
    }
}

/// One position of the sequence hash; `s` is the joint `(prefix, f_i)` symbol.
#[inline]
pub(crate) fn prf_step(h: u64, s: u64) -> u64 {
    mix64(h ^ (s + 1).wrapping_mul(GOLDEN))
}

/// Lemire reduction of the final hash onto `count` bins.
#[inline]
pub(crate) fn prf_finish(h: u64, count: u64) -> u64 {
    if count <= 1 {
        0
    } else {
        ((h as u128 * count as u128) >> 64) as u64
    }
}

/// Builds a hashed-family code.
pub fn make_code(scheme: &AuxScheme, rates: &CodeRates, n: usize, seed: u64) -> Result<BinningCode, OsrbError> {
    make_code_with(scheme, rates, n, seed, BinFamily::Prf)
}

pub fn make_code_with(
    scheme: &AuxScheme,
    rates: &CodeRates,
    n: usize,
    seed: u64,
    family: BinFamily,
) -> Result<BinningCode, OsrbError> {
    if n == 0 {
        return Err(OsrbError::InvalidRates("blocklength must be at least 1".into()));
    }
    if rates.rounds() != scheme.rounds() {
        return Err(OsrbError::Incompatible(format!(
            "rates for {} rounds, scheme has {}",
            rates.rounds(),
            scheme.rounds()
        )));
    }
    if family == BinFamily::Linear && scheme.f_sizes().iter().any(|&f| f > 2) {
        return Err(OsrbError::Unsupported("linear binning needs auxiliary alphabets of size at most 2".into()));
    }
    let build = |id: MapId, rate: f64| -> Result<BinMap, OsrbError> {
        let key = mix64(seed ^ mix64(id.tag().wrapping_mul(GOLDEN)));
        let e = exponent(n, rate);
        match family {
            BinFamily::Prf => {
                if e > MAX_BIN_LOG2 {
                    return Err(OsrbError::Overflow { map: id, log2_bins: e });
                }
                let count = libm::ceil(libm::exp2(e)) as u64;
                Ok(BinMap { key, count: count.max(1), bits: 0, matrix: None })
            }
            BinFamily::Linear => {
                let bits = libm::ceil(e - 1e-9).max(0.0) as usize;
                let mut rng = Stream::derive(seed, id.tag(), MATRIX_PURPOSE);
                let matrix = BitMatrix::random(bits, n, &mut rng);
                Ok(BinMap { key, count: 0, bits, matrix: Some(matrix) })
            }
        }
    };
    let r = rates.rounds();
    let omega = build(MapId::Omega, rates.r0)?;
    let b = (1..=r).map(|i| build(MapId::B(i), rates.rt[i - 1])).collect::<Result<Vec<_>, _>>()?;
    let k = (1..=r).map(|i| build(MapId::K(i), rates.r[i - 1])).collect::<Result<Vec<_>, _>>()?;
    let mut prefix_sizes = Vec::with_capacity(r);
    let mut p = 1usize;
    for &f in scheme.f_sizes() {
        prefix_sizes.push(p);
        p = p.saturating_mul(f);
    }
    Ok(BinningCode {
        n,
        seed,
        family,
        rates: rates.clone(),
        f_sizes: scheme.f_sizes().to_vec(),
        prefix_sizes,
        omega,
        b,
        k,
    })
}

impl BinningCode {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn family(&self) -> BinFamily {
        self.family
    }

    pub fn rates(&self) -> &CodeRates {
        &self.rates
    }

    pub fn rounds(&self) -> usize {
        self.f_sizes.len()
    }

    pub fn f_sizes(&self) -> &[usize] {
        &self.f_sizes
    }

    /// `Π_{j<i} |ℱ_j|` for 1-based round `i`.
    pub fn prefix_size(&self, round: usize) -> usize {
        self.prefix_sizes[round - 1]
    }

    fn map(&self, id: MapId) -> &BinMap {
        match id {
            MapId::Omega => &self.omega,
            MapId::B(i) => &self.b[i - 1],
            MapId::K(i) => &self.k[i - 1],
        }
    }

    /// Number of bins of a map, when it fits in 64 bits.
    pub fn count(&self, id: MapId) -> Option<u64> {
        let m = self.map(id);
        match self.family {
            BinFamily::Prf => Some(m.count),
            BinFamily::Linear => (m.bits < 64).then(|| 1u64 << m.bits),
        }
    }

    /// `log₂` of the bin range; at least the nominal `nR` and less than `nR + 1`.
    pub fn range_log2(&self, id: MapId) -> f64 {
        let m = self.map(id);
        match self.family {
            BinFamily::Prf => libm::log2(m.count as f64),
            BinFamily::Linear => m.bits as f64,
        }
    }

    /// Effective rate `log₂(range)/n`.
    pub fn effective_rate(&self, id: MapId) -> f64 {
        self.range_log2(id) / self.n as f64
    }

    /// Parity rows of a linear-family map.
    pub fn parity_bits(&self, id: MapId) -> usize {
        self.map(id).bits
    }

    pub fn in_range(&self, id: MapId, v: &BinValue) -> bool {
        let m = self.map(id);
        match (self.family, v) {
            (BinFamily::Prf, BinValue::Index(i)) => *i < m.count,
            (BinFamily::Linear, BinValue::Syndrome(s)) => {
                s.len() == gf2::words(m.bits) && (m.bits % 64 == 0 || s.last().is_none_or(|w| w >> (m.bits % 64) == 0))
            }
            _ => false,
        }
    }

    /// Bin of the round-`id.round()` sequence. `prefix[t]` is the flattened
    /// `(f_1..f_{i-1})` symbol at time `t` (ignored in round 1), `f[t]` the round's symbol.
    pub fn bin(&self, id: MapId, prefix: &[u32], f: &[u32]) -> BinValue {
        match self.family {
            BinFamily::Prf => BinValue::Index(self.prf_index(id, prefix, f)),
            BinFamily::Linear => BinValue::Syndrome(self.syndrome(id, prefix, f)),
        }
    }

    /// Hashed-family bin index.
    pub(crate) fn prf_index(&self, id: MapId, prefix: &[u32], f: &[u32]) -> u64 {
        let (mut h, count) = self.prf_parts(id);
        if count <= 1 {
            return 0;
        }
        let i = id.round();
        let fs = self.f_sizes[i - 1] as u64;
        for t in 0..self.n {
            let p = if i == 1 { 0 } else { prefix[t] as u64 };
            h = prf_step(h, p * fs + f[t] as u64);
        }
        prf_finish(h, count)
    }

    /// Initial hash state and bin count of a hashed map.
    #[inline]
    pub(crate) fn prf_parts(&self, id: MapId) -> (u64, u64) {
        let m = self.map(id);
        (m.key ^ (self.n as u64).wrapping_mul(GOLDEN), m.count)
    }

    /// Prefix-dependent offset `g(prefix)` of a linear map; all zero in round 1.
    pub(crate) fn offset(&self, id: MapId, prefix: &[u32]) -> Vec<u64> {
        let m = self.map(id);
        let w = gf2::words(m.bits);
        let i = id.round();
        if i == 1 || self.prefix_sizes[i - 1] == 1 || m.bits == 0 {
            return vec![0; w];
        }
        let mut h = m.key;
        for &p in &prefix[..self.n] {
            h = mix64(h ^ (p as u64 + 1).wrapping_mul(GOLDEN));
        }
        let mut rng = Stream::derive(h, 0, OFFSET_PURPOSE);
        let mut v: Vec<u64> = (0..w).map(|_| rng.next_u64()).collect();
        if m.bits % 64 != 0 {
            v[w - 1] &= (1u64 << (m.bits % 64)) - 1;
        }
        v
    }

    pub(crate) fn matrix(&self, id: MapId) -> Option<&BitMatrix> {
        self.map(id).matrix.as_ref()
    }

    fn syndrome(&self, id: MapId, prefix: &[u32], f: &[u32]) -> Vec<u64> {
        let m = self.map(id);
        let mut bits = vec![0u64; gf2::words(self.n)];
        for (t, &s) in f[..self.n].iter().enumerate() {
            gf2::set(&mut bits, t, s == 1);
        }
        let mut out = m.matrix.as_ref().expect("linear family").mul(&bits);
        for (o, g) in out.iter_mut().zip(self.offset(id, prefix)) {
            *o ^= g;
        }
        out
    }

    /// Maps that constrain round `i`'s sequence: `b_i`, `k_i` and in round 1 also `ω`.
    pub fn maps_of_round(&self, round: usize) -> Vec<MapId> {
        let mut v = vec![MapId::B(round), MapId::K(round)];
        if round == 1 {
            v.push(MapId::Omega);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{CondTable, Sizes};

    fn binary_scheme() -> AuxScheme {
        let s = Sizes { x1: 2, x2: 1, y1: 1, y2: 2 };
        AuxScheme::new(
            s,
            vec![2],
            vec![CondTable::repeated(2, &[0.5, 0.5]).unwrap()],
            CondTable::repeated(4, &[1.0]).unwrap(),
            CondTable::repeated(2, &[0.5, 0.5]).unwrap(),
        )
        .unwrap()
    }

    fn seq(v: u64, n: usize) -> Vec<u32> {
        (0..n).map(|t| ((v >> t) & 1) as u32).collect()
    }

    #[test]
    fn zero_rate_is_a_single_bin() {
        let rates = CodeRates::new(0.0, vec![0.0], vec![0.0]).unwrap();
        let code = make_code(&binary_scheme(), &rates, 10, 1).unwrap();
        for v in 0..1024u64 {
            assert_eq!(code.bin(MapId::B(1), &[], &seq(v, 10)), BinValue::Index(0));
        }
        assert_eq!(code.count(MapId::Omega), Some(1));
    }

    #[test]
    fn counts_round_up_and_stay_in_range() {
        let rates = CodeRates::new(0.3, vec![1.0], vec![0.25]).unwrap();
        let code = make_code(&binary_scheme(), &rates, 10, 9).unwrap();
        assert_eq!(code.count(MapId::Omega), Some(8));
        assert_eq!(code.count(MapId::K(1)), Some(1024));
        assert_eq!(code.count(MapId::B(1)), Some(6));
        for v in 0..1024u64 {
            let b = code.bin(MapId::B(1), &[], &seq(v, 10));
            assert!(code.in_range(MapId::B(1), &b));
        }
        let n1 = make_code(&binary_scheme(), &CodeRates::new(0.0, vec![1.0], vec![0.0]).unwrap(), 1, 0).unwrap();
        assert_eq!(n1.count(MapId::K(1)), Some(2));
    }

    #[test]
    fn overflow_is_reported() {
        let rates = CodeRates::new(0.0, vec![1.0], vec![0.0]).unwrap();
        assert!(matches!(
            make_code(&binary_scheme(), &rates, 63, 0),
            Err(OsrbError::Overflow { map: MapId::K(1), .. })
        ));
        assert!(make_code_with(&binary_scheme(), &rates, 63, 0, BinFamily::Linear).is_ok());
    }

    #[test]
    fn linear_bins_are_affine_in_the_sequence() {
        let rates = CodeRates::new(0.0, vec![0.5], vec![0.0]).unwrap();
        let code = make_code_with(&binary_scheme(), &rates, 16, 4, BinFamily::Linear).unwrap();
        assert_eq!(code.parity_bits(MapId::K(1)), 8);
        let a = seq(0x1234, 16);
        let b = seq(0x0f0f, 16);
        let ab = seq(0x1234 ^ 0x0f0f, 16);
        let (BinValue::Syndrome(sa), BinValue::Syndrome(sb), BinValue::Syndrome(sab)) =
            (code.bin(MapId::K(1), &[], &a), code.bin(MapId::K(1), &[], &b), code.bin(MapId::K(1), &[], &ab))
        else {
            panic!("linear family yields syndromes");
        };
        assert_eq!(sa[0] ^ sb[0], sab[0]);
    }
}
