use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::channel::Sizes;
use super::RegionError;

/// A conditional pmf stored as `rows × cols`; each row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CondTable {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CondTable {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, RegionError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(RegionError::Invalid(format!(
                "table of {} entries does not match {rows}x{cols}",
                data.len()
            )));
        }
        for (r, row) in data.chunks(cols).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(RegionError::Invalid(format!("row {r} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(RegionError::Invalid(format!("row {r} sums to {s}")));
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Every row is the same pmf.
    pub fn repeated(rows: usize, pmf: &[f64]) -> Result<Self, RegionError> {
        let data = (0..rows).flat_map(|_| pmf.iter().copied()).collect();
        Self::new(rows, pmf.len(), data)
    }

    /// Row `r` puts all mass on `f(r)`.
    pub fn deterministic(rows: usize, cols: usize, f: impl Fn(usize) -> usize) -> Result<Self, RegionError> {
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let c = f(r);
            if c >= cols {
                return Err(RegionError::Invalid(format!("row {r} maps outside {cols} columns")));
            }
            data[r * cols + c] = 1.0;
        }
        Self::new(rows, cols, data)
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Which terminal's input round `i` (1-based) may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    One,
    Two,
}

impl Terminal {
    /// Odd rounds are spoken by terminal 1, even rounds by terminal 2.
    pub fn owner(round: usize) -> Self {
        if round % 2 == 1 {
            Terminal::One
        } else {
            Terminal::Two
        }
    }

    pub fn other(self) -> Self {
        match self {
            Terminal::One => Terminal::Two,
            Terminal::Two => Terminal::One,
        }
    }
}

/// Presets for the auxiliary cardinality bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardinalityPreset {
    /// `|ℱ₁| ≤ Π+3`, `|ℱ_i| ≤ Π·Π_{j<i}|ℱ_j| + 2`.
    Theorem,
    /// `|ℱ_i| ≤ Π·Π_{j<i}|ℱ_j| + 1` for every `i`, as in the ε-region.
    Epsilon,
}

/// Upper bounds on `|ℱ_i|` given the sizes chosen for earlier rounds.
pub fn cardinality_bounds(sizes: Sizes, f_sizes: &[usize], preset: CardinalityPreset) -> Vec<usize> {
    let base = sizes.product();
    let mut prefix = 1usize;
    let mut out = Vec::with_capacity(f_sizes.len());
    for (i, &f) in f_sizes.iter().enumerate() {
        let extra = match (preset, i) {
            (CardinalityPreset::Theorem, 0) => 3,
            (CardinalityPreset::Theorem, _) => 2,
            (CardinalityPreset::Epsilon, _) => 1,
        };
        out.push(base.saturating_mul(prefix).saturating_add(extra));
        prefix = prefix.saturating_mul(f);
    }
    out
}

/// A factorized auxiliary scheme
/// `Π_i p(f_i | f_{<i}, x_{owner(i)}) · p(y₁ | f, x₁) · p(y₂ | f, x₂)`.
///
/// Round `i`'s table has one row per `(f_1..f_{i−1}, x_owner)` (prefix index major, input
/// minor). The output tables have one row per `(f_1..f_r, x_j)` with `f` flattened
/// row-major, `F1` slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxScheme {
    sizes: Sizes,
    f_sizes: Vec<usize>,
    rounds: Vec<CondTable>,
    y1: CondTable,
    y2: CondTable,
}

impl AuxScheme {
    pub fn new(
        sizes: Sizes,
        f_sizes: Vec<usize>,
        rounds: Vec<CondTable>,
        y1: CondTable,
        y2: CondTable,
    ) -> Result<Self, RegionError> {
        if f_sizes.is_empty() {
            return Err(RegionError::Invalid("a scheme needs at least one round".into()));
        }
        if rounds.len() != f_sizes.len() {
            return Err(RegionError::Invalid(format!(
                "{} round tables for {} rounds",
                rounds.len(),
                f_sizes.len()
            )));
        }
        let mut prefix = 1usize;
        for (i, (t, &f)) in rounds.iter().zip(&f_sizes).enumerate() {
            let own = match Terminal::owner(i + 1) {
                Terminal::One => sizes.x1,
                Terminal::Two => sizes.x2,
            };
            if t.rows() != prefix * own || t.cols() != f {
                return Err(RegionError::Invalid(format!(
                    "round {} table is {}x{}, expected {}x{}",
                    i + 1,
                    t.rows(),
                    t.cols(),
                    prefix * own,
                    f
                )));
            }
            prefix *= f;
        }
        if y1.rows() != prefix * sizes.x1 || y1.cols() != sizes.y1 {
            return Err(RegionError::Invalid("Y1 table shape mismatch".into()));
        }
        if y2.rows() != prefix * sizes.x2 || y2.cols() != sizes.y2 {
            return Err(RegionError::Invalid("Y2 table shape mismatch".into()));
        }
        Ok(Self {
            sizes,
            f_sizes,
            rounds,
            y1,
            y2,
        })
    }

    pub fn rounds(&self) -> usize {
        self.f_sizes.len()
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes
    }

    pub fn f_sizes(&self) -> &[usize] {
        &self.f_sizes
    }

    /// `Π_i |ℱ_i|`.
    pub fn f_cells(&self) -> usize {
        self.f_sizes.iter().product()
    }

    pub fn round_table(&self, round: usize) -> &CondTable {
        &self.rounds[round - 1]
    }

    pub fn round_tables(&self) -> &[CondTable] {
        &self.rounds
    }

    pub fn y1_table(&self) -> &CondTable {
        &self.y1
    }

    pub fn y2_table(&self) -> &CondTable {
        &self.y2
    }

    /// All tables in the order rounds, `Y1`, `Y2`.
    pub(crate) fn tables(&self) -> impl Iterator<Item = &CondTable> {
        self.rounds.iter().chain([&self.y1, &self.y2])
    }

    pub(crate) fn tables_mut(&mut self) -> impl Iterator<Item = &mut CondTable> {
        self.rounds.iter_mut().chain([&mut self.y1, &mut self.y2])
    }

    /// Checks the cardinality bounds for `preset`; `Ok` lists which rounds comply.
    pub fn cardinality_ok(&self, preset: CardinalityPreset) -> Vec<bool> {
        cardinality_bounds(self.sizes, &self.f_sizes, preset)
            .iter()
            .zip(&self.f_sizes)
            .map(|(b, f)| f <= b)
            .collect()
    }

    /// The scheme with all-constant auxiliaries and outputs drawn from `q(y_j | x_j)`.
    pub fn constant(channel: &super::ChannelSpec, rounds: usize) -> Self {
        let s = channel.sizes();
        let f_sizes = vec![1; rounds];
        let round_tables = (1..=rounds)
            .map(|i| {
                let own = match Terminal::owner(i) {
                    Terminal::One => s.x1,
                    Terminal::Two => s.x2,
                };
                CondTable::from_raw(own, 1, vec![1.0; own])
            })
            .collect();
        let (y1, y2) = super::search::local_output_tables(channel, 1);
        Self {
            sizes: s,
            f_sizes,
            rounds: round_tables,
            y1,
            y2,
        }
    }

    /// Every row drawn uniformly from its simplex.
    pub fn random(sizes: Sizes, f_sizes: &[usize], rng: &mut crate::rng::Stream) -> Result<Self, RegionError> {
        let mut prefix = 1usize;
        let mut rounds = Vec::with_capacity(f_sizes.len());
        let table = |rows: usize, cols: usize, rng: &mut crate::rng::Stream| {
            CondTable::new(rows, cols, (0..rows).flat_map(|_| rng.simplex(cols)).collect())
        };
        for (i, &f) in f_sizes.iter().enumerate() {
            let own = match Terminal::owner(i + 1) {
                Terminal::One => sizes.x1,
                Terminal::Two => sizes.x2,
            };
            rounds.push(table(prefix * own, f, rng)?);
            prefix = prefix.saturating_mul(f);
        }
        let y1 = table(prefix * sizes.x1, sizes.y1, rng)?;
        let y2 = table(prefix * sizes.x2, sizes.y2, rng)?;
        Self::new(sizes, f_sizes.to_vec(), rounds, y1, y2)
    }

    /// Row of round `round`'s table for a given flattened prefix and owner input.
    #[inline]
    pub fn round_row(&self, round: usize, prefix: usize, x_owner: usize) -> usize {
        let own = match Terminal::owner(round) {
            Terminal::One => self.sizes.x1,
            Terminal::Two => self.sizes.x2,
        };
        prefix * own + x_owner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality_presets() {
        let s = Sizes { x1: 2, x2: 2, y1: 1, y2: 2 };
        assert_eq!(cardinality_bounds(s, &[4, 3], CardinalityPreset::Theorem), vec![11, 8 * 4 + 2]);
        assert_eq!(cardinality_bounds(s, &[4, 3], CardinalityPreset::Epsilon), vec![9, 8 * 4 + 1]);
    }

    #[test]
    fn shape_validation() {
        let s = Sizes { x1: 2, x2: 1, y1: 1, y2: 2 };
        let f1 = CondTable::repeated(2, &[0.5, 0.5]).unwrap();
        let y1 = CondTable::repeated(4, &[1.0]).unwrap();
        let y2 = CondTable::repeated(2, &[0.5, 0.5]).unwrap();
        assert!(AuxScheme::new(s, vec![2], vec![f1.clone()], y1.clone(), y2.clone()).is_ok());
        // Y1 rows must be |F|·|X1| = 4
        let bad = CondTable::repeated(2, &[1.0]).unwrap();
        assert!(AuxScheme::new(s, vec![2], vec![f1], bad, y2).is_err());
        assert!(CondTable::new(1, 2, vec![0.7, 0.7]).is_err());
    }
}
