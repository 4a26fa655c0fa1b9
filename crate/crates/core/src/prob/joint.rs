use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::ProbError;

/// Tolerance on the total mass of a [`DenseJoint`].
pub const MASS_TOL: f64 = 1e-12;

/// Ordered set of distinct symbol labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(ProbError::EmptyAlphabet);
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(ProbError::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Self { symbols })
    }

    /// Alphabet `{"0", "1", ..., "size-1"}`.
    pub fn indexed(size: usize) -> Self {
        assert!(size >= 1, "alphabet size must be positive");
        Self {
            symbols: (0..size).map(|i| i.to_string()).collect(),
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn position(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

/// A named random variable with its alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axis {
    pub name: String,
    pub alphabet: Alphabet,
}

impl Axis {
    pub fn new(name: impl Into<String>, alphabet: Alphabet) -> Self {
        Self {
            name: name.into(),
            alphabet,
        }
    }

    /// Axis with an [`Alphabet::indexed`] alphabet.
    pub fn indexed(name: impl Into<String>, size: usize) -> Self {
        Self::new(name, Alphabet::indexed(size))
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.alphabet.size()
    }
}

/// A pmf over the product of named finite alphabets, stored densely in row-major order
/// (the last axis varies fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseJoint {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    mass: Vec<f64>,
}

fn strides_for(axes: &[Axis]) -> Vec<usize> {
    let mut strides = vec![1usize; axes.len()];
    for i in (0..axes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * axes[i + 1].size();
    }
    strides
}

impl DenseJoint {
    /// Validating constructor: entries non-negative, total mass 1 within [`MASS_TOL`],
    /// axis names unique and the mass length equal to the product of alphabet sizes.
    pub fn new(axes: Vec<Axis>, mass: Vec<f64>) -> Result<Self, ProbError> {
        let joint = Self::unnormalized(axes, mass)?;
        let total: f64 = joint.mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(ProbError::NotNormalized(total));
        }
        Ok(joint)
    }

    /// Like [`DenseJoint::new`] but rescales the mass to sum to one.
    pub fn normalized(axes: Vec<Axis>, mut mass: Vec<f64>) -> Result<Self, ProbError> {
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(ProbError::NotNormalized(total));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Self::unnormalized(axes, mass)
    }

    fn unnormalized(axes: Vec<Axis>, mass: Vec<f64>) -> Result<Self, ProbError> {
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(ProbError::DuplicateAxis(a.name.clone()));
            }
        }
        let cells: usize = axes.iter().map(Axis::size).product();
        if mass.len() != cells {
            return Err(ProbError::ShapeMismatch {
                expected: cells,
                found: mass.len(),
            });
        }
        if let Some(&m) = mass.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(ProbError::NegativeMass(m));
        }
        let strides = strides_for(&axes);
        Ok(Self {
            axes,
            strides,
            mass,
        })
    }

    /// Build from a function of the multi-index; the result is normalized.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self, ProbError> {
        let shape: Vec<usize> = axes.iter().map(Axis::size).collect();
        let mut mass = Vec::with_capacity(shape.iter().product());
        for_each_index(&shape, |idx| mass.push(f(idx)));
        Self::normalized(axes, mass)
    }

    pub fn uniform(axes: Vec<Axis>) -> Self {
        let cells: usize = axes.iter().map(Axis::size).product();
        Self::unnormalized(axes, vec![1.0 / cells as f64; cells]).expect("valid axes")
    }

    /// Point mass at the given multi-index.
    pub fn point_mass(axes: Vec<Axis>, at: &[usize]) -> Result<Self, ProbError> {
        let cells: usize = axes.iter().map(Axis::size).product();
        let mut mass = vec![0.0; cells];
        let strides = strides_for(&axes);
        if at.len() != axes.len() || at.iter().zip(&axes).any(|(&i, a)| i >= a.size()) {
            return Err(ProbError::ShapeMismatch {
                expected: axes.len(),
                found: at.len(),
            });
        }
        mass[at.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>()] = 1.0;
        Self::unnormalized(axes, mass)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::size).collect()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn num_cells(&self) -> usize {
        self.mass.len()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize, ProbError> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| ProbError::UnknownVariable(name.to_string()))
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    pub fn axis(&self, name: &str) -> Result<&Axis, ProbError> {
        Ok(&self.axes[self.axis_index(name)?])
    }

    /// Flat offset of a multi-index.
    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        self.mass[self.offset(idx)]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub(crate) fn indices_of(&self, names: &[&str]) -> Result<Vec<usize>, ProbError> {
        names.iter().map(|n| self.axis_index(n)).collect()
    }

    /// Marginal over the named axes, in the given order.
    pub fn marginal(&self, names: &[&str]) -> Result<DenseJoint, ProbError> {
        let keep = self.indices_of(names)?;
        for (i, k) in keep.iter().enumerate() {
            if keep[..i].contains(k) {
                return Err(ProbError::DuplicateAxis(names[i].to_string()));
            }
        }
        Ok(self.project(&keep))
    }

    /// Marginal onto axis positions `keep` (in that order). Positions must be distinct.
    pub(crate) fn project(&self, keep: &[usize]) -> DenseJoint {
        let axes: Vec<Axis> = keep.iter().map(|&k| self.axes[k].clone()).collect();
        let out_strides = strides_for(&axes);
        // Stride of each source axis in the output (0 when summed out).
        let mut map = vec![0usize; self.axes.len()];
        for (j, &k) in keep.iter().enumerate() {
            map[k] = out_strides[j];
        }
        let cells: usize = axes.iter().map(Axis::size).product();
        let mut mass = vec![0.0; cells];
        let shape = self.shape();
        let mut idx = vec![0usize; shape.len()];
        let mut target = 0usize;
        for &m in &self.mass {
            mass[target] += m;
            // Odometer increment, keeping `target` in sync.
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                target += map[ax];
                if idx[ax] < shape[ax] {
                    break;
                }
                target -= map[ax] * shape[ax];
                idx[ax] = 0;
            }
        }
        DenseJoint {
            axes,
            strides: out_strides,
            mass,
        }
    }

    /// Same distribution with axes reordered to `names` (must be a permutation of all axes).
    pub fn permuted(&self, names: &[&str]) -> Result<DenseJoint, ProbError> {
        if names.len() != self.axes.len() {
            return Err(ProbError::AxisMismatch);
        }
        self.marginal(names)
    }

    /// Shannon entropy in bits of the whole table.
    pub fn entropy_bits(&self) -> f64 {
        self.mass.iter().map(|&p| crate::math::neg_xlogx(p)).sum()
    }

    /// True when both joints carry the same axis names and alphabets in the same order.
    pub fn same_axes(&self, other: &DenseJoint) -> bool {
        self.axes == other.axes
    }
}

/// Visit every multi-index of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.iter().any(|&s| s == 0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut ax = shape.len();
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ax(name: &str, n: usize) -> Axis {
        Axis::indexed(name, n)
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(
            DenseJoint::new(vec![ax("X", 2)], vec![0.5, 0.4]),
            Err(ProbError::NotNormalized(_))
        ));
        assert!(matches!(
            DenseJoint::new(vec![ax("X", 2)], vec![1.5, -0.5]),
            Err(ProbError::NegativeMass(_))
        ));
        assert!(matches!(
            DenseJoint::new(vec![ax("X", 2), ax("X", 2)], vec![0.25; 4]),
            Err(ProbError::DuplicateAxis(_))
        ));
        assert!(matches!(
            DenseJoint::new(vec![ax("X", 3)], vec![0.5, 0.5]),
            Err(ProbError::ShapeMismatch { .. })
        ));
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn marginal_sums_the_right_cells() {
        // p(x, y) with x in {0,1}, y in {0,1,2}
        let j = DenseJoint::new(
            vec![ax("X", 2), ax("Y", 3)],
            vec![0.1, 0.2, 0.1, 0.3, 0.0, 0.3],
        )
        .unwrap();
        let px = j.marginal(&["X"]).unwrap();
        assert!((px.mass()[0] - 0.4).abs() < 1e-15);
        assert!((px.mass()[1] - 0.6).abs() < 1e-15);
        let py = j.marginal(&["Y"]).unwrap();
        assert_eq!(py.mass().len(), 3);
        assert!((py.mass()[1] - 0.2).abs() < 1e-15);
        let yx = j.marginal(&["Y", "X"]).unwrap();
        assert!((yx.prob(&[2, 1]) - 0.3).abs() < 1e-15);
        assert!((yx.prob(&[1, 0]) - 0.2).abs() < 1e-15);
        assert!(j.marginal(&["Z"]).is_err());
    }

    #[test]
    fn index_iteration_is_row_major() {
        let mut seen = Vec::new();
        for_each_index(&[2, 2], |i| seen.push((i[0], i[1])));
        assert_eq!(seen, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }
}
