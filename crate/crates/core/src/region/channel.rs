use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::RegionError;
use crate::prob::{Axis, DenseJoint};

/// Axis names shared by every joint built in this module.
pub const X1: &str = "X1";
pub const X2: &str = "X2";
pub const Y1: &str = "Y1";
pub const Y2: &str = "Y2";

/// Name of the round-`i` auxiliary (1-based), `"F1"`, `"F2"`, ...
pub fn f_name(round: usize) -> alloc::string::String {
    format!("F{round}")
}

/// Alphabet sizes `(|𝒳₁|, |𝒳₂|, |𝒴₁|, |𝒴₂|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sizes {
    pub x1: usize,
    pub x2: usize,
    pub y1: usize,
    pub y2: usize,
}

impl Sizes {
    pub fn product(&self) -> usize {
        self.x1 * self.x2 * self.y1 * self.y2
    }

    pub fn x(&self) -> usize {
        self.x1 * self.x2
    }

    pub fn y(&self) -> usize {
        self.y1 * self.y2
    }
}

/// Input distribution `q(x₁,x₂)` and the channel `q(y₁,y₂|x₁,x₂)` to be simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    q_x: DenseJoint,
    /// Row-major `[x1][x2][y1][y2]`; each `(x1, x2)` slice is a pmf.
    kernel: Vec<f64>,
    sizes: Sizes,
}

impl ChannelSpec {
    /// `q_x` must have exactly the axes `X1, X2` in that order; `kernel` is indexed
    /// `[x1][x2][y1][y2]`.
    pub fn new(q_x: DenseJoint, kernel: Vec<f64>, y1: usize, y2: usize) -> Result<Self, RegionError> {
        let names: Vec<&str> = q_x.axes().iter().map(|a| a.name.as_str()).collect();
        if names != [X1, X2] {
            return Err(RegionError::Invalid(format!(
                "input distribution must have axes [X1, X2], found {names:?}"
            )));
        }
        if y1 == 0 || y2 == 0 {
            return Err(RegionError::Invalid("output alphabets must be non-empty".into()));
        }
        let sizes = Sizes {
            x1: q_x.axes()[0].size(),
            x2: q_x.axes()[1].size(),
            y1,
            y2,
        };
        if kernel.len() != sizes.product() {
            return Err(RegionError::Invalid(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                sizes.product()
            )));
        }
        for (s, slice) in kernel.chunks(sizes.y()).enumerate() {
            if slice.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(RegionError::Invalid(format!("kernel slice {s} has a negative entry")));
            }
            let total: f64 = slice.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(RegionError::Invalid(format!(
                    "kernel slice {s} sums to {total}, not 1"
                )));
            }
        }
        Ok(Self { q_x, kernel, sizes })
    }

    /// Builds a channel from plain tables: `q_x[x1][x2]` and `kernel[x1][x2][y1][y2]` flattened.
    pub fn from_tables(q_x: &[f64], x1: usize, x2: usize, kernel: Vec<f64>, y1: usize, y2: usize) -> Result<Self, RegionError> {
        let qx = DenseJoint::new(vec![Axis::indexed(X1, x1), Axis::indexed(X2, x2)], q_x.to_vec())?;
        Self::new(qx, kernel, y1, y2)
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes
    }

    pub fn q_x(&self) -> &DenseJoint {
        &self.q_x
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    #[inline]
    pub fn qx(&self, x1: usize, x2: usize) -> f64 {
        self.q_x.mass()[x1 * self.sizes.x2 + x2]
    }

    #[inline]
    pub fn qy(&self, x1: usize, x2: usize, y1: usize, y2: usize) -> f64 {
        let s = self.sizes;
        self.kernel[((x1 * s.x2 + x2) * s.y1 + y1) * s.y2 + y2]
    }

    /// Target joint `q(x)q(y|x)` over `(X1, X2, Y1, Y2)`.
    pub fn target(&self) -> DenseJoint {
        let s = self.sizes;
        let axes = vec![
            self.q_x.axes()[0].clone(),
            self.q_x.axes()[1].clone(),
            Axis::indexed(Y1, s.y1),
            Axis::indexed(Y2, s.y2),
        ];
        let mass: Vec<f64> = (0..s.product())
            .map(|c| self.q_x.mass()[c / s.y()] * self.kernel[c])
            .collect();
        DenseJoint::normalized(axes, mass).expect("target is a pmf")
    }

    /// Target mass in `(x1, x2, y1, y2)` row-major order.
    pub fn target_mass(&self) -> Vec<f64> {
        let s = self.sizes;
        (0..s.product())
            .map(|c| self.q_x.mass()[c / s.y()] * self.kernel[c])
            .collect()
    }

    /// Every kernel slice with positive input mass is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.kernel
            .chunks(self.sizes.y())
            .enumerate()
            .all(|(x, slice)| self.q_x.mass()[x] == 0.0 || slice.iter().all(|&p| p == 0.0 || p == 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_pmf_slices() {
        let r = ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![0.9, 0.2, 0.1, 0.9], 1, 2);
        assert!(matches!(r, Err(RegionError::Invalid(_))));
    }

    #[test]
    fn target_and_determinism() {
        let bsc = ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![0.9, 0.1, 0.1, 0.9], 1, 2).unwrap();
        assert!(!bsc.is_deterministic());
        let t = bsc.target();
        assert!((t.prob(&[1, 0, 0, 0]) - 0.05).abs() < 1e-15);
        let copy = ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![1.0, 0.0, 0.0, 1.0], 1, 2).unwrap();
        assert!(copy.is_deterministic());
    }
}
