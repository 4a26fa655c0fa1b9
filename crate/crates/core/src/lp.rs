//! Dense two-phase simplex with Bland's rule.
//!
//! Problems here are tiny (a handful of rate variables, at most a few hundred
//! inequalities), so a full tableau is simplest. The solver is generic over [`Field`]
//! so the same code runs in floating point and in exact rationals.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Scalar arithmetic used by the simplex and by Fourier-Motzkin elimination.
pub trait Field: Clone + core::fmt::Debug + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Strictly positive beyond the field's tolerance.
    fn is_pos(&self) -> bool;
    /// Strictly negative beyond the field's tolerance.
    fn is_neg(&self) -> bool;
    fn is_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn lt(&self, other: &Self) -> bool {
        other.sub(self).is_pos()
    }
}

/// Tolerance used by the floating-point field.
pub const F64_TOL: f64 = 1e-10;

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_pos(&self) -> bool {
        *self > F64_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -F64_TOL
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Exact rationals. Conversion from `f64` rounds to 12 decimal digits.
pub type Rational = BigRational;

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn from_f64(x: f64) -> Self {
        let scaled = crate::math::round(x * 1e12);
        let numer = BigInt::from(scaled as i128);
        BigRational::new(numer, BigInt::from(1_000_000_000_000i64))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

/// `minimize c·x` subject to linear rows, with per-variable sign restrictions.
#[derive(Debug, Clone)]
pub struct Lp<F: Field> {
    pub num_vars: usize,
    /// `true` for unrestricted variables, `false` for `x_j ≥ 0`.
    pub free: Vec<bool>,
    pub rows: Vec<(Vec<F>, Relation, F)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<F> {
    Optimal { value: F, x: Vec<F> },
    Infeasible,
    Unbounded,
}

impl<F: Field> LpOutcome<F> {
    pub fn value(&self) -> Option<&F> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

impl<F: Field> Lp<F> {
    pub fn new(num_vars: usize, free: bool) -> Self {
        Self {
            num_vars,
            free: vec![free; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, coef: Vec<F>, rel: Relation, rhs: F) {
        debug_assert_eq!(coef.len(), self.num_vars);
        self.rows.push((coef, rel, rhs));
    }

    pub fn minimize(&self, c: &[F]) -> LpOutcome<F> {
        Tableau::build(self).solve(self, c)
    }
}

struct Tableau<F: Field> {
    /// `m` rows of `cols + 1` entries; the last entry is the right-hand side.
    t: Vec<Vec<F>>,
    basis: Vec<usize>,
    cols: usize,
    /// First artificial column.
    art_start: usize,
    /// Column of the positive and (for free variables) negative part of each variable.
    var_cols: Vec<(usize, Option<usize>)>,
}

impl<F: Field> Tableau<F> {
    fn build(lp: &Lp<F>) -> Self {
        let mut var_cols = Vec::with_capacity(lp.num_vars);
        let mut col = 0;
        for j in 0..lp.num_vars {
            if lp.free[j] {
                var_cols.push((col, Some(col + 1)));
                col += 2;
            } else {
                var_cols.push((col, None));
                col += 1;
            }
        }
        let slack_start = col;
        let slacks = lp.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let art_start = slack_start + slacks;
        let m = lp.rows.len();
        let cols = art_start + m;
        let mut t = Vec::with_capacity(m);
        let mut slack = slack_start;
        for (i, (coef, rel, rhs)) in lp.rows.iter().enumerate() {
            let mut row = vec![F::zero(); cols + 1];
            for (j, a) in coef.iter().enumerate() {
                let (p, n) = var_cols[j];
                row[p] = a.clone();
                if let Some(n) = n {
                    row[n] = a.neg();
                }
            }
            match rel {
                Relation::Ge => {
                    row[slack] = F::one().neg();
                    slack += 1;
                }
                Relation::Le => {
                    row[slack] = F::one();
                    slack += 1;
                }
                Relation::Eq => {}
            }
            row[cols] = rhs.clone();
            if rhs.is_neg() {
                for v in row.iter_mut() {
                    *v = v.neg();
                }
            }
            row[art_start + i] = F::one();
            t.push(row);
        }
        Self {
            t,
            basis: (art_start..art_start + m).collect(),
            cols,
            art_start,
            var_cols,
        }
    }

    fn pivot(&mut self, r: usize, e: usize, obj: &mut [F]) {
        let piv = self.t[r][e].clone();
        for v in self.t[r].iter_mut() {
            *v = v.div(&piv);
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e].clone();
            if f.is_zero() {
                row[e] = F::zero();
                continue;
            }
            for (v, p) in row.iter_mut().zip(&prow) {
                *v = v.sub(&f.mul(p));
            }
            row[e] = F::zero();
        }
        let f = obj[e].clone();
        if !f.is_zero() {
            for (v, p) in obj.iter_mut().zip(&prow) {
                *v = v.sub(&f.mul(p));
            }
        }
        obj[e] = F::zero();
        self.basis[r] = e;
    }

    /// Reduced-cost row for costs `c` over the first `self.cols` columns.
    fn reduced(&self, c: &[F]) -> Vec<F> {
        let mut obj: Vec<F> = c.to_vec();
        obj.push(F::zero());
        for (i, row) in self.t.iter().enumerate() {
            let cb = c[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for (v, a) in obj.iter_mut().zip(row) {
                *v = v.sub(&cb.mul(a));
            }
        }
        obj
    }

    /// Runs simplex iterations on columns `< limit`. Returns `false` if unbounded.
    fn iterate(&mut self, obj: &mut [F], limit: usize) -> bool {
        loop {
            let Some(e) = (0..limit).find(|&j| obj[j].is_neg()) else {
                return true;
            };
            let mut best: Option<(usize, F)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[e].is_pos() {
                    let ratio = row[self.cols].div(&row[e]);
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => {
                            ratio.lt(br) || (!br.lt(&ratio) && self.basis[i] < self.basis[*bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, e, obj),
            }
        }
    }

    fn solve(mut self, lp: &Lp<F>, c: &[F]) -> LpOutcome<F> {
        // Phase 1: minimize the sum of artificials.
        let mut c1 = vec![F::zero(); self.cols];
        for v in c1.iter_mut().skip(self.art_start) {
            *v = F::one();
        }
        let mut obj = self.reduced(&c1);
        self.iterate(&mut obj, self.cols);
        // obj[cols] holds minus the phase-1 optimum.
        if obj[self.cols].neg().is_pos() {
            return LpOutcome::Infeasible;
        }
        // Drive remaining artificials out of the basis, dropping redundant rows.
        let mut i = 0;
        while i < self.t.len() {
            if self.basis[i] >= self.art_start {
                if let Some(e) = (0..self.art_start).find(|&j| !self.t[i][j].is_zero()) {
                    self.pivot(i, e, &mut obj);
                    i += 1;
                } else {
                    self.t.remove(i);
                    self.basis.remove(i);
                }
            } else {
                i += 1;
            }
        }
        // Phase 2 over structural and slack columns.
        let mut c2 = vec![F::zero(); self.cols];
        for (j, cj) in c.iter().enumerate() {
            let (p, n) = self.var_cols[j];
            c2[p] = cj.clone();
            if let Some(n) = n {
                c2[n] = cj.neg();
            }
        }
        let mut obj = self.reduced(&c2);
        if !self.iterate(&mut obj, self.art_start) {
            return LpOutcome::Unbounded;
        }
        let mut col_val = vec![F::zero(); self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            col_val[b] = self.t[i][self.cols].clone();
        }
        let x: Vec<F> = (0..lp.num_vars)
            .map(|j| {
                let (p, n) = self.var_cols[j];
                match n {
                    Some(n) => col_val[p].sub(&col_val[n]),
                    None => col_val[p].clone(),
                }
            })
            .collect();
        let value = c
            .iter()
            .zip(&x)
            .fold(F::zero(), |acc, (a, b)| acc.add(&a.mul(b)));
        LpOutcome::Optimal { value, x }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn simple_minimum() {
        // min x + y s.t. x + 2y >= 2, 3x + y >= 3, x, y >= 0  -> (0.8, 0.6), value 1.4
        let mut lp = Lp::<f64>::new(2, false);
        lp.push(vec![1.0, 2.0], Relation::Ge, 2.0);
        lp.push(vec![3.0, 1.0], Relation::Ge, 3.0);
        match lp.minimize(&[1.0, 1.0]) {
            LpOutcome::Optimal { value, x } => {
                assert!(approx(value, 1.4));
                assert!(approx(x[0], 0.8) && approx(x[1], 0.6));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn free_variables_and_unbounded() {
        // min x s.t. x >= -3 with x free
        let mut lp = Lp::<f64>::new(1, true);
        lp.push(vec![1.0], Relation::Ge, -3.0);
        assert!(approx(*lp.minimize(&[1.0]).value().unwrap(), -3.0));
        assert_eq!(lp.minimize(&[-1.0]), LpOutcome::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = Lp::<f64>::new(1, false);
        lp.push(vec![1.0], Relation::Ge, 2.0);
        lp.push(vec![1.0], Relation::Le, 1.0);
        assert_eq!(lp.minimize(&[1.0]), LpOutcome::Infeasible);
    }

    #[test]
    fn equality_rows_and_redundancy() {
        // x + y = 1 twice (redundant), min x - y
        let mut lp = Lp::<f64>::new(2, false);
        lp.push(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.push(vec![2.0, 2.0], Relation::Eq, 2.0);
        assert!(approx(*lp.minimize(&[1.0, -1.0]).value().unwrap(), -1.0));
    }

    #[test]
    fn exact_rationals_agree() {
        let r = |x: f64| <Rational as Field>::from_f64(x);
        let mut lp = Lp::<Rational>::new(2, false);
        lp.push(vec![r(1.0), r(2.0)], Relation::Ge, r(2.0));
        lp.push(vec![r(3.0), r(1.0)], Relation::Ge, r(3.0));
        let v = lp.minimize(&[r(1.0), r(1.0)]);
        assert_eq!(v.value().unwrap(), &BigRational::new(BigInt::from(7), BigInt::from(5)));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Klee-Minty style degenerate vertex at the origin
        let mut lp = Lp::<f64>::new(3, false);
        lp.push(vec![-1.0, -1.0, 0.0], Relation::Ge, 0.0);
        lp.push(vec![-1.0, 0.0, -1.0], Relation::Ge, 0.0);
        lp.push(vec![0.0, -1.0, -1.0], Relation::Ge, 0.0);
        lp.push(vec![-1.0, -1.0, -1.0], Relation::Ge, -1.0);
        assert!(approx(*lp.minimize(&[-1.0, -1.0, -1.0]).value().unwrap(), 0.0));
    }
}
