//! Linear inequality systems over named rate variables.
//!
//! Constraints are `coef · x ≥ rhs` or `coef · x > rhs`. Elimination and comparison
//! work on closures, so strictness is carried along for reporting only.

mod compare;
mod fme;
mod rounds;

use alloc::string::String;
use alloc::vec::Vec;

use crate::lp::{Field, Rational};
use crate::region::RegionError;

pub use compare::{polyhedra_equal, probe_direction, support_value, PolyComparison, SupportProbe};
pub use fme::{fme_eliminate, fme_eliminate_with, FmeOptions};
pub use rounds::{per_round_system, round_entropies, theorem1_system, RoundEntropies, R0, R12, R21};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolytopeError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("coefficient vector has {found} entries, expected {expected}")]
    Arity { expected: usize, found: usize },
    #[error("non-finite coefficient or constant")]
    NonFinite,
    #[error("systems have different variables")]
    VariableMismatch,
    #[error("polyhedron `{0}` is empty")]
    Empty(&'static str),
    #[error(transparent)]
    Region(#[from] RegionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strictness {
    /// `≥`
    Closed,
    /// `>`
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inequality<F = f64> {
    pub coef: Vec<F>,
    pub rel: Strictness,
    pub rhs: F,
    /// Where the row came from, e.g. `c1` or `c44[2]`; rows produced by elimination are `fme`.
    pub label: String,
}

impl<F: Field> Inequality<F> {
    /// `lhs − rhs` at `x`.
    pub fn slack(&self, x: &[F]) -> F {
        let mut s = F::zero();
        for (c, v) in self.coef.iter().zip(x) {
            s = s.add(&c.mul(v));
        }
        s.sub(&self.rhs)
    }

    fn is_trivial(&self) -> bool {
        self.coef.iter().all(Field::is_zero)
    }

    /// Scales so the largest coefficient magnitude is one.
    fn normalized(mut self) -> Self {
        let mut m = F::zero();
        for c in &self.coef {
            let a = if c.is_neg() { c.neg() } else { c.clone() };
            if m.lt(&a) {
                m = a;
            }
        }
        if m.is_pos() {
            let inv = F::one().div(&m);
            for c in &mut self.coef {
                *c = c.mul(&inv);
            }
            self.rhs = self.rhs.mul(&inv);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<F = f64> {
    vars: Vec<String>,
    ineqs: Vec<Inequality<F>>,
}

impl<F: Field> LinearSystem<F> {
    pub fn new<S: Into<String>>(vars: impl IntoIterator<Item = S>) -> Self {
        Self {
            vars: vars.into_iter().map(Into::into).collect(),
            ineqs: Vec::new(),
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn inequalities(&self) -> &[Inequality<F>] {
        &self.ineqs
    }

    pub fn len(&self) -> usize {
        self.ineqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ineqs.is_empty()
    }

    pub fn var_index(&self, name: &str) -> Result<usize, PolytopeError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| PolytopeError::UnknownVariable(name.into()))
    }

    pub fn push(&mut self, coef: Vec<F>, rel: Strictness, rhs: F, label: impl Into<String>) -> Result<(), PolytopeError> {
        if coef.len() != self.vars.len() {
            return Err(PolytopeError::Arity {
                expected: self.vars.len(),
                found: coef.len(),
            });
        }
        if coef.iter().chain([&rhs]).any(|c| !c.to_f64().is_finite()) {
            return Err(PolytopeError::NonFinite);
        }
        self.ineqs.push(Inequality {
            coef,
            rel,
            rhs,
            label: label.into(),
        });
        Ok(())
    }

    /// Adds `Σ terms ≥ rhs` (or `>`) given by `(variable, coefficient)` pairs.
    pub fn push_terms(&mut self, terms: &[(&str, f64)], rel: Strictness, rhs: f64, label: impl Into<String>) -> Result<(), PolytopeError> {
        let mut coef = alloc::vec![F::zero(); self.vars.len()];
        for (name, c) in terms {
            let j = self.var_index(name)?;
            coef[j] = coef[j].add(&F::from_f64(*c));
        }
        self.push(coef, rel, F::from_f64(rhs), label)
    }

    /// All rows whose label does not start with `prefix`.
    pub fn without(&self, prefix: &str) -> Self {
        Self {
            vars: self.vars.clone(),
            ineqs: self.ineqs.iter().filter(|q| !q.label.starts_with(prefix)).cloned().collect(),
        }
    }

    /// Every strict row replaced by its closure.
    pub fn closure(&self) -> Self {
        let mut s = self.clone();
        s.ineqs.iter_mut().for_each(|q| q.rel = Strictness::Closed);
        s
    }

    /// Membership of `x` in the closure, with slack `tol`.
    pub fn contains(&self, x: &[F], tol: f64) -> bool {
        self.ineqs.iter().all(|q| q.slack(x).to_f64() >= -tol)
    }

    /// Converts every coefficient through `f64`.
    pub fn convert<G: Field>(&self) -> LinearSystem<G> {
        LinearSystem {
            vars: self.vars.clone(),
            ineqs: self
                .ineqs
                .iter()
                .map(|q| Inequality {
                    coef: q.coef.iter().map(|c| G::from_f64(c.to_f64())).collect(),
                    rel: q.rel,
                    rhs: G::from_f64(q.rhs.to_f64()),
                    label: q.label.clone(),
                })
                .collect(),
        }
    }

    /// Exact copy with constants rationalized at 12 decimal digits.
    pub fn to_rational(&self) -> LinearSystem<Rational> {
        self.convert()
    }

    /// Same polyhedron with its variables listed in `order`.
    pub fn reordered(&self, order: &[&str]) -> Result<Self, PolytopeError> {
        if order.len() != self.vars.len() {
            return Err(PolytopeError::VariableMismatch);
        }
        let idx = order.iter().map(|n| self.var_index(n)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            vars: order.iter().map(|s| String::from(*s)).collect(),
            ineqs: self
                .ineqs
                .iter()
                .map(|q| Inequality {
                    coef: idx.iter().map(|&j| q.coef[j].clone()).collect(),
                    rel: q.rel,
                    rhs: q.rhs.clone(),
                    label: q.label.clone(),
                })
                .collect(),
        })
    }
}
