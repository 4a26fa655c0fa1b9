//! Randomized sweeps of the bound checkers over inputs that satisfy their preconditions.
//!
//! Each instance is a mixture `(1−t)·p + t·r` of a distribution `p` with the required
//! structure and an arbitrary `r`, so the certificate `eps` is measured rather than
//! assumed. Instances whose measured distance is not below ½ are skipped.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::bounds::{entropy_gap_bound, lemma4_check, lemma5_check};
use super::info::{total_variation, tv_slices};
use super::joint::{Axis, DenseJoint};
use super::ProbError;
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub name: String,
    pub instances: usize,
    /// Instances that met the precondition and were checked.
    pub checked: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen; non-positive when every check held.
    pub max_excess: f64,
}

impl SweepReport {
    fn new(name: &str, instances: usize) -> Self {
        Self {
            name: name.into(),
            instances,
            checked: 0,
            violations: 0,
            max_excess: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, excess: f64, holds: bool) {
        self.checked += 1;
        self.max_excess = self.max_excess.max(excess);
        if !holds {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Knobs shared by the three sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub instances: usize,
    pub seed: u64,
    /// Largest blocklength for the two lemma sweeps.
    pub max_n: usize,
    /// Multiplies the measured certificate before checking; values below one make
    /// the certificate false and are only useful for exercising the failure path.
    pub eps_scale: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            instances: 1000,
            seed: 0,
            max_n: 3,
            eps_scale: 1.0,
        }
    }
}

fn mix(p: &[f64], r: &[f64], t: f64) -> Vec<f64> {
    p.iter().zip(r).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

/// Certificate slightly above the measured distance, so `‖·‖ < eps` holds strictly.
fn certificate(tv: f64, scale: f64) -> f64 {
    (tv * (1.0 + 1e-9) + 1e-15) * scale
}

/// `|H(p) − H(q)| ≤ TV·log₂(|𝒳|−1) + h_b(TV)` for alphabets of size 2 to 5.
pub fn sweep_entropy_gap(opts: &SweepOptions) -> Result<SweepReport, ProbError> {
    let mut rep = SweepReport::new("entropy_gap_bound", opts.instances);
    for i in 0..opts.instances {
        let mut rng = Stream::derive(opts.seed, i as u64, 0x6a9);
        let k = 2 + rng.below(4) as usize;
        let p = rng.simplex(k);
        let r = rng.simplex(k);
        let q = mix(&p, &r, 0.9 * rng.uniform());
        let axes = || alloc::vec![Axis::indexed("X", k)];
        let (pd, qd) = (DenseJoint::normalized(axes(), p)?, DenseJoint::normalized(axes(), q)?);
        if total_variation(&pd, &qd)? >= 0.5 {
            continue;
        }
        let g = entropy_gap_bound(&pd, &qd)?;
        rep.record(g.gap - g.bound, g.holds);
    }
    Ok(rep)
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|q| format!("{prefix}{q}")).collect()
}

/// `Σ_q I(W_q; W^{q−1} | Z)` against its bound on perturbed conditional products.
pub fn sweep_lemma4(opts: &SweepOptions) -> Result<SweepReport, ProbError> {
    let mut rep = SweepReport::new("lemma4_check", opts.instances);
    for i in 0..opts.instances {
        let mut rng = Stream::derive(opts.seed, i as u64, 0x1e4);
        let n = 1 + rng.below(opts.max_n as u64) as usize;
        let w = 2 + rng.below(2) as usize;
        let z = 1 + rng.below(2) as usize;
        let pz = rng.simplex(z);
        let kernels: Vec<Vec<Vec<f64>>> = (0..n).map(|_| (0..z).map(|_| rng.simplex(w)).collect()).collect();
        let mut axes = alloc::vec![Axis::indexed("Z", z)];
        let wn = names("W", n);
        axes.extend(wn.iter().map(|s| Axis::indexed(s.as_str(), w)));
        let base = DenseJoint::from_fn(axes.clone(), |idx| {
            let mut p = pz[idx[0]];
            for q in 0..n {
                p *= kernels[q][idx[0]][idx[q + 1]];
            }
            p
        })?;
        let r = rng.simplex(base.num_cells());
        let joint = DenseJoint::normalized(axes, mix(base.mass(), &r, 0.6 * rng.uniform()))?;
        let tv = tv_slices(joint.mass(), base.mass());
        if certificate(tv, 1.0) >= 0.5 {
            continue;
        }
        let refs: Vec<&str> = wn.iter().map(String::as_str).collect();
        let l = lemma4_check(&joint, &refs, &["Z"], certificate(tv, opts.eps_scale))?;
        rep.record(l.lhs - l.rhs, l.holds);
    }
    Ok(rep)
}

/// Per-coordinate and time-sharing sides of the memoryless bound on perturbed channels
/// with exactly i.i.d. inputs.
pub fn sweep_lemma5(opts: &SweepOptions) -> Result<SweepReport, ProbError> {
    let mut rep = SweepReport::new("lemma5_check", opts.instances);
    for i in 0..opts.instances {
        let mut rng = Stream::derive(opts.seed, i as u64, 0x1e5);
        let n = 1 + rng.below(opts.max_n as u64) as usize;
        let xs = 2 + rng.below(2) as usize;
        let ys = 2 + rng.below(2) as usize;
        let px = rng.simplex(xs);
        let chan: Vec<Vec<f64>> = (0..xs).map(|_| rng.simplex(ys)).collect();
        let xn = xs.pow(n as u32);
        let yn = ys.pow(n as u32);
        // an arbitrary kernel q(yⁿ | xⁿ) mixed into the memoryless one keeps the inputs i.i.d.
        let other: Vec<Vec<f64>> = (0..xn).map(|_| rng.simplex(yn)).collect();
        let t = 0.6 * rng.uniform();
        let (xnames, ynames) = (names("X", n), names("Y", n));
        let mut axes: Vec<Axis> = xnames.iter().map(|s| Axis::indexed(s.as_str(), xs)).collect();
        axes.extend(ynames.iter().map(|s| Axis::indexed(s.as_str(), ys)));
        let mut base = Vec::with_capacity(xn * yn);
        let mut mass = Vec::with_capacity(xn * yn);
        for xi in 0..xn {
            let xd = digits(xi, xs, n);
            let pxn: f64 = xd.iter().map(|&x| px[x]).product();
            for yi in 0..yn {
                let yd = digits(yi, ys, n);
                let memoryless: f64 = (0..n).map(|q| chan[xd[q]][yd[q]]).product();
                base.push(pxn * memoryless);
                mass.push(pxn * ((1.0 - t) * memoryless + t * other[xi][yi]));
            }
        }
        let tv = tv_slices(&mass, &base);
        if certificate(tv, 1.0) >= 0.5 {
            continue;
        }
        let joint = DenseJoint::new(axes, mass)?;
        let xr: Vec<&str> = xnames.iter().map(String::as_str).collect();
        let yr: Vec<&str> = ynames.iter().map(String::as_str).collect();
        let l = lemma5_check(&joint, &xr, &yr, certificate(tv, opts.eps_scale))?;
        let worst = l.per_coordinate.iter().copied().fold(l.time_sharing, f64::max);
        rep.record(worst - l.bound, l.holds);
    }
    Ok(rep)
}

/// Base-`b` digits of `v`, most significant first.
fn digits(mut v: usize, b: usize, n: usize) -> Vec<usize> {
    let mut d = alloc::vec![0; n];
    for q in (0..n).rev() {
        d[q] = v % b;
        v /= b;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweeps_pass() {
        let opts = SweepOptions { instances: 60, ..Default::default() };
        for rep in [sweep_entropy_gap(&opts), sweep_lemma4(&opts), sweep_lemma5(&opts)] {
            let rep = rep.unwrap();
            assert!(rep.passed(), "{rep:?}");
            assert!(rep.checked > 30, "{rep:?}");
        }
    }

    #[test]
    fn corrupted_certificates_are_caught() {
        let opts = SweepOptions { instances: 60, eps_scale: 0.0, ..Default::default() };
        // eps = 0 claims an exact product, which the perturbations break
        assert!(!sweep_lemma4(&opts).unwrap().passed());
        assert!(!sweep_lemma5(&opts).unwrap().passed());
    }
}
