//! Checkers for the continuity bounds on entropy and mutual information used by the
//! converse: each returns both sides of the inequality so callers can see the margin.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::info::{mutual_information, total_variation};
use super::{Axis, DenseJoint, ProbError};
use crate::math::{hb, log2};

/// Slack allowed when comparing the two sides of a bound.
const BOUND_SLACK: f64 = 1e-12;

fn check_eps(eps: f64) -> Result<(), ProbError> {
    if !(0.0..0.5).contains(&eps) {
        return Err(ProbError::Precondition(format!(
            "epsilon {eps} must lie in [0, 1/2)"
        )));
    }
    Ok(())
}

/// `|H(p) − H(q)|` against `TV·log₂(|𝒳|−1) + h_b(TV)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBound {
    pub gap: f64,
    pub bound: f64,
    pub tv: f64,
    pub holds: bool,
}

pub fn entropy_gap_bound(p: &DenseJoint, q: &DenseJoint) -> Result<GapBound, ProbError> {
    if p.axes().len() != 1 || !p.same_axes(q) {
        return Err(ProbError::AxisMismatch);
    }
    let size = p.axes()[0].size();
    if size < 2 {
        return Err(ProbError::Precondition(format!(
            "alphabet of size {size}; the bound needs at least 2 symbols"
        )));
    }
    let tv = total_variation(p, q)?;
    if tv >= 0.5 {
        return Err(ProbError::Precondition(format!(
            "total variation {tv} is not below 1/2"
        )));
    }
    let gap = (p.entropy_bits() - q.entropy_bits()).abs();
    let bound = tv * log2((size - 1) as f64) + hb(tv);
    Ok(GapBound {
        gap,
        bound,
        tv,
        holds: gap <= bound + BOUND_SLACK,
    })
}

/// Both sides of the bound `Σ_q I(W_q; W^{q−1} | Z) ≤ 2n(ε log|𝒲| + h_b(ε))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma4Report {
    pub n: usize,
    pub lhs: f64,
    /// `2n(ε log|𝒲| + h_b(ε))`, the form the checker enforces.
    pub rhs: f64,
    /// `2nε log|𝒲| + (n+1)h_b(ε)`, the tighter form obtained in the proof; reported only.
    pub rhs_proof: f64,
    pub holds: bool,
}

/// `eps` certifies `‖p(wⁿ,z) − p(z)Π p̂_q(w_q|z)‖ < eps` for some kernels p̂_q; the caller
/// is responsible for it (see [`conditional_product_tv`]).
pub fn lemma4_check(
    joint: &DenseJoint,
    w: &[&str],
    z: &[&str],
    eps: f64,
) -> Result<Lemma4Report, ProbError> {
    let n = w.len();
    if n < 1 {
        return Err(ProbError::Precondition("lemma 4 needs n >= 1".into()));
    }
    check_eps(eps)?;
    let alphabet = w
        .iter()
        .map(|name| joint.axis(name).map(Axis::size))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .max()
        .unwrap_or(1);
    let mut lhs = 0.0;
    for q in 1..n {
        lhs += mutual_information(joint, &w[q..=q], &w[..q], z)?.bits;
    }
    let nf = n as f64;
    let logw = log2(alphabet as f64);
    let rhs = 2.0 * nf * (eps * logw + hb(eps));
    let rhs_proof = 2.0 * nf * eps * logw + (nf + 1.0) * hb(eps);
    Ok(Lemma4Report {
        n,
        lhs,
        rhs,
        rhs_proof,
        holds: lhs <= rhs + BOUND_SLACK,
    })
}

/// Per-coordinate and time-sharing sides of the memoryless-channel bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma5Report {
    /// `I(X_{∼q}; Y_q | X_q)` for each q.
    pub per_coordinate: Vec<f64>,
    /// `I(Y_Q; Q | X_Q)` with `Q` uniform on `[1:n]`.
    pub time_sharing: f64,
    /// `2(ε log|𝒴| + h_b(ε))`, shared by every left-hand side.
    pub bound: f64,
    pub holds: bool,
}

pub fn lemma5_check(
    joint: &DenseJoint,
    x: &[&str],
    y: &[&str],
    eps: f64,
) -> Result<Lemma5Report, ProbError> {
    let n = x.len();
    if n < 1 || y.len() != n {
        return Err(ProbError::Precondition(
            "lemma 5 needs n >= 1 inputs and as many outputs".into(),
        ));
    }
    check_eps(eps)?;
    let xsize = joint.axis(x[0])?.size();
    let ysize = joint.axis(y[0])?.size();
    for q in 0..n {
        if joint.axis(x[q])?.size() != xsize || joint.axis(y[q])?.size() != ysize {
            return Err(ProbError::Precondition(
                "all coordinates must share their alphabets".into(),
            ));
        }
    }
    check_iid(joint, x)?;

    let mut per_coordinate = Vec::with_capacity(n);
    for q in 0..n {
        let rest: Vec<&str> = x.iter().enumerate().filter(|(i, _)| *i != q).map(|(_, s)| *s).collect();
        let v = if rest.is_empty() {
            0.0
        } else {
            mutual_information(joint, &rest, &y[q..=q], &x[q..=q])?.bits
        };
        per_coordinate.push(v);
    }

    // (Q, X_Q, Y_Q) with Q uniform.
    let mut qxy = vec![0.0; n * xsize * ysize];
    for q in 0..n {
        let m = joint.marginal(&[x[q], y[q]])?;
        for (c, &p) in m.mass().iter().enumerate() {
            qxy[q * xsize * ysize + c] = p / n as f64;
        }
    }
    let tsd = DenseJoint::normalized(
        vec![
            Axis::indexed("Q", n),
            Axis::indexed("X", xsize),
            Axis::indexed("Y", ysize),
        ],
        qxy,
    )?;
    let time_sharing = mutual_information(&tsd, &["Y"], &["Q"], &["X"])?.bits;

    let bound = 2.0 * (eps * log2(ysize as f64) + hb(eps));
    let holds = per_coordinate.iter().all(|&v| v <= bound + BOUND_SLACK)
        && time_sharing <= bound + BOUND_SLACK;
    Ok(Lemma5Report {
        per_coordinate,
        time_sharing,
        bound,
        holds,
    })
}

fn check_iid(joint: &DenseJoint, x: &[&str]) -> Result<(), ProbError> {
    let first = joint.marginal(&x[..1])?;
    let all = joint.marginal(x)?;
    let size = first.num_cells();
    let mut worst: f64 = 0.0;
    for q in 1..x.len() {
        let m = joint.marginal(&x[q..=q])?;
        for (a, b) in m.mass().iter().zip(first.mass()) {
            worst = worst.max((a - b).abs());
        }
    }
    for (c, &p) in all.mass().iter().enumerate() {
        let mut rem = c;
        let mut prod = 1.0;
        for _ in 0..x.len() {
            prod *= first.mass()[rem % size];
            rem /= size;
        }
        worst = worst.max((p - prod).abs());
    }
    if worst > 1e-9 {
        return Err(ProbError::Precondition(format!(
            "input marginal is not i.i.d. (deviation {worst:e})"
        )));
    }
    Ok(())
}

/// TV between `p(wⁿ, z)` and `p(z)·Π_q p(w_q | z)`, the product of the joint's own
/// per-coordinate conditionals. A valid certificate for [`lemma4_check`].
pub fn conditional_product_tv(joint: &DenseJoint, w: &[&str], z: &[&str]) -> Result<f64, ProbError> {
    let mut order: Vec<&str> = z.to_vec();
    order.extend_from_slice(w);
    let full = joint.marginal(&order)?;
    let pz = if z.is_empty() {
        vec![1.0]
    } else {
        joint.marginal(z)?.mass().to_vec()
    };
    let sizes: Vec<usize> = w.iter().map(|n| joint.axis(n).map(Axis::size)).collect::<Result<_, _>>()?;
    let mut cond: Vec<Vec<f64>> = Vec::with_capacity(w.len());
    for (q, name) in w.iter().enumerate() {
        let mut names: Vec<&str> = z.to_vec();
        names.push(name);
        let m = joint.marginal(&names)?;
        let mut c = m.mass().to_vec();
        for (zi, &pzv) in pz.iter().enumerate() {
            for k in 0..sizes[q] {
                let cell = &mut c[zi * sizes[q] + k];
                *cell = if pzv > 0.0 { *cell / pzv } else { 0.0 };
            }
        }
        cond.push(c);
    }
    let wcells: usize = sizes.iter().product();
    let mut l1 = 0.0;
    for (zi, &pzv) in pz.iter().enumerate() {
        for wi in 0..wcells {
            let mut prod = pzv;
            let mut rem = wi;
            for q in (0..w.len()).rev() {
                let k = rem % sizes[q];
                rem /= sizes[q];
                prod *= cond[q][zi * sizes[q] + k];
            }
            l1 += (full.mass()[zi * wcells + wi] - prod).abs();
        }
    }
    Ok((0.5 * l1).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_bound_identical_and_binary() {
        let p = DenseJoint::new(vec![Axis::indexed("X", 2)], vec![0.3, 0.7]).unwrap();
        let r = entropy_gap_bound(&p, &p).unwrap();
        assert_eq!((r.gap, r.bound), (0.0, 0.0));
        assert!(r.holds);
        let q = DenseJoint::new(vec![Axis::indexed("X", 2)], vec![0.4, 0.6]).unwrap();
        let r = entropy_gap_bound(&p, &q).unwrap();
        assert!((r.bound - hb(r.tv)).abs() < 1e-15);
        assert!(r.holds);
    }

    #[test]
    fn gap_bound_rejects_large_tv() {
        let p = DenseJoint::new(vec![Axis::indexed("X", 2)], vec![1.0, 0.0]).unwrap();
        let q = DenseJoint::new(vec![Axis::indexed("X", 2)], vec![0.5, 0.5]).unwrap();
        // TV exactly 1/2 is outside the lemma's range
        assert!(matches!(entropy_gap_bound(&p, &q), Err(ProbError::Precondition(_))));
        let u = DenseJoint::uniform(vec![Axis::indexed("X", 1)]);
        assert!(entropy_gap_bound(&u, &u).is_err());
    }

    #[test]
    fn lemma4_on_conditionally_iid_is_zero() {
        // W1, W2 i.i.d. given Z
        let pz = [0.3, 0.7];
        let k = [[0.9, 0.1], [0.2, 0.8]];
        let j = DenseJoint::from_fn(
            vec![Axis::indexed("Z", 2), Axis::indexed("W1", 2), Axis::indexed("W2", 2)],
            |i| pz[i[0]] * k[i[0]][i[1]] * k[i[0]][i[2]],
        )
        .unwrap();
        let eps = conditional_product_tv(&j, &["W1", "W2"], &["Z"]).unwrap();
        assert!(eps < 1e-15);
        let r = lemma4_check(&j, &["W1", "W2"], &["Z"], 0.0).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs == 0.0 && r.holds);
        assert!(lemma4_check(&j, &[], &["Z"], 0.1).is_err());
        assert!(lemma4_check(&j, &["W1"], &["Z"], 0.5).is_err());
    }

    #[test]
    fn lemma4_rhs_forms() {
        let j = DenseJoint::uniform(vec![Axis::indexed("W1", 3), Axis::indexed("W2", 3), Axis::indexed("W3", 3)]);
        let r = lemma4_check(&j, &["W1", "W2", "W3"], &[], 0.1).unwrap();
        let logw = log2(3.0);
        assert!((r.rhs - 6.0 * (0.1 * logw + hb(0.1))).abs() < 1e-14);
        assert!((r.rhs_proof - (0.6 * logw + 4.0 * hb(0.1))).abs() < 1e-14);
        assert!(r.rhs >= r.rhs_proof);
    }

    #[test]
    fn lemma5_memoryless_is_zero() {
        let px = [0.4, 0.6];
        let ch = [[0.8, 0.2], [0.3, 0.7]];
        let j = DenseJoint::from_fn(
            vec![
                Axis::indexed("X1", 2),
                Axis::indexed("X2", 2),
                Axis::indexed("Y1", 2),
                Axis::indexed("Y2", 2),
            ],
            |i| px[i[0]] * px[i[1]] * ch[i[0]][i[2]] * ch[i[1]][i[3]],
        )
        .unwrap();
        let r = lemma5_check(&j, &["X1", "X2"], &["Y1", "Y2"], 0.0).unwrap();
        assert!(r.per_coordinate.iter().all(|v| v.abs() < 1e-12));
        assert!(r.time_sharing.abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn lemma5_rejects_non_iid_inputs() {
        let j = DenseJoint::from_fn(
            vec![
                Axis::indexed("X1", 2),
                Axis::indexed("X2", 2),
                Axis::indexed("Y1", 2),
                Axis::indexed("Y2", 2),
            ],
            |i| if i[0] == i[1] { 1.0 } else { 0.0 },
        )
        .unwrap();
        assert!(matches!(
            lemma5_check(&j, &["X1", "X2"], &["Y1", "Y2"], 0.1),
            Err(ProbError::Precondition(_))
        ));
    }
}
