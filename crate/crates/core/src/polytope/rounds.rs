use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{LinearSystem, PolytopeError, Strictness};
use crate::prob::{entropy, DenseJoint};
use crate::region::{f_name, rounds_of, RegionError, RegionEval, Terminal, X1, X2, Y1, Y2};

pub const R0: &str = "R0";
pub const R12: &str = "R12";
pub const R21: &str = "R21";

/// Entropy constants of the per-round binning constraints, indexed by round (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEntropies {
    /// `H(F_i | X_other, F_<i)`: what the decoder of round `i` still needs.
    pub decode: Vec<f64>,
    /// `H(F_i | X_owner, F_<i)`: randomness available to the encoder of round `i`.
    pub own: Vec<f64>,
    /// `H(F_1..F_i | X, Y)`.
    pub cum_xy: Vec<f64>,
}

impl RoundEntropies {
    pub fn rounds(&self) -> usize {
        self.decode.len()
    }
}

pub fn round_entropies(joint: &DenseJoint, r: usize) -> Result<RoundEntropies, RegionError> {
    let have = rounds_of(joint)?;
    if have != r {
        return Err(RegionError::Invalid(format!("joint has {have} rounds, not {r}")));
    }
    let fs: Vec<String> = (1..=r).map(f_name).collect();
    let mut out = RoundEntropies {
        decode: Vec::with_capacity(r),
        own: Vec::with_capacity(r),
        cum_xy: Vec::with_capacity(r),
    };
    for i in 1..=r {
        let (own, other) = match Terminal::owner(i) {
            Terminal::One => (X1, X2),
            Terminal::Two => (X2, X1),
        };
        let prev: Vec<&str> = fs[..i - 1].iter().map(String::as_str).collect();
        let fi = [fs[i - 1].as_str()];
        let mut g = prev.clone();
        g.push(other);
        out.decode.push(entropy(joint, &fi, &g)?.bits);
        let mut g = prev.clone();
        g.push(own);
        out.own.push(entropy(joint, &fi, &g)?.bits);
        let upto: Vec<&str> = fs[..i].iter().map(String::as_str).collect();
        out.cum_xy.push(entropy(joint, &upto, &[X1, X2, Y1, Y2])?.bits);
    }
    Ok(out)
}

/// Variable names `R0, R12, R21, R1..Rr, Rt1..Rtr` (`Rt` is the private-bin rate `R̃`).
pub fn round_vars(r: usize) -> Vec<String> {
    let mut v: Vec<String> = [R0, R12, R21].iter().map(|s| String::from(*s)).collect();
    v.extend((1..=r).map(|i| format!("R{i}")));
    v.extend((1..=r).map(|i| format!("Rt{i}")));
    v
}

/// The binning constraints of the achievability scheme over all rate variables.
///
/// No sign constraint is placed on the `Rt` variables; `R0` and every `R_i` are
/// non-negative. Each rate split is written as two opposite inequalities.
pub fn per_round_system(joint: &DenseJoint, r: usize) -> Result<LinearSystem<f64>, PolytopeError> {
    let h = round_entropies(joint, r)?;
    build(&h)
}

fn build(h: &RoundEntropies) -> Result<LinearSystem<f64>, PolytopeError> {
    use Strictness::{Closed, Strict};
    let r = h.rounds();
    let mut s = LinearSystem::new(round_vars(r));
    let ri = |i: usize| format!("R{i}");
    let rt = |i: usize| format!("Rt{i}");

    for (total, parity) in [(R12, 1), (R21, 0)] {
        let mut up: Vec<(String, f64)> = alloc::vec![(String::from(total), 1.0)];
        up.extend((1..=r).filter(|i| i % 2 == parity).map(|i| (ri(i), -1.0)));
        let down: Vec<(String, f64)> = up.iter().map(|(n, c)| (n.clone(), -c)).collect();
        for (terms, tag) in [(up, "+"), (down, "-")] {
            let t: Vec<(&str, f64)> = terms.iter().map(|(n, c)| (n.as_str(), *c)).collect();
            s.push_terms(&t, Closed, 0.0, format!("split{total}{tag}"))?;
        }
    }
    s.push_terms(&[(&ri(1), 1.0), (R0, 1.0), (&rt(1), 1.0)], Closed, h.decode[0], "c1")?;
    for i in 2..=r {
        s.push_terms(&[(&ri(i), 1.0), (&rt(i), 1.0)], Closed, h.decode[i - 1], format!("c2[{i}]"))?;
    }
    s.push_terms(&[(R0, -1.0), (&rt(1), -1.0)], Strict, -h.own[0], "c3v1")?;
    for i in 2..=r {
        s.push_terms(&[(&rt(i), -1.0)], Strict, -h.own[i - 1], format!("c3v2[{i}]"))?;
    }
    for i in 1..=r {
        let names: Vec<String> = (1..=i).map(rt).collect();
        let t: Vec<(&str, f64)> = names.iter().map(|n| (n.as_str(), -1.0)).collect();
        s.push_terms(&t, Strict, -h.cum_xy[i - 1], format!("c44[{i}]"))?;
    }
    s.push_terms(&[(R0, 1.0)], Closed, 0.0, "pos R0")?;
    for i in 1..=r {
        s.push_terms(&[(&ri(i), 1.0)], Closed, 0.0, format!("pos R{i}"))?;
    }
    Ok(s)
}

/// The four region inequalities over `(R0, R12, R21)` plus non-negativity.
pub fn theorem1_system(eval: &RegionEval) -> LinearSystem<f64> {
    let mut s = LinearSystem::new([R0, R12, R21]);
    let rows: [(&[(&str, f64)], &str); 4] = [
        (&[(R12, 1.0)], "rhs1"),
        (&[(R21, 1.0)], "rhs2"),
        (&[(R0, 1.0), (R12, 1.0)], "rhs3"),
        (&[(R0, 1.0), (R12, 1.0), (R21, 1.0)], "rhs4"),
    ];
    for (k, (terms, label)) in rows.iter().enumerate() {
        s.push_terms(terms, Strictness::Closed, eval.rhs[k], *label).expect("fixed arity");
    }
    for v in [R0, R12, R21] {
        s.push_terms(&[(v, 1.0)], Strictness::Closed, 0.0, format!("pos {v}")).expect("fixed arity");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_count() {
        let h = RoundEntropies {
            decode: alloc::vec![1.0, 0.5],
            own: alloc::vec![0.3, 0.2],
            cum_xy: alloc::vec![0.1, 0.2],
        };
        let s = build(&h).unwrap();
        // 4 split rows, c1, c2, c3v1, c3v2, two c44 rows, three sign rows
        assert_eq!(s.len(), 13);
        assert_eq!(s.inequalities().iter().filter(|q| q.label.starts_with("split")).count(), 4);
        assert_eq!(s.inequalities().iter().filter(|q| q.rel == Strictness::Strict).count(), 4);
    }
}
