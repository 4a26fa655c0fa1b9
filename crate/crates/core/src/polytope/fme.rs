use alloc::string::String;
use alloc::vec::Vec;

use super::{Inequality, LinearSystem, PolytopeError, Strictness};
use crate::lp::{Field, Lp, LpOutcome, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FmeOptions {
    /// Remove rows implied by the others (one LP per row) after each elimination step.
    pub lp_prune: bool,
}

impl Default for FmeOptions {
    fn default() -> Self {
        Self { lp_prune: true }
    }
}

/// Projects `system` onto the variables not listed in `vars`, eliminating in the given order.
pub fn fme_eliminate<F: Field>(system: &LinearSystem<F>, vars: &[&str]) -> Result<LinearSystem<F>, PolytopeError> {
    fme_eliminate_with(system, vars, FmeOptions::default())
}

pub fn fme_eliminate_with<F: Field>(
    system: &LinearSystem<F>,
    vars: &[&str],
    opts: FmeOptions,
) -> Result<LinearSystem<F>, PolytopeError> {
    for v in vars {
        system.var_index(v)?;
    }
    let mut cur = system.clone();
    cur.ineqs = prune_pairwise(cur.ineqs.into_iter().map(Inequality::normalized).collect());
    for v in vars {
        let j = cur.var_index(v)?;
        cur = eliminate_one(&cur, j);
        if opts.lp_prune {
            cur.ineqs = prune_lp(cur.ineqs, cur.vars.len());
        }
    }
    Ok(cur)
}

fn eliminate_one<F: Field>(sys: &LinearSystem<F>, j: usize) -> LinearSystem<F> {
    let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for q in &sys.ineqs {
        if q.coef[j].is_pos() {
            pos.push(q);
        } else if q.coef[j].is_neg() {
            neg.push(q);
        } else {
            rest.push((*q).clone());
        }
    }
    for p in &pos {
        for n in &neg {
            // (−n_j)·p + p_j·n cancels x_j
            let a = n.coef[j].neg();
            let b = p.coef[j].clone();
            let coef = p
                .coef
                .iter()
                .zip(&n.coef)
                .map(|(x, y)| a.mul(x).add(&b.mul(y)))
                .collect();
            let rel = if p.rel == Strictness::Strict || n.rel == Strictness::Strict {
                Strictness::Strict
            } else {
                Strictness::Closed
            };
            rest.push(Inequality {
                coef,
                rel,
                rhs: a.mul(&p.rhs).add(&b.mul(&n.rhs)),
                label: String::from("fme"),
            });
        }
    }
    let vars = sys
        .vars
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, v)| v.clone())
        .collect();
    let ineqs = rest
        .into_iter()
        .map(|mut q| {
            q.coef.remove(j);
            q.normalized()
        })
        .collect();
    LinearSystem {
        vars,
        ineqs: prune_pairwise(ineqs),
    }
}

/// Drops rows `0 ≥ c` with `c ≤ 0` and keeps only the strongest row per coefficient vector.
fn prune_pairwise<F: Field>(rows: Vec<Inequality<F>>) -> Vec<Inequality<F>> {
    let mut out: Vec<Inequality<F>> = Vec::new();
    let mut contradiction = false;
    for q in rows {
        if q.is_trivial() {
            if q.rhs.is_pos() && !contradiction {
                contradiction = true;
                out.push(q);
            }
            continue;
        }
        let same = out
            .iter()
            .position(|o| o.coef.iter().zip(&q.coef).all(|(a, b)| a.sub(b).is_zero()));
        match same {
            None => out.push(q),
            Some(k) => {
                let d = q.rhs.sub(&out[k].rhs);
                if d.is_pos() || (d.is_zero() && q.rel == Strictness::Strict) {
                    out[k] = q;
                }
            }
        }
    }
    out
}

/// Removes each row whose normal direction is already bounded below by its constant
/// under the remaining rows. Rows are examined last to first.
fn prune_lp<F: Field>(mut rows: Vec<Inequality<F>>, n: usize) -> Vec<Inequality<F>> {
    let mut k = rows.len();
    while k > 0 {
        k -= 1;
        if rows[k].is_trivial() {
            continue;
        }
        let mut lp: Lp<F> = Lp::new(n, true);
        for (i, q) in rows.iter().enumerate() {
            if i != k {
                lp.push(q.coef.clone(), Relation::Ge, q.rhs.clone());
            }
        }
        match lp.minimize(&rows[k].coef) {
            LpOutcome::Optimal { value, .. } => {
                if !value.sub(&rows[k].rhs).is_neg() {
                    rows.remove(k);
                }
            }
            LpOutcome::Infeasible => return rows,
            LpOutcome::Unbounded => {}
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Rational;
    use alloc::vec;

    #[test]
    fn hand_projection() {
        let mut s: LinearSystem<f64> = LinearSystem::new(["x", "y"]);
        s.push_terms(&[("x", 1.0)], Strictness::Closed, 1.0, "a").unwrap();
        s.push_terms(&[("y", 1.0), ("x", -1.0)], Strictness::Closed, 0.0, "b").unwrap();
        let p = fme_eliminate(&s, &["x"]).unwrap();
        assert_eq!(p.vars(), ["y"]);
        assert_eq!(p.len(), 1);
        assert_eq!(p.inequalities()[0].coef, vec![1.0]);
        assert_eq!(p.inequalities()[0].rhs, 1.0);
    }

    #[test]
    fn absent_variable_only_drops_column() {
        let mut s: LinearSystem<f64> = LinearSystem::new(["x", "y"]);
        s.push_terms(&[("y", 2.0)], Strictness::Closed, 1.0, "a").unwrap();
        s.push_terms(&[("y", -1.0)], Strictness::Closed, -3.0, "b").unwrap();
        let p = fme_eliminate(&s, &["x"]).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.contains(&[0.5], 1e-12) && p.contains(&[3.0], 1e-12) && !p.contains(&[3.1], 1e-12));
    }

    #[test]
    fn strictness_propagates_and_exact_mode_agrees() {
        let mut s: LinearSystem<f64> = LinearSystem::new(["x", "y", "z"]);
        s.push_terms(&[("x", 1.0), ("y", 1.0)], Strictness::Closed, 0.3, "a").unwrap();
        s.push_terms(&[("x", -1.0), ("z", 1.0)], Strictness::Strict, 0.1, "b").unwrap();
        s.push_terms(&[("y", 1.0)], Strictness::Closed, 0.0, "c").unwrap();
        let p = fme_eliminate(&s, &["x"]).unwrap();
        let comb = p.inequalities().iter().find(|q| q.label == "fme").unwrap();
        assert_eq!(comb.rel, Strictness::Strict);
        let r: LinearSystem<Rational> = s.to_rational();
        let pr = fme_eliminate(&r, &["x"]).unwrap();
        assert_eq!(pr.len(), p.len());
        assert!(fme_eliminate(&s, &["w"]).is_err());
    }

    #[test]
    fn contradiction_survives() {
        let mut s: LinearSystem<f64> = LinearSystem::new(["x"]);
        s.push_terms(&[("x", 1.0)], Strictness::Closed, 2.0, "a").unwrap();
        s.push_terms(&[("x", -1.0)], Strictness::Closed, -1.0, "b").unwrap();
        let p = fme_eliminate(&s, &["x"]).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.inequalities()[0].rhs > 0.0);
    }
}
