//! Bit-packed linear algebra over GF(2), used by the linear binning family.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Stream;

#[inline]
pub(crate) fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
pub(crate) fn get(v: &[u64], i: usize) -> bool {
    (v[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
pub(crate) fn set(v: &mut [u64], i: usize, bit: bool) {
    let m = 1u64 << (i % 64);
    if bit {
        v[i / 64] |= m;
    } else {
        v[i / 64] &= !m;
    }
}

#[inline]
fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Dense `rows × cols` matrix, one packed bit row per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct BitMatrix {
    rows: Vec<Vec<u64>>,
    cols: usize,
}

impl BitMatrix {
    pub(crate) fn random(rows: usize, cols: usize, rng: &mut Stream) -> Self {
        let w = words(cols);
        let tail = cols % 64;
        let rows = (0..rows)
            .map(|_| {
                let mut r: Vec<u64> = (0..w).map(|_| rng.next_u64()).collect();
                if tail != 0 {
                    r[w - 1] &= (1u64 << tail) - 1;
                }
                r
            })
            .collect();
        Self { rows, cols }
    }

    pub(crate) fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn entry(&self, r: usize, c: usize) -> bool {
        get(&self.rows[r], c)
    }

    /// `A·v` as a packed vector of `nrows` bits.
    pub(crate) fn mul(&self, v: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; words(self.rows.len())];
        for (r, row) in self.rows.iter().enumerate() {
            let parity = row.iter().zip(v).fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones()) & 1;
            set(&mut out, r, parity == 1);
        }
        out
    }
}

/// Solution set `{particular ⊕ span(basis)}` of a linear system.
#[derive(Debug, Clone)]
pub(crate) struct AffineSpace {
    pub particular: Vec<u64>,
    pub basis: Vec<Vec<u64>>,
}

/// Solves `A z = rhs` where `A` has `cols` columns given as packed rows.
/// Returns `None` when the system is inconsistent.
pub(crate) fn solve(mut rows: Vec<Vec<u64>>, rhs: &[bool], cols: usize) -> Option<AffineSpace> {
    debug_assert_eq!(rows.len(), rhs.len());
    // append the right-hand side as column `cols`
    let w = words(cols + 1);
    for (row, &b) in rows.iter_mut().zip(rhs) {
        row.resize(w, 0);
        set(row, cols, b);
    }
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| get(&rows[r], c)) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && get(row, c) {
                xor_into(row, &pivot_row);
            }
        }
        pivots.push(c);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    if rows[rank..].iter().any(|r| get(r, cols)) {
        return None;
    }
    let cw = words(cols);
    let mut particular = vec![0u64; cw];
    for (r, &p) in pivots.iter().enumerate() {
        set(&mut particular, p, get(&rows[r], cols));
    }
    let mut is_pivot = vec![false; cols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let basis = (0..cols)
        .filter(|&j| !is_pivot[j])
        .map(|j| {
            let mut v = vec![0u64; cw];
            set(&mut v, j, true);
            for (r, &p) in pivots.iter().enumerate() {
                if get(&rows[r], j) {
                    set(&mut v, p, true);
                }
            }
            v
        })
        .collect();
    Some(AffineSpace { particular, basis })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solutions_satisfy_the_system() {
        let mut rng = Stream::new(3, 0);
        for trial in 0..40 {
            let (m, c) = (3 + trial % 7, 5 + trial % 11);
            let a = BitMatrix::random(m, c, &mut rng);
            let mut z = vec![0u64; words(c)];
            for j in 0..c {
                set(&mut z, j, rng.below(2) == 1);
            }
            let s = a.mul(&z);
            let rhs: Vec<bool> = (0..m).map(|r| get(&s, r)).collect();
            let sol = solve(a.rows.clone(), &rhs, c).expect("consistent by construction");
            assert_eq!(a.mul(&sol.particular), s);
            for b in &sol.basis {
                assert!(a.mul(b).iter().all(|&w| w == 0));
            }
            assert!(sol.basis.len() >= c.saturating_sub(m));
        }
    }

    #[test]
    fn detects_inconsistency() {
        // z0 = 0 and z0 = 1
        let rows = vec![vec![1u64], vec![1u64]];
        assert!(solve(rows, &[false, true], 1).is_none());
    }
}
