use alloc::string::String;
use alloc::vec::Vec;

use super::OsrbError;
use crate::region::{assemble_joint, f_name, AuxScheme, ChannelSpec, CondTable, Sizes, Terminal, X1, X2};

/// Single-letter tables a protocol run needs, derived once from `(channel, scheme)`.
///
/// Input and output pair symbols are `x = x1·|𝒳₂| + x2` and `y = y1·|𝒴₂| + y2`.
#[derive(Debug, Clone)]
pub struct ProtocolModel {
    pub(crate) sizes: Sizes,
    pub(crate) f_sizes: Vec<usize>,
    pub(crate) f_cells: usize,
    pub(crate) enc: Vec<CondTable>,
    /// `p(f_1..f_i, x_other)` laid out `[(prefix·|ℱ_i| + f)·|𝒳_other| + x]`.
    pub(crate) dec: Vec<Vec<f64>>,
    pub(crate) dec_entropy: Vec<f64>,
    pub(crate) out1: CondTable,
    pub(crate) out2: CondTable,
    pub(crate) qx: Vec<f64>,
    /// `q(y | x)` laid out `[x][y]`.
    pub(crate) kernel: Vec<f64>,
}

impl ProtocolModel {
    pub fn new(channel: &ChannelSpec, scheme: &AuxScheme) -> Result<Self, OsrbError> {
        let joint = assemble_joint(channel, scheme)?;
        let sizes = scheme.sizes();
        let r = scheme.rounds();
        let mut dec = Vec::with_capacity(r);
        let mut dec_entropy = Vec::with_capacity(r);
        for i in 1..=r {
            let mut names: Vec<String> = (1..=i).map(f_name).collect();
            names.push(String::from(match Terminal::owner(i) {
                Terminal::One => X2,
                Terminal::Two => X1,
            }));
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let m = joint.marginal(&refs)?;
            dec_entropy.push(m.entropy_bits());
            dec.push(m.mass().to_vec());
        }
        Ok(Self {
            sizes,
            f_sizes: scheme.f_sizes().to_vec(),
            f_cells: scheme.f_cells(),
            enc: scheme.round_tables().to_vec(),
            dec,
            dec_entropy,
            out1: scheme.y1_table().clone(),
            out2: scheme.y2_table().clone(),
            qx: channel.q_x().mass().to_vec(),
            kernel: channel.kernel().to_vec(),
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

    /// `H(F_1..F_i, X_other)` for round `i`, the decoder's typicality reference.
    pub fn decoder_entropy(&self, round: usize) -> f64 {
        self.dec_entropy[round - 1]
    }

    #[inline]
    pub(crate) fn own_size(&self, round: usize) -> usize {
        match Terminal::owner(round) {
            Terminal::One => self.sizes.x1,
            Terminal::Two => self.sizes.x2,
        }
    }

    #[inline]
    pub(crate) fn other_size(&self, round: usize) -> usize {
        match Terminal::owner(round) {
            Terminal::One => self.sizes.x2,
            Terminal::Two => self.sizes.x1,
        }
    }

    /// `p(f_i | prefix, x_own)` under the scheme.
    #[inline]
    pub(crate) fn enc_p(&self, round: usize, prefix: usize, x_own: usize, f: usize) -> f64 {
        self.enc[round - 1].get(prefix * self.own_size(round) + x_own, f)
    }

    /// `p(prefix, f_i, x_other)` under the i.i.d. joint.
    #[inline]
    pub(crate) fn dec_p(&self, round: usize, prefix: usize, x_other: usize, f: usize) -> f64 {
        let fs = self.f_sizes[round - 1];
        self.dec[round - 1][(prefix * fs + f) * self.other_size(round) + x_other]
    }

    #[inline]
    pub(crate) fn split_x(&self, x: usize) -> (usize, usize) {
        (x / self.sizes.x2, x % self.sizes.x2)
    }

    #[inline]
    pub(crate) fn split_y(&self, y: usize) -> (usize, usize) {
        (y / self.sizes.y2, y % self.sizes.y2)
    }

    /// `p(y1, y2 | views, x)` for single-letter views (flattened `f` of each terminal).
    #[inline]
    pub(crate) fn out_p(&self, v1: usize, v2: usize, x: usize, y: usize) -> f64 {
        let (x1, x2) = self.split_x(x);
        let (y1, y2) = self.split_y(y);
        self.out1.get(v1 * self.sizes.x1 + x1, y1) * self.out2.get(v2 * self.sizes.x2 + x2, y2)
    }

    /// Single-letter target `q(x)q(y|x)` in `[x][y]` order.
    pub(crate) fn target_letter(&self) -> Vec<f64> {
        let ny = self.sizes.y();
        (0..self.sizes.x() * ny).map(|c| self.qx[c / ny] * self.kernel[c]).collect()
    }
}
