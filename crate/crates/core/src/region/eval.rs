use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::channel::{f_name, Sizes, X1, X2, Y1, Y2};
use super::scheme::{AuxScheme, CardinalityPreset, CondTable, Terminal};
use super::{ChannelSpec, RegionError};
use crate::math::{hb, log2};
use crate::prob::{entropy, is_markov, mutual_information, tv_slices, Axis, DenseJoint};

/// Slack allowed on every rate inequality.
pub const RATE_SLACK: f64 = 1e-9;

/// Stand-in for unlimited common randomness.
pub const UNLIMITED_RATE: f64 = 1e6;

/// A rate triple `(R₀, R₁₂, R₂₁)` in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub r0: f64,
    pub r12: f64,
    pub r21: f64,
}

impl RatePoint {
    pub fn new(r0: f64, r12: f64, r21: f64) -> Result<Self, RegionError> {
        if [r0, r12, r21].iter().any(|r| !(*r >= 0.0)) {
            return Err(RegionError::Invalid(format!(
                "rates must be non-negative, got ({r0}, {r12}, {r21})"
            )));
        }
        Ok(Self { r0, r12, r21 })
    }

    /// Left-hand sides `(R₁₂, R₂₁, R₀+R₁₂, R₀+R₁₂+R₂₁)` of the four inequalities.
    pub fn lhs(&self) -> [f64; 4] {
        [self.r12, self.r21, self.r0 + self.r12, self.r0 + self.r12 + self.r21]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r0, self.r12, self.r21]
    }
}

/// Right-hand sides of the four rate inequalities for one joint, with their parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionEval {
    /// `[I(X₁;F|X₂), I(X₂;F|X₁), I(X₁;F|X₂)+I(F₁;Y|X), I(X₁;F|X₂)+I(X₂;F|X₁)+I(F;Y|X)]`.
    pub rhs: [f64; 4],
    pub i_x1_f: f64,
    pub i_x2_f: f64,
    pub i_f1_y: f64,
    pub i_f_y: f64,
}

impl RegionEval {
    pub(crate) fn from_parts(i_x1_f: f64, i_x2_f: f64, i_f1_y: f64, i_f_y: f64) -> Self {
        Self {
            rhs: [i_x1_f, i_x2_f, i_x1_f + i_f1_y, i_x1_f + i_x2_f + i_f_y],
            i_x1_f,
            i_x2_f,
            i_f1_y,
            i_f_y,
        }
    }

    /// `lhs − rhs` per inequality; non-negative (within [`RATE_SLACK`]) means satisfied.
    pub fn slacks(&self, point: &RatePoint) -> [f64; 4] {
        let lhs = point.lhs();
        core::array::from_fn(|k| lhs[k] - self.rhs[k])
    }

    pub fn contains(&self, point: &RatePoint) -> Membership {
        let slacks = self.slacks(point);
        Membership {
            member: slacks.iter().all(|&s| s >= -RATE_SLACK),
            slacks,
        }
    }

    /// The empirical-coordination pair `(I(X₁;F|X₂), I(X₂;F|X₁))`.
    pub fn theorem2(&self) -> (f64, f64) {
        (self.i_x1_f, self.i_x2_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub slacks: [f64; 4],
}

/// Axis names `[F1..Fr, X1, X2, Y1, Y2]` of an assembled joint.
pub fn joint_axis_names(rounds: usize) -> Vec<String> {
    let mut v: Vec<String> = (1..=rounds).map(f_name).collect();
    v.extend([X1, X2, Y1, Y2].iter().map(|s| String::from(*s)));
    v
}

/// Mass of the assembled joint in cell order `(f_flat, x1, x2, y1, y2)`.
pub(crate) fn joint_mass(channel: &ChannelSpec, scheme: &AuxScheme) -> Vec<f64> {
    let s = scheme.sizes();
    let fc = scheme.f_cells();
    let mut mass = vec![0.0; fc * s.product()];
    let digits = FDigits::new(scheme.f_sizes());
    let mut f = vec![0usize; scheme.rounds()];
    for ff in 0..fc {
        digits.split(ff, &mut f);
        for x1 in 0..s.x1 {
            for x2 in 0..s.x2 {
                let mut p = channel.qx(x1, x2);
                if p == 0.0 {
                    continue;
                }
                for (i, t) in scheme.round_tables().iter().enumerate() {
                    let x_own = match Terminal::owner(i + 1) {
                        Terminal::One => x1,
                        Terminal::Two => x2,
                    };
                    p *= t.get(scheme.round_row(i + 1, digits.prefix(ff, i), x_own), f[i]);
                }
                if p == 0.0 {
                    continue;
                }
                let r1 = scheme.y1_table().row(ff * s.x1 + x1);
                let r2 = scheme.y2_table().row(ff * s.x2 + x2);
                let base = ((ff * s.x1 + x1) * s.x2 + x2) * s.y();
                for (y1, &a) in r1.iter().enumerate() {
                    for (y2, &b) in r2.iter().enumerate() {
                        mass[base + y1 * s.y2 + y2] = p * a * b;
                    }
                }
            }
        }
    }
    mass
}

/// Mixed-radix helper for flattened `(f_1, ..., f_r)` indices, `f_1` most significant.
#[derive(Debug, Clone)]
pub(crate) struct FDigits {
    sizes: Vec<usize>,
    /// `suffix[i] = Π_{j ≥ i} |ℱ_j|` (0-based), `suffix[r] = 1`.
    suffix: Vec<usize>,
}

impl FDigits {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        let mut suffix = vec![1usize; sizes.len() + 1];
        for i in (0..sizes.len()).rev() {
            suffix[i] = suffix[i + 1] * sizes[i];
        }
        Self {
            sizes: sizes.to_vec(),
            suffix,
        }
    }

    pub(crate) fn split(&self, ff: usize, out: &mut [usize]) {
        for i in 0..self.sizes.len() {
            out[i] = (ff / self.suffix[i + 1]) % self.sizes[i];
        }
    }

    /// Flattened index of `(f_1..f_i)` for 0-based round `i` (the prefix before it).
    #[inline]
    pub(crate) fn prefix(&self, ff: usize, i: usize) -> usize {
        ff / self.suffix[i]
    }

    #[inline]
    pub(crate) fn digit(&self, ff: usize, i: usize) -> usize {
        (ff / self.suffix[i + 1]) % self.sizes[i]
    }
}

/// The full joint over `(F1..Fr, X1, X2, Y1, Y2)`.
pub fn assemble_joint(channel: &ChannelSpec, scheme: &AuxScheme) -> Result<DenseJoint, RegionError> {
    if channel.sizes() != scheme.sizes() {
        return Err(RegionError::Invalid("scheme and channel alphabets differ".into()));
    }
    let s = scheme.sizes();
    let mut axes: Vec<Axis> = scheme
        .f_sizes()
        .iter()
        .enumerate()
        .map(|(i, &n)| Axis::indexed(f_name(i + 1), n))
        .collect();
    axes.push(channel.q_x().axes()[0].clone());
    axes.push(channel.q_x().axes()[1].clone());
    axes.push(Axis::indexed(Y1, s.y1));
    axes.push(Axis::indexed(Y2, s.y2));
    Ok(DenseJoint::normalized(axes, joint_mass(channel, scheme))?)
}

/// The channel whose target is exactly the `(X, Y)` law a scheme induces under `q_x`,
/// so that the scheme lies in `T(r)` for it.
pub fn induced_channel(q_x: &DenseJoint, scheme: &AuxScheme) -> Result<ChannelSpec, RegionError> {
    let s = scheme.sizes();
    let uniform = ChannelSpec::new(
        DenseJoint::uniform(q_x.axes().to_vec()),
        vec![1.0 / s.y() as f64; s.product()],
        s.y1,
        s.y2,
    )?;
    if uniform.sizes() != s {
        return Err(RegionError::Invalid("input alphabets differ from the scheme".into()));
    }
    let mass = joint_mass(&uniform, scheme);
    let mut kernel = vec![0.0; s.product()];
    for (c, v) in mass.iter().enumerate() {
        kernel[c % s.product()] += v * s.x() as f64;
    }
    for slice in kernel.chunks_mut(s.y()) {
        let t: f64 = slice.iter().sum();
        slice.iter_mut().for_each(|v| *v /= t);
    }
    ChannelSpec::new(q_x.clone(), kernel, s.y1, s.y2)
}

/// Number of rounds in a joint, i.e. how many consecutive `F1, F2, ...` axes it has.
pub fn rounds_of(joint: &DenseJoint) -> Result<usize, RegionError> {
    for name in [X1, X2, Y1, Y2] {
        if !joint.has_axis(name) {
            return Err(RegionError::MissingAxis(name.into()));
        }
    }
    let mut r = 0;
    while joint.has_axis(&f_name(r + 1)) {
        r += 1;
    }
    if r == 0 {
        return Err(RegionError::MissingAxis(f_name(1)));
    }
    Ok(r)
}

fn f_names(r: usize) -> Vec<String> {
    (1..=r).map(f_name).collect()
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// One conditional-independence requirement and its measured conditional MI.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSlack {
    pub label: String,
    pub slack: f64,
}

/// Result of checking a joint against the constraint set `T(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrReport {
    pub rounds: usize,
    /// TV between the joint's `(X, Y)` marginal and `q(x)q(y|x)`.
    pub marginal_tv: f64,
    pub chains: Vec<ChainSlack>,
    /// Per-round compliance with the theorem's cardinality bounds.
    pub cardinality_ok: Vec<bool>,
    pub tol: f64,
    pub pass: bool,
}

impl TrReport {
    pub fn worst_chain(&self) -> f64 {
        self.chains.iter().map(|c| c.slack).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub tol: f64,
    /// Fail validation when an auxiliary alphabet exceeds the theorem's bound.
    pub enforce_cardinality: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            enforce_cardinality: true,
        }
    }
}

/// Checks the marginal condition, all Markov chains of `T(r)` and the cardinality bounds.
pub fn validate_t_r(channel: &ChannelSpec, joint: &DenseJoint, tol: f64) -> Result<TrReport, RegionError> {
    validate_t_r_with(
        channel,
        joint,
        ValidateOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn validate_t_r_with(
    channel: &ChannelSpec,
    joint: &DenseJoint,
    opts: ValidateOptions,
) -> Result<TrReport, RegionError> {
    let r = rounds_of(joint)?;
    let xy = joint.marginal(&[X1, X2, Y1, Y2])?;
    let s = channel.sizes();
    let shape = xy.shape();
    if shape != [s.x1, s.x2, s.y1, s.y2] {
        return Err(RegionError::Invalid(format!(
            "joint alphabets {shape:?} do not match the channel"
        )));
    }
    let marginal_tv = tv_slices(xy.mass(), &channel.target_mass());

    let fs = f_names(r);
    let mut chains = Vec::with_capacity(r + 2);
    for i in 1..=r {
        let (own, other) = match Terminal::owner(i) {
            Terminal::One => (X1, X2),
            Terminal::Two => (X2, X1),
        };
        let mut given: Vec<&str> = refs(&fs[..i - 1]);
        given.push(own);
        let m = is_markov(joint, &[fs[i - 1].as_str()], &given, &[other], opts.tol)?;
        chains.push(ChainSlack {
            label: format!("F{i} - F<{i} {own} - {other}"),
            slack: m.slack,
        });
    }
    let all_f = refs(&fs);
    for (y, x, rest) in [(Y1, X1, [X2, Y2]), (Y2, X2, [X1, Y1])] {
        let mut given = all_f.clone();
        given.push(x);
        let m = is_markov(joint, &[y], &given, &rest, opts.tol)?;
        chains.push(ChainSlack {
            label: format!("{y} - F {x} - {}{}", rest[0], rest[1]),
            slack: m.slack,
        });
    }
    let f_sizes: Vec<usize> = fs.iter().map(|n| joint.axis(n).map(Axis::size)).collect::<Result<_, _>>()?;
    let bounds = super::scheme::cardinality_bounds(s, &f_sizes, CardinalityPreset::Theorem);
    let cardinality_ok: Vec<bool> = f_sizes.iter().zip(&bounds).map(|(f, b)| f <= b).collect();
    let pass = marginal_tv <= opts.tol
        && chains.iter().all(|c| c.slack <= opts.tol)
        && (!opts.enforce_cardinality || cardinality_ok.iter().all(|&b| b));
    Ok(TrReport {
        rounds: r,
        marginal_tv,
        chains,
        cardinality_ok,
        tol: opts.tol,
        pass,
    })
}

/// Right-hand sides of the channel-simulation inequalities.
pub fn theorem1_eval(joint: &DenseJoint) -> Result<RegionEval, RegionError> {
    let r = rounds_of(joint)?;
    let fs = f_names(r);
    let f = refs(&fs);
    let i_x1_f = mutual_information(joint, &[X1], &f, &[X2])?.bits;
    let i_x2_f = mutual_information(joint, &[X2], &f, &[X1])?.bits;
    let i_f1_y = mutual_information(joint, &f[..1], &[Y1, Y2], &[X1, X2])?.bits;
    let i_f_y = mutual_information(joint, &f, &[Y1, Y2], &[X1, X2])?.bits;
    Ok(RegionEval::from_parts(i_x1_f, i_x2_f, i_f1_y, i_f_y))
}

/// Empirical-coordination bounds `(I(X₁;F|X₂), I(X₂;F|X₁))`.
pub fn theorem2_eval(joint: &DenseJoint) -> Result<(f64, f64), RegionError> {
    Ok(theorem1_eval(joint)?.theorem2())
}

pub fn membership(point: &RatePoint, joint: &DenseJoint) -> Result<Membership, RegionError> {
    Ok(theorem1_eval(joint)?.contains(point))
}

/// `g(ε) = 2(ε log|𝒴₁||𝒴₂| + h_b(ε))`.
pub fn g_eps(eps: f64, y_cells: usize) -> f64 {
    2.0 * (eps * log2(y_cells as f64) + hb(eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonMembership {
    pub member: bool,
    pub slacks: [f64; 4],
    /// `3g(ε)`, subtracted from the third and fourth right-hand sides.
    pub relaxation: f64,
}

/// Membership in the ε-relaxed outer region; the joint must lie in `T_ε(r)`
/// (Markov chains within `chain_tol`, marginal TV below `eps`).
pub fn epsilon_region_membership(
    point: &RatePoint,
    joint: &DenseJoint,
    channel: &ChannelSpec,
    eps: f64,
    chain_tol: f64,
) -> Result<EpsilonMembership, RegionError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(RegionError::EpsilonOutOfRange(eps));
    }
    let report = validate_t_r_with(
        channel,
        joint,
        ValidateOptions {
            tol: chain_tol,
            enforce_cardinality: false,
        },
    )?;
    if report.worst_chain() > chain_tol || !(report.marginal_tv < eps) {
        return Err(RegionError::Precondition(format!(
            "joint is not in T_eps: chain slack {:e}, marginal TV {:e}",
            report.worst_chain(),
            report.marginal_tv
        )));
    }
    let eval = theorem1_eval(joint)?;
    let relaxation = 3.0 * g_eps(eps, channel.sizes().y());
    let mut slacks = eval.slacks(point);
    slacks[2] += relaxation;
    slacks[3] += relaxation;
    Ok(EpsilonMembership {
        member: slacks.iter().all(|&s| s >= -RATE_SLACK),
        slacks,
        relaxation,
    })
}

/// Prepends two constant rounds: `F'₁ = F'₂ = ∅`, `F'_i = F_{i−2}`.
pub fn padding_embed(scheme: &AuxScheme) -> AuxScheme {
    let s: Sizes = scheme.sizes();
    let mut f_sizes = vec![1, 1];
    f_sizes.extend_from_slice(scheme.f_sizes());
    let mut rounds = vec![
        CondTable::from_raw(s.x1, 1, vec![1.0; s.x1]),
        CondTable::from_raw(s.x2, 1, vec![1.0; s.x2]),
    ];
    // Round parity is preserved by a shift of two, and singleton prefixes leave every
    // flattened row index unchanged.
    rounds.extend(scheme.round_tables().iter().cloned());
    AuxScheme::new(
        s,
        f_sizes,
        rounds,
        scheme.y1_table().clone(),
        scheme.y2_table().clone(),
    )
    .expect("padding preserves table shapes")
}

/// Rate bounds for reliable interactive computation of a deterministic channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputationEval {
    pub r12_bound: f64,
    pub r21_bound: f64,
    /// `H(Y₁ | F, X₁)`.
    pub h_y1: f64,
    /// `H(Y₂ | F, X₂)`.
    pub h_y2: f64,
    pub computable: bool,
}

impl ComputationEval {
    pub fn contains(&self, r12: f64, r21: f64) -> bool {
        self.computable && r12 >= self.r12_bound - RATE_SLACK && r21 >= self.r21_bound - RATE_SLACK
    }
}

pub fn corollary1_eval(channel: &ChannelSpec, joint: &DenseJoint, tol: f64) -> Result<ComputationEval, RegionError> {
    if !channel.is_deterministic() {
        return Err(RegionError::NonDeterministic);
    }
    let r = rounds_of(joint)?;
    let fs = f_names(r);
    let mut g1 = refs(&fs);
    g1.push(X1);
    let mut g2 = refs(&fs);
    g2.push(X2);
    let h_y1 = entropy(joint, &[Y1], &g1)?.bits;
    let h_y2 = entropy(joint, &[Y2], &g2)?.bits;
    let eval = theorem1_eval(joint)?;
    Ok(ComputationEval {
        r12_bound: eval.i_x1_f,
        r21_bound: eval.i_x2_f,
        h_y1,
        h_y2,
        computable: h_y1 <= tol && h_y2 <= tol,
    })
}
