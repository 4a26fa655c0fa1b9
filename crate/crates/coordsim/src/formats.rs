//! JSON file formats.
//!
//! * joint: `{"axes":[{"name","symbols"}...],"mass":[row-major]}`
//! * channel: `{"q_x": joint over X1, X2, "q_y_given_x": {"y_axes":[Y1, Y2], "rows":[[..]..]}}`,
//!   one kernel row per `(x1, x2)` with `x1` slowest, columns `(y1, y2)` with `y1` slowest
//! * scheme: `{"r", "alphabets":{"F1":k,...}, "factors":[{"name","rows"}...]}` with factors
//!   `F1..Fr, Y1, Y2`; row layouts follow [`AuxScheme`]
//! * linear system: `{"vars":[...], "ineqs":[{"coef":[...],"rel":">=","rhs":v}]}`
//! * experiment: `{channel, scheme, rates, n, seed, trials, delta, mode}`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use coordsim_core::osrb::{CodeRates, OmegaMode};
use coordsim_core::polytope::{Inequality, LinearSystem, Strictness};
use coordsim_core::prob::{Alphabet, Axis, DenseJoint};
use coordsim_core::region::{f_name, AuxScheme, ChannelSpec, CondTable, Sizes, Y1, Y2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisFile {
    pub name: String,
    pub symbols: Vec<String>,
}

impl AxisFile {
    fn to_axis(&self) -> Result<Axis> {
        Ok(Axis::new(self.name.clone(), Alphabet::new(self.symbols.iter().cloned())?))
    }

    fn of(axis: &Axis) -> Self {
        Self { name: axis.name.clone(), symbols: axis.alphabet.symbols().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointFile {
    pub axes: Vec<AxisFile>,
    pub mass: Vec<f64>,
}

impl JointFile {
    pub fn of(joint: &DenseJoint) -> Self {
        Self { axes: joint.axes().iter().map(AxisFile::of).collect(), mass: joint.mass().to_vec() }
    }

    pub fn to_joint(&self) -> Result<DenseJoint> {
        let axes = self.axes.iter().map(AxisFile::to_axis).collect::<Result<Vec<_>>>()?;
        Ok(DenseJoint::new(axes, self.mass.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub y_axes: Vec<AxisFile>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub q_x: JointFile,
    pub q_y_given_x: KernelFile,
}

impl ChannelFile {
    pub fn of(ch: &ChannelSpec) -> Self {
        let s = ch.sizes();
        let y_axes = vec![
            AxisFile::of(&Axis::indexed(Y1, s.y1)),
            AxisFile::of(&Axis::indexed(Y2, s.y2)),
        ];
        Self {
            q_x: JointFile::of(ch.q_x()),
            q_y_given_x: KernelFile { y_axes, rows: ch.kernel().chunks(s.y()).map(<[f64]>::to_vec).collect() },
        }
    }

    pub fn to_channel(&self) -> Result<ChannelSpec> {
        let k = &self.q_y_given_x;
        let names: Vec<&str> = k.y_axes.iter().map(|a| a.name.as_str()).collect();
        if names != [Y1, Y2] {
            return Err(Error::Parse(format!("kernel output axes must be [Y1, Y2], found {names:?}")));
        }
        let (y1, y2) = (k.y_axes[0].symbols.len(), k.y_axes[1].symbols.len());
        let qx = self.q_x.to_joint()?;
        if k.rows.len() != qx.num_cells() {
            return Err(Error::Parse(format!("kernel has {} rows, q_x has {} cells", k.rows.len(), qx.num_cells())));
        }
        let kernel = flatten(&k.rows, y1 * y2, "kernel")?;
        Ok(ChannelSpec::new(qx, kernel, y1, y2)?)
    }
}

fn flatten(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<Vec<f64>> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Parse(format!("{what} row {i} has {} entries, expected {cols}", r.len())));
    }
    Ok(rows.concat())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFile {
    pub name: String,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeFile {
    pub r: usize,
    pub alphabets: BTreeMap<String, usize>,
    pub factors: Vec<FactorFile>,
}

impl SchemeFile {
    pub fn of(scheme: &AuxScheme) -> Self {
        let factor = |name: String, t: &CondTable| FactorFile {
            name,
            rows: t.data().chunks(t.cols()).map(<[f64]>::to_vec).collect(),
        };
        let mut factors: Vec<FactorFile> =
            scheme.round_tables().iter().enumerate().map(|(i, t)| factor(f_name(i + 1), t)).collect();
        factors.push(factor(Y1.into(), scheme.y1_table()));
        factors.push(factor(Y2.into(), scheme.y2_table()));
        Self {
            r: scheme.rounds(),
            alphabets: scheme.f_sizes().iter().enumerate().map(|(i, &k)| (f_name(i + 1), k)).collect(),
            factors,
        }
    }

    /// Builds the scheme for a channel with alphabet sizes `sizes`.
    pub fn to_scheme(&self, sizes: Sizes) -> Result<AuxScheme> {
        let f_sizes = (1..=self.r)
            .map(|i| {
                self.alphabets
                    .get(&f_name(i))
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("alphabets lacks {}", f_name(i))))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.alphabets.len() != self.r {
            return Err(Error::Parse(format!("{} alphabets for r = {}", self.alphabets.len(), self.r)));
        }
        let table = |name: &str, cols: usize| -> Result<CondTable> {
            let f = self
                .factors
                .iter()
                .find(|f| f.name == name)
                .ok_or_else(|| Error::Parse(format!("factor {name} is missing")))?;
            let data = flatten(&f.rows, cols, name)?;
            Ok(CondTable::new(f.rows.len(), cols, data)?)
        };
        let rounds = f_sizes.iter().enumerate().map(|(i, &k)| table(&f_name(i + 1), k)).collect::<Result<Vec<_>>>()?;
        if self.factors.len() != self.r + 2 {
            return Err(Error::Parse(format!("{} factors, expected {}", self.factors.len(), self.r + 2)));
        }
        Ok(AuxScheme::new(sizes, f_sizes, rounds, table(Y1, sizes.y1)?, table(Y2, sizes.y2)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IneqFile {
    pub coef: Vec<f64>,
    pub rel: String,
    pub rhs: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub vars: Vec<String>,
    pub ineqs: Vec<IneqFile>,
}

impl SystemFile {
    pub fn of(sys: &LinearSystem<f64>) -> Self {
        let row = |q: &Inequality<f64>| IneqFile {
            coef: q.coef.clone(),
            rel: match q.rel {
                Strictness::Closed => ">=",
                Strictness::Strict => ">",
            }
            .into(),
            rhs: q.rhs,
            label: q.label.clone(),
        };
        Self { vars: sys.vars().to_vec(), ineqs: sys.inequalities().iter().map(row).collect() }
    }

    pub fn to_system(&self) -> Result<LinearSystem<f64>> {
        let mut sys = LinearSystem::new(self.vars.iter().cloned());
        for q in &self.ineqs {
            let rel = match q.rel.as_str() {
                ">=" => Strictness::Closed,
                ">" => Strictness::Strict,
                other => return Err(Error::Parse(format!("unknown relation `{other}`"))),
            };
            sys.push(q.coef.clone(), rel, q.rhs, q.label.clone())?;
        }
        Ok(sys)
    }
}

/// Code rates `R₀`, `R_i` (shared with the other terminal) and `R̃_i` (public bins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesFile {
    pub r0: f64,
    pub r: Vec<f64>,
    pub rt: Vec<f64>,
}

impl RatesFile {
    pub fn to_rates(&self) -> Result<CodeRates> {
        Ok(CodeRates::new(self.r0, self.r.clone(), self.rt.clone())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Mc,
    Both,
}

impl Mode {
    pub fn exact(self) -> bool {
        matches!(self, Mode::Exact | Mode::Both)
    }

    pub fn mc(self) -> bool {
        matches!(self, Mode::Mc | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaFile {
    #[default]
    Exogenous,
    BinOfF,
}

impl From<OmegaFile> for OmegaMode {
    fn from(o: OmegaFile) -> Self {
        match o {
            OmegaFile::Exogenous => OmegaMode::Exogenous,
            OmegaFile::BinOfF => OmegaMode::BinOfF,
        }
    }
}

/// Either a path (relative to the referencing file) or the object itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: &Path) -> Result<T> {
        match self {
            Source::Path(p) => read_json(&base.join(p)),
            Source::Inline(v) => Ok(v.clone()),
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_budget() -> f64 {
    coordsim_core::osrb::DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub channel: Source<ChannelFile>,
    pub scheme: Source<SchemeFile>,
    pub rates: RatesFile,
    pub n: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trials: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub omega: OmegaFile,
    #[serde(default = "default_budget")]
    pub budget: f64,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

pub fn load_channel(path: &Path) -> Result<ChannelSpec> {
    read_json::<ChannelFile>(path)?.to_channel()
}

pub fn load_scheme(path: &Path, sizes: Sizes) -> Result<AuxScheme> {
    read_json::<SchemeFile>(path)?.to_scheme(sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc() -> ChannelSpec {
        ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![0.9, 0.1, 0.1, 0.9], 1, 2).unwrap()
    }

    #[test]
    fn channel_and_scheme_round_trip() {
        let ch = bsc();
        let text = serde_json::to_string(&ChannelFile::of(&ch)).unwrap();
        let back: ChannelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_channel().unwrap(), ch);

        let mut rng = coordsim_core::rng::Stream::new(4, 0);
        let sch = AuxScheme::random(ch.sizes(), &[3, 2], &mut rng).unwrap();
        let text = serde_json::to_string(&SchemeFile::of(&sch)).unwrap();
        let back: SchemeFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_scheme(ch.sizes()).unwrap(), sch);
    }

    #[test]
    fn joint_round_trip_is_bit_exact() {
        let text = r#"{"axes":[{"name":"A","symbols":["a","b","c"]}],
            "mass":[0.1000000000000000055511151231257827,0.29999999999999998889776975,0.6000000000000000888]}"#;
        let j: JointFile = serde_json::from_str(text).unwrap();
        let joint = j.to_joint().unwrap();
        assert_eq!(joint.mass(), &[0.1, 0.3, 0.6000000000000001]);
        let again: JointFile = serde_json::from_str(&serde_json::to_string(&JointFile::of(&joint)).unwrap()).unwrap();
        assert_eq!(again.to_joint().unwrap(), joint);
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        let bad = SchemeFile { r: 1, alphabets: BTreeMap::new(), factors: vec![] };
        assert!(matches!(bad.to_scheme(bsc().sizes()), Err(Error::Parse(_))));
        let sys = SystemFile {
            vars: vec!["R0".into()],
            ineqs: vec![IneqFile { coef: vec![1.0], rel: "<=".into(), rhs: 0.0, label: String::new() }],
        };
        assert!(matches!(sys.to_system(), Err(Error::Parse(_))));
    }

    #[test]
    fn experiment_config_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"channel":"ch.json","scheme":"s.json","rates":{"r0":0,"r":[1],"rt":[0.25]},"n":[4,8]}"#,
        )
        .unwrap();
        assert_eq!(cfg.channel, Source::Path("ch.json".into()));
        assert_eq!((cfg.seed, cfg.trials, cfg.delta, cfg.mode), (0, 0, 0.05, Mode::Exact));
    }
}
