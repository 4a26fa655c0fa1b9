//! The `coordsim` command line.
//!
//! Exit codes: 0 success, 2 validation failure, 3 budget exceeded, 4 parse error
//! (1 if output could not be written). Setting `COORDSIM_VERBOSE` prints progress on
//! stderr; nothing else reads the environment.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use coordsim_core::osrb::{make_code, rate_margin_report, CodeRates, ExactOptions, OsrbError, ProtocolModel, TypicalityParams};
use coordsim_core::polytope::{fme_eliminate, per_round_system, theorem1_system};
use coordsim_core::prob::{sweep_entropy_gap, sweep_lemma4, sweep_lemma5, SweepOptions};
use coordsim_core::region::{
    assemble_joint, corollary1_eval, induced_channel, theorem1_eval, theorem2_eval, validate_t_r, AuxScheme,
    CardinalityPreset, Objective, SearchConfig, Sizes, UNLIMITED_RATE,
};
use coordsim_core::rng::Stream;
use coordsim_core::{ChannelSpec, RatePoint};
use serde_json::{json, Value};

use crate::error::{exit, Error, Result};
use crate::formats::{load_channel, load_scheme, read_json, ExperimentConfig, Mode, OmegaFile, RatesFile, SystemFile};
use crate::report::{self, num, nums, CSV_HEADER};
use crate::runner;

#[derive(Debug, Parser)]
#[command(name = "coordsim", version, about = "Interactive channel simulation: rate regions and finite-length protocols")]
pub struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the region bounds of a scheme and validate it.
    Region(RegionArgs),
    /// Search for a scheme whose region contains a rate point.
    Membership(MembershipArgs),
    /// Minimize a rate over schemes.
    Minrate(MinrateArgs),
    /// Check that eliminating the auxiliary rates recovers the region inequalities.
    FmeVerify(FmeArgs),
    /// Run the binning protocol at each blocklength.
    Simulate(SimulateArgs),
    /// Run the binning protocol over a range of blocklengths.
    Sweep(SweepArgs),
    /// Randomized checks of the information inequalities.
    BoundsCheck(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub scheme: PathBuf,
    /// `R0,R12,R21` to test for membership and binning margins.
    #[arg(long)]
    pub rates: Option<String>,
    /// Public-bin rates `Rt1,..,Rtr` for the margin report.
    #[arg(long)]
    pub rt: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Theorem,
    Epsilon,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    /// Auxiliary alphabet sizes, overriding the cardinality bounds.
    #[arg(long)]
    pub f_sizes: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub cap: usize,
    #[arg(long, value_enum, default_value_t = Preset::Theorem)]
    pub preset: Preset,
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub marginal_tol: f64,
}

impl SearchArgs {
    fn config(&self, seed: u64) -> Result<SearchConfig> {
        Ok(SearchConfig {
            f_sizes: self.f_sizes.as_deref().map(parse_list).transpose()?,
            cap: self.cap,
            preset: match self.preset {
                Preset::Theorem => CardinalityPreset::Theorem,
                Preset::Epsilon => CardinalityPreset::Epsilon,
            },
            allow_large: self.allow_large,
            restarts: self.restarts,
            iterations: self.iterations,
            seed,
            marginal_tol: self.marginal_tol,
            ..SearchConfig::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct MembershipArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub rates: String,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    R12,
    Sum,
}

#[derive(Debug, Args)]
pub struct MinrateArgs {
    #[arg(long)]
    pub channel: PathBuf,
    /// Pinned common-randomness rate; the default stands for unlimited.
    #[arg(long, default_value_t = UNLIMITED_RATE)]
    pub r0: f64,
    #[arg(long, value_enum, default_value_t = Target::R12)]
    pub objective: Target,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct FmeArgs {
    #[arg(long)]
    pub channel: PathBuf,
    /// Scheme to verify; without it, `--random` schemes are drawn.
    #[arg(long)]
    pub scheme: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    /// Alphabet size of each random auxiliary.
    #[arg(long, default_value_t = 2)]
    pub f_size: usize,
    #[arg(long, default_value_t = 100)]
    pub directions: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Leave out the cumulative public-bin constraints before eliminating.
    #[arg(long)]
    pub drop_c44: bool,
    /// Write the projected system of the first scheme here.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// Experiment file; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<PathBuf>,
    /// `R0,R12,R21`; `R12` is split evenly over odd rounds and `R21` over even ones.
    #[arg(long)]
    pub rates: Option<String>,
    /// Public-bin rates `Rt1,..,Rtr`; zero when absent.
    #[arg(long)]
    pub rt: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, conflicts_with = "mc")]
    pub exact: bool,
    #[arg(long)]
    pub mc: bool,
    #[arg(long, value_enum)]
    pub omega: Option<OmegaFile>,
    /// Exact-mode work budget.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Also write JSON records here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Blocklengths, e.g. `4,8,12`.
    #[arg(long)]
    pub n: Option<String>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `first:last` or `first:last:step`.
    #[arg(long)]
    pub n_range: String,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 3)]
    pub max_n: usize,
    /// Zero every certificate so the checks must fail.
    #[arg(long)]
    pub inject_violation: bool,
}

fn verbose() -> bool {
    std::env::var_os("COORDSIM_VERBOSE").is_some_and(|v| !v.is_empty() && v != "0")
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad list entry `{t}` in `{s}`"))))
        .collect()
}

pub fn parse_point(s: &str) -> Result<RatePoint> {
    let v: Vec<f64> = parse_list(s)?;
    if v.len() != 3 {
        return Err(Error::Parse(format!("expected R0,R12,R21, got `{s}`")));
    }
    Ok(RatePoint::new(v[0], v[1], v[2])?)
}

/// Per-round code rates from `(R0, R12, R21)`: each total is shared evenly by the
/// rounds of its direction.
pub fn split_rates(point: &RatePoint, rt: Vec<f64>) -> Result<RatesFile> {
    let r = rt.len();
    let [r0, r12, r21] = point.as_array();
    let odd = (r + 1) / 2;
    let even = r / 2;
    if even == 0 && r21 > 0.0 {
        return Err(Error::Validation("a one-round scheme cannot carry R21".into()));
    }
    let per = (1..=r).map(|i| if i % 2 == 1 { r12 / odd as f64 } else { r21 / even as f64 }).collect();
    Ok(RatesFile { r0, r: per, rt })
}

fn parse_n_range(s: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = s
        .split(':')
        .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad range `{s}`"))))
        .collect::<Result<_>>()?;
    let (a, b, step) = match v[..] {
        [a, b] => (a, b, 1),
        [a, b, s] if s > 0 => (a, b, s),
        _ => return Err(Error::Parse(format!("bad range `{s}`"))),
    };
    if a == 0 || a > b {
        return Err(Error::Parse(format!("bad range `{s}`")));
    }
    Ok((a..=b).step_by(step).collect())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::PARSE } else { exit::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<u8> {
    runner::with_workers(cli.workers, || match &cli.command {
        Command::Region(a) => cmd_region(cli, a),
        Command::Membership(a) => cmd_membership(cli, a),
        Command::Minrate(a) => cmd_minrate(cli, a),
        Command::FmeVerify(a) => cmd_fme_verify(cli, a),
        Command::Simulate(a) => {
            let n = a.n.as_deref().map(parse_list).transpose()?;
            cmd_simulate(cli, &a.protocol, n)
        }
        Command::Sweep(a) => cmd_simulate(cli, &a.protocol, Some(parse_n_range(&a.n_range)?)),
        Command::BoundsCheck(a) => cmd_bounds_check(cli, a),
    })
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| Error::Write { path: p.into(), source }),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| Error::Write { path: "<stdout>".into(), source }),
    }
}

fn emit(cli: &Cli, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    write_out(cli.out.as_deref(), s.as_bytes())
}

fn load_pair(channel: &Path, scheme: &Path) -> Result<(ChannelSpec, AuxScheme)> {
    let ch = load_channel(channel)?;
    let sch = load_scheme(scheme, ch.sizes())?;
    Ok((ch, sch))
}

pub fn cmd_region(cli: &Cli, a: &RegionArgs) -> Result<u8> {
    let (ch, sch) = load_pair(&a.channel, &a.scheme)?;
    let joint = assemble_joint(&ch, &sch)?;
    let eval = theorem1_eval(&joint)?;
    let (t2a, t2b) = theorem2_eval(&joint)?;
    let valid = validate_t_r(&ch, &joint, a.tol)?;
    let mut out = json!({
        "command": "region",
        "rounds": sch.rounds(),
        "region": report::region_eval(&eval),
        "empirical_region": nums(&[t2a, t2b]),
        "validation": report::validation(&valid),
    });
    if ch.is_deterministic() {
        out["computation"] = report::computation(&corollary1_eval(&ch, &joint, a.tol)?);
    }
    if let Some(r) = &a.rates {
        let point = parse_point(r)?;
        let m = eval.contains(&point);
        out["membership"] = json!({"point": nums(&point.as_array()), "member": m.member, "slacks": nums(&m.slacks)});
        let rt = match &a.rt {
            Some(s) => parse_list(s)?,
            None => vec![0.0; sch.rounds()],
        };
        let rates = split_rates(&point, rt)?.to_rates()?;
        out["margins"] = report::margins(&rate_margin_report(&joint, &rates)?);
    }
    emit(cli, &out)?;
    Ok(if valid.pass { exit::SUCCESS } else { exit::VALIDATION })
}

pub fn cmd_membership(cli: &Cli, a: &MembershipArgs) -> Result<u8> {
    let ch = load_channel(&a.channel)?;
    let point = parse_point(&a.rates)?;
    let cfg = a.search.config(cli.seed)?;
    let outcome = runner::search_membership(&ch, point, a.search.rounds, &cfg)?;
    let mut out = json!({
        "command": "membership",
        "point": nums(&point.as_array()),
        "rounds": a.search.rounds,
        "units_run": outcome.units_run,
        "found": outcome.witness.is_some(),
    });
    if let Some(w) = &outcome.witness {
        out["slacks"] = nums(&w.eval.slacks(&point));
        out["witness"] = report::witness(w);
    }
    emit(cli, &out)?;
    Ok(exit::SUCCESS)
}

pub fn cmd_minrate(cli: &Cli, a: &MinrateArgs) -> Result<u8> {
    let ch = load_channel(&a.channel)?;
    let objective = match a.objective {
        Target::R12 => Objective::min_r12_at_r0(a.r0),
        Target::Sum => Objective::min_sum_at_r0(a.r0),
    };
    let cfg = a.search.config(cli.seed)?;
    let res = runner::min_rate(&ch, a.search.rounds, objective, &cfg)?;
    let mut out = json!({"command": "minrate", "r0": num(a.r0), "rounds": a.search.rounds});
    out["result"] = report::min_rate(&res);
    emit(cli, &out)?;
    Ok(exit::SUCCESS)
}

/// Largest round count accepted by `fme-verify`.
pub const FME_MAX_ROUNDS: usize = 4;

/// Eliminates the per-round rates of `joint`'s system and compares the projection
/// with the region inequalities.
pub fn fme_check(
    joint: &coordsim_core::DenseJoint,
    rounds: usize,
    drop_c44: bool,
    directions: usize,
    tol: f64,
    seed: u64,
) -> Result<(coordsim_core::polytope::LinearSystem<f64>, usize, coordsim_core::polytope::PolyComparison)> {
    if rounds > FME_MAX_ROUNDS {
        return Err(Error::Validation(format!("fme-verify supports at most {FME_MAX_ROUNDS} rounds, got {rounds}")));
    }
    let mut sys = per_round_system(joint, rounds)?;
    if drop_c44 {
        sys = sys.without("c44");
    }
    let aux: Vec<String> = (1..=rounds).map(|i| format!("R{i}")).chain((1..=rounds).map(|i| format!("Rt{i}"))).collect();
    let names: Vec<&str> = aux.iter().map(String::as_str).collect();
    let projected = fme_eliminate(&sys, &names)?.closure();
    let expected = theorem1_system(&theorem1_eval(joint)?);
    let cmp = runner::polyhedra_equal(&projected, &expected, directions, tol, seed)?;
    Ok((projected, sys.len(), cmp))
}

pub fn cmd_fme_verify(cli: &Cli, a: &FmeArgs) -> Result<u8> {
    let ch = load_channel(&a.channel)?;
    let mut cases: Vec<(ChannelSpec, AuxScheme)> = Vec::new();
    if let Some(p) = &a.scheme {
        cases.push((ch.clone(), load_scheme(p, ch.sizes())?));
    }
    for k in 0..a.random {
        let mut rng = Stream::derive(cli.seed, k as u64, 0xf3e);
        let sch = AuxScheme::random(ch.sizes(), &vec![a.f_size; a.rounds], &mut rng)?;
        // the random scheme defines its own target, so it is valid by construction
        cases.push((induced_channel(ch.q_x(), &sch)?, sch));
    }
    if cases.is_empty() {
        return Err(Error::Parse("fme-verify needs --scheme or --random".into()));
    }
    let mut records = Vec::new();
    let mut all_equal = true;
    for (k, (c, sch)) in cases.iter().enumerate() {
        let joint = assemble_joint(c, sch)?;
        let valid = validate_t_r(c, &joint, 1e-9)?;
        if !valid.pass {
            return Err(Error::Validation(format!("scheme {k} does not satisfy T(r)")));
        }
        let (projected, rows, cmp) = fme_check(&joint, sch.rounds(), a.drop_c44, a.directions, a.tol, cli.seed)?;
        if k == 0 {
            if let Some(p) = &a.system {
                let text = serde_json::to_string_pretty(&SystemFile::of(&projected)).expect("system serializes");
                write_out(Some(p), text.as_bytes())?;
            }
        }
        all_equal &= cmp.equal;
        let mut rec = report::comparison(&cmp);
        rec["rounds"] = json!(sch.rounds());
        rec["rows_before"] = json!(rows);
        rec["rows_after"] = json!(projected.len());
        records.push(rec);
    }
    let worst = records.iter().filter_map(|r| r["worst_gap"].as_f64()).fold(0.0, f64::max);
    emit(cli, &json!({"command": "fme-verify", "equal": all_equal, "worst_gap": num(worst), "schemes": records}))?;
    Ok(if all_equal { exit::SUCCESS } else { exit::VALIDATION })
}

/// Fully resolved simulation inputs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub channel: ChannelSpec,
    pub scheme: AuxScheme,
    pub rates: CodeRates,
    pub n: Vec<usize>,
    pub seed: u64,
    pub trials: usize,
    pub delta: f64,
    pub mode: Mode,
    pub omega: OmegaFile,
    pub budget: f64,
}

fn resolve(cli: &Cli, a: &ProtocolArgs, n: Option<Vec<usize>>) -> Result<Experiment> {
    let cfg: Option<(ExperimentConfig, PathBuf)> = match &a.config {
        Some(p) => Some((read_json(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default())),
        None => None,
    };
    let missing = |what: &str| Error::Parse(format!("{what} is required without --config"));
    let channel = match (&a.channel, &cfg) {
        (Some(p), _) => load_channel(p)?,
        (None, Some((c, base))) => c.channel.load(base)?.to_channel()?,
        (None, None) => return Err(missing("--channel")),
    };
    let sizes: Sizes = channel.sizes();
    let scheme = match (&a.scheme, &cfg) {
        (Some(p), _) => load_scheme(p, sizes)?,
        (None, Some((c, base))) => c.scheme.load(base)?.to_scheme(sizes)?,
        (None, None) => return Err(missing("--scheme")),
    };
    let rates = match (&a.rates, &cfg) {
        (Some(r), _) => {
            let rt = match &a.rt {
                Some(s) => parse_list(s)?,
                None => vec![0.0; scheme.rounds()],
            };
            split_rates(&parse_point(r)?, rt)?
        }
        (None, Some((c, _))) => c.rates.clone(),
        (None, None) => return Err(missing("--rates")),
    };
    let n = match (n, &cfg) {
        (Some(n), _) => n,
        (None, Some((c, _))) => c.n.clone(),
        (None, None) => return Err(missing("--n")),
    };
    if n.is_empty() || n.contains(&0) {
        return Err(Error::Parse("blocklengths must be positive".into()));
    }
    let c = cfg.as_ref().map(|(c, _)| c);
    let mode = if a.exact {
        Mode::Exact
    } else if a.mc {
        Mode::Mc
    } else {
        c.map_or(Mode::Exact, |c| c.mode)
    };
    Ok(Experiment {
        channel,
        scheme,
        rates: rates.to_rates()?,
        n,
        seed: if cli.seed != 0 { cli.seed } else { c.map_or(0, |c| c.seed) },
        trials: a.trials.or(c.map(|c| c.trials)).unwrap_or(0),
        delta: a.delta.or(c.map(|c| c.delta)).unwrap_or(0.05),
        mode,
        omega: a.omega.or(c.map(|c| c.omega)).unwrap_or_default(),
        budget: a.budget.or(c.map(|c| c.budget)).unwrap_or(coordsim_core::osrb::DEFAULT_BUDGET),
    })
}

/// Result of running an experiment: finished records and whether the budget stopped it.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub csv: String,
    pub json: Value,
    pub budget_exceeded: bool,
}

/// Runs every blocklength in order. A blocklength over the exact-mode budget ends the
/// run; rows already produced are kept and a marker row is appended.
pub fn simulate(exp: &Experiment) -> Result<SimulationOutput> {
    let model = ProtocolModel::new(&exp.channel, &exp.scheme)?;
    let params = TypicalityParams::new(exp.delta)?;
    let joint = assemble_joint(&exp.channel, &exp.scheme)?;
    let margins = rate_margin_report(&joint, &exp.rates)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(CSV_HEADER)?;
    let mut records = Vec::new();
    let mut budget_exceeded = false;
    'lengths: for &n in &exp.n {
        let code = make_code(&exp.scheme, &exp.rates, n, exp.seed)?;
        if exp.mode.exact() {
            if verbose() {
                eprintln!("n = {n}: exact");
            }
            let opts = ExactOptions { omega_mode: exp.omega.into(), params, budget: exp.budget, ..Default::default() };
            match runner::exact_induced_pmf(&model, &code, &opts) {
                Ok(r) => {
                    csv.write_record(report::csv_row(&r))?;
                    records.push(report::protocol(&r));
                }
                Err(OsrbError::Budget { needed, budget }) => {
                    csv.write_record([n.to_string(), "exact:budget_exceeded".into(), String::new(), String::new(), String::new()])?;
                    records.push(json!({"n": n, "mode": "exact", "budget_exceeded": true, "needed": num(needed), "budget": num(budget)}));
                    budget_exceeded = true;
                    break 'lengths;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if exp.mode.mc() && exp.trials > 0 {
            if verbose() {
                eprintln!("n = {n}: {} trials", exp.trials);
            }
            let (r, _) = runner::monte_carlo(&model, &code, &params, exp.trials, exp.seed, None)?;
            csv.write_record(report::csv_row(&r))?;
            records.push(report::protocol(&r));
        }
    }
    let csv = String::from_utf8(csv.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv output is utf-8");
    let json = json!({
        "command": "simulate",
        "seed": exp.seed,
        "delta": num(exp.delta),
        "rates": {"r0": num(exp.rates.r0), "r": nums(&exp.rates.r), "rt": nums(&exp.rates.rt)},
        "margins": report::margins(&margins),
        "budget_exceeded": budget_exceeded,
        "results": records,
    });
    Ok(SimulationOutput { csv, json, budget_exceeded })
}

pub fn cmd_simulate(cli: &Cli, a: &ProtocolArgs, n: Option<Vec<usize>>) -> Result<u8> {
    let exp = resolve(cli, a, n)?;
    let out = simulate(&exp)?;
    write_out(cli.out.as_deref(), out.csv.as_bytes())?;
    if let Some(p) = &a.json {
        let mut s = serde_json::to_string_pretty(&out.json).expect("values serialize");
        s.push('\n');
        write_out(Some(p), s.as_bytes())?;
    }
    Ok(if out.budget_exceeded { exit::BUDGET } else { exit::SUCCESS })
}

pub fn cmd_bounds_check(cli: &Cli, a: &BoundsArgs) -> Result<u8> {
    let opts = SweepOptions {
        instances: a.instances,
        seed: cli.seed,
        max_n: a.max_n.max(1),
        eps_scale: if a.inject_violation { 0.0 } else { 1.0 },
    };
    let reports = [sweep_entropy_gap(&opts)?, sweep_lemma4(&opts)?, sweep_lemma5(&opts)?];
    let pass = reports.iter().all(|r| r.passed());
    let out = json!({
        "command": "bounds-check",
        "pass": pass,
        "sweeps": reports.iter().map(report::sweep).collect::<Vec<_>>(),
    });
    emit(cli, &out)?;
    Ok(if pass { exit::SUCCESS } else { exit::VALIDATION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_splitting() {
        let p = RatePoint::new(0.5, 1.0, 0.4).unwrap();
        let r = split_rates(&p, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(r.r, vec![0.5, 0.4, 0.5]);
        assert!(split_rates(&p, vec![0.0]).is_err());
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_n_range("2:8:3").unwrap(), vec![2, 5, 8]);
        assert_eq!(parse_n_range("4:5").unwrap(), vec![4, 5]);
        assert!(parse_n_range("5:4").is_err());
        assert!(parse_list::<usize>("4,x").is_err());
        assert!(parse_point("1,2").is_err());
    }

    #[test]
    fn usage_errors_are_parse_errors() {
        assert_eq!(main_with_args(["coordsim", "simulate", "--bogus"]), exit::PARSE);
        assert_eq!(main_with_args(["coordsim", "--help"]), exit::SUCCESS);
    }
}
