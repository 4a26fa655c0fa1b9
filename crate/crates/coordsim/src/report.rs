//! Output formatting. Every number leaves the program with 12 significant digits.

use coordsim_core::osrb::{EmpiricalStats, GoodB, MarginReport, MarginStatus, ProtocolResult, RunMode};
use coordsim_core::polytope::PolyComparison;
use coordsim_core::prob::SweepReport;
use coordsim_core::region::{ComputationEval, MinRateResult, TrReport, Witness};
use coordsim_core::RegionEval;
use serde_json::{json, Value};

use crate::formats::SchemeFile;

/// `x` with 12 significant digits, plain notation for moderate exponents.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.into()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" { "0".into() } else { t.into() }
}

/// JSON number rounded to 12 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(fmt12(x));
    }
    let r: f64 = fmt12(x).parse().expect("formatted float parses");
    json!(r)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn region_eval(e: &RegionEval) -> Value {
    json!({
        "rhs": nums(&e.rhs),
        "i_x1_f_given_x2": num(e.i_x1_f),
        "i_x2_f_given_x1": num(e.i_x2_f),
        "i_f1_y_given_x": num(e.i_f1_y),
        "i_f_y_given_x": num(e.i_f_y),
    })
}

pub fn validation(r: &TrReport) -> Value {
    json!({
        "pass": r.pass,
        "tol": num(r.tol),
        "marginal_tv": num(r.marginal_tv),
        "worst_chain": num(r.worst_chain()),
        "chains": r.chains.iter().map(|c| json!({"label": c.label, "slack": num(c.slack)})).collect::<Vec<_>>(),
        "cardinality_ok": r.cardinality_ok,
    })
}

pub fn margins(m: &MarginReport) -> Value {
    json!({
        "class": format!("{:?}", m.class).to_lowercase(),
        "r12": num(m.r12),
        "r21": num(m.r21),
        "min_slack": num(m.min_slack()),
        "constraints": m.constraints.iter().map(|c| json!({
            "name": c.name,
            "lhs": num(c.lhs),
            "rhs": num(c.rhs),
            "slack": num(c.slack),
            "strict": c.strict,
            "status": match c.status {
                MarginStatus::Met => "met",
                MarginStatus::Boundary => "boundary",
                MarginStatus::Violated => "violated",
            },
        })).collect::<Vec<_>>(),
    })
}

pub fn computation(c: &ComputationEval) -> Value {
    json!({
        "computable": c.computable,
        "r12_bound": num(c.r12_bound),
        "r21_bound": num(c.r21_bound),
        "h_y1_given_f_x1": num(c.h_y1),
        "h_y2_given_f_x2": num(c.h_y2),
    })
}

/// Scheme tables are printed as they are stored so the record can be fed back in.
pub fn witness(w: &Witness) -> Value {
    json!({
        "unit": w.unit,
        "score": num(w.score),
        "marginal_tv": num(w.marginal_tv),
        "eval": region_eval(&w.eval),
        "scheme": scheme(&SchemeFile::of(&w.scheme)),
    })
}

fn scheme(s: &SchemeFile) -> Value {
    json!({
        "r": s.r,
        "alphabets": s.alphabets,
        "factors": s.factors.iter().map(|f| json!({
            "name": f.name,
            "rows": f.rows.iter().map(|r| nums(r)).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

pub fn min_rate(r: &Option<MinRateResult>) -> Value {
    match r {
        None => json!({"found": false}),
        Some(r) => json!({
            "found": true,
            "value": num(r.value),
            "point": nums(&r.point.as_array()),
            "witness": witness(&r.witness),
        }),
    }
}

pub fn comparison(c: &PolyComparison) -> Value {
    json!({
        "equal": c.equal,
        "worst_gap": num(c.worst_gap),
        "probes": c.probes.len(),
    })
}

pub fn sweep(r: &SweepReport) -> Value {
    json!({
        "name": r.name,
        "instances": r.instances,
        "checked": r.checked,
        "violations": r.violations,
        "max_excess": num(r.max_excess),
        "pass": r.passed(),
    })
}

fn empirical(e: &Option<EmpiricalStats>) -> Value {
    match e {
        None => Value::Null,
        Some(e) => json!({
            "count": e.count,
            "mean": num(e.mean),
            "median": num(e.median),
            "q10": num(e.q10),
            "q90": num(e.q90),
            "min": num(e.min),
            "max": num(e.max),
        }),
    }
}

pub fn mode_name(r: &ProtocolResult) -> &'static str {
    match r.mode {
        RunMode::Exact => "exact",
        RunMode::MonteCarlo => "mc",
    }
}

pub fn protocol(r: &ProtocolResult) -> Value {
    json!({
        "n": r.n,
        "mode": mode_name(r),
        "omega_mode": format!("{:?}", r.omega_mode),
        "tv_to_target": opt(r.tv_to_target),
        "total_mass": opt(r.total_mass),
        "sw_error_rate": nums(&r.sw_error_rate),
        "decode_failure_rate": nums(&r.decode_failure_rate),
        "empty_bin_rate": nums(&r.empty_bin_rate),
        "empirical_tv": empirical(&r.empirical),
        "range_rates": {
            "r0": num(r.range_rates.r0),
            "r": nums(&r.range_rates.r),
            "rt": nums(&r.range_rates.rt),
        },
        "k_entropy_rate": nums(&r.k_entropy_rate),
        "trials": r.trials,
        "b_fixed": r.b_fixed,
    })
}

pub fn good_b(g: &GoodB) -> Value {
    json!({
        "b": g.b,
        "tv": num(g.tv),
        "mean_tv": num(g.mean_tv),
        "exhaustive": g.exhaustive,
        "evaluated": g.evaluated.iter().map(|(b, tv)| json!({"b": b, "tv": num(*tv)})).collect::<Vec<_>>(),
    })
}

pub const CSV_HEADER: [&str; 5] = ["n", "mode", "tv", "sw_error_mean", "emp_tv_median"];

/// One CSV row; missing quantities are left empty.
pub fn csv_row(r: &ProtocolResult) -> [String; 5] {
    let sw = if r.sw_error_rate.is_empty() {
        0.0
    } else {
        r.sw_error_rate.iter().sum::<f64>() / r.sw_error_rate.len() as f64
    };
    [
        r.n.to_string(),
        mode_name(r).into(),
        r.tv_to_target.map(fmt12).unwrap_or_default(),
        fmt12(sw),
        r.empirical.as_ref().map(|e| fmt12(e.median)).unwrap_or_default(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(1.0), "1");
        assert_eq!(fmt12(-2.5), "-2.5");
        assert_eq!(fmt12(0.5310044064107185), "0.531004406411");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(123456.7890123456), "123456.789012");
        assert_eq!(fmt12(1e6), "1000000");
        assert_eq!(fmt12(1.5e-7), "1.5e-7");
        assert_eq!(fmt12(-1e-300), "-1e-300");
        assert_eq!(fmt12(2e20), "2e20");
        assert_eq!(fmt12(f64::INFINITY), "inf");
        assert_eq!(num(0.1 + 0.2), json!(0.3));
    }
}
