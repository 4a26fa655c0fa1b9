use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coordsim"))
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn axis(name: &str, k: usize) -> Value {
    json!({"name": name, "symbols": (0..k).map(|i| i.to_string()).collect::<Vec<_>>()})
}

/// `X1` uniform bit, `Y2 = BSC(p)` of it.
fn bsc(dir: &Path, p: f64) -> PathBuf {
    write(
        dir,
        "bsc.json",
        &json!({
            "q_x": {"axes": [axis("X1", 2), axis("X2", 1)], "mass": [0.5, 0.5]},
            "q_y_given_x": {"y_axes": [axis("Y1", 1), axis("Y2", 2)], "rows": [[1.0 - p, p], [p, 1.0 - p]]},
        }),
    )
}

/// One round: `F1 ~ f1[x1]`, `Y2 ~ y2[f1]`.
fn scheme(dir: &Path, name: &str, f1: Value, y2: Value, k: usize) -> PathBuf {
    let y1 = vec![vec![1.0]; 2 * k];
    write(
        dir,
        name,
        &json!({
            "r": 1,
            "alphabets": {"F1": k},
            "factors": [{"name": "F1", "rows": f1}, {"name": "Y1", "rows": y1}, {"name": "Y2", "rows": y2}],
        }),
    )
}

fn run(cmd: &mut Command) -> (i32, Output) {
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), out)
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn region_reports_the_one_way_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let ch = bsc(dir.path(), 0.1);
    // F1 = Y2: X1 passes through the whole channel, then Y2 copies F1
    let s = scheme(dir.path(), "s.json", json!([[0.9, 0.1], [0.1, 0.9]]), json!([[1, 0], [0, 1]]), 2);
    let (code, out) = run(bin().arg("region").arg("--channel").arg(&ch).arg("--scheme").arg(&s).args(["--rates", "0,0.6,0"]));
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let rhs = v["region"]["rhs"].as_array().unwrap();
    assert_eq!(rhs[0].as_f64().unwrap(), 0.531004406411);
    assert!((rhs[2].as_f64().unwrap() - 1.0).abs() < 1e-11);
    assert_eq!(v["validation"]["pass"], true);
    assert_eq!(v["membership"]["member"], false);
    assert!(v["margins"]["constraints"].as_array().unwrap().len() >= 3);
}

#[test]
fn constant_scheme_on_a_product_target_has_zero_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let ch = bsc(dir.path(), 0.5);
    let s = scheme(dir.path(), "s.json", json!([[1], [1]]), json!([[0.5, 0.5]]), 1);
    let (code, out) = run(bin().arg("region").arg("--channel").arg(&ch).arg("--scheme").arg(&s));
    assert_eq!(code, 0);
    let v = stdout_json(&out);
    assert!(v["region"]["rhs"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
}

#[test]
fn invalid_scheme_and_malformed_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ch = bsc(dir.path(), 0.1);
    // outputs ignore the input, so the marginal condition fails
    let s = scheme(dir.path(), "s.json", json!([[1], [1]]), json!([[0.5, 0.5]]), 1);
    let (code, out) = run(bin().arg("region").arg("--channel").arg(&ch).arg("--scheme").arg(&s));
    assert_eq!(code, 2);
    assert_eq!(stdout_json(&out)["validation"]["pass"], false);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let (code, _) = run(bin().arg("region").arg("--channel").arg(&bad).arg("--scheme").arg(&s));
    assert_eq!(code, 4);
    let (code, _) = run(bin().args(["region", "--frobnicate"]));
    assert_eq!(code, 4);
    let (code, _) = run(bin().arg("minrate").arg("--channel").arg(dir.path().join("missing.json")));
    assert_eq!(code, 4);
}

#[test]
fn fme_verify_detects_a_dropped_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let ch = bsc(dir.path(), 0.1);
    let sys = dir.path().join("sys.json");
    let (code, out) = run(bin().arg("fme-verify").arg("--channel").arg(&ch).args(["--random", "3", "--rounds", "2"]).arg("--system").arg(&sys));
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&out.stdout));
    let projected: Value = serde_json::from_str(&std::fs::read_to_string(&sys).unwrap()).unwrap();
    assert_eq!(projected["vars"], json!(["R0", "R12", "R21"]));
    // the random schemes carry I(F;Y|X) > 0, so the cumulative constraint matters
    let (code, out) = run(bin().arg("fme-verify").arg("--channel").arg(&ch).args(["--random", "3", "--rounds", "2", "--drop-c44"]));
    assert_eq!(code, 2);
    assert!(stdout_json(&out)["worst_gap"].as_f64().unwrap() > 0.0);
    let (code, _) = run(bin().arg("fme-verify").arg("--channel").arg(&ch).args(["--random", "1", "--rounds", "5"]));
    assert_eq!(code, 2);
}

fn chain_files(dir: &Path) -> (PathBuf, PathBuf) {
    let (a, b) = (0.25, 0.1);
    let p = a * (1.0 - b) + (1.0 - a) * b;
    let ch = bsc(dir, p);
    let s = scheme(dir, "s.json", json!([[1.0 - a, a], [a, 1.0 - a]]), json!([[1.0 - b, b], [b, 1.0 - b]]), 2);
    (ch, s)
}

#[test]
fn simulate_exact_without_trials_has_no_sampled_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (ch, s) = chain_files(dir.path());
    let (code, out) = run(bin()
        .arg("simulate")
        .arg("--channel")
        .arg(&ch)
        .arg("--scheme")
        .arg(&s)
        .args(["--rates", "0.5,0.75,0", "--rt", "0.25", "--n", "2,4", "--exact"]));
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,mode,tv,sw_error_mean,emp_tv_median");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("exact") && !l.split(',').nth(2).unwrap().is_empty()));
}

#[test]
fn budget_overrun_keeps_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (ch, s) = chain_files(dir.path());
    let js = dir.path().join("out.json");
    let (code, out) = run(bin()
        .arg("sweep")
        .arg("--channel")
        .arg(&ch)
        .arg("--scheme")
        .arg(&s)
        .args(["--rates", "0.5,0.75,0", "--rt", "0.25", "--n-range", "2:12:2", "--budget", "1e5"])
        .arg("--json")
        .arg(&js));
    assert_eq!(code, 3);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 2);
    assert!(text.lines().last().unwrap().contains("budget_exceeded"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(js).unwrap()).unwrap();
    assert_eq!(v["budget_exceeded"], true);
}

#[test]
fn bounds_check_pass_and_injected_failure() {
    let (code, out) = run(bin().args(["bounds-check", "--instances", "100"]));
    assert_eq!(code, 0);
    let v = stdout_json(&out);
    assert!(v["sweeps"].as_array().unwrap().iter().all(|s| s["max_excess"].as_f64().unwrap() <= 0.0));
    let (code, out) = run(bin().args(["bounds-check", "--instances", "100", "--inject-violation"]));
    assert_eq!(code, 2);
    assert_eq!(stdout_json(&out)["pass"], false);
}

#[test]
fn membership_and_minrate_emit_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let ch = bsc(dir.path(), 0.1);
    let (code, out) = run(bin().arg("membership").arg("--channel").arg(&ch).args(["--rates", "1000000,0.55,0"]));
    assert_eq!(code, 0);
    let v = stdout_json(&out);
    assert_eq!(v["found"], true);
    // the printed scheme is itself a valid scheme file
    let s = write(dir.path(), "w.json", &v["witness"]["scheme"]);
    let (code, _) = run(bin().arg("region").arg("--channel").arg(&ch).arg("--scheme").arg(&s).args(["--tol", "1e-5"]));
    assert_eq!(code, 0);
    let (code, out) = run(bin().arg("minrate").arg("--channel").arg(&ch));
    assert_eq!(code, 0);
    let value = stdout_json(&out)["result"]["value"].as_f64().unwrap();
    assert!((0.531..0.561).contains(&value));
}
