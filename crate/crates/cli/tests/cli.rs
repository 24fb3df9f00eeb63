//! End-to-end tests of the `shg` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn shg(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shg"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn records(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect()
}

fn error_record(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().expect("error line")).expect("error record")
}

fn pair(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn expand_vacuum_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["expand", "--vacuum", "--order", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = records(&o);
    assert_eq!(r.len(), 1);
    let cs = r[0]["lhs"].as_array().unwrap();
    assert_eq!(cs.len(), 6);
    let half = std::f64::consts::PI;
    let want = [(0.0, half), (0.0, 0.0), (0.0, half), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)];
    for (c, w) in cs.iter().zip(want) {
        let (re, im) = pair(c);
        assert!((re - w.0).abs() < 1e-8 && (im - w.1).abs() < 1e-8, "{c} vs {w:?}");
    }
    assert_eq!(r[0]["pass"], true);
    assert!(dir.path().join("expand.csv").exists());
}

#[test]
fn monodromy_vacuum_example_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["monodromy", "--lambda", "0.09", "--vacuum"]);
    assert_eq!(o.status.code(), Some(0));
    let r = records(&o);
    assert_eq!(r.len(), 1);
    let (re, im) = pair(&r[0]["lnmu"]);
    let p = 2.0 * std::f64::consts::PI;
    let want = p / 2.0 * (0.09f64.powf(-0.5) + 0.3);
    assert!(re.abs() < 1e-8 && (im - want).abs() < 1e-8, "{re} {im} vs {want}");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "monodromy");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config_hash"], r[0]["inputs_hash"]);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["versions"]["shgordon"].is_string() && m["versions"]["shgordon-cli"].is_string());
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["outputs"].as_array().unwrap().iter().any(|f| f == "records.jsonl"));
}

#[test]
fn gradients_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["gradients", "--n", "2", "--dirs", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = records(&o);
    assert_eq!(r.len(), 10);
    for rec in &r {
        assert_eq!(rec["check"], "gradient");
        assert!(rec["residual"].as_f64().unwrap() < 1e-7, "{rec}");
    }
    let csv = std::fs::read_to_string(dir.path().join("gradients.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn unknown_key_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["--set", "gird=64", "expand", "--vacuum"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_record(&o);
    assert_eq!(e["error"]["kind"], "malformed_input");
    assert!(e["error"]["message"].as_str().unwrap().contains("gird"));
    assert_eq!(e["exit_code"], 2);
}

#[test]
fn out_of_range_and_bad_usage_are_malformed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(shg(dir.path(), &["--set", "genus=7", "curve"]).status.code(), Some(2));
    assert_eq!(shg(dir.path(), &["--set", "tol=-1", "flow-x"]).status.code(), Some(2));
    let o = shg(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"]["kind"], "malformed_input");
}

#[test]
fn library_malformed_input_exits_two() {
    // a real coefficient violates the cocycle reality condition
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["--set", "cocycle=[[1.0, 0.0]]", "pairing"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"]["kind"], "malformed_input");
    assert!(dir.path().join("error.json").exists());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["exit_code"], 2);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["--set", "check_tol=1e-30", "monodromy", "--vacuum", "--lambda", "0.09"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(records(&o)[0]["pass"], false);
}

#[test]
fn numerical_error_exits_one() {
    // a generic genus-2 seed is not periodic, so no curve can be fitted
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["curve", "--genus", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"]["kind"], "curve_recovery");
}

fn read_all(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names.iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect()
}

#[test]
fn reruns_are_bit_identical() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--set", "grid=64", "involution", "--seed", "3"];
    let oa = shg(a.path(), &args);
    let ob = shg(b.path(), &args);
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(oa.stdout, ob.stdout);
    let files = ["records.jsonl", "involution.json", "config.toml"];
    assert_eq!(read_all(a.path(), &files), read_all(b.path(), &files));
    // the resolved config reproduces the run
    let cfg = a.path().join("config.toml");
    let oc = shg(c.path(), &["--config", cfg.to_str().unwrap(), "involution"]);
    assert_eq!(oc.stdout, oa.stdout);
}

#[test]
fn config_file_set_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "grid = 32\nvacuum = true\nlambda = [0.1, 0.2]\norder = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = shg(&out, &["--config", cfg.to_str().unwrap(), "--set", "grid=64", "expand", "--order", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["grid"], 64);
    assert_eq!(m["config"]["order"], 3);
    assert_eq!(m["config"]["vacuum"], true);
    assert_eq!(records(&o)[0]["lhs"].as_array().unwrap().len(), 4);
}

#[test]
fn monodromy_workers_and_random_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["--set", "workers=3", "--set", "grid=64", "monodromy"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = records(&o);
    assert_eq!(r.len(), 10);
    assert!(r.iter().all(|x| x["check"] == "monodromy-unimodular" && x["pass"] == true));
}

#[test]
fn expansion_of_random_data_has_vanishing_even_terms() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["expand", "--grid", "64", "--order", "6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(records(&o)[0]["check"], "expand-even-vanish");
}

#[test]
fn killing_flows_curve_closing_and_whitham() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        (vec!["flow-x"], "flow_x.csv"),
        (vec!["flow-y", "--span", "0.5"], "flow_y.csv"),
        (vec!["flow-x", "--genus", "2", "--set", "steps=16"], "flow_x.csv"),
        (vec!["curve", "--period", "1.7"], "curve.json"),
        (vec!["closing"], "records.jsonl"),
        (vec!["whitham"], "whitham.csv"),
    ] {
        let o = shg(dir.path(), &cmd);
        assert_eq!(o.status.code(), Some(0), "{cmd:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(records(&o).iter().all(|r| r["pass"] == true), "{cmd:?}");
        assert!(dir.path().join(file).exists());
    }
    let curve: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("curve.json")).unwrap()).unwrap();
    assert_eq!(curve["pair"]["g"], 1);
}

#[test]
fn ps_pairing_and_surface() {
    let dir = tempfile::tempdir().unwrap();
    let o = shg(dir.path(), &["ps-iterate", "--levels", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let r = records(&o);
    assert_eq!(r.len(), 3);
    assert_eq!(r[1]["omega_displayed"], "u_zzz - 2 u_z^3");

    let o = shg(dir.path(), &["pairing", "--set", "pairing_points=16", "--period", "1.7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &records(&o)[0];
    assert!((r["rhs"].as_f64().unwrap() + 0.64).abs() < 1e-12);
    assert!(r["residual"].as_f64().unwrap() < 1e-4);

    let o = shg(dir.path(), &["surface", "--nx", "4", "--ny", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let obj = std::fs::read_to_string(dir.path().join("surface.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 12);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 6);
}

#[test]
fn csv_input_and_help() {
    let dir = tempfile::tempdir().unwrap();
    let n = 64;
    let p = 2.0 * std::f64::consts::PI;
    let mut csv = String::from("x,u,uy\n");
    for k in 0..n {
        csv.push_str(&format!("{},0,0\n", k as f64 * p / n as f64));
    }
    let path = dir.path().join("data.csv");
    std::fs::write(&path, csv).unwrap();
    let out = dir.path().join("out");
    let o = shg(&out, &["monodromy", "--input", path.to_str().unwrap(), "--lambda", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, im) = pair(&records(&o)[0]["lnmu"]);
    assert!((im - p / 2.0 * (0.1f64.powf(-0.5) + 0.1f64.sqrt())).abs() < 1e-8);
    let missing = shg(&out, &["monodromy", "--input", "/nonexistent.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(shg(&out, &["--help"]).status.code(), Some(0));
}
