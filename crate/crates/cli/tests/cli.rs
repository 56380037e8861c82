use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mmgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmgeo")).args(args).output().expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn gen_cycle(dir: &TempDir, n: usize) -> String {
    let out = path(dir, &format!("c{n}.json"));
    let o = mmgeo(&["gen", "cycle", "--n", &n.to_string(), "--circumference", "6.283185307179586", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn json_rows(o: &Output) -> Vec<Value> {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice::<Value>(&o.stdout).unwrap().as_array().unwrap().clone()
}

fn stderr_line(o: &Output) -> String {
    let s = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(s.trim_end().lines().count(), 1, "{s}");
    s
}

#[test]
fn gen_writes_loadable_spaces() {
    let dir = TempDir::new().unwrap();
    let c = gen_cycle(&dir, 256);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&c).unwrap()).unwrap();
    assert_eq!(v["measure"].as_array().unwrap().len(), 256);
    let d = path(&dir, "d.json");
    let o = mmgeo(&["gen", "dumbbell", "--clique", "5", "--bridge-len", "1", "--bridge-weight", "1e-4", "--out", &d]);
    assert!(o.status.success());
    assert!(Path::new(&d).exists());
    let g = path(&dir, "g.json");
    assert!(mmgeo(&["gen", "gauss", "--n", "50", "--out", &g]).status.success());
    let t = path(&dir, "t.json");
    assert!(mmgeo(&["gen", "torus", "--nx", "4", "--ny", "5", "--out", &t]).status.success());
}

#[test]
fn usage_errors_exit_three_with_one_line() {
    let dir = TempDir::new().unwrap();
    let o = mmgeo(&["gen", "cycle", "--n", "2", "--out", &path(&dir, "x.json")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr_line(&o).starts_with("error[usage]:"));
    let o = mmgeo(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr_line(&o).starts_with("error[usage]:"));
    let c = gen_cycle(&dir, 8);
    let o = mmgeo(&["compute", "spectrum", &c, "--caps", "bogus=1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr_line(&o).starts_with("error[usage]: unknown cap"));
    let o = mmgeo(&["compute", "sep", &c]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn missing_files_exit_two() {
    let o = mmgeo(&["verify", "definitely_missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).starts_with("error[io]:"));
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(mmgeo(&["compute", "spectrum", &bad, "-k", "1"]).status.code(), Some(2));
}

#[test]
fn compute_spectrum_sep_and_hk() {
    let dir = TempDir::new().unwrap();
    let c = gen_cycle(&dir, 256);
    let rows = json_rows(&mmgeo(&["compute", "spectrum", &c, "-k", "4"]));
    let l: Vec<f64> = rows.iter().map(|r| r["lambda"].as_f64().unwrap()).collect();
    assert_eq!(l.len(), 5);
    assert!(l.windows(2).all(|w| w[0] <= w[1]));
    assert!((l[1] - 1.0).abs() < 0.01 && (l[4] - 4.0).abs() < 0.04);

    let rows = json_rows(&mmgeo(&["compute", "sep", &c, "--kappas", "0.25,0.25"]));
    let sep = rows[0]["value"].as_f64().unwrap();
    assert!((sep - PI / 2.0).abs() < 0.02 * PI / 2.0, "{sep}");
    assert_eq!(rows[0]["provenance"], "exact");

    let sweep = json_rows(&mmgeo(&["compute", "hk", &c, "--k", "1", "--method", "sweep", "--seed", "7"]));
    let exact = json_rows(&mmgeo(&["compute", "hk", &c, "--k", "1"]));
    assert_eq!(sweep[0]["provenance"], "sweep");
    assert_eq!(exact[0]["provenance"], "exact");
    assert!(sweep[0]["value"].as_f64().unwrap() >= exact[0]["value"].as_f64().unwrap() - 1e-12);
}

#[test]
fn compute_other_quantities() {
    let dir = TempDir::new().unwrap();
    let c = gen_cycle(&dir, 8);
    let rows = json_rows(&mmgeo(&["compute", "alpha", &c, "--r", "0,100"]));
    assert_eq!(rows[0]["alpha"], 0.5);
    assert_eq!(rows[1]["alpha"], 0.0);
    let nu = "0.5,0.5,0,0,0,0,0,0";
    let w = json_rows(&mmgeo(&["compute", "w2", &c, "--nu", nu]));
    assert!(w[0]["value"].as_f64().unwrap() > 0.0);
    let tra = json_rows(&mmgeo(&["compute", "tra", &c, "--nu", nu, "--lambda", "1"]));
    let di = json_rows(&mmgeo(&["compute", "prohorov", &c, "--nu", nu, "--lambda", "1"]));
    assert!((tra[0]["value"].as_f64().unwrap() - di[0]["value"].as_f64().unwrap()).abs() < 1e-9);
    let e = json_rows(&mmgeo(&["compute", "entropy", &c, "--nu", nu]));
    assert!((e[0]["value"].as_f64().unwrap() - 4f64.ln()).abs() < 1e-12);
    let f = "1,0.5,0,0,0,0,0,0.5";
    let s = json_rows(&mmgeo(&["compute", "sweep", &c, "--f", f]));
    assert!(s[0]["value"].as_f64().unwrap() <= s[0]["bound"].as_f64().unwrap());
    let h = json_rows(&mmgeo(&["compute", "heat", &c, "--f", f, "--t", "0.5"]));
    assert_eq!(h.len(), 8);
    let o = mmgeo(&["compute", "obsdiam", &c, "--kappa", "0.25", "--format", "csv"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "candidate,kappa,provenance,value");
}

#[test]
fn verify_cycle_full_suite() {
    let dir = TempDir::new().unwrap();
    let c = gen_cycle(&dir, 256);
    let r = path(&dir, "r.json");
    let plot = path(&dir, "plot.csv");
    let o = mmgeo(&["verify", &c, "--suite", "all", "--seed", "1", "--report", &r, "--plot-data", &plot]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(&r).unwrap()).unwrap();
    assert!(reports.iter().all(|x| x["verdict"] != "fail"));
    let ids: Vec<&str> = reports.iter().map(|x| x["id"].as_str().unwrap()).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    for key in ["id", "anchor", "lhs", "rhs", "ratio", "verdict", "class", "params", "provenance"] {
        assert!(reports[0].get(key).is_some(), "{key}");
    }
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert!(plot.starts_with("k,lambda_ratio,"));
    assert_eq!(plot.lines().count(), 4);
}

#[test]
fn verify_dumbbell_marks_curvature_rows_report_only() {
    let dir = TempDir::new().unwrap();
    let d = path(&dir, "d.json");
    mmgeo(&["gen", "dumbbell", "--clique", "5", "--bridge-len", "1", "--bridge-weight", "1e-4", "--out", &d]);
    let o = mmgeo(&["verify", &d, "--suite", "all", "--random-spaces", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let reports: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    let cheeger = reports.iter().find(|r| r["id"] == "cheeger_mazya").unwrap();
    assert_eq!(cheeger["class"], "report-only");
    assert_eq!(cheeger["verdict"], "report");
}

#[test]
fn verify_reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let c = gen_cycle(&dir, 24);
    let run = || mmgeo(&["verify", &c, "--seed", "3", "--random-spaces", "2", "--format", "csv"]).stdout;
    let a = run();
    assert_eq!(a, run());
    assert!(String::from_utf8(a).unwrap().starts_with("id,anchor,lhs,rhs,ratio,verdict,class,params,provenance\n"));
    let o = mmgeo(&["verify", &c, "--suite", "spectral,nonsense"]);
    assert_eq!(o.status.code(), Some(3));
}
