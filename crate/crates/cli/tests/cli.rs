use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_randcsp");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RUST_BACKTRACE").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn gen_then_solve_decide_and_enumerate_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "f.cnf");
    ok(&["gen", "--problem", "knae", "--n", "8", "--m", "6", "--seed", "3", "--out", &f]);
    assert!(fs::read_to_string(&f).unwrap().starts_with("c kind=knae k=3\np cnf 8 6\n"));

    let decided: serde_json::Value = serde_json::from_str(&ok(&["decide", "--in", &f])).unwrap();
    let text = ok(&["enumerate", "--in", &f]);
    let count = text.lines().count() - 1;
    assert_eq!(decided["result"], if count > 0 { "SAT" } else { "UNSAT" });
    assert_eq!(count % 2, 0, "NAE solution sets come in complementary pairs");

    let solved: serde_json::Value = serde_json::from_str(&ok(&["solve", "--in", &f, "--solver", "bp-decimation"])).unwrap();
    if solved["status"] == "success" {
        let a = solved["assignment"].as_str().unwrap();
        assert!(text.lines().any(|l| l == a));
    }
}

#[test]
fn coloring_roundtrip_and_greedy() {
    let out = ok(&["solve", "--problem", "kcol", "--k", "4", "--n", "30", "--r", "1.0", "--solver", "greedy-color", "--format", "csv"]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "kind,n,m,k,solver,seed,status,steps,failure,assignment");
    assert!(lines.next().unwrap().starts_with("kcol,30,30,4,greedy-color,0,"));
}

#[test]
fn solver_must_match_problem() {
    let out = run(&["solve", "--problem", "kcol", "--n", "5", "--m", "3", "--solver", "unit-clause"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not apply"));
}

#[test]
fn unsat_outcomes_still_exit_zero() {
    // K4 is not 3-colorable; m = 6 distinct edges on 4 vertices is exactly K4
    let args = ["decide", "--problem", "kcol", "--n", "4", "--m", "6", "--model", "distinct"];
    let v: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(v["result"], "UNSAT");
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["solve", "--problem", "kcol", "--n", "4", "--m", "6", "--model", "distinct", "--solver", "greedy-color"]))
            .unwrap();
    assert_eq!(v["status"], "failure");
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!run(&["sweep", "--n", "10"]).status.success());
    assert!(!run(&["gen", "--n", "10", "--r", "1", "--m", "3"]).status.success());
    assert!(!run(&["gen", "--problem", "xsat", "--n", "10", "--m", "3"]).status.success());
    assert!(!run(&["decide", "--in", "/nonexistent/file.cnf"]).status.success());
    assert!(!run(&["bounds", "--n", "10", "--m", "3", "--model", "distinct"]).status.success());
}

#[test]
fn sweep_csv_feeds_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let s = path(dir.path(), "s.csv");
    ok(&["sweep", "--n", "12,16", "--r", "0,3,6", "--trials", "10", "--solver", "oracle", "--out", &s]);
    let csv = fs::read_to_string(&s).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "kind,k,n,m,r,trials,master_seed,sat_count,sat_rate,solver,success_count,success_rate,budget_exceeded_count,wall_ms"
    );
    assert_eq!(csv.lines().count(), 1 + 6);

    let plot = ok(&["plot-data", "--in", &s, "--x", "r", "--y", "sat_rate", "--group", "n"]);
    let mut lines = plot.lines();
    assert_eq!(lines.next().unwrap(), "series,x,y,y_lo,y_hi");
    let series: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(series, vec!["n=12", "n=12", "n=12", "n=16", "n=16", "n=16"]);

    let bad = run(&["plot-data", "--in", &s, "--y", "sat_probability"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("column `sat_probability` not found"));
}

#[test]
fn sweep_json_mirrors_csv() {
    let json = ok(&["sweep", "--n", "10", "--r", "1,2", "--trials", "5", "--format", "json"]);
    let rows: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_str(&json).unwrap();
    let keys: Vec<&str> = rows[0].keys().map(String::as_str).collect();
    let csv = ok(&["sweep", "--n", "10", "--r", "1,2", "--trials", "5"]);
    assert_eq!(keys.join(","), csv.lines().next().unwrap());
    assert_eq!(rows.len(), 2);
}

#[test]
fn threshold_reports_no_bracket_for_easy_colorings() {
    let v: serde_json::Value = serde_json::from_str(&ok(&["threshold", "--problem", "kcol", "--k", "7", "--n", "6", "--trials", "10"])).unwrap();
    assert_eq!(v[0]["outcome"]["result"], "no-bracket");
    assert_eq!(v[0]["n"], 6);
}

#[test]
fn geometry_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let (c, j) = (path(dir.path(), "g.csv"), path(dir.path(), "g.json"));
    ok(&["geometry", "--problem", "knae", "--n", "10", "--r", "0,1", "--instances", "3", "--out", &c, "--json-out", &j]);
    let csv = fs::read_to_string(&c).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("knae,3,10,0,0,0,3,3,0,0,1024,1,"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&j).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
}

#[test]
fn bounds_include_moments_and_densities() {
    let v: serde_json::Value = serde_json::from_str(&ok(&["bounds", "--problem", "knae", "--n", "12", "--m", "12"])).unwrap();
    assert!(v["pz_bound"].as_f64().unwrap() > 0.0);
    assert!((v["first_moment_density_bound"].as_f64().unwrap() - 4.0 * 2f64.ln()).abs() < 1e-12);
    let v: serde_json::Value = serde_json::from_str(&ok(&["bounds", "--problem", "ksat", "--n", "10", "--m", "0"])).unwrap();
    assert_eq!(v["expected_count"], 1024.0);
}
