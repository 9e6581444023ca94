use std::path::PathBuf;
use std::process::Command;

use fracvar::cli::run_with;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fracvar").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fracvar-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .parse()
        .unwrap()
}

fn problem_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems/example_alpha_0.5.fvp")
}

#[test]
fn example_reports_minimizer() {
    let (code, out, _) = run(&["example", "--alpha", "0.5", "--n", "256", "--trials", "2000"]);
    assert_eq!(code, 0);
    assert!(value(&out, "J").abs() < 2e-5);
    assert!(value(&out, "terminal_residual").abs() < 1e-8);
    assert!(value(&out, "inner_norm") < 2e-3);
    assert!(value(&out, "outer_norm") < 1e-3);
    assert!(out.contains("certificate = sufficient-minimizer"));
}

#[test]
fn exit_codes() {
    let (code, _, err) = run(&["eval", "missing.fvp"]);
    assert_eq!(code, 1);
    assert!(err.contains("missing.fvp") && err.contains("No such file"));
    assert_eq!(run(&["eval", "example", "--n", "1"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["eval"]).0, 2);
    assert_eq!(run(&["example", "--alpha", "1.5"]).0, 2);
    assert_eq!(run(&["suffcheck", "example", "--trials", "0"]).0, 2);
    let file = problem_file();
    assert_eq!(run(&["eval", file.to_str().unwrap(), "--alpha", "0.3"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_fracvar");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["eval", "missing.fvp"]), Some(1));
    assert_eq!(status(&["eval", "example", "--n", "0"]), Some(2));
    assert_eq!(status(&["eval", "example"]), Some(0));
}

#[test]
fn problem_file_matches_builtin() {
    let file = problem_file();
    let before = std::fs::read(&file).unwrap();
    let (code, from_file, _) = run(&["eval", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (_, builtin, _) = run(&["eval", "example", "--n", "128"]);
    assert_eq!(from_file, builtin);
    assert_eq!(std::fs::read(&file).unwrap(), before);
}

#[test]
fn ibp_sweep_decreases_down_each_column() {
    let (code, csv, _) = run(&["verify-ibp", "--sweep"]);
    assert_eq!(code, 0);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("identity,f,g,n,lhs,rhs,rel_residual"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 24 * 4);
    for block in rows.chunks(4) {
        let ns: Vec<&str> = block.iter().map(|r| r[3]).collect();
        assert_eq!(ns, ["64", "128", "256", "512"]);
        let rel: Vec<f64> = block.iter().map(|r| r[6].parse().unwrap()).collect();
        let exact = rel.iter().all(|&r| r <= 1e-12);
        assert!(exact || rel.windows(2).all(|w| w[1] < w[0]), "{block:?}");
    }
}

#[test]
fn solve_writes_files_that_eval_reads_back() {
    let dir = scratch("solve");
    let d = dir.to_str().unwrap();
    let (code, out, _) = run(&["solve", "quadratic", "--n", "16", "--out", d]);
    assert_eq!(code, 0, "{out}");
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    assert!(history.starts_with("iteration,J\n0,"));
    let traj = dir.join("trajectory.csv");
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("x,y\n"));
    let (code, eval, _) = run(&["eval", "quadratic", "--n", "16", "--trajectory", traj.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((value(&eval, "J") - value(&out, "J_final")).abs() < 1e-12);
    // a trajectory on the wrong grid is rejected
    let (code, _, err) = run(&["eval", "quadratic", "--n", "32", "--trajectory", traj.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("grid node") || err.contains("rows"), "{err}");
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn residual_outputs() {
    let dir = scratch("residual");
    let csv = dir.join("r.csv");
    let (code, out, _) = run(&["residual", "coupled", "--n", "32", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    for key in ["terminal_residual", "inner_norm", "outer_norm", "split_mismatch"] {
        assert!(value(&out, key).is_finite());
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x,interval,residual,masked\n"));
    assert!(!text.contains('\r'));
    let (code, out, _) = run(&["residual", "smooth", "--n", "32", "--classical"]);
    assert_eq!(code, 0);
    // the straight line solves the classical smooth problem
    assert!(value(&out, "inner_norm") < 1e-10);
    let (code, table, _) = run(&["residual", "example", "--sweep"]);
    assert_eq!(code, 0);
    assert_eq!(table.lines().count(), 5);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn suffcheck_emits_json() {
    let (code, out, _) = run(&["suffcheck", "example", "--trials", "500", "--seed", "3"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["conclusion"], "sufficient-minimizer");
    assert_eq!(v["dLdz_min"], 1.0);
    assert_eq!(v["L_verdict"]["status"], "likely-convex");
    assert_eq!(v["l_verdict"]["samples_tested"], 500);
}

#[test]
fn frac_op_table_and_sweep() {
    let (code, csv, _) = run(&["frac-op", "caputo", "--n", "16"]);
    assert_eq!(code, 0);
    assert!(csv.starts_with("x,value,exact,error\n"));
    assert_eq!(csv.lines().count(), 18);
    let (code, sweep, _) = run(&["frac-op", "integral-right", "--alpha", "0.4", "--power", "2", "--sweep"]);
    assert_eq!(code, 0);
    let errs: Vec<f64> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{sweep}");
}
