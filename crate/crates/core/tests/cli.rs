//! End-to-end runs of the command-line driver.

use std::path::Path;
use std::process::{Command, Output};

use parakkt::cli::report_section;
use parakkt::field_io::read_field;
use parakkt::kkt::ResidualReport;
use parakkt::problem::{builtin_problem, write_problem_string, ScalarMap2};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parakkt"))
        .args(args)
        .output()
        .unwrap()
}

fn first_err_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr)
        .lines()
        .next()
        .unwrap_or("")
        .to_string()
}

fn report(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("report.txt")).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_catalog_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["validate", "-p", "tracking_box_1d", "-o", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(tmp.path());
    let body = report_section(&rep, "HYPOTHESES").unwrap();
    for flag in ["pass_h1", "pass_h2", "pass_h4", "pass_h4_prime"] {
        assert!(body.contains(&format!("{flag} = true")), "{body}");
    }
}

#[test]
fn solve_then_check_kkt_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("solve");
    let b = tmp.path().join("check");
    let out = run(&["solve", "--nodes", "17", "--levels", "33", "-o", s(&a)]);
    assert_eq!(out.status.code(), Some(0), "{}", first_err_line(&out));
    let out = run(&["check-kkt", "--fields", s(&a), "-o", s(&b)]);
    assert_eq!(out.status.code(), Some(0), "{}", first_err_line(&out));
    let ra = report(&a);
    let rb = report(&b);
    let sa = report_section(&ra, "RESIDUALS").unwrap();
    assert_eq!(sa, report_section(&rb, "RESIDUALS").unwrap());
    let res = ResidualReport::from_kv(sa).unwrap();
    assert!(res.kkt_max() <= 1e-8);

    // every artifact is readable again
    for name in ["y", "u", "phi", "e"] {
        let f = read_field(&a.join(format!("{name}.field"))).unwrap();
        assert_eq!(f.levels(), 33);
    }
    let trace = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,J,step,stat_res,comp_res,feas_viol,active_count\n"));
}

#[test]
fn diagnostics_verbs_on_stored_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("fields");
    assert_eq!(
        run(&["solve", "--nodes", "17", "--levels", "33", "-o", s(&f)])
            .status
            .code(),
        Some(0)
    );
    let mut reports = Vec::new();
    for _ in 0..2 {
        let d = tempfile::tempdir().unwrap();
        let out = run(&[
            "soc",
            "--fields",
            s(&f),
            "--trials",
            "10",
            "--seed",
            "3",
            "-o",
            s(d.path()),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", first_err_line(&out));
        assert!(d.path().join("growth.csv").exists());
        reports.push(report(d.path()));
    }
    assert_eq!(reports[0], reports[1]);
    assert!(report_section(&reports[0], "SOC")
        .unwrap()
        .contains("legendre_min = 1.0000000000000001e-1"));

    let d = tempfile::tempdir().unwrap();
    let out = run(&[
        "holder",
        "--fields",
        s(&f),
        "--pairs",
        "5000",
        "-o",
        s(d.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", first_err_line(&out));
    let csv = std::fs::read_to_string(d.path().join("holder_e.csv")).unwrap();
    assert!(csv.starts_with("bin_lo,bin_hi,n,max_increment\n"));

    let d = tempfile::tempdir().unwrap();
    let out = run(&["export-fields", "--fields", s(&f), "-o", s(d.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", first_err_line(&out));
    let a = read_field(&d.path().join("e_division.field")).unwrap();
    let b = read_field(&d.path().join("e_max.field")).unwrap();
    assert!(a.max_abs_diff(&b) <= 1e-8);
}

#[test]
fn oracle_compare_small_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["oracle-compare", "-o", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", first_err_line(&out));
    let rep = report(tmp.path());
    let body = report_section(&rep, "ORACLE").unwrap();
    for key in ["e_linf", "phi_linf"] {
        let line = body.lines().find(|l| l.starts_with(key)).unwrap();
        let v: f64 = line.split('=').nth(1).unwrap().trim().parse().unwrap();
        assert!(v <= 1e-6, "{line}");
    }
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["solve", "-p", "no_such_problem"],
        vec!["solve", "--levels", "1"],
        vec!["oracle-compare", "--nodes", "60", "--levels", "60"],
        vec!["check-kkt"],
        vec!["frobnicate"],
    ] {
        let mut a = args.clone();
        a.extend(["-o", s(tmp.path())]);
        let out = run(&a);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(
            first_err_line(&out).starts_with("parakkt-error code=2 class=config: "),
            "{args:?}"
        );
    }
}

#[test]
fn failed_audit_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = builtin_problem("tracking_box_1d").unwrap();
    spec.constraint = ScalarMap2::parse(["1 - u", "0", "-1", "0", "0", "0"]).unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, write_problem_string(&spec).unwrap()).unwrap();
    for verb in ["validate", "solve"] {
        let out = run(&[verb, "-p", s(&path), "-o", s(tmp.path())]);
        assert_eq!(out.status.code(), Some(3), "{verb}");
        assert!(first_err_line(&out).starts_with("parakkt-error code=3 class=audit: "));
    }
    assert!(report(tmp.path()).contains("pass_h4 = false"));
}

#[test]
fn non_convergence_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        "--nodes",
        "9",
        "--levels",
        "9",
        "--max-outer",
        "1",
        "-o",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(first_err_line(&out).starts_with("parakkt-error code=4 class=solver: "));
    // partial results are still written
    assert!(tmp.path().join("u.field").exists());
}

#[test]
fn io_errors_exit_five() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let out = run(&["check-kkt", "--fields", s(&missing), "-o", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(5));
    assert!(first_err_line(&out).starts_with("parakkt-error code=5 class=io: "));

    let bad = tmp.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    for name in ["y", "u", "phi", "e"] {
        std::fs::write(bad.join(format!("{name}.field")), "not a field\n").unwrap();
    }
    let out = run(&["check-kkt", "--fields", s(&bad), "-o", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(5));

    let out = run(&[
        "validate",
        "-p",
        "./nowhere/problem.toml",
        "-o",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(5));
}
