use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn svt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svt"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SVT_THREADS")
        .output()
        .expect("spawn svt")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn gen(dir: &Path, extra: &[&str]) {
    let mut args = vec!["gen", "--n", "50", "--rank", "2", "--oversampling", "4", "--seed", "1", "--out", "p"];
    args.extend_from_slice(extra);
    let o = svt(&args, dir);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("config json")
}

#[test]
fn solve_defaults_match_golden_config() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), &[]);
    let o = svt(&["solve", "p/obs.mtx", "--dry-run"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let got = json(&o);
    let golden: serde_json::Value =
        serde_json::from_str(include_str!("golden/solve_defaults_50x50_m784.json")).unwrap();
    assert_eq!(got, golden);

    // Independent of the golden file: tau = 5n, delta = 1.2 n1 n2 / m.
    assert_eq!(got["tau"].as_f64(), Some(250.0));
    let delta = got["delta"].as_f64().unwrap();
    assert!((delta - 1.2 * 2500.0 / 784.0).abs() < 1e-12);
    assert_eq!(got["eps"].as_f64(), Some(1e-4));
    assert_eq!(got["ell"].as_u64(), Some(5));
    assert_eq!(got["k_max"].as_u64(), Some(500));
    assert_eq!(got["unsafe_step"].as_bool(), Some(true));
}

#[test]
fn explicit_safe_delta_is_not_flagged_unsafe() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), &[]);
    let o = svt(&["solve", "p/obs.mtx", "--dry-run", "--delta", "1.5", "--tau", "80"], dir.path());
    assert_eq!(code(&o), 0);
    let got = json(&o);
    assert_eq!(got["delta"].as_f64(), Some(1.5));
    assert_eq!(got["tau"].as_f64(), Some(80.0));
    assert_eq!(got["unsafe_step"].as_bool(), Some(false));

    let o = svt(&["solve", "p/obs.mtx", "--dry-run", "--delta", "2.5"], dir.path());
    assert_eq!(code(&o), 2, "an explicit step above the bound needs --unsafe-step");
    let o = svt(&["solve", "p/obs.mtx", "--dry-run", "--delta", "2.5", "--unsafe-step"], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn dantzig_default_step_is_halved() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), &[]);
    let o = svt(&["dantzig", "p/obs.mtx", "--tolerance-sigma", "0.1", "--dry-run"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let delta = json(&o)["delta"].as_f64().unwrap();
    assert!((delta - 0.6 * 2500.0 / 784.0).abs() < 1e-12);
}

#[test]
fn zero_observations_converge_immediately() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("zero.mtx"),
        "%%MatrixMarket matrix coordinate real general\n4 3 3\n1 1 0\n2 3 0.0\n4 2 -0\n",
    )
    .unwrap();
    let o = svt(&["solve", "zero.mtx", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.starts_with("Converged after 1 iterations"), "{out}");
    assert!(dir.path().join("o/report.json").exists());
}

#[test]
fn malformed_matrix_market_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.mtx"),
        "%%MatrixMarket matrix coordinate real general\n% comment\n3 3 2\n1 1 1.0\n2 x 4.0\n",
    )
    .unwrap();
    let o = svt(&["solve", "bad.mtx"], dir.path());
    assert_eq!(code(&o), 2);
    let err = text(&o.stderr);
    assert!(err.contains("bad.mtx:5:"), "{err}");

    let o = svt(&["solve", "missing.mtx"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn iteration_cap_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), &[]);
    let o = svt(&["solve", "p/obs.mtx", "--kmax", "3"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(text(&o.stdout).starts_with("MaxIters after 3 iterations"));
}

#[test]
fn generated_problem_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = svt(
        &["gen", "--n", "40", "--rank", "2", "--oversampling", "8", "--seed", "3", "--out", "p"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let o = svt(
        &[
            "solve", "p/obs.mtx", "--truth", "p/truth", "--tau", "200", "--delta", "1.5", "--eps", "1e-5",
            "--kmax", "3000", "--trace", "t.csv", "--out", "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}{}", text(&o.stdout), text(&o.stderr));
    let out = text(&o.stdout);
    let err: f64 = out
        .rsplit("relative error ")
        .next()
        .and_then(|s| s.trim().parse().ok())
        .expect("relative error in summary");
    assert!(err < 1e-3, "{out}");

    let trace = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("k,residual,rank,s_k,sigma_min,wall_ms"));
    assert!(lines.count() > 1);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "converged");
}

#[test]
fn operator_file_solves_through_linear_map() {
    let dir = tempfile::tempdir().unwrap();
    // Every entry of the rank-one 3x3 matrix u v^T is observed as a functional.
    let (u, v) = ([1.0, 2.0, -1.0], [0.5, 1.0, 2.0]);
    let mut cons = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            cons.push(serde_json::json!({"terms": [[i, j, 1.0]], "rhs": u[i] * v[j]}));
        }
    }
    let file = serde_json::json!({"n1": 3, "n2": 3, "constraints": cons});
    fs::write(dir.path().join("op.json"), file.to_string()).unwrap();
    let o = svt(
        &["solve", "--operator", "op.json", "--tau", "100", "--delta", "1.5", "--eps", "1e-7", "--kmax", "5000"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}{}", text(&o.stdout), text(&o.stderr));
    assert!(text(&o.stdout).contains("rank 1,"), "{}", text(&o.stdout));
}

#[test]
fn check_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = svt(&["check", "--seed", "5"], dir.path());
    let out = text(&o.stdout);
    assert_eq!(code(&o), 0, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");

    let o = svt(&["check", "--filter", "no_such_check"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn bench_requires_seed_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = svt(&["bench", "--preset", "table1"], dir.path());
    assert_eq!(code(&o), 2);
    let o = svt(&["bench", "--preset", "table9", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 2);

    let o = svt(
        &[
            "bench", "--preset", "table1", "--seed", "1", "--scale", "0.05", "--repetitions", "1", "--only",
            "1000x1000,r=10", "--out", "b",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}{}", text(&o.stdout), text(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(svt_core::bench::RESULTS_CSV_HEADER));
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("b/results.json").exists());
    assert!(dir.path().join("b/table.txt").exists());
}

#[test]
fn rank_trajectory_trace_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let o = svt(
        &[
            "bench", "--preset", "rank_trajectory", "--seed", "2", "--n", "120", "--r", "4", "--repetitions", "1",
            "--out", "rt",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}{}", text(&o.stdout), text(&o.stderr));
    let trace = fs::read_to_string(dir.path().join("rt/trace.csv")).unwrap();
    let ranks: Vec<usize> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(!ranks.is_empty());
    assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{ranks:?}");
    assert_eq!(*ranks.last().unwrap(), 4);
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_svt"))
        .args(["check", "--filter", "generator"])
        .current_dir(dir.path())
        .env("SVT_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
