use std::process::Command;

fn invsolve() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invsolve"))
}

#[test]
fn run_writes_results_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let trace = dir.path().join("trace.csv");
    let status = invsolve()
        .args(["run", "--nh", "17", "--deltas", "1e-2,1e-3", "--seed", "3,4"])
        .arg("--out")
        .arg(&out)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let results = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert!(lines[0].starts_with("# generator=invsolve version=0.1.0"));
    assert_eq!(lines[1], "method,beta,nh,seed,delta,N_delta,LR,E,R,alpha_final,cpu_seconds");
    assert_eq!(lines.len(), 6);
    assert!(lines[2].starts_with("blm,0.005,17,3,"));
    let trace = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(
        trace.lines().nth(1),
        Some("n,alpha_n,residual,error_to_truth,step_norm,ssn_iters,cg_iters,seconds")
    );
    assert_eq!(trace.lines().filter(|l| l.starts_with("# method=blm")).count(), 4);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    for args in [
        vec!["run", "--nh", "2"],
        vec!["run", "--nh", "9", "--beta", "0.7"],
        vec!["run", "--nh", "9", "--deltas", "0"],
        vec!["run", "--nh", "9", "--r", "1.5"],
        vec!["run", "--nh", "9", "--tau", "0.5"],
    ] {
        let o = invsolve().args(&args).arg("--out").arg(&out).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unconverged_run_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = invsolve()
        .args(["run", "--nh", "9", "--deltas", "1e-8", "--max-iter", "1"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(std::fs::read_to_string(&out).unwrap().contains("# failed:"));
}

#[test]
fn check_small_grid_passes() {
    let o = invsolve().args(["check", "--grid", "small"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn dump_writes_matrix_market_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = invsolve().args(["dump", "--nh", "5", "--out"]).arg(dir.path()).output().unwrap();
    assert!(o.status.success());
    for name in ["stiffness.mtx", "mass.mtx", "lumped.mtx"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("%%MatrixMarket"), "{name}");
    }
}
