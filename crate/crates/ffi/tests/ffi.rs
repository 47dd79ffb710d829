use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use invsolve_ffi::*;

fn new_problem(nh: usize, beta: f64, start: InvsolveStart) -> *mut InvsolveProblem {
    let mut p = ptr::null_mut();
    let st = unsafe { invsolve_problem_new(nh, beta, start, &mut p) };
    assert_eq!(st, InvsolveStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { invsolve_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(invsolve_version()) };
    assert_eq!(v.to_str().unwrap(), "0.1.0");
}

#[test]
fn problem_lifecycle_and_truth() {
    let p = new_problem(9, 0.0, InvsolveStart::Zero);
    let n = unsafe { invsolve_problem_dim(p) };
    assert_eq!(n, 49);
    let mut u = vec![0.0; n];
    let mut y = vec![0.0; n];
    assert_eq!(unsafe { invsolve_problem_truth(p, u.as_mut_ptr(), y.as_mut_ptr(), n) }, InvsolveStatus::Ok);
    // node (0.5, 0.25) is interior index (2-1)*7 + (4-1)
    assert!((y[10] - 0.0625).abs() < 1e-15);
    let mut state = vec![0.0; n];
    assert_eq!(unsafe { invsolve_solve_state(p, u.as_ptr(), state.as_mut_ptr(), n) }, InvsolveStatus::Ok);
    let diff: Vec<f64> = state.iter().zip(&y).map(|(a, b)| a - b).collect();
    let mut norm = -1.0;
    assert_eq!(unsafe { invsolve_l2_norm(p, diff.as_ptr(), n, &mut norm) }, InvsolveStatus::Ok);
    assert!((0.0..1e-2).contains(&norm));
    let mut guess = vec![1.0; n];
    assert_eq!(unsafe { invsolve_problem_initial_guess(p, guess.as_mut_ptr(), n) }, InvsolveStatus::Ok);
    assert!(guess.iter().all(|&g| g == 0.0));
    unsafe { invsolve_problem_free(p) };
    unsafe { invsolve_problem_free(ptr::null_mut()) };
}

#[test]
fn error_codes() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { invsolve_problem_new(2, 0.0, InvsolveStart::Zero, &mut p) },
        InvsolveStatus::InvalidArgument
    );
    assert!(p.is_null());
    assert!(last_error().contains("nh"));
    assert_eq!(
        unsafe { invsolve_problem_new(9, 0.9, InvsolveStart::Zero, &mut p) },
        InvsolveStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { invsolve_problem_new(9, 0.0, InvsolveStart::Zero, ptr::null_mut()) },
        InvsolveStatus::NullPointer
    );
    assert_eq!(unsafe { invsolve_problem_dim(ptr::null()) }, 0);

    let p = new_problem(9, 0.0, InvsolveStart::Zero);
    let mut out = 0.0;
    let short = [0.0; 3];
    assert_eq!(unsafe { invsolve_l2_norm(p, short.as_ptr(), 3, &mut out) }, InvsolveStatus::InvalidArgument);
    assert!(last_error().contains("expected length 49"));
    assert_eq!(unsafe { invsolve_l2_norm(p, ptr::null(), 49, &mut out) }, InvsolveStatus::NullPointer);
    let mut y = vec![0.0; 49];
    assert_eq!(
        unsafe { invsolve_make_noise(p, -1.0, 0, y.as_mut_ptr(), 49, ptr::null_mut()) },
        InvsolveStatus::InvalidArgument
    );
    let mut params = invsolve_run_params_default();
    params.r = 2.0;
    params.delta = 1e-2;
    let mut u = vec![0.0; 49];
    assert_eq!(
        unsafe { invsolve_blm_run(p, y.as_ptr(), 49, &params, u.as_mut_ptr(), ptr::null_mut()) },
        InvsolveStatus::InvalidArgument
    );
    unsafe { invsolve_problem_free(p) };
}

#[test]
fn message_is_truncated_safely() {
    let mut p = ptr::null_mut();
    unsafe { invsolve_problem_new(1, 0.0, InvsolveStart::Zero, &mut p) };
    let mut buf = [0x7f as std::ffi::c_char; 4];
    let full = unsafe { invsolve_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn reconstructions_reach_discrepancy() {
    let p = new_problem(17, 0.005, InvsolveStart::Source);
    let n = unsafe { invsolve_problem_dim(p) };
    let mut y = vec![0.0; n];
    let mut delta = 0.0;
    assert_eq!(unsafe { invsolve_make_noise(p, 1e-2, 42, y.as_mut_ptr(), n, &mut delta) }, InvsolveStatus::Ok);
    assert!((delta - 1e-2).abs() < 1e-14);
    let mut params = invsolve_run_params_default();
    params.delta = delta;
    let mut u = vec![0.0; n];
    let mut summary = InvsolveRunSummary::default();
    assert_eq!(
        unsafe { invsolve_blm_run(p, y.as_ptr(), n, &params, u.as_mut_ptr(), &mut summary) },
        InvsolveStatus::Ok
    );
    assert_eq!(summary.discrepancy_reached, 1);
    assert!(summary.final_residual <= 1.5 * delta);
    assert!(summary.relative_error < 1.0);

    params.max_iter = 100_000;
    let mut bl = InvsolveRunSummary::default();
    assert_eq!(
        unsafe { invsolve_bl_run(p, y.as_ptr(), n, &params, u.as_mut_ptr(), &mut bl) },
        InvsolveStatus::Ok
    );
    assert_eq!(bl.discrepancy_reached, 1);
    unsafe { invsolve_problem_free(p) };
}

/// Compiles `smoke.c` against the generated header and the static library
/// built alongside this test.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libinvsolve_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .expect("a C compiler is available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with("dim=225 "), "{text}");
    assert!(text.contains("reached=1 residual_ok=1 error_len=1"), "{text}");
}
