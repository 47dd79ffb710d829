//! C ABI for the `invsolve` library.
//!
//! A problem handle owns the mesh, the assembled operators, the exact pair
//! and the starting guess for one `(nh, β, start)` choice. All vectors cross
//! the boundary as `(pointer, length)` pairs of interior nodal values in the
//! ordering `(j-1)(nh-2) + (i-1)`; the length must equal
//! `invsolve_problem_dim`.
//!
//! Every fallible function returns an [`InvsolveStatus`]. On failure the
//! message is kept per thread and can be read with
//! [`invsolve_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use invsolve::experiment::{make_noise, Setup, StartKind};
use invsolve::forward::solve_state;
use invsolve::mesh::{l2_norm, NodeField};
use invsolve::regularize::{bl_run, blm_run, AlphaSchedule, MethodResult, StoppingRule, Termination};
use invsolve::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvsolveStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    NotSpd = 3,
    NoConvergence = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvsolveStart {
    Zero = 0,
    /// `ū = u† - 20 sin(πx1) sin(2πx2)`.
    Source = 1,
}

/// Parameters of one reconstruction run. `alpha0` and `r` are ignored by
/// the Landweber run, `step_w` by the Levenberg–Marquardt run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct InvsolveRunParams {
    pub alpha0: f64,
    pub r: f64,
    pub tau: f64,
    pub delta: f64,
    pub max_iter: usize,
    pub step_w: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct InvsolveRunSummary {
    pub stop_index: usize,
    /// 1 if the discrepancy principle stopped the run, 0 on the iteration cap.
    pub discrepancy_reached: i32,
    pub final_residual: f64,
    /// `||u_N - u†||_M / ||u†||_M`.
    pub relative_error: f64,
    pub seconds: f64,
}

/// Opaque problem handle.
pub struct InvsolveProblem {
    setup: Setup,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> InvsolveStatus {
    match err {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::DegeneratePair(_) => {
            InvsolveStatus::InvalidArgument
        }
        Error::NotSpd { .. } | Error::ZeroPivot { .. } => InvsolveStatus::NotSpd,
        Error::NoConvergence { .. } => InvsolveStatus::NoConvergence,
        Error::Aborted { source, .. } => status_of(source),
        Error::Io(_) => InvsolveStatus::Io,
    }
}

struct Failure(InvsolveStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard<F>(f: F) -> InvsolveStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => InvsolveStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            InvsolveStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(InvsolveStatus::NullPointer, format!("{what} is null"))
}

unsafe fn problem<'a>(p: *const InvsolveProblem) -> Result<&'a InvsolveProblem, Failure> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn input<'a>(p: *const f64, len: usize, dim: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != dim {
        return Err(Failure(
            InvsolveStatus::InvalidArgument,
            format!("{what}: expected length {dim}, got {len}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, dim: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != dim {
        return Err(Failure(
            InvsolveStatus::InvalidArgument,
            format!("{what}: expected length {dim}, got {len}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn invsolve_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated) and returns the full message length in bytes, excluding
/// the terminator. Returns 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be null or valid for writes of `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn invsolve_last_error_message(buf: *mut c_char, buf_len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && buf_len > 0 {
            let n = bytes.len().min(buf_len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Builds the problem for an `nh × nh` vertex mesh and writes the handle to
/// `out`. Free it with [`invsolve_problem_free`].
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn invsolve_problem_new(
    nh: usize,
    beta: f64,
    start: InvsolveStart,
    out: *mut *mut InvsolveProblem,
) -> InvsolveStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match start {
            InvsolveStart::Zero => StartKind::Zero,
            InvsolveStart::Source => StartKind::Source,
        };
        let setup = Setup::new(nh, beta, kind)?;
        *out = Box::into_raw(Box::new(InvsolveProblem { setup }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`invsolve_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn invsolve_problem_free(p: *mut InvsolveProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of interior nodes, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn invsolve_problem_dim(p: *const InvsolveProblem) -> usize {
    p.as_ref().map_or(0, |p| p.setup.ops.dim())
}

/// Copies the exact source `u†` and state `y†`. Either output may be null.
///
/// # Safety
/// Non-null outputs must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn invsolve_problem_truth(
    p: *const InvsolveProblem,
    u_out: *mut f64,
    y_out: *mut f64,
    len: usize,
) -> InvsolveStatus {
    guard(|| {
        let p = problem(p)?;
        let d = p.setup.ops.dim();
        if !u_out.is_null() {
            output(u_out, len, d, "u_out")?.copy_from_slice(&p.setup.pair.u_truth);
        }
        if !y_out.is_null() {
            output(y_out, len, d, "y_out")?.copy_from_slice(&p.setup.pair.y_truth);
        }
        Ok(())
    })
}

/// Copies the starting guess chosen at construction.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn invsolve_problem_initial_guess(
    p: *const InvsolveProblem,
    out: *mut f64,
    len: usize,
) -> InvsolveStatus {
    guard(|| {
        let p = problem(p)?;
        output(out, len, p.setup.ops.dim(), "out")?.copy_from_slice(&p.setup.u0);
        Ok(())
    })
}

/// Solves `-Δy + max(y, 0) = u` for the discrete state.
///
/// # Safety
/// `u` must be valid for `len` reads and `y_out` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn invsolve_solve_state(
    p: *const InvsolveProblem,
    u: *const f64,
    y_out: *mut f64,
    len: usize,
) -> InvsolveStatus {
    guard(|| {
        let p = problem(p)?;
        let d = p.setup.ops.dim();
        let u = input(u, len, d, "u")?;
        let y_out = output(y_out, len, d, "y_out")?;
        y_out.copy_from_slice(&solve_state(&p.setup.ops, u, None)?.y);
        Ok(())
    })
}

/// `L²` norm of a nodal vector, `sqrt(vᵀ M v)`.
///
/// # Safety
/// `v` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn invsolve_l2_norm(
    p: *const InvsolveProblem,
    v: *const f64,
    len: usize,
    out: *mut f64,
) -> InvsolveStatus {
    guard(|| {
        let p = problem(p)?;
        let v = input(v, len, p.setup.ops.dim(), "v")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = l2_norm(&p.setup.ops, v)?;
        Ok(())
    })
}

/// Noisy data `y† + δ g / ||g||` with `g` standard normal drawn from `seed`.
/// The realized noise level is written to `delta_realized` when non-null.
///
/// # Safety
/// `ydelta_out` must be valid for `len` writes; `delta_realized` null or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn invsolve_make_noise(
    p: *const InvsolveProblem,
    delta: f64,
    seed: u64,
    ydelta_out: *mut f64,
    len: usize,
    delta_realized: *mut f64,
) -> InvsolveStatus {
    guard(|| {
        let p = problem(p)?;
        let out = output(ydelta_out, len, p.setup.ops.dim(), "ydelta_out")?;
        let noisy = make_noise(&p.setup.ops, &p.setup.pair.y_truth, delta, seed)?;
        out.copy_from_slice(&noisy.ydelta);
        if !delta_realized.is_null() {
            *delta_realized = noisy.delta_realized;
        }
        Ok(())
    })
}

fn summarize(p: &InvsolveProblem, res: &MethodResult) -> Result<InvsolveRunSummary, Failure> {
    let err = l2_norm(&p.setup.ops, &res.u_final.sub(&p.setup.pair.u_truth))?;
    Ok(InvsolveRunSummary {
        stop_index: res.stop_index,
        discrepancy_reached: (res.terminated_by == Termination::Discrepancy) as i32,
        final_residual: res.final_residual(),
        relative_error: err / p.setup.truth_norm,
        seconds: res.total_seconds(),
    })
}

enum Driver {
    Blm,
    Bl,
}

unsafe fn run(
    driver: Driver,
    p: *const InvsolveProblem,
    ydelta: *const f64,
    len: usize,
    params: *const InvsolveRunParams,
    u_out: *mut f64,
    summary: *mut InvsolveRunSummary,
) -> InvsolveStatus {
    guard(|| {
        let p = problem(p)?;
        let d = p.setup.ops.dim();
        let ydelta = NodeField::from(input(ydelta, len, d, "ydelta")?.to_vec());
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let u_out = output(u_out, len, d, "u_out")?;
        let rule = StoppingRule::new(params.tau, params.delta, params.max_iter)?;
        let res = match driver {
            Driver::Blm => {
                let sched = AlphaSchedule::new(params.alpha0, params.r)?;
                blm_run(&p.setup.ops, &ydelta, &rule, &p.setup.u0, &sched, None)?
            }
            Driver::Bl => bl_run(&p.setup.ops, &ydelta, &rule, &p.setup.u0, params.step_w, None)?,
        };
        u_out.copy_from_slice(&res.u_final);
        if !summary.is_null() {
            *summary = summarize(p, &res)?;
        }
        Ok(())
    })
}

/// Levenberg–Marquardt reconstruction from the handle's starting guess,
/// stopped by the discrepancy principle `residual <= tau * delta`. Hitting
/// `max_iter` is not an error; check `discrepancy_reached`.
///
/// # Safety
/// `ydelta` valid for `len` reads, `u_out` for `len` writes, `params` for
/// one read, `summary` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn invsolve_blm_run(
    p: *const InvsolveProblem,
    ydelta: *const f64,
    len: usize,
    params: *const InvsolveRunParams,
    u_out: *mut f64,
    summary: *mut InvsolveRunSummary,
) -> InvsolveStatus {
    run(Driver::Blm, p, ydelta, len, params, u_out, summary)
}

/// Landweber reconstruction with step size `params.step_w`.
///
/// # Safety
/// As [`invsolve_blm_run`].
#[no_mangle]
pub unsafe extern "C" fn invsolve_bl_run(
    p: *const InvsolveProblem,
    ydelta: *const f64,
    len: usize,
    params: *const InvsolveRunParams,
    u_out: *mut f64,
    summary: *mut InvsolveRunSummary,
) -> InvsolveStatus {
    run(Driver::Bl, p, ydelta, len, params, u_out, summary)
}

/// Default parameters: `alpha0 = 1`, `r = 0.5`, `tau = 1.5`, `delta = 0`,
/// `max_iter = 60`, `step_w = 720`.
#[no_mangle]
pub extern "C" fn invsolve_run_params_default() -> InvsolveRunParams {
    InvsolveRunParams {
        alpha0: 1.0,
        r: 0.5,
        tau: invsolve::regularize::DEFAULT_TAU,
        delta: 0.0,
        max_iter: invsolve::regularize::DEFAULT_BLM_MAX_ITER,
        step_w: invsolve::regularize::DEFAULT_LANDWEBER_STEP,
    }
}
