//! Outer iterative regularization drivers: Bouligand–Levenberg–Marquardt
//! (BLM) and Bouligand–Landweber (BL), both stopped by the discrepancy
//! principle.

use std::time::Instant;

use crate::error::{check_dim, Error, Result};
use crate::forward::{linearize, BouligandDerivative, CorrectionSolver, Linearization};
use crate::linsolve::{operator_norm, IterSolveConfig};
use crate::mesh::{l2_norm, FEOperators, NodeField};

/// Step size `(2 - 2μ) / L̄²` with `μ = 0.1`, `L̄ = 0.05`.
pub const DEFAULT_LANDWEBER_STEP: f64 = (2.0 - 2.0 * 0.1) / (0.05 * 0.05);
pub const DEFAULT_BLM_MAX_ITER: usize = 60;
pub const DEFAULT_BL_MAX_ITER: usize = 200_000;
pub const DEFAULT_TAU: f64 = 1.5;

/// Geometric Tikhonov parameters `α_n = α_0 r^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSchedule {
    pub alpha0: f64,
    pub r: f64,
}

impl AlphaSchedule {
    pub fn new(alpha0: f64, r: f64) -> Result<Self> {
        if !(alpha0 > 0.0) || !alpha0.is_finite() {
            return Err(Error::invalid(format!("alpha0 must be positive, got {alpha0}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid(format!("r must lie in (0, 1), got {r}")));
        }
        Ok(Self { alpha0, r })
    }

    /// `α_0, α_0 r, α_0 r^2, ...`, one multiplication per step.
    pub fn iter(&self) -> impl Iterator<Item = f64> {
        let r = self.r;
        std::iter::successors(Some(self.alpha0), move |a| Some(a * r))
    }

    pub fn alpha(&self, n: usize) -> f64 {
        self.iter().nth(n).expect("schedule is infinite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub tau: f64,
    pub delta: f64,
    pub max_iter: usize,
}

impl StoppingRule {
    pub fn new(tau: f64, delta: f64, max_iter: usize) -> Result<Self> {
        let rule = Self { tau, delta, max_iter };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::invalid(format!("tau must exceed 1, got {}", self.tau)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("delta must be non-negative, got {}", self.delta)));
        }
        Ok(())
    }

    fn satisfied(&self, residual: f64) -> bool {
        residual <= self.tau * self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Discrepancy,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Blm,
    Bl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Blm => "blm",
            Method::Bl => "bl",
        }
    }
}

/// Trace of one reconstruction run. Index `n` of the per-iterate vectors
/// refers to `u_n`; per-step vectors (`alphas`, `step_norms`, `cg_iters`)
/// have one entry per update actually taken.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    /// `N_δ`, the index of the returned iterate.
    pub stop_index: usize,
    pub u_final: NodeField,
    pub iterates: Option<Vec<NodeField>>,
    /// `||y^δ - F(u_n)||_M`.
    pub residuals: Vec<f64>,
    /// `||u_n - u†||_M`, when the truth was supplied.
    pub errors_to_truth: Option<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub ssn_iters: Vec<usize>,
    pub cg_iters: Vec<usize>,
    /// Seconds spent on iterate `n` (state solve plus the step from it).
    pub wall_times: Vec<f64>,
    /// Relative normal-equation residual of each BLM step, when requested.
    pub step_checks: Vec<f64>,
    pub terminated_by: Termination,
}

impl MethodResult {
    fn new(method: Method, u0: &NodeField, track_error: bool) -> Self {
        Self {
            method,
            stop_index: 0,
            u_final: u0.clone(),
            iterates: None,
            residuals: Vec::new(),
            errors_to_truth: track_error.then(Vec::new),
            alphas: Vec::new(),
            step_norms: Vec::new(),
            ssn_iters: Vec::new(),
            cg_iters: Vec::new(),
            wall_times: Vec::new(),
            step_checks: Vec::new(),
            terminated_by: Termination::MaxIter,
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.wall_times.iter().sum()
    }

    /// Final residual `||y^δ - F(u_{N_δ})||`.
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual is recorded")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub store_iterates: bool,
    pub correction: CorrectionSolver,
    pub inner: IterSolveConfig,
    /// Start each state solve from the previous state instead of zero. The
    /// semismooth Newton limit does not depend on the starting point.
    pub warm_start: bool,
    /// Record the normal-equation residual of every BLM step (three extra
    /// solves per step).
    pub verify_steps: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            store_iterates: false,
            correction: CorrectionSolver::ReducedCg,
            inner: IterSolveConfig::default(),
            warm_start: true,
            verify_steps: false,
        }
    }
}

fn validate_inputs(ops: &FEOperators, ydelta: &[f64], u0: &[f64], utruth: Option<&NodeField>, rule: &StoppingRule) -> Result<()> {
    rule.validate()?;
    check_dim(ops.dim(), ydelta.len())?;
    check_dim(ops.dim(), u0.len())?;
    if let Some(t) = utruth {
        check_dim(ops.dim(), t.len())?;
    }
    Ok(())
}

/// Common loop: evaluate `F(u_n)`, test the discrepancy principle, and hand
/// the linearization to `step` for the update.
#[allow(clippy::too_many_arguments)]
fn drive<S>(
    method: Method,
    ops: &FEOperators,
    ydelta: &NodeField,
    rule: &StoppingRule,
    u0: &NodeField,
    utruth: Option<&NodeField>,
    opts: &RunOptions,
    mut step: S,
) -> Result<MethodResult>
where
    S: FnMut(usize, Linearization, &NodeField, &mut MethodResult) -> Result<NodeField>,
{
    validate_inputs(ops, ydelta, u0, utruth, rule)?;
    let mut out = MethodResult::new(method, u0, utruth.is_some());
    if opts.store_iterates {
        out.iterates = Some(Vec::new());
    }
    let mut u = u0.clone();
    let mut prev_state: Option<NodeField> = None;

    for n in 0.. {
        let clock = Instant::now();
        let y0 = if opts.warm_start { prev_state.as_deref() } else { None };
        let lin = match linearize(ops, &u, y0) {
            Ok(l) => l,
            Err(e) => return Err(abort(n, e, out, u)),
        };
        let b = ydelta.sub(&lin.state.y);
        let res = l2_norm(ops, &b)?;
        out.residuals.push(res);
        out.ssn_iters.push(lin.state.ssn_iters);
        if let (Some(errs), Some(t)) = (out.errors_to_truth.as_mut(), utruth) {
            errs.push(l2_norm(ops, &u.sub(t))?);
        }
        if let Some(its) = out.iterates.as_mut() {
            its.push(u.clone());
        }

        let stop = if rule.satisfied(res) {
            Some(Termination::Discrepancy)
        } else if n >= rule.max_iter {
            Some(Termination::MaxIter)
        } else {
            None
        };
        if let Some(t) = stop {
            out.wall_times.push(clock.elapsed().as_secs_f64());
            out.terminated_by = t;
            out.stop_index = n;
            out.u_final = u;
            return Ok(out);
        }

        prev_state = Some(lin.state.y.clone());
        let s = match step(n, lin, &b, &mut out) {
            Ok(s) => s,
            Err(e) => return Err(abort(n, e, out, u)),
        };
        out.step_norms.push(l2_norm(ops, &s)?);
        u.axpy(1.0, &s);
        out.wall_times.push(clock.elapsed().as_secs_f64());
    }
    unreachable!("the loop only exits by returning")
}

fn abort(n: usize, source: Error, mut partial: MethodResult, u: NodeField) -> Error {
    partial.stop_index = n;
    partial.u_final = u;
    partial.terminated_by = Termination::MaxIter;
    Error::Aborted {
        iteration: n,
        source: Box::new(source),
        partial: Box::new(partial),
    }
}

/// Bouligand–Levenberg–Marquardt iteration
/// `u_{n+1} = u_n + (α_n I + G_n^* G_n)^{-1} G_n^* (y^δ - F(u_n))`.
pub fn blm_run(
    ops: &FEOperators,
    ydelta: &NodeField,
    rule: &StoppingRule,
    u0: &NodeField,
    sched: &AlphaSchedule,
    utruth: Option<&NodeField>,
) -> Result<MethodResult> {
    blm_run_with(ops, ydelta, rule, u0, sched, utruth, &RunOptions::default())
}

pub fn blm_run_with(
    ops: &FEOperators,
    ydelta: &NodeField,
    rule: &StoppingRule,
    u0: &NodeField,
    sched: &AlphaSchedule,
    utruth: Option<&NodeField>,
    opts: &RunOptions,
) -> Result<MethodResult> {
    let mut alphas = sched.iter();
    drive(Method::Blm, ops, ydelta, rule, u0, utruth, opts, |_, lin, b, out| {
        let alpha = alphas.next().expect("schedule is infinite");
        let deriv = BouligandDerivative::from_factor(ops, lin.state.active, lin.factor);
        let step = deriv.correction_step(b, alpha, opts.correction, &opts.inner)?;
        if opts.verify_steps {
            out.step_checks.push(deriv.normal_equation_residual(&step.s, b, alpha));
        }
        out.alphas.push(alpha);
        out.cg_iters.push(step.inner_iters);
        Ok(step.s)
    })
}

/// Bouligand–Landweber iteration `u_{n+1} = u_n + w G_n^* (y^δ - F(u_n))`.
pub fn bl_run(
    ops: &FEOperators,
    ydelta: &NodeField,
    rule: &StoppingRule,
    u0: &NodeField,
    step_w: f64,
    utruth: Option<&NodeField>,
) -> Result<MethodResult> {
    bl_run_with(ops, ydelta, rule, u0, step_w, utruth, &RunOptions::default())
}

pub fn bl_run_with(
    ops: &FEOperators,
    ydelta: &NodeField,
    rule: &StoppingRule,
    u0: &NodeField,
    step_w: f64,
    utruth: Option<&NodeField>,
    opts: &RunOptions,
) -> Result<MethodResult> {
    if !(step_w > 0.0) || !step_w.is_finite() {
        return Err(Error::invalid(format!("step size must be positive, got {step_w}")));
    }
    drive(Method::Bl, ops, ydelta, rule, u0, utruth, opts, |_, lin, b, _| {
        let deriv = BouligandDerivative::from_factor(ops, lin.state.active, lin.factor);
        Ok(deriv.apply(b).scaled(step_w))
    })
}

/// Estimates `||G_{u_ref}||` in the `M` geometry and reports whether it is
/// at most `sqrt(α_0)`. Advisory only.
pub fn check_scaling(ops: &FEOperators, uref: &NodeField, sched: &AlphaSchedule) -> Result<(f64, bool)> {
    let lin = linearize(ops, uref, None)?;
    let deriv = BouligandDerivative::from_factor(ops, lin.state.active, lin.factor);
    let norm = operator_norm(
        |x| deriv.apply(&deriv.apply(x)).values,
        |a, b| ops.inner(a, b),
        ops.dim(),
        1e-13,
        10_000,
    );
    Ok((norm, norm <= sched.alpha0.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_state;
    use crate::mesh::{assemble_operators, build_mesh, interpolate};
    use std::f64::consts::PI;

    fn ops(nh: usize) -> FEOperators {
        assemble_operators(&build_mesh(nh).unwrap())
    }

    fn truth(o: &FEOperators) -> NodeField {
        // smooth source with a sign change so the active set is non-trivial
        interpolate(|x, y| 40.0 * (PI * x).sin() * (2.0 * PI * y).sin(), &o.mesh).unwrap()
    }

    #[test]
    fn schedule_values() {
        let s = AlphaSchedule::new(1.0, 0.5).unwrap();
        let a: Vec<f64> = s.iter().take(4).collect();
        assert_eq!(a, vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(s.alpha(10), 0.5f64.powi(10));
        assert!(AlphaSchedule::new(0.0, 0.5).is_err());
        assert!(AlphaSchedule::new(1.0, 1.0).is_err());
        assert!(StoppingRule::new(1.0, 0.1, 3).is_err());
        assert!(StoppingRule::new(1.5, -0.1, 3).is_err());
    }

    #[test]
    fn default_landweber_step() {
        assert!((DEFAULT_LANDWEBER_STEP - 720.0).abs() < 1e-9);
    }

    #[test]
    fn large_noise_stops_immediately() {
        let o = ops(9);
        let ut = truth(&o);
        let yd = solve_state(&o, &ut, None).unwrap().y;
        let u0 = o.zeros();
        let big = 10.0 * l2_norm(&o, &yd).unwrap();
        let rule = StoppingRule::new(1.5, big, 60).unwrap();
        let sched = AlphaSchedule::new(1.0, 0.5).unwrap();
        let r = blm_run(&o, &yd, &rule, &u0, &sched, Some(&ut)).unwrap();
        assert_eq!(r.stop_index, 0);
        assert_eq!(r.terminated_by, Termination::Discrepancy);
        assert_eq!(r.u_final, u0);
        let r = bl_run(&o, &yd, &rule, &u0, DEFAULT_LANDWEBER_STEP, None).unwrap();
        assert_eq!(r.stop_index, 0);
    }

    #[test]
    fn noise_free_blm_drives_residual_down() {
        let o = ops(9);
        let ut = truth(&o);
        let yd = solve_state(&o, &ut, None).unwrap().y;
        let rule = StoppingRule::new(1.5, 1e-12, 60).unwrap();
        let sched = AlphaSchedule::new(1.0, 0.5).unwrap();
        let opts = RunOptions {
            verify_steps: true,
            ..RunOptions::default()
        };
        let r = blm_run_with(&o, &yd, &rule, &o.zeros(), &sched, Some(&ut), &opts).unwrap();
        assert_eq!(r.terminated_by, Termination::Discrepancy);
        let first_small = r.residuals.iter().position(|&x| x < 1e-10).unwrap();
        assert!(first_small < 60);
        for w in r.residuals[..=first_small].windows(2) {
            assert!(w[1] < w[0], "{:?}", r.residuals);
        }
        for w in r.alphas.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() <= 2.0 * f64::EPSILON);
        }
        assert!(r.step_checks.iter().all(|&c| c <= 1e-8), "{:?}", r.step_checks);

        // Landweber on the same data lowers the residual too, just slowly
        let rule = StoppingRule::new(1.5, 1e-12, 200).unwrap();
        let bl = bl_run(&o, &yd, &rule, &o.zeros(), DEFAULT_LANDWEBER_STEP, None).unwrap();
        assert_eq!(bl.terminated_by, Termination::MaxIter);
        assert!(bl.final_residual() < bl.residuals[0]);
        assert!(bl.final_residual() > r.residuals[first_small]);
    }

    #[test]
    fn first_crossing_semantics() {
        let o = ops(9);
        let ut = truth(&o);
        let y = solve_state(&o, &ut, None).unwrap().y;
        let mut yd = y.clone();
        for (i, v) in yd.iter_mut().enumerate() {
            *v += 1e-3 * ((i * 37 % 11) as f64 - 5.0);
        }
        let delta = l2_norm(&o, &yd.sub(&y)).unwrap();
        let rule = StoppingRule::new(1.5, delta, 60).unwrap();
        let sched = AlphaSchedule::new(1.0, 0.5).unwrap();
        let r = blm_run(&o, &yd, &rule, &o.zeros(), &sched, None).unwrap();
        assert_eq!(r.terminated_by, Termination::Discrepancy);
        let n = r.stop_index;
        assert!(r.residuals[n] <= 1.5 * delta);
        assert!(r.residuals[..n].iter().all(|&x| x > 1.5 * delta));
        assert_eq!(r.residuals.len(), n + 1);
        assert_eq!(r.alphas.len(), n);
    }

    #[test]
    fn max_iter_is_flagged() {
        let o = ops(9);
        let ut = truth(&o);
        let yd = solve_state(&o, &ut, None).unwrap().y;
        let rule = StoppingRule::new(1.5, 0.0, 3).unwrap();
        let sched = AlphaSchedule::new(1.0, 0.5).unwrap();
        let r = blm_run(&o, &yd, &rule, &o.zeros(), &sched, None).unwrap();
        assert_eq!(r.terminated_by, Termination::MaxIter);
        assert_eq!(r.stop_index, 3);
    }

    #[test]
    fn scaling_check_by_construction() {
        let o = ops(9);
        let ut = truth(&o);
        let sched = AlphaSchedule::new(1.0, 0.5).unwrap();
        let (norm, ok) = check_scaling(&o, &ut, &sched).unwrap();
        assert!(norm > 0.0 && norm.is_finite());
        assert!(ok);
        let big = AlphaSchedule::new(4.0 * norm * norm, 0.5).unwrap();
        assert!(check_scaling(&o, &ut, &big).unwrap().1);
        let small = AlphaSchedule::new(norm * norm / 4.0, 0.5).unwrap();
        assert!(!check_scaling(&o, &ut, &small).unwrap().1);
    }
}
