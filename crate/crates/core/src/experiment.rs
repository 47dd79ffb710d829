//! End-to-end numerical study: the exact solution pair, noisy data, the
//! reconstruction runs and their metrics, and CSV output.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::forward::CorrectionSolver;
use crate::mesh::{assemble_operators, build_mesh, interpolate, l2_norm, FEOperators, Mesh, NodeField};
use crate::regularize::{
    bl_run_with, blm_run_with, AlphaSchedule, Method, MethodResult, RunOptions, StoppingRule, DEFAULT_BLM_MAX_ITER,
    DEFAULT_LANDWEBER_STEP, DEFAULT_TAU,
};

/// Name of the noise generator, written into CSV headers.
pub const NOISE_GENERATOR: &str = "ChaCha20Rng+StandardNormal";

#[derive(Debug, Clone)]
pub struct ExactPair {
    pub beta: f64,
    pub u_truth: NodeField,
    pub y_truth: NodeField,
}

fn in_support(x1: f64, beta: f64) -> bool {
    x1 >= beta && x1 <= 1.0 - beta
}

/// `y†(x) = (x1-β)²(x1-1+β)² sin(2πx2)` on `β <= x1 <= 1-β`, zero elsewhere.
pub fn y_dagger(beta: f64, x1: f64, x2: f64) -> f64 {
    if !in_support(x1, beta) {
        return 0.0;
    }
    let a = (x1 - beta) * (x1 - 1.0 + beta);
    a * a * (2.0 * PI * x2).sin()
}

/// The source with `-Δy† + max(y†, 0) = u†`.
pub fn u_dagger(beta: f64, x1: f64, x2: f64) -> f64 {
    let y = y_dagger(beta, x1, x2);
    if !in_support(x1, beta) {
        return 0.0;
    }
    let lap = 2.0 * ((2.0 * x1 - 1.0).powi(2) + 2.0 * (x1 - 1.0 + beta) * (x1 - beta)) * (2.0 * PI * x2).sin();
    y.max(0.0) + 4.0 * PI * PI * y - lap
}

/// Starting guess `ū = u† - 20 sin(πx1) sin(2πx2)`.
pub fn u_bar(beta: f64, x1: f64, x2: f64) -> f64 {
    u_dagger(beta, x1, x2) - 20.0 * (PI * x1).sin() * (2.0 * PI * x2).sin()
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=0.5).contains(&beta) {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta must lie in [0, 0.5], got {beta}")))
    }
}

pub fn exact_pair(beta: f64, mesh: &Mesh) -> Result<ExactPair> {
    check_beta(beta)?;
    Ok(ExactPair {
        beta,
        u_truth: interpolate(|x, y| u_dagger(beta, x, y), mesh)?,
        y_truth: interpolate(|x, y| y_dagger(beta, x, y), mesh)?,
    })
}

#[derive(Debug, Clone)]
pub struct NoisyData {
    pub ydelta: NodeField,
    pub delta_target: f64,
    /// `||y_truth - ydelta||_M` as computed.
    pub delta_realized: f64,
    pub seed: u64,
}

/// Adds `δ g / ||g||_M` with `g` i.i.d. standard normal per node.
pub fn make_noise(ops: &FEOperators, y_truth: &NodeField, delta_target: f64, seed: u64) -> Result<NoisyData> {
    check_dim(ops.dim(), y_truth.len())?;
    if !(delta_target >= 0.0) || !delta_target.is_finite() {
        return Err(Error::invalid(format!("noise level must be non-negative, got {delta_target}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> { (0..ops.dim()).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let mut g = draw();
    let mut gnorm = l2_norm(ops, &g)?;
    if gnorm == 0.0 {
        g = draw();
        gnorm = l2_norm(ops, &g)?;
        if gnorm == 0.0 {
            return Err(Error::invalid("noise draw vanished twice"));
        }
    }
    let mut ydelta = y_truth.clone();
    ydelta.axpy(delta_target / gnorm, &g);
    let delta_realized = l2_norm(ops, &ydelta.sub(y_truth))?;
    Ok(NoisyData {
        ydelta,
        delta_target,
        delta_realized,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartKind {
    Zero,
    /// `ū`, which satisfies a source condition.
    Source,
}

impl std::str::FromStr for StartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(StartKind::Zero),
            "source" => Ok(StartKind::Source),
            _ => Err(Error::invalid(format!("unknown starting guess '{s}'"))),
        }
    }
}

pub fn initial_guess(kind: StartKind, pair: &ExactPair, mesh: &Mesh) -> Result<NodeField> {
    match kind {
        StartKind::Zero => Ok(NodeField::zeros(mesh.dim())),
        StartKind::Source => interpolate(|x, y| u_bar(pair.beta, x, y), mesh),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub nh: usize,
    pub beta: f64,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub method: Method,
    pub start: StartKind,
    pub alpha0: f64,
    pub r: f64,
    pub tau: f64,
    pub max_iter: usize,
    /// Landweber step size.
    pub step_w: f64,
    pub correction: CorrectionSolver,
    /// Keep the full per-iteration trace in each record.
    pub keep_trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nh: 65,
            beta: 0.005,
            deltas: vec![1e-2, 1e-3, 1e-4],
            seeds: vec![42],
            method: Method::Blm,
            start: StartKind::Source,
            alpha0: 1.0,
            r: 0.5,
            tau: DEFAULT_TAU,
            max_iter: DEFAULT_BLM_MAX_ITER,
            step_w: DEFAULT_LANDWEBER_STEP,
            correction: CorrectionSolver::default(),
            keep_trace: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nh < 3 {
            return Err(Error::invalid(format!("nh must be at least 3, got {}", self.nh)));
        }
        check_beta(self.beta)?;
        if self.deltas.is_empty() {
            return Err(Error::invalid("at least one noise level is required"));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid(format!("noise levels must be positive, got {d}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        AlphaSchedule::new(self.alpha0, self.r)?;
        StoppingRule::new(self.tau, 1.0, self.max_iter)?;
        if !(self.step_w > 0.0) || !self.step_w.is_finite() {
            return Err(Error::invalid(format!("step size must be positive, got {}", self.step_w)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub method: Method,
    pub beta: f64,
    pub nh: usize,
    pub seed: u64,
    /// Realized noise level `||y† - y^δ||_M`.
    pub delta: f64,
    pub n_delta: usize,
    /// `N_δ / (1 + |ln δ|)`.
    pub lr: f64,
    /// `||u† - u_N||_M / ||u†||_M`.
    pub e: f64,
    /// `||u† - u_N||_M / sqrt(δ)`.
    pub r_rate: f64,
    /// `α_0 r^{N_δ}` for BLM, NaN for BL.
    pub alpha_final: f64,
    pub cpu_seconds: f64,
    /// Set when the run did not stop by the discrepancy principle.
    pub failure: Option<String>,
    pub trace: Option<MethodResult>,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Problem data shared by every run of an experiment.
pub struct Setup {
    pub ops: FEOperators,
    pub pair: ExactPair,
    pub u0: NodeField,
    pub truth_norm: f64,
}

impl Setup {
    pub fn new(nh: usize, beta: f64, start: StartKind) -> Result<Self> {
        let mesh = build_mesh(nh)?;
        let pair = exact_pair(beta, &mesh)?;
        let u0 = initial_guess(start, &pair, &mesh)?;
        let ops = assemble_operators(&mesh);
        let truth_norm = l2_norm(&ops, &pair.u_truth)?;
        Ok(Self {
            ops,
            pair,
            u0,
            truth_norm,
        })
    }
}

fn run_one(cfg: &ExperimentConfig, setup: &Setup, delta: f64, seed: u64) -> Result<ExperimentRecord> {
    let noisy = make_noise(&setup.ops, &setup.pair.y_truth, delta, seed)?;
    let rule = StoppingRule::new(cfg.tau, noisy.delta_realized, cfg.max_iter)?;
    let opts = RunOptions {
        correction: cfg.correction,
        ..RunOptions::default()
    };
    let truth = Some(&setup.pair.u_truth);
    let sched = AlphaSchedule::new(cfg.alpha0, cfg.r)?;
    let outcome = match cfg.method {
        Method::Blm => blm_run_with(&setup.ops, &noisy.ydelta, &rule, &setup.u0, &sched, truth, &opts),
        Method::Bl => bl_run_with(&setup.ops, &noisy.ydelta, &rule, &setup.u0, cfg.step_w, truth, &opts),
    };
    let (result, failure) = match outcome {
        Ok(res) => {
            let failure = (res.terminated_by == crate::regularize::Termination::MaxIter)
                .then(|| format!("no discrepancy crossing within {} iterations", cfg.max_iter));
            (res, failure)
        }
        Err(Error::Aborted {
            iteration,
            source,
            partial,
        }) => (*partial, Some(format!("aborted at iteration {iteration}: {source}"))),
        Err(e) => return Err(e),
    };

    let n = result.stop_index;
    let err = l2_norm(&setup.ops, &result.u_final.sub(&setup.pair.u_truth))?;
    let d = noisy.delta_realized;
    Ok(ExperimentRecord {
        method: cfg.method,
        beta: cfg.beta,
        nh: cfg.nh,
        seed,
        delta: d,
        n_delta: n,
        lr: n as f64 / (1.0 + d.ln().abs()),
        e: err / setup.truth_norm,
        r_rate: err / d.sqrt(),
        alpha_final: match cfg.method {
            Method::Blm => sched.alpha(n),
            Method::Bl => f64::NAN,
        },
        cpu_seconds: result.total_seconds(),
        failure,
        trace: cfg.keep_trace.then_some(result),
    })
}

/// Runs every `(δ, seed)` pair in order. A failed run still yields a record
/// (marked through `failure`) and the remaining runs continue.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let setup = Setup::new(cfg.nh, cfg.beta, cfg.start)?;
    run_experiment_on(cfg, &setup)
}

/// As [`run_experiment`] with prebuilt problem data.
pub fn run_experiment_on(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    check_dim((cfg.nh - 2) * (cfg.nh - 2), setup.ops.dim())?;
    let mut out = Vec::with_capacity(cfg.deltas.len() * cfg.seeds.len());
    for &seed in &cfg.seeds {
        for &delta in &cfg.deltas {
            out.push(run_one(cfg, setup, delta, seed)?);
        }
    }
    Ok(out)
}

pub const RESULTS_COLUMNS: &str = "method,beta,nh,seed,delta,N_delta,LR,E,R,alpha_final,cpu_seconds";
pub const TRACE_COLUMNS: &str = "n,alpha_n,residual,error_to_truth,step_norm,ssn_iters,cg_iters,seconds";

fn header_line(seeds: impl IntoIterator<Item = u64>) -> String {
    let seeds: Vec<String> = seeds.into_iter().map(|s| s.to_string()).collect();
    format!(
        "# generator={} version={} noise={} seeds={}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        NOISE_GENERATOR,
        seeds.join(";")
    )
}

/// Writes `results.csv`: a `#` provenance line, the column header, then one
/// row per record. Failed rows carry a trailing `# failed: ...` comment line.
pub fn write_results_csv<W: Write>(mut w: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(w, "{}", header_line(records.iter().map(|r| r.seed)))?;
    writeln!(w, "{RESULTS_COLUMNS}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{:e},{},{:e},{:e},{:e},{:e},{:e}",
            r.method.name(),
            r.beta,
            r.nh,
            r.seed,
            r.delta,
            r.n_delta,
            r.lr,
            r.e,
            r.r_rate,
            r.alpha_final,
            r.cpu_seconds
        )?;
        if let Some(msg) = &r.failure {
            writeln!(w, "# failed: {}", msg.replace('\n', " "))?;
        }
    }
    Ok(())
}

fn opt_field(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// Writes `trace.csv`, one block per record preceded by a `#` line naming
/// the run. Requires records produced with `keep_trace`.
pub fn write_trace_csv<W: Write>(mut w: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(w, "{}", header_line(records.iter().map(|r| r.seed)))?;
    writeln!(w, "{TRACE_COLUMNS}")?;
    for rec in records {
        let t = rec
            .trace
            .as_ref()
            .ok_or_else(|| Error::invalid("record was produced without a trace"))?;
        writeln!(
            w,
            "# method={} beta={} nh={} seed={} delta={:e}",
            rec.method.name(),
            rec.beta,
            rec.nh,
            rec.seed,
            rec.delta
        )?;
        for n in 0..t.residuals.len() {
            writeln!(
                w,
                "{},{},{:e},{},{},{},{},{:e}",
                n,
                opt_field(t.alphas.get(n).copied()),
                t.residuals[n],
                opt_field(t.errors_to_truth.as_ref().and_then(|e| e.get(n).copied())),
                opt_field(t.step_norms.get(n).copied()),
                t.ssn_iters[n],
                t.cg_iters.get(n).map_or_else(String::new, |c| c.to_string()),
                t.wall_times.get(n).copied().unwrap_or(0.0)
            )?;
        }
    }
    Ok(())
}
