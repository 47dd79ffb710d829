use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use invsolve::experiment::{run_experiment, write_results_csv, write_trace_csv, ExperimentConfig, StartKind};
use invsolve::mesh::{assemble_operators, build_mesh, dump_operators};
use invsolve::regularize::{Method, DEFAULT_BLM_MAX_ITER, DEFAULT_BL_MAX_ITER, DEFAULT_LANDWEBER_STEP};
use invsolve::theory::{run_suite, Grid};
use invsolve::Error;

#[derive(Parser)]
#[command(name = "invsolve", version, about = "Levenberg-Marquardt and Landweber reconstruction for -Δy + max(y,0) = u")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Blm,
    Bl,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Zero,
    Source,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Small,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Run reconstructions over noise levels and seeds and write results.csv.
    Run {
        #[arg(long, default_value_t = 65)]
        nh: usize,
        #[arg(long, default_value_t = 0.005)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 1.5)]
        tau: f64,
        #[arg(long, value_enum, default_value = "blm")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "source")]
        u0: StartArg,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
        deltas: Vec<f64>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "42")]
        seed: Vec<u64>,
        /// Defaults to 60 for blm and 200000 for bl.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Landweber step size.
        #[arg(long, default_value_t = DEFAULT_LANDWEBER_STEP)]
        step_w: f64,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check the auxiliary inequalities numerically.
    Check {
        #[arg(long, value_enum, default_value = "full")]
        grid: GridArg,
    },
    /// Write the assembled matrices in MatrixMarket format.
    Dump {
        #[arg(long, default_value_t = 9)]
        nh: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_validation() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            nh,
            beta,
            alpha0,
            r,
            tau,
            method,
            u0,
            deltas,
            seed,
            max_iter,
            step_w,
            out,
            trace,
        } => {
            let method = match method {
                MethodArg::Blm => Method::Blm,
                MethodArg::Bl => Method::Bl,
            };
            let cfg = ExperimentConfig {
                nh,
                beta,
                deltas,
                seeds: seed,
                method,
                start: match u0 {
                    StartArg::Zero => StartKind::Zero,
                    StartArg::Source => StartKind::Source,
                },
                alpha0,
                r,
                tau,
                max_iter: max_iter.unwrap_or(match method {
                    Method::Blm => DEFAULT_BLM_MAX_ITER,
                    Method::Bl => DEFAULT_BL_MAX_ITER,
                }),
                step_w,
                keep_trace: trace.is_some(),
                ..ExperimentConfig::default()
            };
            run(&cfg, &out, trace.as_ref())
        }
        Command::Check { grid } => {
            let grid = match grid {
                GridArg::Small => Grid::Small,
                GridArg::Full => Grid::Full,
            };
            let reports = run_suite(grid);
            let mut all = true;
            for rep in &reports {
                let status = if rep.pass() { "PASS" } else { "FAIL" };
                all &= rep.pass();
                println!(
                    "{status} {:<24} max_violation={:+.3e} cases={}",
                    rep.lemma_id, rep.max_violation, rep.cases_tested
                );
                if !rep.pass() {
                    println!("     worst case: {}", rep.worst_case);
                }
            }
            if all {
                Ok(())
            } else {
                return ExitCode::from(1);
            }
        }
        Command::Dump { nh, out } => build_mesh(nh).and_then(|mesh| {
            std::fs::create_dir_all(&out)?;
            dump_operators(&assemble_operators(&mesh), &out)
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}

fn run(cfg: &ExperimentConfig, out: &PathBuf, trace: Option<&PathBuf>) -> Result<(), Error> {
    let records = run_experiment(cfg)?;
    write_results_csv(BufWriter::new(File::create(out)?), &records)?;
    if let Some(path) = trace {
        write_trace_csv(BufWriter::new(File::create(path)?), &records)?;
    }
    for r in &records {
        println!(
            "{} delta={:.3e} seed={} N={} LR={:.3} E={:.3e} R={:.3e} t={:.2}s{}",
            r.method.name(),
            r.delta,
            r.seed,
            r.n_delta,
            r.lr,
            r.e,
            r.r_rate,
            r.cpu_seconds,
            r.failure.as_deref().map(|m| format!("  FAILED: {m}")).unwrap_or_default()
        );
    }
    if records.iter().any(|r| r.failed()) {
        return Err(Error::NoConvergence {
            solver: "outer iteration",
            iterations: cfg.max_iter,
            residual: f64::NAN,
            last_iterate: Vec::new(),
        });
    }
    Ok(())
}
