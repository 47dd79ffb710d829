//! Iterative regularization for the inverse source problem
//! `-Δy + max(y, 0) = u` on the unit square: recover `u` from a noisy
//! observation of `y`.
//!
//! The pieces, bottom-up:
//!
//! - [`mesh`]: P1 finite elements on a uniform triangulation (stiffness,
//!   consistent and lumped mass matrices).
//! - [`linsolve`]: sparse `LDLᵀ`, conjugate gradients and power iteration.
//! - [`forward`]: the semismooth Newton state solver, the Bouligand
//!   subderivative `G_u` and the Levenberg–Marquardt correction step.
//! - [`regularize`]: the Levenberg–Marquardt and Landweber drivers with the
//!   discrepancy principle.
//! - [`experiment`]: the benchmark problem, noise, metrics and CSV output.
//! - [`theory`]: numerical checks of the auxiliary inequalities.
//!
//! ```
//! use invsolve::experiment::{make_noise, Setup, StartKind};
//! use invsolve::regularize::{blm_run, AlphaSchedule, StoppingRule};
//!
//! let setup = Setup::new(17, 0.005, StartKind::Source).unwrap();
//! let data = make_noise(&setup.ops, &setup.pair.y_truth, 1e-2, 7).unwrap();
//! let rule = StoppingRule::new(1.5, data.delta_realized, 60).unwrap();
//! let sched = AlphaSchedule::new(1.0, 0.5).unwrap();
//! let run = blm_run(&setup.ops, &data.ydelta, &rule, &setup.u0, &sched, None).unwrap();
//! assert!(run.final_residual() <= 1.5 * data.delta_realized);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod forward;
pub mod linsolve;
pub mod mesh;
pub mod regularize;
pub mod theory;

pub use error::{Error, Result};
pub use experiment::{ExactPair, ExperimentConfig, ExperimentRecord, NoisyData, StartKind};
pub use forward::{BouligandDerivative, CorrectionSolver, StateSolution};
pub use mesh::{FEOperators, Mesh, NodeField, SparseSymMatrix};
pub use regularize::{AlphaSchedule, Method, MethodResult, StoppingRule, Termination};
pub use theory::LemmaReport;
