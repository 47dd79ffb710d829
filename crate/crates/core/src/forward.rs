//! Discrete forward operator `F: u -> y` for `-Δy + max(y, 0) = u`, its
//! Bouligand subderivative `G_u`, and the Levenberg–Marquardt correction step.
//!
//! In coefficients the state equation reads `A y + D max(y, 0) = M u`, and
//! `G_u h` is the solution `ζ` of `(A + K_y) ζ = M h` with
//! `K_y = D diag(1{y > 0})`. Since `A + K_y` and `M` are symmetric, `G_u` is
//! self-adjoint in the `M` inner product, so `G_u^* = G_u` everywhere below.

use crate::error::{check_dim, Error, Result};
use crate::linsolve::{cg_solve, factor_quasi_definite, factor_spd, IterSolveConfig, SpdSolver};
use crate::mesh::{active_set, indicator_from_active, l2_norm, FEOperators, NodeField, SparseSymMatrix};

/// Iteration cap of the semismooth Newton solver.
pub const SSN_MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub y: NodeField,
    /// `y_i > 0`.
    pub active: Vec<bool>,
    pub ssn_iters: usize,
    /// `||A y + D max(y,0) - M u||_inf`.
    pub final_residual: f64,
}

/// A solved state together with the factorization of `A + K_y` for its
/// active set, which is exactly the matrix of the last Newton step.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub state: StateSolution,
    pub factor: SpdSolver,
}

/// `||A y + D max(y,0) - M u||_inf`.
pub fn state_equation_residual(ops: &FEOperators, u: &[f64], y: &[f64]) -> f64 {
    let ay = ops.stiffness.mul_vec(y);
    let mu = ops.mass.mul_vec(u);
    ay.iter()
        .zip(&mu)
        .zip(y.iter().zip(&ops.lumped))
        .fold(0.0_f64, |m, ((a, b), (yi, d))| m.max((a + d * yi.max(0.0) - b).abs()))
}

fn shifted_operator(ops: &FEOperators, active: &[bool]) -> SparseSymMatrix {
    ops.stiffness.add_diagonal(&indicator_from_active(ops, active))
}

/// Solves the state equation by semismooth Newton started at `y0` (zero when
/// `None`). Each step solves `(A + D Θ_k) y^{k+1} = M u` with
/// `Θ_k = diag(1{y^k > 0})`; the loop ends when two consecutive active sets
/// coincide.
pub fn solve_state(ops: &FEOperators, u: &[f64], y0: Option<&[f64]>) -> Result<StateSolution> {
    Ok(linearize(ops, u, y0)?.state)
}

pub fn linearize(ops: &FEOperators, u: &[f64], y0: Option<&[f64]>) -> Result<Linearization> {
    let d = ops.dim();
    check_dim(d, u.len())?;
    if let Some(y0) = y0 {
        check_dim(d, y0.len())?;
    }
    let mu = ops.mass.mul_vec(u);
    let mut y: Vec<f64> = y0.map_or_else(|| vec![0.0; d], <[f64]>::to_vec);
    let mut active = active_set(&y);

    for k in 1..=SSN_MAX_ITER {
        let factor = factor_spd(&shifted_operator(ops, &active))?;
        let y_next = factor.solve(&mu);
        let next_active = active_set(&y_next);
        if next_active == active {
            let final_residual = state_equation_residual(ops, u, &y_next);
            return Ok(Linearization {
                state: StateSolution {
                    y: y_next.into(),
                    active,
                    ssn_iters: k,
                    final_residual,
                },
                factor,
            });
        }
        y = y_next;
        active = next_active;
    }
    Err(Error::NoConvergence {
        solver: "semismooth Newton",
        iterations: SSN_MAX_ITER,
        residual: state_equation_residual(ops, u, &y),
        last_iterate: y,
    })
}

/// `G_u h`, given the factorization of `A + K_y` for the active set of `y_u`.
pub fn apply_g(ops: &FEOperators, factor: &SpdSolver, h: &[f64]) -> Result<NodeField> {
    check_dim(ops.dim(), h.len())?;
    check_dim(ops.dim(), factor.dim())?;
    Ok(factor.solve(&ops.mass.mul_vec(h)).into())
}

#[derive(Debug, Clone)]
pub struct CorrectionStep {
    /// Update direction.
    pub s: NodeField,
    /// `G s`.
    pub z: NodeField,
    /// Conjugate gradient iterations (zero for the direct path).
    pub inner_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionSolver {
    /// CG on `(αI + G G) s = G b` in the `M` inner product, reusing one
    /// factorization of `A + K`.
    #[default]
    ReducedCg,
    /// Direct `L D L^T` solve of the coupled `(z, s)` system.
    DirectBlock,
}

/// The Bouligand subderivative `G_u` at a fixed active set.
#[derive(Debug, Clone)]
pub struct BouligandDerivative<'a> {
    ops: &'a FEOperators,
    active: Vec<bool>,
    factor: SpdSolver,
}

impl<'a> BouligandDerivative<'a> {
    pub fn new(ops: &'a FEOperators, active: &[bool]) -> Result<Self> {
        check_dim(ops.dim(), active.len())?;
        let factor = factor_spd(&shifted_operator(ops, active))?;
        Ok(Self {
            ops,
            active: active.to_vec(),
            factor,
        })
    }

    /// Wraps an existing factorization of `A + K` for `active`, e.g. the one
    /// left over from the state solve.
    pub fn from_factor(ops: &'a FEOperators, active: Vec<bool>, factor: SpdSolver) -> Self {
        debug_assert_eq!(active.len(), factor.dim());
        Self { ops, active, factor }
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn factor(&self) -> &SpdSolver {
        &self.factor
    }

    pub fn apply(&self, h: &[f64]) -> NodeField {
        self.factor.solve(&self.ops.mass.mul_vec(h)).into()
    }

    /// `||α s + G(G s) - G b||_M / ||G b||_M` (zero when `G b = 0` and `s = 0`).
    pub fn normal_equation_residual(&self, s: &[f64], b: &[f64], alpha: f64) -> f64 {
        let gb = self.apply(b);
        let ggs = self.apply(&self.apply(s));
        let r: Vec<f64> = (0..s.len()).map(|i| alpha * s[i] + ggs[i] - gb[i]).collect();
        let rn = self.ops.inner(&r, &r).max(0.0).sqrt();
        let gbn = self.ops.inner(&gb, &gb).max(0.0).sqrt();
        if gbn == 0.0 {
            rn
        } else {
            rn / gbn
        }
    }

    /// Solves `(α I + G G) s = G b` for the correction `s`.
    pub fn correction_step(
        &self,
        b: &[f64],
        alpha: f64,
        solver: CorrectionSolver,
        cfg: &IterSolveConfig,
    ) -> Result<CorrectionStep> {
        check_dim(self.ops.dim(), b.len())?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        match solver {
            CorrectionSolver::ReducedCg => self.correction_reduced(b, alpha, cfg),
            CorrectionSolver::DirectBlock => self.correction_direct(b, alpha),
        }
    }

    fn correction_reduced(&self, b: &[f64], alpha: f64, cfg: &IterSolveConfig) -> Result<CorrectionStep> {
        let gb = self.apply(b);
        let out = cg_solve(
            |x| {
                let ggx = self.apply(&self.apply(x));
                x.iter().zip(ggx.iter()).map(|(xi, gi)| alpha * xi + gi).collect()
            },
            &gb,
            |p, q| self.ops.inner(p, q),
            cfg,
        )?;
        let z = self.apply(&out.x);
        Ok(CorrectionStep {
            s: out.x.into(),
            z,
            inner_iters: out.iterations,
        })
    }

    /// Assembles the symmetric quasi-definite form of the coupled system,
    ///
    /// ```text
    /// [ A+K    -M     ] [z]   [  0  ]
    /// [ -M   -α(A+K)  ] [s] = [ -M b]
    /// ```
    ///
    /// with `z_i` and `s_i` interleaved to keep the envelope narrow.
    pub fn block_system(&self, b: &[f64], alpha: f64) -> (SparseSymMatrix, Vec<f64>) {
        let n = self.ops.dim();
        let shifted = shifted_operator(self.ops, &self.active);
        let mut t = Vec::with_capacity(2 * shifted.nnz() + 2 * self.ops.mass.nnz());
        for (i, j, v) in shifted.upper_triplets() {
            t.push((2 * i, 2 * j, v));
            t.push((2 * i + 1, 2 * j + 1, -alpha * v));
        }
        for (i, j, v) in self.ops.mass.upper_triplets() {
            t.push((2 * i, 2 * j + 1, -v));
            if i != j {
                t.push((2 * i + 1, 2 * j, -v));
            }
        }
        let mb = self.ops.mass.mul_vec(b);
        let mut rhs = vec![0.0; 2 * n];
        for i in 0..n {
            rhs[2 * i + 1] = -mb[i];
        }
        (SparseSymMatrix::from_upper_triplets(2 * n, t), rhs)
    }

    fn correction_direct(&self, b: &[f64], alpha: f64) -> Result<CorrectionStep> {
        let (block, rhs) = self.block_system(b, alpha);
        let x = factor_quasi_definite(&block)?.solve(&rhs);
        let n = self.ops.dim();
        let z: Vec<f64> = (0..n).map(|i| x[2 * i]).collect();
        let s: Vec<f64> = (0..n).map(|i| x[2 * i + 1]).collect();
        Ok(CorrectionStep {
            s: s.into(),
            z: z.into(),
            inner_iters: 0,
        })
    }
}

/// Levenberg–Marquardt correction for `b = y^δ - F(u_n)` at the active set of
/// `F(u_n)`, by the default reduced CG path.
pub fn correction_step(
    ops: &FEOperators,
    active: &[bool],
    b: &[f64],
    alpha: f64,
    cfg: &IterSolveConfig,
) -> Result<CorrectionStep> {
    BouligandDerivative::new(ops, active)?.correction_step(b, alpha, CorrectionSolver::ReducedCg, cfg)
}

/// `(||y^δ - F(u)||_M, state of u)`.
pub fn residual(ops: &FEOperators, u: &[f64], ydelta: &[f64]) -> Result<(f64, StateSolution)> {
    check_dim(ops.dim(), ydelta.len())?;
    let state = solve_state(ops, u, None)?;
    let r = l2_norm(ops, &crate::mesh::NodeField::from(ydelta.to_vec()).sub(&state.y))?;
    Ok((r, state))
}

/// `w = (A + K_1)^{-1} (A + K_2) v`, the discrete operator with
/// `-Δw + 1{y_1>0} w = -Δv + 1{y_2>0} v`.
pub fn apply_q(ops: &FEOperators, active1: &[bool], active2: &[bool], v: &[f64]) -> Result<NodeField> {
    QOperator::new(ops, active1, active2)?.apply(v)
}

/// Factorized form of `Q(u_1, u_2)` for repeated application.
#[derive(Debug, Clone)]
pub struct QOperator {
    left: SpdSolver,
    right: SparseSymMatrix,
}

impl QOperator {
    pub fn new(ops: &FEOperators, active1: &[bool], active2: &[bool]) -> Result<Self> {
        check_dim(ops.dim(), active1.len())?;
        check_dim(ops.dim(), active2.len())?;
        Ok(Self {
            left: factor_spd(&shifted_operator(ops, active1))?,
            right: shifted_operator(ops, active2),
        })
    }

    pub fn apply(&self, v: &[f64]) -> Result<NodeField> {
        check_dim(self.right.dim(), v.len())?;
        Ok(self.left.solve(&self.right.mul_vec(v)).into())
    }

    /// Adjoint in the `M` inner product, `M^{-1} (A+K_2) (A+K_1)^{-1} M v`,
    /// given a factorization of `M`.
    pub fn apply_m_adjoint(&self, mass: &SparseSymMatrix, mass_factor: &SpdSolver, v: &[f64]) -> NodeField {
        let t = self.left.solve(&mass.mul_vec(v));
        mass_factor.solve(&self.right.mul_vec(&t)).into()
    }
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    crate::mesh::norm_inf(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}
