//! Numerical checks of the auxiliary estimates behind the method: sums over
//! the geometric parameter sequence, spectral filter norms, and empirical
//! probes of the tangential cone condition and of `||I - Q(u_1, u_2)||`.
//!
//! Every check reports the largest `lhs - rhs` it saw (`max_violation`);
//! a value `<= VIOLATION_TOL` means every tested inequality held.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::forward::{linearize, solve_state, BouligandDerivative, QOperator};
use crate::linsolve::{factor_spd, operator_norm};
use crate::mesh::{l2_norm, FEOperators, NodeField};

pub const VIOLATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lemma_id: String,
    /// Largest `lhs - rhs` over all cases.
    pub max_violation: f64,
    pub cases_tested: usize,
    pub worst_case: String,
}

impl LemmaReport {
    fn new(lemma_id: &str) -> Self {
        Self {
            lemma_id: lemma_id.to_string(),
            max_violation: f64::NEG_INFINITY,
            cases_tested: 0,
            worst_case: String::new(),
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, case: impl FnOnce() -> String) {
        self.cases_tested += 1;
        let v = lhs - rhs;
        if v > self.max_violation || v.is_nan() {
            self.max_violation = if v.is_nan() { f64::INFINITY } else { v };
            self.worst_case = case();
        }
    }

    /// Folds another report for the same lemma into this one.
    pub fn merge(&mut self, other: LemmaReport) {
        self.cases_tested += other.cases_tested;
        if other.max_violation > self.max_violation {
            self.max_violation = other.max_violation;
            self.worst_case = other.worst_case;
        }
    }

    pub fn pass(&self) -> bool {
        self.max_violation <= VIOLATION_TOL
    }
}

/// Constants of the parameter-sum estimates for a ratio `r` and exponent `ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsC {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub k0: f64,
    pub k1: f64,
}

impl ConstantsC {
    pub fn new(r: f64, nu: f64) -> Self {
        let sr = r.sqrt();
        let q = r.powf(nu - 0.5) - 1.0;
        Self {
            c0: 1.0 / sr,
            c1: 1.0 / (1.0 - sr),
            c2: 1.0 / (sr * (1.0 - sr)),
            c3: sr / (1.0 - r),
            c4: 1.0 / (1.0 - r),
            k0: 1.0 / (sr * q),
            k1: 1.0 / (r * q),
        }
    }
}

fn check_ratio(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("r must lie in (0, 1), got {r}")))
    }
}

fn geometric(alpha0: f64, r: f64, len: usize) -> Vec<f64> {
    std::iter::successors(Some(alpha0), |a| Some(a * r)).take(len).collect()
}

/// Tail sums `S[m] = sum_{j=m}^{k} 1/α_j` for `m = 0..=k`.
fn tail_sums(alpha: &[f64], k: usize) -> Vec<f64> {
    let mut s = vec![0.0; k + 2];
    for m in (0..=k).rev() {
        s[m] = s[m + 1] + 1.0 / alpha[m];
    }
    s.truncate(k + 1);
    s
}

/// The five estimates on `α_j = α_0 r^j`, for every `k <= k_max`.
pub fn check_sum_estimates(alpha0: f64, r: f64, k_max: usize) -> Result<LemmaReport> {
    check_ratio(r)?;
    if k_max < 1 || !(alpha0 > 0.0) {
        return Err(Error::invalid("need alpha0 > 0 and k_max >= 1"));
    }
    let c = ConstantsC::new(r, 0.0);
    let alpha = geometric(alpha0, r, k_max + 2);
    let mut rep = LemmaReport::new("sum_estimates");
    for k in 0..=k_max {
        let s = tail_sums(&alpha, k);
        let ak1 = alpha[k + 1];
        let sum = |f: &dyn Fn(usize) -> f64| (0..=k).map(f).sum::<f64>();
        let checks = [
            (1.0 / s[0], c.c0 * c.c0 * ak1),
            (sum(&|m| alpha[m].powf(-0.5) * s[m].powf(-0.5)), c.c1),
            (sum(&|m| alpha[m].powf(-0.5) / s[m]), c.c2 * ak1.sqrt()),
            (sum(&|m| s[m].powf(-0.5) / alpha[m]), c.c3 / ak1.sqrt()),
            (sum(&|m| 1.0 / (alpha[m] * s[m])), c.c4),
        ];
        for (i, (lhs, rhs)) in checks.into_iter().enumerate() {
            rep.record(lhs, rhs, || format!("estimate {} at alpha0={alpha0}, r={r}, k={k}", i + 1));
        }
    }
    Ok(rep)
}

/// The two `ν`-weighted sum estimates with constants `K_0(r,ν)`, `K_1(r,ν)`.
pub fn check_sum_nu(alpha0: f64, r: f64, nu: f64, k_max: usize) -> Result<LemmaReport> {
    check_ratio(r)?;
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::invalid(format!("nu must lie in [0, 1/2), got {nu}")));
    }
    if k_max < 1 || !(alpha0 > 0.0) {
        return Err(Error::invalid("need alpha0 > 0 and k_max >= 1"));
    }
    let c = ConstantsC::new(r, nu);
    let alpha = geometric(alpha0, r, k_max + 2);
    let mut rep = LemmaReport::new("sum_nu");
    for k in 0..=k_max {
        let s = tail_sums(&alpha, k);
        let ak1 = alpha[k + 1];
        let w = |m: usize| alpha[m].powf(nu - 0.5);
        let lhs0: f64 = (0..=k).map(|m| w(m) * s[m].powf(-0.5)).sum();
        let lhs1: f64 = (0..=k).map(|m| w(m) / s[m]).sum();
        rep.record(lhs0, c.k0 * ak1.powf(nu), || {
            format!("K0 estimate at alpha0={alpha0}, r={r}, nu={nu}, k={k}")
        });
        rep.record(lhs1, c.k1 * ak1.powf(nu + 0.5), || {
            format!("K1 estimate at alpha0={alpha0}, r={r}, nu={nu}, k={k}")
        });
    }
    Ok(rep)
}

/// Which spectral filter product to test.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Filter {
    /// `prod α_j(α_j + T^T T)^{-1} (T^T T)^ν`, bound `S^{-ν}`.
    Power(f64),
    /// `prod α_j(α_j + T^T T)^{-1} T^T`, bound `S^{-1/2} / 2`.
    Half,
    /// `prod α_j(α_j + T^T T)^{-1} (T^T T)^ν T^T`, bound `S^{-ν-1/2}`.
    HalfPower(f64),
}

fn filter_norm_and_bound(t: &DMatrix<f64>, alpha: &[f64], m: usize, l: usize, filter: Filter) -> (f64, f64) {
    let tt = t.transpose() * t;
    let eig = SymmetricEigen::new(tt);
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    let window = &alpha[m..=l];
    let g = |lam: f64| window.iter().map(|&a| a / (a + lam)).product::<f64>();
    let nu = match filter {
        Filter::Power(nu) | Filter::HalfPower(nu) => nu,
        Filter::Half => 0.0,
    };
    let diag: Vec<f64> = lambdas.iter().map(|&lam| g(lam) * lam.powf(nu)).collect();
    let v = &eig.eigenvectors;
    let core = v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * v.transpose();
    let op = match filter {
        Filter::Power(_) => core,
        Filter::Half | Filter::HalfPower(_) => core * t.transpose(),
    };
    let lhs = op.singular_values().max();
    let s: f64 = window.iter().map(|a| 1.0 / a).sum();
    let rhs = match filter {
        Filter::Power(nu) => s.powf(-nu),
        Filter::Half => 0.5 * s.powf(-0.5),
        Filter::HalfPower(nu) => s.powf(-nu - 0.5),
    };
    (lhs, rhs)
}

fn spectral_report(
    id: &str,
    t: &DMatrix<f64>,
    alpha0: f64,
    r: f64,
    m: usize,
    l: usize,
    filter: Filter,
) -> Result<LemmaReport> {
    if m > l {
        return Err(Error::invalid(format!("need m <= l, got m={m}, l={l}")));
    }
    if !(alpha0 > 0.0) {
        return Err(Error::invalid("alpha0 must be positive"));
    }
    check_ratio(r)?;
    let alpha = geometric(alpha0, r, l + 1);
    let (lhs, rhs) = filter_norm_and_bound(t, &alpha, m, l, filter);
    let mut rep = LemmaReport::new(id);
    rep.record(lhs, rhs, || {
        format!(
            "{}x{} T, alpha0={alpha0}, r={r}, m={m}, l={l}, {filter:?}, lhs={lhs:e}, rhs={rhs:e}",
            t.nrows(),
            t.ncols()
        )
    });
    Ok(rep)
}

pub fn check_spectral_nu(t: &DMatrix<f64>, alpha0: f64, r: f64, m: usize, l: usize, nu: f64) -> Result<LemmaReport> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::invalid(format!("nu must lie in [0, 1], got {nu}")));
    }
    spectral_report("spectral_nu", t, alpha0, r, m, l, Filter::Power(nu))
}

pub fn check_spectral_half(t: &DMatrix<f64>, alpha0: f64, r: f64, m: usize, l: usize) -> Result<LemmaReport> {
    spectral_report("spectral_half", t, alpha0, r, m, l, Filter::Half)
}

pub fn check_spectral_halfnu(t: &DMatrix<f64>, alpha0: f64, r: f64, m: usize, l: usize, nu: f64) -> Result<LemmaReport> {
    if !(0.0..=0.5).contains(&nu) {
        return Err(Error::invalid(format!("nu must lie in [0, 1/2], got {nu}")));
    }
    spectral_report("spectral_halfnu", t, alpha0, r, m, l, Filter::HalfPower(nu))
}

/// Ratio `lhs / rhs` of the half-power estimate at `m = l` for
/// `T = σ I` with `σ^2 = α_m`, where the estimate is attained.
pub fn half_power_sharpness(alpha0: f64, r: f64, m: usize) -> f64 {
    let alpha = geometric(alpha0, r, m + 1);
    let t = DMatrix::identity(3, 3) * alpha[m].sqrt();
    let (lhs, rhs) = filter_norm_and_bound(&t, &alpha, m, m, Filter::Half);
    lhs / rhs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    Small,
    Full,
}

struct GridValues {
    ratios: &'static [f64],
    alpha0s: &'static [f64],
    sum_nus: &'static [f64],
    spectral_nus: &'static [f64],
    k_max: usize,
    matrices: usize,
}

impl Grid {
    fn values(self) -> GridValues {
        match self {
            Grid::Small => GridValues {
                ratios: &[0.5],
                alpha0s: &[1.0],
                sum_nus: &[0.0, 0.25, 0.49],
                spectral_nus: &[0.0, 0.25, 0.5],
                k_max: 20,
                matrices: 5,
            },
            Grid::Full => GridValues {
                ratios: &[0.3, 0.5, 0.7, 0.9],
                alpha0s: &[0.5, 1.0, 4.0],
                sum_nus: &[0.0, 0.1, 0.25, 0.4, 0.49],
                spectral_nus: &[0.0, 0.1, 0.25, 0.4, 0.5],
                k_max: 50,
                matrices: 20,
            },
        }
    }
}

fn random_operator(rng: &mut ChaCha8Rng, i: usize) -> DMatrix<f64> {
    let (rows, cols) = [(8, 5), (6, 6), (5, 8)][i % 3];
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Runs every lemma check over `grid` and returns one merged report per
/// lemma, plus the sharpness witness of the half-power estimate.
pub fn run_suite(grid: Grid) -> Vec<LemmaReport> {
    let g = grid.values();
    let mut sum = LemmaReport::new("sum_estimates");
    let mut sum_nu = LemmaReport::new("sum_nu");
    let mut nu_rep = LemmaReport::new("spectral_nu");
    let mut half_rep = LemmaReport::new("spectral_half");
    let mut halfnu_rep = LemmaReport::new("spectral_halfnu");
    let mut sharp = LemmaReport::new("spectral_half_sharpness");
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11ce);

    for &r in g.ratios {
        for &a0 in g.alpha0s {
            sum.merge(check_sum_estimates(a0, r, g.k_max).expect("grid values are valid"));
            for &nu in g.sum_nus {
                sum_nu.merge(check_sum_nu(a0, r, nu, g.k_max).expect("grid values are valid"));
            }
            for i in 0..g.matrices {
                let t = random_operator(&mut rng, i);
                let m = rng.random_range(0..=10usize);
                let l = m + rng.random_range(0..=15usize);
                let windows = [(m, l), (m, m), (0, g.k_max)];
                for &(m, l) in &windows {
                    for &nu in g.spectral_nus {
                        nu_rep.merge(check_spectral_nu(&t, a0, r, m, l, nu).expect("valid"));
                        halfnu_rep.merge(check_spectral_halfnu(&t, a0, r, m, l, nu).expect("valid"));
                    }
                    half_rep.merge(check_spectral_half(&t, a0, r, m, l).expect("valid"));
                }
            }
            for m in [0usize, 3, 10] {
                // attained bound: violation is measured against 0.999999 * rhs
                let ratio = half_power_sharpness(a0, r, m);
                sharp.record(0.999_999, ratio, || format!("alpha0={a0}, r={r}, m={m}, ratio={ratio}"));
            }
        }
    }
    vec![sum, sum_nu, nu_rep, half_rep, halfnu_rep, sharp]
}

/// Empirical tangential-cone ratio
/// `||F(û) - F(u) - G_u(û - u)||_M / ||F(û) - F(u)||_M`.
pub fn gtcc_probe(ops: &FEOperators, u: &NodeField, uhat: &NodeField) -> Result<f64> {
    check_dim(ops.dim(), u.len())?;
    check_dim(ops.dim(), uhat.len())?;
    let lin = linearize(ops, u, None)?;
    let y_u = lin.state.y.clone();
    let deriv = BouligandDerivative::from_factor(ops, lin.state.active, lin.factor);
    let y_hat = solve_state(ops, uhat, Some(&y_u))?.y;
    let dy = y_hat.sub(&y_u);
    let denom = l2_norm(ops, &dy)?;
    if denom <= 1e-14 {
        return Err(Error::DegeneratePair(denom));
    }
    let lin_part = deriv.apply(&uhat.sub(u));
    Ok(l2_norm(ops, &dy.sub(&lin_part))? / denom)
}

/// `||I - Q||` in the `M` geometry for the active sets of `F(u1)`, `F(u2)`.
pub fn kappa_probe(ops: &FEOperators, u1: &NodeField, u2: &NodeField, tol: f64) -> Result<f64> {
    let a1 = solve_state(ops, u1, None)?.active;
    let a2 = solve_state(ops, u2, None)?.active;
    kappa_for_active_sets(ops, &a1, &a2, tol)
}

/// Power iteration on `(I - Q)^*(I - Q)` with the `M`-adjoint.
pub fn kappa_for_active_sets(ops: &FEOperators, active1: &[bool], active2: &[bool], tol: f64) -> Result<f64> {
    let q = QOperator::new(ops, active1, active2)?;
    let mass_factor = factor_spd(&ops.mass)?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let qx = q.apply(x).expect("dimension checked");
        let t: Vec<f64> = x.iter().zip(qx.iter()).map(|(a, b)| a - b).collect();
        let qt = q.apply_m_adjoint(&ops.mass, &mass_factor, &t);
        t.iter().zip(qt.iter()).map(|(a, b)| a - b).collect()
    };
    Ok(operator_norm(apply, |a, b| ops.inner(a, b), ops.dim(), tol, 50_000))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let c = ConstantsC::new(0.25, 0.0);
        assert!((c.c0 - 2.0).abs() < 1e-15);
        assert!((c.c1 - 2.0).abs() < 1e-15);
        assert!((c.c2 - 4.0).abs() < 1e-15);
        assert!((c.c3 - 0.5 / 0.75).abs() < 1e-15);
        assert!((c.c4 - 1.0 / 0.75).abs() < 1e-15);
        // at ν = 0 the weighted constants reduce to c1 and c2
        for r in [0.3, 0.5, 0.9] {
            let c = ConstantsC::new(r, 0.0);
            assert!((c.k0 - c.c1).abs() < 1e-12 * c.c1);
            assert!((c.k1 - c.c2).abs() < 1e-12 * c.c2);
        }
    }

    #[test]
    fn sum_estimates_pass() {
        for r in [0.5, 0.9] {
            let rep = check_sum_estimates(1.0, r, 50).unwrap();
            assert!(rep.pass(), "{rep:?}");
            assert_eq!(rep.cases_tested, 51 * 5);
        }
    }

    #[test]
    fn first_estimate_is_tight_at_k0() {
        let rep = check_sum_estimates(1.0, 0.5, 1).unwrap();
        assert!(rep.max_violation.abs() < 1e-15, "{rep:?}");
    }

    #[test]
    fn sum_nu_pass_and_errors() {
        assert!(check_sum_nu(1.0, 0.5, 0.25, 50).unwrap().pass());
        assert!(check_sum_nu(1.0, 0.5, 0.49, 50).unwrap().pass());
        assert!(check_sum_nu(1.0, 0.5, 0.0, 50).unwrap().pass());
        assert!(matches!(check_sum_nu(1.0, 0.5, 0.5, 10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn spectral_trivial_cases() {
        let zero = DMatrix::zeros(4, 3);
        assert!(check_spectral_nu(&zero, 1.0, 0.5, 0, 3, 0.5).unwrap().pass());
        assert!(check_spectral_half(&zero, 1.0, 0.5, 0, 3).unwrap().pass());
        assert!(check_spectral_halfnu(&zero, 1.0, 0.5, 0, 3, 0.2).unwrap().pass());

        // T = I, m = l = 0, ν = 1: lhs = α0/(α0+1), bound α0
        let id = DMatrix::identity(3, 3);
        let rep = check_spectral_nu(&id, 2.0, 0.5, 0, 0, 1.0).unwrap();
        assert!((rep.max_violation - (2.0 / 3.0 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn spectral_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = DMatrix::from_fn(8, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert!(check_spectral_nu(&t, 1.0, 0.5, 2, 7, 0.5).unwrap().pass());
        assert!(check_spectral_half(&t, 1.0, 0.5, 0, 9).unwrap().pass());
        let t = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert!(check_spectral_halfnu(&t, 1.0, 0.5, 0, 5, 0.3).unwrap().pass());
        // ν = 0 corollary bound is weaker than the half-power bound; both hold
        let half = check_spectral_half(&t, 1.0, 0.5, 1, 4).unwrap();
        let cor = check_spectral_halfnu(&t, 1.0, 0.5, 1, 4, 0.0).unwrap();
        assert!(half.pass() && cor.pass());
        assert!(cor.max_violation <= half.max_violation);
        assert!(check_spectral_nu(&t, 1.0, 0.5, 3, 2, 0.5).is_err());
    }

    #[test]
    fn half_power_bound_is_attained() {
        for m in [0, 4] {
            let ratio = half_power_sharpness(1.0, 0.5, m);
            assert!((0.999_999..=1.0 + 1e-12).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn small_suite_passes() {
        for rep in run_suite(Grid::Small) {
            assert!(rep.pass(), "{rep:?}");
        }
    }

    use crate::experiment::{exact_pair, Setup, StartKind};
    use crate::mesh::{assemble_operators, build_mesh, interpolate};

    fn dense(s: &crate::mesh::SparseSymMatrix) -> DMatrix<f64> {
        let rows = s.to_dense();
        DMatrix::from_fn(s.dim(), s.dim(), |i, j| rows[i][j])
    }

    fn perturbation(ops: &FEOperators, seed: u64, radius: f64) -> NodeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..ops.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = l2_norm(ops, &g).unwrap();
        NodeField::from(g).scaled(radius / n)
    }

    #[test]
    fn kappa_zero_for_equal_inputs() {
        let ops = assemble_operators(&build_mesh(9).unwrap());
        let u = interpolate(|x, y| 30.0 * (x - 0.5) * (y - 0.3), &ops.mesh).unwrap();
        assert!(kappa_probe(&ops, &u, &u, 1e-12).unwrap() < 1e-12);
    }

    #[test]
    fn kappa_matches_dense_oracle_for_one_node_flip() {
        let ops = assemble_operators(&build_mesh(9).unwrap());
        let n = ops.dim();
        let a1: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let mut a2 = a1.clone();
        a2[24] = !a2[24];
        let got = kappa_for_active_sets(&ops, &a1, &a2, 1e-14).unwrap();

        let a = dense(&ops.stiffness);
        let shifted = |act: &[bool]| {
            let mut b = a.clone();
            for i in 0..n {
                if act[i] {
                    b[(i, i)] += ops.lumped[i];
                }
            }
            b
        };
        let q = shifted(&a1).lu().solve(&shifted(&a2)).unwrap();
        let x = DMatrix::identity(n, n) - q;
        let l = dense(&ops.mass).cholesky().unwrap().l();
        let lt_inv = l.transpose().try_inverse().unwrap();
        let oracle = (l.transpose() * x * lt_inv).singular_values().max();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn kappa_shrinks_with_perturbation() {
        let setup = Setup::new(33, 0.005, StartKind::Zero).unwrap();
        let ops = &setup.ops;
        let dir = perturbation(ops, 5, 1.0);
        let mut prev = f64::INFINITY;
        for t in [3.0, 1.0, 0.3, 0.1, 0.03] {
            let mut u2 = setup.pair.u_truth.clone();
            u2.axpy(t, &dir);
            let k = kappa_probe(ops, &setup.pair.u_truth, &u2, 1e-10).unwrap();
            assert!(k <= prev + 1e-12, "t={t}: {k} > {prev}");
            prev = k;
        }
    }

    #[test]
    fn gtcc_small_at_differentiable_point() {
        let ops = assemble_operators(&build_mesh(17).unwrap());
        // state strictly positive in the interior
        let u = interpolate(|_, _| 50.0, &ops.mesh).unwrap();
        let h = perturbation(&ops, 1, 1e-3);
        let mut uhat = u.clone();
        uhat.axpy(1.0, &h);
        assert!(gtcc_probe(&ops, &u, &uhat).unwrap() < 1e-10);
        assert!(matches!(gtcc_probe(&ops, &u, &u), Err(Error::DegeneratePair(_))));
    }

    #[test]
    fn gtcc_grows_with_flat_region() {
        let mesh = build_mesh(33).unwrap();
        let ops = assemble_operators(&mesh);
        let ratio = |beta: f64| {
            let p = exact_pair(beta, &mesh).unwrap();
            let mut worst: f64 = 0.0;
            for seed in 0..3 {
                let mut uhat = p.u_truth.clone();
                uhat.axpy(1.0, &perturbation(&ops, seed, 0.1));
                worst = worst.max(gtcc_probe(&ops, &p.u_truth, &uhat).unwrap());
            }
            worst
        };
        let thin = ratio(0.005);
        let wide = ratio(0.3);
        assert!(thin < 1.0);
        assert!(wide > thin, "{wide} <= {thin}");
    }
}
