//! Sparse symmetric direct solves, conjugate gradients in a user-supplied
//! inner product, and power iteration for operator norms.
//!
//! The direct solver is an envelope (skyline) `L D L^T` factorization. On the
//! structured meshes used here the envelope of the natural ordering is
//! already tight, but a reverse Cuthill–McKee ordering is computed as well
//! and whichever predicts fewer flops is used.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::mesh::SparseSymMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterSolveConfig {
    pub rel_tol: f64,
    /// `None` means ten times the system dimension.
    pub max_iter: Option<usize>,
}

impl Default for IterSolveConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: None,
        }
    }
}

impl IterSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be positive"));
        }
        if self.max_iter == Some(0) {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn max_iter_for(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(10 * dim.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PivotRule {
    Positive,
    NonZero,
}

/// Factorization `P S P^T = L D L^T` of a fixed sparse symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// First column of the envelope of each (permuted) row.
    first: Vec<usize>,
    /// Offset of each row's strictly-lower envelope in `lower`.
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

/// Cholesky-type factorization that fails on any non-positive pivot.
pub fn factor_spd(s: &SparseSymMatrix) -> Result<SpdSolver> {
    SpdSolver::factor(s, PivotRule::Positive)
}

/// `L D L^T` without pivoting for symmetric quasi-definite matrices
/// `[[P, B^T], [B, -N]]` with `P`, `N` positive definite. Such matrices are
/// strongly factorizable under any symmetric permutation.
pub fn factor_quasi_definite(s: &SparseSymMatrix) -> Result<SpdSolver> {
    SpdSolver::factor(s, PivotRule::NonZero)
}

impl SpdSolver {
    fn factor(s: &SparseSymMatrix, rule: PivotRule) -> Result<Self> {
        let n = s.dim();
        let perm = choose_ordering(s);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &c in s.row(old).0 {
                first[new] = first[new].min(iperm[c]);
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }

        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = s.row(old);
            for (&c, &v) in cols.iter().zip(vals) {
                let cn = iperm[c];
                if cn < new {
                    lower[start[new] + cn - first[new]] = v;
                } else if cn == new {
                    diag[new] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = lower.split_at_mut(start[i]);
            let row_i = &mut rest[..i - fi];
            // row_i[j] becomes L_ij d_j, using already finished rows j < i
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                if k0 < j {
                    let row_j = &done[start[j] + (k0 - fj)..start[j] + (j - fj)];
                    let acc = dot_unrolled(&row_i[k0 - fi..j - fi], row_j);
                    row_i[j - fi] -= acc;
                }
            }
            let mut di = diag[i];
            for (k, entry) in row_i.iter_mut().enumerate() {
                let u = *entry;
                let l = u / diag[fi + k];
                di -= u * l;
                *entry = l;
            }
            match rule {
                PivotRule::Positive if !(di > 0.0) || !di.is_finite() => {
                    return Err(Error::NotSpd {
                        row: perm[i],
                        pivot: di,
                    })
                }
                PivotRule::NonZero if di == 0.0 || !di.is_finite() => {
                    return Err(Error::ZeroPivot { row: perm[i] })
                }
                _ => {}
            }
            diag[i] = di;
        }

        Ok(Self {
            n,
            perm,
            first,
            start,
            lower,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor, a proxy for memory use.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side has wrong length");
        let mut x: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let acc = dot_unrolled(row, &x[fi..i]);
            x[i] -= acc;
        }
        for (xi, d) in x.iter_mut().zip(&self.diag) {
            *xi /= d;
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let (head, tail) = x.split_at_mut(i);
            let xi = tail[0];
            for (xk, l) in head[fi..].iter_mut().zip(row) {
                *xk -= l * xi;
            }
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    pub fn try_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, b.len())?;
        Ok(self.solve(b))
    }
}

/// `||S x - b||_inf / (||S||_inf ||x||_inf + ||b||_inf)`.
pub fn relative_residual(s: &SparseSymMatrix, x: &[f64], b: &[f64]) -> f64 {
    let sx = s.mul_vec(x);
    let r = sx
        .iter()
        .zip(b)
        .fold(0.0_f64, |m, (a, bi)| m.max((a - bi).abs()));
    let scale = s.norm_inf() * crate::mesh::norm_inf(x) + crate::mesh::norm_inf(b);
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..n {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Predicted factorization work `sum_i width_i^2` of an ordering.
fn envelope_cost(s: &SparseSymMatrix, perm: &[usize]) -> u128 {
    let n = s.dim();
    let mut iperm = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old] = new;
    }
    perm.iter()
        .enumerate()
        .map(|(new, &old)| {
            let f = s.row(old).0.iter().map(|&c| iperm[c]).min().unwrap_or(new).min(new);
            let w = (new - f) as u128;
            w * w
        })
        .sum()
}

fn choose_ordering(s: &SparseSymMatrix) -> Vec<usize> {
    let natural: Vec<usize> = (0..s.dim()).collect();
    let rcm = reverse_cuthill_mckee(s);
    if envelope_cost(s, &rcm) < envelope_cost(s, &natural) {
        rcm
    } else {
        natural
    }
}

/// Reverse Cuthill–McKee ordering (`result[new] = old`), one BFS per
/// connected component, each started from a pseudo-peripheral vertex.
pub fn reverse_cuthill_mckee(s: &SparseSymMatrix) -> Vec<usize> {
    let n = s.dim();
    let degree: Vec<usize> = (0..n).map(|i| s.row(i).0.len()).collect();
    let neighbors = |i: usize| s.row(i).0.iter().copied().filter(move |&c| c != i);

    let bfs_levels = |root: usize, mark: &mut Vec<usize>, stamp: usize| -> (usize, usize) {
        // returns (eccentricity, a vertex of minimal degree in the last level)
        let mut queue = VecDeque::from([(root, 0usize)]);
        mark[root] = stamp;
        let (mut ecc, mut far) = (0, root);
        while let Some((v, lvl)) = queue.pop_front() {
            if lvl > ecc || (lvl == ecc && degree[v] < degree[far]) {
                ecc = lvl;
                far = v;
            }
            for w in neighbors(v) {
                if mark[w] != stamp {
                    mark[w] = stamp;
                    queue.push_back((w, lvl + 1));
                }
            }
        }
        (ecc, far)
    };

    let mut visited = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut stamp = 0;
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| degree[v]);

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let mut root = seed;
        let (mut ecc, _) = bfs_levels(root, &mut mark, stamp);
        stamp += 1;
        for _ in 0..4 {
            let (_, far) = bfs_levels(root, &mut mark, stamp);
            stamp += 1;
            let (e2, _) = bfs_levels(far, &mut mark, stamp);
            stamp += 1;
            if e2 <= ecc {
                break;
            }
            ecc = e2;
            root = far;
        }

        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = neighbors(v).filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| degree[w]);
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Result of a converged conjugate gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||` in the solver's inner product (recursive
    /// residual).
    pub relative_residual: f64,
    pub residual: Vec<f64>,
    /// Search direction of the last update.
    pub last_direction: Vec<f64>,
}

/// Conjugate gradients for an operator that is self-adjoint and positive
/// definite with respect to `inner`.
pub fn cg_solve<A, I>(
    mut apply: A,
    b: &[f64],
    inner: I,
    cfg: &IterSolveConfig,
) -> Result<CgOutcome>
where
    A: FnMut(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    cfg.validate()?;
    let n = b.len();
    let max_iter = cfg.max_iter_for(n);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = inner(&r, &r);
    let bnorm = rr.max(0.0).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            residual: r,
            last_direction: p,
        });
    }

    let mut best = (f64::INFINITY, x.clone());
    for it in 1..=max_iter {
        let ap = apply(&p);
        check_dim(n, ap.len())?;
        let pap = inner(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotSpd {
                row: it,
                pivot: pap,
            });
        }
        let a = rr / pap;
        for k in 0..n {
            x[k] += a * p[k];
            r[k] -= a * ap[k];
        }
        let rr_new = inner(&r, &r);
        let rel = rr_new.max(0.0).sqrt() / bnorm;
        if rel <= cfg.rel_tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
                residual: r,
                last_direction: p,
            });
        }
        if rel < best.0 {
            best = (rel, x.clone());
        }
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        solver: "conjugate gradients",
        iterations: max_iter,
        residual: best.0,
        last_iterate: best.1,
    })
}

/// Norm of a self-adjoint positive semidefinite operator's square root, i.e.
/// `sqrt(lambda_max(apply))`, by power iteration with Rayleigh quotients.
///
/// Stops once the Rayleigh quotient changes by less than `tol` (relative)
/// between sweeps, or after `max_iter` sweeps.
pub fn operator_norm<A, I>(mut apply: A, inner: I, dim: usize, tol: f64, max_iter: usize) -> f64
where
    A: FnMut(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    if dim == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f90_37aa);
    let mut v: Vec<f64> = (0..dim).map(|_| 1.0 + 0.5 * rng.random_range(-1.0..1.0)).collect();
    let nv = inner(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0_f64;
    for _ in 0..max_iter.max(1) {
        let w = apply(&v);
        let ww = inner(&w, &w);
        if !(ww > 0.0) {
            return 0.0;
        }
        let next = inner(&v, &w).max(0.0);
        let wn = ww.sqrt();
        v = w.into_iter().map(|x| x / wn).collect();
        let converged = (next - lambda).abs() <= tol * next;
        lambda = next;
        if converged {
            break;
        }
    }
    lambda.sqrt()
}
