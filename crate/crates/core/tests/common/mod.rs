//! Independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use invsolve::mesh::{FEOperators, Mesh, SparseSymMatrix};

pub struct DenseOperators {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub lumped: DVector<f64>,
}

/// Assembles stiffness, consistent mass and lumped mass over all `nh²`
/// vertices triangle by triangle, then keeps the interior rows and columns.
/// Gradients come from barycentric coordinates and the mass from the
/// edge-midpoint rule, which is exact for quadratics.
pub fn brute_force_assembly(mesh: &Mesh) -> DenseOperators {
    let nv = mesh.nodes.len();
    let mut k = DMatrix::zeros(nv, nv);
    let mut m = DMatrix::zeros(nv, nv);
    let mut d = DVector::zeros(nv);
    for tri in &mesh.triangles {
        let p: Vec<[f64; 2]> = tri.iter().map(|&v| mesh.nodes[v]).collect();
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = det.abs() / 2.0;
        let grad = |i: usize| {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det]
        };
        // barycentric values at the three edge midpoints
        let bary = |q: usize, i: usize| if i == q { 0.0 } else { 0.5 };
        for a in 0..3 {
            d[tri[a]] += area / 3.0;
            for b in 0..3 {
                let (ga, gb) = (grad(a), grad(b));
                k[(tri[a], tri[b])] += area * (ga[0] * gb[0] + ga[1] * gb[1]);
                let quad: f64 = (0..3).map(|q| bary(q, a) * bary(q, b)).sum::<f64>() * area / 3.0;
                m[(tri[a], tri[b])] += quad;
            }
        }
    }
    let interior = &mesh.interior_nodes;
    let n = interior.len();
    DenseOperators {
        stiffness: DMatrix::from_fn(n, n, |i, j| k[(interior[i], interior[j])]),
        mass: DMatrix::from_fn(n, n, |i, j| m[(interior[i], interior[j])]),
        lumped: DVector::from_fn(n, |i, _| d[interior[i]]),
    }
}

pub fn dense(s: &SparseSymMatrix) -> DMatrix<f64> {
    let rows = s.to_dense();
    DMatrix::from_fn(s.dim(), s.dim(), |i, j| rows[i][j])
}

pub fn max_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Fixed-point iteration `(A + D) y_{k+1} = M u + D min(y_k, 0)`, a
/// contraction because `||(A + D)^{-1} D|| < 1`.
pub fn picard_state(ops: &FEOperators, u: &[f64], tol: f64) -> Vec<f64> {
    let a = dense(&ops.stiffness);
    let d = DVector::from_vec(ops.lumped.clone());
    let lu = (a + DMatrix::from_diagonal(&d)).lu();
    let mu = dense(&ops.mass) * DVector::from_vec(u.to_vec());
    let mut y = DVector::zeros(ops.dim());
    for _ in 0..10_000 {
        let rhs = &mu + d.component_mul(&y.map(|v: f64| v.min(0.0)));
        let next = lu.solve(&rhs).expect("A + D is nonsingular");
        let change = (&next - &y).amax();
        y = next;
        if change <= tol * y.amax().max(1.0) {
            break;
        }
    }
    y.as_slice().to_vec()
}

pub fn m_norm(ops: &FEOperators, v: &[f64]) -> f64 {
    ops.inner(v, v).max(0.0).sqrt()
}
