//! Uniform Friedrichs–Keller triangulation of the unit square and the P1
//! finite element operators built on it.
//!
//! Degrees of freedom live on interior vertices only; the homogeneous
//! Dirichlet condition is imposed by dropping boundary vertices at assembly.
//! Every cell `[ih, (i+1)h] x [jh, (j+1)h]` is split along the diagonal from
//! its bottom-left to its top-right corner, which makes the stiffness matrix
//! the classical 5-point stencil.

use std::io::Write;
use std::ops::{Deref, DerefMut};

use crate::error::{check_dim, Error, Result};

/// Coefficient vector of a piecewise-linear function over the interior nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeField {
    pub values: Vec<f64>,
}

impl NodeField {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &NodeField) -> NodeField {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>()
            .into()
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &[f64]) {
        debug_assert_eq!(self.len(), x.len());
        for (s, xi) in self.values.iter_mut().zip(x) {
            *s += a * xi;
        }
    }

    pub fn scaled(&self, a: f64) -> NodeField {
        self.values.iter().map(|v| a * v).collect::<Vec<_>>().into()
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.values)
    }
}

impl From<Vec<f64>> for NodeField {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl Deref for NodeField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for NodeField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone)]
pub struct Mesh {
    /// Vertices per side.
    pub nh: usize,
    /// Mesh width `1 / (nh - 1)`.
    pub h: f64,
    /// Vertex coordinates, vertex `(i, j)` stored at `j * nh + i`.
    pub nodes: Vec<[f64; 2]>,
    /// Dense interior index for each vertex, `None` on the boundary.
    pub interior_index: Vec<Option<usize>>,
    /// Vertex id of each interior degree of freedom.
    pub interior_nodes: Vec<usize>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    /// Number of interior degrees of freedom, `(nh - 2)^2`.
    pub fn dim(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Coordinates of interior degree of freedom `k`.
    pub fn dof_coords(&self, k: usize) -> [f64; 2] {
        self.nodes[self.interior_nodes[k]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.nodes[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }
}

pub fn build_mesh(nh: usize) -> Result<Mesh> {
    if nh < 3 {
        return Err(Error::invalid(format!("nh must be at least 3, got {nh}")));
    }
    let cells = nh - 1;
    let h = 1.0 / cells as f64;
    let vid = |i: usize, j: usize| j * nh + i;

    let mut nodes = Vec::with_capacity(nh * nh);
    let mut interior_index = Vec::with_capacity(nh * nh);
    let mut interior_nodes = Vec::with_capacity((nh - 2) * (nh - 2));
    for j in 0..nh {
        for i in 0..nh {
            nodes.push([i as f64 * h, j as f64 * h]);
            if i > 0 && j > 0 && i < cells && j < cells {
                interior_index.push(Some(interior_nodes.len()));
                interior_nodes.push(vid(i, j));
            } else {
                interior_index.push(None);
            }
        }
    }

    let mut triangles = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v11 = vid(i + 1, j + 1);
            let v01 = vid(i, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    Ok(Mesh {
        nh,
        h,
        nodes,
        interior_index,
        interior_nodes,
        triangles,
    })
}

/// Symmetric sparse matrix in compressed-row form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds the matrix from entries of the upper triangle (`i <= j`).
    /// Duplicates are summed; each off-diagonal value is mirrored once so the
    /// result is exactly symmetric.
    pub fn from_upper_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            assert!(i <= j && j < n, "triplet ({i}, {j}) outside upper triangle");
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }

        let mut counts = vec![0usize; n];
        for &(i, j, _) in &merged {
            counts[i] += 1;
            if i != j {
                counts[j] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = row_ptr[..n].to_vec();
        let mut put = |r: usize, c: usize, v: f64| {
            col_idx[fill[r]] = c;
            values[fill[r]] = v;
            fill[r] += 1;
        };
        for &(i, j, v) in &merged {
            put(i, j, v);
            if i != j {
                put(j, i, v);
            }
        }

        let mut m = Self {
            n,
            row_ptr,
            col_idx,
            values,
        };
        m.sort_rows();
        m
    }

    fn sort_rows(&mut self) {
        for i in 0..self.n {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut row: Vec<(usize, f64)> = self.col_idx[a..b]
                .iter()
                .copied()
                .zip(self.values[a..b].iter().copied())
                .collect();
            row.sort_unstable_by_key(|e| e.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                self.col_idx[a + k] = c;
                self.values[a + k] = v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *o = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `self + diag(d)`, keeping the sparsity pattern (the diagonal is
    /// always stored by the assembly routines).
    pub fn add_diagonal(&self, d: &[f64]) -> SparseSymMatrix {
        assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        for (i, di) in d.iter().enumerate() {
            let (a, b) = (out.row_ptr[i], out.row_ptr[i + 1]);
            match out.col_idx[a..b].binary_search(&i) {
                Ok(k) => out.values[a + k] += di,
                Err(_) => panic!("diagonal entry ({i}, {i}) not stored"),
            }
        }
        out
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Upper-triangle triplets, useful for building larger block matrices.
    pub fn upper_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .filter(move |(&c, _)| c >= i)
                .map(move |(&c, &v)| (i, c, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    /// Writes the matrix in MatrixMarket coordinate format (symmetric, lower
    /// triangle, 1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let lower: Vec<(usize, usize, f64)> = self
            .upper_triplets()
            .map(|(i, j, v)| (j, i, v))
            .collect();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.n, self.n, lower.len())?;
        let mut lower = lower;
        lower.sort_unstable_by_key(|&(i, j, _)| (j, i));
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

/// All discrete operators of the problem, restricted to interior nodes.
#[derive(Debug, Clone)]
pub struct FEOperators {
    pub mesh: Mesh,
    /// Stiffness matrix.
    pub stiffness: SparseSymMatrix,
    /// Consistent mass matrix.
    pub mass: SparseSymMatrix,
    /// Lumped mass, `omega_i / 3`.
    pub lumped: Vec<f64>,
    /// Area of the support of each interior basis function.
    pub omega: Vec<f64>,
}

impl FEOperators {
    pub fn dim(&self) -> usize {
        self.lumped.len()
    }

    /// `<a, b>_M = a^T M b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.mass.mul_vec(b))
    }

    pub fn zeros(&self) -> NodeField {
        NodeField::zeros(self.dim())
    }
}

/// P1 element matrices on a triangle: `(stiffness, mass)`.
pub(crate) fn element_matrices(p: [[f64; 2]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area =
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for a in 0..3 {
        let (n1, n2) = ((a + 1) % 3, (a + 2) % 3);
        b[a] = p[n1][1] - p[n2][1];
        c[a] = p[n2][0] - p[n1][0];
    }
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for e in 0..3 {
            k[a][e] = (b[a] * b[e] + c[a] * c[e]) / (4.0 * area);
            m[a][e] = area / 12.0 * if a == e { 2.0 } else { 1.0 };
        }
    }
    (k, m)
}

pub fn assemble_operators(mesh: &Mesh) -> FEOperators {
    let d = mesh.dim();
    let mut kt = Vec::with_capacity(mesh.triangles.len() * 6);
    let mut mt = Vec::with_capacity(mesh.triangles.len() * 6);
    let mut omega = vec![0.0; d];

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (ke, me) = element_matrices(tri.map(|v| mesh.nodes[v]));
        let area = mesh.triangle_area(t);
        let dofs = tri.map(|v| mesh.interior_index[v]);
        for a in 0..3 {
            let Some(ia) = dofs[a] else { continue };
            omega[ia] += area;
            for e in 0..3 {
                let Some(ie) = dofs[e] else { continue };
                if ia <= ie {
                    kt.push((ia, ie, ke[a][e]));
                    mt.push((ia, ie, me[a][e]));
                }
            }
        }
    }

    FEOperators {
        mesh: mesh.clone(),
        stiffness: SparseSymMatrix::from_upper_triplets(d, kt),
        mass: SparseSymMatrix::from_upper_triplets(d, mt),
        lumped: omega.iter().map(|w| w / 3.0).collect(),
        omega,
    }
}

/// Diagonal of `K_y = (1/3) diag(omega_i 1{y_i > 0})`.
pub fn indicator_matrix(ops: &FEOperators, y: &[f64]) -> Result<Vec<f64>> {
    check_dim(ops.dim(), y.len())?;
    Ok(indicator_from_active(ops, &active_set(y)))
}

/// Strictly positive entries of `y`.
pub fn active_set(y: &[f64]) -> Vec<bool> {
    y.iter().map(|&v| v > 0.0).collect()
}

pub(crate) fn indicator_from_active(ops: &FEOperators, active: &[bool]) -> Vec<f64> {
    ops.lumped
        .iter()
        .zip(active)
        .map(|(&d, &a)| if a { d } else { 0.0 })
        .collect()
}

/// Discrete L2 norm `sqrt(v^T M v)`.
pub fn l2_norm(ops: &FEOperators, v: &[f64]) -> Result<f64> {
    check_dim(ops.dim(), v.len())?;
    Ok(ops.inner(v, v).max(0.0).sqrt())
}

/// Nodal interpolant of `f` on the interior vertices.
pub fn interpolate<F>(f: F, mesh: &Mesh) -> Result<NodeField>
where
    F: Fn(f64, f64) -> f64,
{
    let mut values = Vec::with_capacity(mesh.dim());
    for k in 0..mesh.dim() {
        let [x1, x2] = mesh.dof_coords(k);
        let v = f(x1, x2);
        if !v.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite value {v} at node ({x1}, {x2})"
            )));
        }
        values.push(v);
    }
    Ok(values.into())
}

/// Dumps `A`, `M` and `D` as MatrixMarket files into `dir`.
pub fn dump_operators(ops: &FEOperators, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let open = |name: &str| -> std::io::Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
    };
    ops.stiffness.write_matrix_market(open("stiffness.mtx")?)?;
    ops.mass.write_matrix_market(open("mass.mtx")?)?;
    let diag = SparseSymMatrix::from_upper_triplets(
        ops.dim(),
        ops.lumped.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
    );
    diag.write_matrix_market(open("lumped.mtx")?)?;
    Ok(())
}
