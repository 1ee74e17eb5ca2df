//! P1 finite elements: functions, sparse operators, assembly and norms.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ceil, powf, sqrt};
use crate::mesh::{Mesh, PointLocator};
use crate::quadrature::TriangleRule;

/// Continuous piecewise linear function given by its nodal values.
#[derive(Debug, Clone)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: Arc<Mesh>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch { expected: mesh.num_vertices(), found: coefficients.len() });
        }
        Ok(FeFunction { mesh, coefficients })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_vertices();
        FeFunction { mesh, coefficients: vec![0.0; n] }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Value inside triangle `t` at barycentric coordinates `lam`.
    pub fn eval_in(&self, t: usize, lam: [f64; 3]) -> f64 {
        let tri = self.mesh.triangles()[t];
        lam[0] * self.coefficients[tri[0]] + lam[1] * self.coefficients[tri[1]] + lam[2] * self.coefficients[tri[2]]
    }

    /// Point values; `None` for points outside the mesh.
    pub fn evaluate_many(&self, points: &[[f64; 2]]) -> Vec<Option<f64>> {
        let loc = PointLocator::new(&self.mesh);
        points.iter().map(|&x| loc.locate(x).map(|(t, lam)| self.eval_in(t, lam))).collect()
    }

    pub fn evaluate(&self, x: [f64; 2]) -> Option<f64> {
        self.evaluate_many(&[x])[0]
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        norm(self, kind)
    }

    /// `self − other` on a shared mesh.
    pub fn sub(&self, other: &FeFunction) -> Result<FeFunction> {
        if !self.mesh.same_as(&other.mesh) {
            return Err(Error::InvalidArgument("functions live on different meshes".into()));
        }
        let c = self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a - b).collect();
        Ok(FeFunction { mesh: Arc::clone(&self.mesh), coefficients: c })
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || cols.len() != values.len() || row_ptr[nrows] != cols.len() {
            return Err(Error::InvalidArgument("inconsistent CSR arrays".into()));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("row offsets must be non-decreasing".into()));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= ncols) {
            return Err(Error::IndexOutOfRange { index: c, len: ncols });
        }
        Ok(SparseOperator { nrows, ncols, row_ptr, cols, values })
    }

    /// Builds from (row, col, value) triplets; duplicates are summed in input
    /// order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        for &(r, c, _) in triplets {
            if r >= nrows {
                return Err(Error::IndexOutOfRange { index: r, len: nrows });
            }
            if c >= ncols {
                return Err(Error::IndexOutOfRange { index: c, len: ncols });
            }
        }
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1, k));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::from_csr(nrows, ncols, row_ptr, cols, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseOperator { nrows: n, ncols: n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        crate::math::dot(x, &self.mul_vec(x))
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            count[c + 1] += 1;
        }
        for c in 0..self.ncols {
            count[c + 1] += count[c];
        }
        let mut fill = count.clone();
        let mut cols = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.cols[k];
                cols[fill[c]] = i;
                values[fill[c]] = self.values[k];
                fill[c] += 1;
            }
        }
        SparseOperator { nrows: self.ncols, ncols: self.nrows, row_ptr: count, cols, values }
    }

    /// Largest `|A − Aᵀ|` entry divided by the largest `|A|` entry.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Submatrix on the given (ascending) row and column index sets.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> SparseOperator {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut out_cols = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            for (c, v) in self.row(r) {
                let m = col_map[c];
                if m != usize::MAX {
                    out_cols.push(m);
                    values.push(v);
                }
            }
            row_ptr.push(out_cols.len());
        }
        SparseOperator { nrows: rows.len(), ncols: cols.len(), row_ptr, cols: out_cols, values }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }
}

fn pattern_operator(mesh: &Mesh, values: Vec<f64>) -> SparseOperator {
    let p = mesh.pattern();
    let n = mesh.num_vertices();
    SparseOperator { nrows: n, ncols: n, row_ptr: p.row_ptr.clone(), cols: p.cols.clone(), values }
}

/// Computes one value per triangle, in parallel when the `parallel` feature
/// is enabled. The result is independent of the schedule.
fn per_triangle<T, F>(mesh: &Mesh, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..mesh.num_triangles()).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..mesh.num_triangles()).map(f).collect()
    }
}

/// Scatters element matrices into the mesh pattern in triangle order.
fn scatter_matrix(mesh: &Mesh, elements: &[[f64; 9]]) -> SparseOperator {
    let p = mesh.pattern();
    let mut values = vec![0.0; p.cols.len()];
    for (slots, el) in p.tri_slots.iter().zip(elements) {
        for k in 0..9 {
            values[slots[k]] += el[k];
        }
    }
    pattern_operator(mesh, values)
}

fn scatter_vector(mesh: &Mesh, elements: &[[f64; 3]]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for (tri, el) in mesh.triangles().iter().zip(elements) {
        for k in 0..3 {
            out[tri[k]] += el[k];
        }
    }
    out
}

/// Area and gradients of the three barycentric coordinates.
pub(crate) fn element_geometry(mesh: &Mesh, t: usize) -> (f64, [[f64; 2]; 3]) {
    let [a, b, c] = mesh.triangles()[t].map(|i| mesh.vertices()[i]);
    let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let g = [
        [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
        [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
        [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
    ];
    (0.5 * two_area, g)
}

pub(crate) fn physical_point(mesh: &Mesh, t: usize, lam: [f64; 3]) -> [f64; 2] {
    let [a, b, c] = mesh.triangles()[t].map(|i| mesh.vertices()[i]);
    [lam[0] * a[0] + lam[1] * b[0] + lam[2] * c[0], lam[0] * a[1] + lam[1] * b[1] + lam[2] * c[1]]
}

/// `∫ ∇ϕ_i · ∇ϕ_j`, exact.
pub fn assemble_stiffness(mesh: &Mesh) -> SparseOperator {
    let el = per_triangle(mesh, |t| {
        let (area, g) = element_geometry(mesh, t);
        let mut k = [0.0; 9];
        for a in 0..3 {
            for b in 0..3 {
                k[3 * a + b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
        k
    });
    scatter_matrix(mesh, &el)
}

/// `∫ ϕ_i ϕ_j`, exact: per triangle `(A/12)·[[2,1,1],[1,2,1],[1,1,2]]`.
pub fn assemble_mass(mesh: &Mesh) -> SparseOperator {
    let el = per_triangle(mesh, |t| {
        let area = mesh.triangle_area(t);
        let mut m = [area / 12.0; 9];
        m[0] = area / 6.0;
        m[4] = area / 6.0;
        m[8] = area / 6.0;
        m
    });
    scatter_matrix(mesh, &el)
}

/// `∫ w(a(x), b(x)) ϕ_i ϕ_j` for two nodal fields `a`, `b`, by quadrature.
pub fn assemble_weighted_mass<F>(mesh: &Mesh, a: &[f64], b: &[f64], weight: F, order: u32) -> Result<SparseOperator>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let rule = TriangleRule::exact_for(order)?;
    let el = per_triangle(mesh, |t| {
        let tri = mesh.triangles()[t];
        let area = mesh.triangle_area(t);
        let mut m = [0.0; 9];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let av = lam[0] * a[tri[0]] + lam[1] * a[tri[1]] + lam[2] * a[tri[2]];
            let bv = lam[0] * b[tri[0]] + lam[1] * b[tri[1]] + lam[2] * b[tri[2]];
            let s = area * w * weight(av, bv);
            for i in 0..3 {
                for j in 0..3 {
                    m[3 * i + j] += s * lam[i] * lam[j];
                }
            }
        }
        m
    });
    Ok(scatter_matrix(mesh, &el))
}

/// `∫ f(y(x)) ϕ_i(x) dx` with a symmetric rule exact for degree
/// `quadrature_order`.
pub fn assemble_semilinear<F>(y: &FeFunction, f: F, quadrature_order: u32) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    if quadrature_order < 2 {
        return Err(Error::UnsupportedQuadrature(quadrature_order));
    }
    Ok(assemble_semilinear_nodal(y.mesh(), y.coefficients(), f, &TriangleRule::exact_for(quadrature_order)?))
}

pub(crate) fn assemble_semilinear_nodal<F>(mesh: &Mesh, y: &[f64], f: F, rule: &TriangleRule) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let el = per_triangle(mesh, |t| {
        let tri = mesh.triangles()[t];
        let area = mesh.triangle_area(t);
        let mut v = [0.0; 3];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let yv = lam[0] * y[tri[0]] + lam[1] * y[tri[1]] + lam[2] * y[tri[2]];
            let s = area * w * f(yv);
            for i in 0..3 {
                v[i] += s * lam[i];
            }
        }
        v
    });
    scatter_vector(mesh, &el)
}

/// `∫ g(x) ϕ_i(x) dx` for a field given pointwise.
pub fn assemble_load<G>(mesh: &Mesh, g: G, order: u32) -> Result<Vec<f64>>
where
    G: Fn([f64; 2]) -> f64 + Sync + Send,
{
    let rule = TriangleRule::exact_for(order)?;
    let el = per_triangle(mesh, |t| {
        let area = mesh.triangle_area(t);
        let mut v = [0.0; 3];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let s = area * w * g(physical_point(mesh, t, *lam));
            for i in 0..3 {
                v[i] += s * lam[i];
            }
        }
        v
    });
    Ok(scatter_vector(mesh, &el))
}

/// Vector with `weights[k]` added at `nodes[k]`: the P1 load of `Σ μ_k δ_{x_k}`.
pub fn assemble_point_loads(mesh: &Mesh, nodes: &[usize], weights: &[f64]) -> Result<Vec<f64>> {
    if nodes.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: nodes.len(), found: weights.len() });
    }
    let n = mesh.num_vertices();
    let mut out = vec![0.0; n];
    for (&j, &w) in nodes.iter().zip(weights) {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        out[j] += w;
    }
    Ok(out)
}

/// Lagrange interpolant `I_h g`.
pub fn interpolate<G>(mesh: &Arc<Mesh>, g: G) -> FeFunction
where
    G: Fn([f64; 2]) -> f64,
{
    FeFunction { mesh: Arc::clone(mesh), coefficients: mesh.vertices().iter().map(|&x| g(x)).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    H1,
    Linf,
    Lq(f64),
}

/// Quadrature degree used for `‖·‖_{L^q}`: exact for even integer `q ≤ 8`.
pub fn lq_quadrature_degree(q: f64) -> u32 {
    let even_integer = q == ceil(q) && (q as u64).is_multiple_of(2);
    let d = if even_integer { q as u32 } else { ceil(q) as u32 + 2 };
    d.clamp(2, 8)
}

pub fn norm(y: &FeFunction, kind: NormKind) -> Result<f64> {
    let c = y.coefficients();
    let mesh = y.mesh();
    Ok(match kind {
        NormKind::L2 => sqrt(assemble_mass(mesh).quad_form(c).max(0.0)),
        NormKind::H1 => {
            let l2 = assemble_mass(mesh).quad_form(c);
            let semi = assemble_stiffness(mesh).quad_form(c);
            sqrt((l2 + semi).max(0.0))
        }
        NormKind::Linf => c.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormKind::Lq(q) => {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(Error::InvalidArgument(alloc::format!("L^q norm needs finite q >= 1, got {q}")));
            }
            let rule = TriangleRule::exact_for(lq_quadrature_degree(q))?;
            let parts = per_triangle(mesh, |t| {
                let area = mesh.triangle_area(t);
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(lam, w)| area * w * powf(y.eval_in(t, *lam).abs(), q))
                    .sum::<f64>()
            });
            powf(parts.iter().sum::<f64>(), 1.0 / q)
        }
    })
}

/// `sqrt(Σ r_i² / m_i)` over `rows`, with `m` the lumped mass. A discrete
/// stand-in for the dual norm of a Galerkin residual.
pub(crate) fn dual_norm(residual: &[f64], lumped: &[f64], rows: impl Iterator<Item = usize>) -> f64 {
    sqrt(rows.map(|i| residual[i] * residual[i] / lumped[i]).sum())
}
