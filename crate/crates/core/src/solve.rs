//! Linear solvers: conjugate gradients for SPD systems, sparse LU and LDLᵀ
//! (through faer) for the indefinite Newton systems.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Error, Result};
use crate::fem::SparseOperator;
use crate::math::{axpy, dot, norm2};

/// Relative residual a direct solve must reach.
pub const DIRECT_TOL: f64 = 1e-10;
const MAX_REFINEMENT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖`, recomputed from the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
}

/// Conjugate gradients from a zero initial guess, no preconditioner.
pub fn solve_spd(a: &SparseOperator, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, LinearSolveReport)> {
    solve_spd_with(a, b, None, tol, max_iter, Preconditioner::None)
}

pub fn solve_spd_with(
    a: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    pre: Preconditioner,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], LinearSolveReport { iterations: 0, final_residual: 0.0, converged: true }));
    }
    let inv_diag: Vec<f64> = match pre {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Jacobi => a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect(),
    };

    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => return Err(Error::DimensionMismatch { expected: n, found: x0.len() }),
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.mul_vec(&x);
        axpy(-1.0, &ax, &mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter && norm2(&r) > tol * bnorm {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
    let final_residual = relative_residual(a, &x, b);
    Ok((x, LinearSolveReport { iterations, final_residual, converged: final_residual <= tol }))
}

/// `‖b − Ax‖ / ‖b‖` (or `‖Ax‖` when `b = 0`).
pub fn relative_residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> f64 {
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bnorm
    }
}

fn to_faer(a: &SparseOperator) -> SparseColMat<usize, f64> {
    // CSR of A is CSC of Aᵀ; transposing yields CSC of A with sorted rows
    let t = a.transpose();
    let symbolic =
        SymbolicSparseColMat::new_checked(a.nrows(), a.ncols(), t.row_ptr().to_vec(), None, t.col_indices().to_vec());
    SparseColMat::new(symbolic, t.values().to_vec())
}

fn check_square(a: &SparseOperator, b: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    Ok(())
}

/// Solves with `solve` then refines until the relative residual reaches
/// [`DIRECT_TOL`], at least once and at most three times.
fn refine_solution<F>(a: &SparseOperator, b: &[f64], mut solve: F) -> Result<Vec<f64>>
where
    F: FnMut(&mut Mat<f64>),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    solve(&mut rhs);
    let mut x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    for step in 0..MAX_REFINEMENT {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("factorization produced non-finite values".into()));
        }
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if step > 0 && norm2(&r) / bnorm <= DIRECT_TOL {
            break;
        }
        let mut d = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        solve(&mut d);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += d[(i, 0)];
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix("factorization produced non-finite values".into()));
    }
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let res = norm2(&r) / bnorm;
    if res > DIRECT_TOL {
        return Err(Error::SingularMatrix(format!(
            "relative residual {res:.3e} after refinement exceeds {DIRECT_TOL:.0e}"
        )));
    }
    Ok(x)
}

/// Direct sparse LU with iterative refinement.
pub fn solve_unsymmetric(a: &SparseOperator, b: &[f64]) -> Result<Vec<f64>> {
    LuSolver::new(a)?.solve(a, b)
}

/// Sparse LU whose symbolic analysis is reused for matrices with the same
/// pattern.
pub struct LuSolver {
    symbolic: SymbolicLu<usize>,
}

impl LuSolver {
    pub fn new(pattern: &SparseOperator) -> Result<Self> {
        if pattern.nrows() != pattern.ncols() {
            return Err(Error::DimensionMismatch { expected: pattern.nrows(), found: pattern.ncols() });
        }
        let m = to_faer(pattern);
        let symbolic =
            SymbolicLu::try_new(m.symbolic()).map_err(|e| Error::LinearSolve(format!("symbolic LU failed: {e:?}")))?;
        Ok(LuSolver { symbolic })
    }

    pub fn solve(&self, a: &SparseOperator, b: &[f64]) -> Result<Vec<f64>> {
        check_square(a, b)?;
        let m = to_faer(a);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), m.as_ref())
            .map_err(|e| Error::SingularMatrix(format!("LU factorization failed: {e:?}")))?;
        refine_solution(a, b, |rhs| lu.solve_in_place_with_conj(Conj::No, rhs.as_mut()))
    }
}

/// Sparse LDLᵀ without pivoting, AMD ordering. Meant for symmetric
/// quasi-definite matrices, where every symmetric permutation has pivots.
pub struct LdltSolver {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    mem: MemBuffer,
}

impl LdltSolver {
    pub fn new(pattern: &SparseOperator) -> Result<Self> {
        if pattern.nrows() != pattern.ncols() {
            return Err(Error::DimensionMismatch { expected: pattern.nrows(), found: pattern.ncols() });
        }
        let m = to_faer(pattern);
        let symbolic =
            factorize_symbolic_cholesky(m.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default())
                .map_err(|e| Error::LinearSolve(format!("symbolic LDLT failed: {e:?}")))?;
        let req = StackReq::or(
            symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
            symbolic.solve_in_place_scratch::<f64>(1, Par::Seq),
        );
        let values = vec![0.0; symbolic.len_val()];
        Ok(LdltSolver { symbolic, values, mem: MemBuffer::new(req) })
    }

    pub fn solve(&mut self, a: &SparseOperator, b: &[f64]) -> Result<Vec<f64>> {
        check_square(a, b)?;
        let m = to_faer(a);
        let ldlt = self
            .symbolic
            .factorize_numeric_ldlt(
                &mut self.values,
                m.as_ref(),
                Side::Lower,
                LdltRegularization::default(),
                Par::Seq,
                MemStack::new(&mut self.mem),
                Default::default(),
            )
            .map_err(|e| Error::SingularMatrix(format!("LDLT factorization failed: {e:?}")))?;
        let mem = &mut self.mem;
        refine_solution(a, b, |rhs| ldlt.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(mem)))
    }
}
