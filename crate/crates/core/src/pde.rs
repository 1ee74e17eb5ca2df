//! Discrete control-to-state map (Newton on the semilinear state equation),
//! the adjoint solve and the control projection.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_load, assemble_mass, assemble_semilinear_nodal, assemble_stiffness, assemble_weighted_mass, dual_norm,
    FeFunction, SparseOperator,
};
use crate::math::axpy;
use crate::mesh::Mesh;
use crate::problem::{Field, ProblemSpec};
use crate::quadrature::TriangleRule;
use crate::solve::{solve_spd_with, Preconditioner};

pub const MAX_NEWTON: usize = 50;
pub const MAX_HALVINGS: usize = 30;
const CG_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual dual norm before each step and after the last one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

/// Right-hand side of the state equation.
#[derive(Debug, Clone)]
pub enum Source {
    /// P1 nodal values.
    Nodal(Vec<f64>),
    /// Pointwise field integrated by quadrature.
    Field(Field),
}

/// Variationally discrete control `clamp(−p/α)`, stored nodally.
#[derive(Debug, Clone)]
pub struct Control {
    pub nodal: FeFunction,
    /// Per triangle: the unclamped `−p/α` leaves `[u_a, u_b]` somewhere in it,
    /// so the nodal interpolant differs from the exact projection there.
    pub clamped: Vec<bool>,
}

impl Control {
    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }
}

/// Nodal clamp `min(max(u_a, −p/α), u_b)` with per-element clamp flags.
pub fn project_control(p: &FeFunction, spec: &ProblemSpec) -> Control {
    let raw: Vec<f64> = p.coefficients().iter().map(|&v| -v / spec.alpha).collect();
    let clamped_node: Vec<bool> = raw.iter().map(|&v| v < spec.u_a || v > spec.u_b).collect();
    let nodal: Vec<f64> = raw.iter().map(|&v| spec.clamp_control(v)).collect();
    let clamped = p.mesh().triangles().iter().map(|t| t.iter().any(|&v| clamped_node[v])).collect();
    Control { nodal: FeFunction::new(Arc::clone(p.mesh()), nodal).expect("same mesh"), clamped }
}

/// Operators that depend only on the mesh.
#[derive(Debug, Clone)]
pub(crate) struct MeshOperators {
    pub stiffness: SparseOperator,
    pub mass: SparseOperator,
    pub lumped: Vec<f64>,
    pub interior: Vec<usize>,
}

impl MeshOperators {
    pub fn new(mesh: &Mesh) -> Self {
        let mass = assemble_mass(mesh);
        let lumped = mass.row_sums();
        MeshOperators { stiffness: assemble_stiffness(mesh), mass, lumped, interior: mesh.interior_vertices() }
    }

    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        dual_norm(r, &self.lumped, self.interior.iter().copied())
    }
}

/// Boundary rows and columns become identity rows so the full-size system
/// stays symmetric with homogeneous Dirichlet values.
pub(crate) fn eliminate_boundary(a: &mut SparseOperator, mesh: &Mesh) {
    let mask = mesh.boundary_mask().to_vec();
    let row_ptr = a.row_ptr().to_vec();
    let cols = a.col_indices().to_vec();
    let values = a.values_mut();
    for i in 0..mask.len() {
        for k in row_ptr[i]..row_ptr[i + 1] {
            let j = cols[k];
            if mask[i] || mask[j] {
                values[k] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
}

pub(crate) fn source_load(spec: &ProblemSpec, source: &Source, mesh: &Mesh, ops: &MeshOperators) -> Result<Vec<f64>> {
    match source {
        Source::Nodal(u) => {
            if u.len() != mesh.num_vertices() {
                return Err(Error::DimensionMismatch { expected: mesh.num_vertices(), found: u.len() });
            }
            Ok(ops.mass.mul_vec(u))
        }
        Source::Field(f) => assemble_load(mesh, |x| f.eval(x), spec.quadrature_order.max(6)),
    }
}

/// `K y + Φ(y) − b`, zero on boundary rows.
pub(crate) fn state_residual(
    spec: &ProblemSpec,
    mesh: &Mesh,
    ops: &MeshOperators,
    rule: &TriangleRule,
    y: &[f64],
    load: &[f64],
) -> Vec<f64> {
    let phi = &spec.nonlinearity;
    let mut r = ops.stiffness.mul_vec(y);
    let nl = assemble_semilinear_nodal(mesh, y, |s| phi.phi(s), rule);
    for i in 0..r.len() {
        r[i] += nl[i] - load[i];
    }
    for (ri, &b) in r.iter_mut().zip(mesh.boundary_mask()) {
        if b {
            *ri = 0.0;
        }
    }
    r
}

/// `K + ∫φ′(y)ϕ_iϕ_j`, the linearized state operator.
pub(crate) fn linearized_operator(
    spec: &ProblemSpec,
    mesh: &Mesh,
    ops: &MeshOperators,
    y: &[f64],
) -> Result<SparseOperator> {
    let phi = &spec.nonlinearity;
    let w = assemble_weighted_mass(mesh, y, y, |s, _| phi.dphi(s), spec.quadrature_order)?;
    let mut a = ops.stiffness.clone();
    axpy(1.0, w.values(), a.values_mut());
    Ok(a)
}

/// `yₕ = Gₕ(u)` by damped Newton from the zero function. Stops once the
/// residual dual norm is below `tol · max(1, ‖load‖)`.
pub fn solve_state(spec: &ProblemSpec, u: &Source, mesh: &Arc<Mesh>, tol: f64) -> Result<(FeFunction, NewtonReport)> {
    solve_state_from(spec, u, mesh, tol, None)
}

/// As [`solve_state`], optionally from a given initial guess.
pub fn solve_state_from(
    spec: &ProblemSpec,
    u: &Source,
    mesh: &Arc<Mesh>,
    tol: f64,
    initial: Option<&[f64]>,
) -> Result<(FeFunction, NewtonReport)> {
    spec.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let ops = MeshOperators::new(mesh);
    let rule = TriangleRule::exact_for(spec.quadrature_order)?;
    let load = source_load(spec, u, mesh, &ops)?;
    let n = mesh.num_vertices();
    let mut y = match initial {
        Some(y0) if y0.len() == n => y0.to_vec(),
        Some(y0) => return Err(Error::DimensionMismatch { expected: n, found: y0.len() }),
        None => vec![0.0; n],
    };
    for (v, &b) in y.iter_mut().zip(mesh.boundary_mask()) {
        if b {
            *v = 0.0;
        }
    }
    let mut r = state_residual(spec, mesh, &ops, &rule, &y, &load);
    let mut res = ops.dual_norm(&r);
    let mut history = vec![res];
    let mut iterations = 0;
    // relative to the load once it exceeds unit size
    let tol = tol * ops.dual_norm(&load).max(1.0);
    while res > tol {
        if iterations == MAX_NEWTON {
            return Err(Error::NewtonDivergence { iterations, residual: res });
        }
        let mut jac = linearized_operator(spec, mesh, &ops, &y)?;
        eliminate_boundary(&mut jac, mesh);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, rep) = solve_spd_with(&jac, &rhs, None, CG_TOL, 20 * n + 100, Preconditioner::Jacobi)?;
        if !rep.converged && rep.final_residual > 1e-8 {
            return Err(Error::LinearSolve(format!(
                "CG stalled in Newton step {iterations} (relative residual {:.3e})",
                rep.final_residual
            )));
        }
        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let mut trial = y.clone();
            axpy(step, &delta, &mut trial);
            let r_trial = state_residual(spec, mesh, &ops, &rule, &trial, &load);
            let res_trial = ops.dual_norm(&r_trial);
            if res_trial < res || halvings == MAX_HALVINGS {
                y = trial;
                r = r_trial;
                res = res_trial;
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
        iterations += 1;
        history.push(res);
        if !res.is_finite() {
            return Err(Error::NewtonDivergence { iterations, residual: res });
        }
        if halvings == MAX_HALVINGS && res > tol {
            // no decrease along the Newton direction: the residual is at its floor
            let prev = history[history.len() - 2];
            if res >= prev {
                return Err(Error::NewtonDivergence { iterations, residual: res });
            }
        }
    }
    Ok((FeFunction::new(Arc::clone(mesh), y)?, NewtonReport { iterations, residual_history: history, converged: true }))
}

/// Discrete adjoint: `(K + ∫φ′(y)ϕ_iϕ_j) p = M(y − Iₕy₀) + Σ μ_j e_j`, `p = 0`
/// on the boundary.
pub fn solve_adjoint(
    spec: &ProblemSpec,
    y: &FeFunction,
    mu_nodes: &[usize],
    mu_weights: &[f64],
    mesh: &Arc<Mesh>,
) -> Result<FeFunction> {
    if !y.mesh().same_as(mesh) {
        return Err(Error::InvalidArgument("state does not live on the given mesh".into()));
    }
    let ops = MeshOperators::new(mesh);
    let mut a = linearized_operator(spec, mesh, &ops, y.coefficients())?;
    eliminate_boundary(&mut a, mesh);
    let diff: Vec<f64> = y.coefficients().iter().zip(mesh.vertices()).map(|(&yi, &x)| yi - spec.y0.eval(x)).collect();
    let mut rhs = ops.mass.mul_vec(&diff);
    let loads = crate::fem::assemble_point_loads(mesh, mu_nodes, mu_weights)?;
    axpy(1.0, &loads, &mut rhs);
    for (v, &b) in rhs.iter_mut().zip(mesh.boundary_mask()) {
        if b {
            *v = 0.0;
        }
    }
    let n = mesh.num_vertices();
    let (p, rep) = solve_spd_with(&a, &rhs, None, CG_TOL, 20 * n + 100, Preconditioner::Jacobi)?;
    if !rep.converged && rep.final_residual > 1e-10 {
        return Err(Error::LinearSolve(format!(
            "adjoint CG did not converge (relative residual {:.3e})",
            rep.final_residual
        )));
    }
    FeFunction::new(Arc::clone(mesh), p)
}
