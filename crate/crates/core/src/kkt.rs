//! Discrete first-order system solved by a primal-dual active-set method
//! with semismooth Newton inner iterations.
//!
//! Unknowns are the state `y` and adjoint `p` (full vertex vectors, zero on
//! the boundary). The control is eliminated through `u = clamp(−p/α)`. On the
//! current active set the state is pinned to its bound and the adjoint rows
//! there define the multiplier `μ_j`, with `μ = μᵇ − μᵃ`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{assemble_semilinear_nodal, assemble_weighted_mass, FeFunction, SparseOperator};
use crate::math::{axpy, dot};
use crate::mesh::{constraint_nodes, Mesh, PointLocator};
use crate::pde::{project_control, solve_adjoint, solve_state_from, Control, MeshOperators, Source};
use crate::problem::ProblemSpec;
use crate::quadrature::TriangleRule;
use crate::solve::{LdltSolver, LuSolver};

/// Feasibility slack on the constraint nodes.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdasConfig {
    /// Active-set detection weight; `None` means `1/α`.
    pub c_pdas: Option<f64>,
    pub tol_kkt: f64,
    pub max_outer: usize,
    pub max_newton_inner: usize,
}

impl Default for PdasConfig {
    fn default() -> Self {
        PdasConfig { c_pdas: None, tol_kkt: 1e-9, max_outer: 100, max_newton_inner: 30 }
    }
}

impl PdasConfig {
    pub fn validate(&self) -> Result<()> {
        let c_ok = self.c_pdas.is_none_or(|c| c > 0.0 && c.is_finite());
        if !c_ok || !(self.tol_kkt > 0.0) || self.max_outer == 0 || self.max_newton_inner == 0 {
            return Err(Error::InvalidArgument(format!("PDAS parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn weight(&self, alpha: f64) -> f64 {
        self.c_pdas.unwrap_or(1.0 / alpha)
    }
}

#[derive(Debug, Clone)]
pub struct KktSolution {
    pub u: Control,
    pub y: FeFunction,
    pub p: FeFunction,
    /// Nonzero nodal multipliers, `μ_j = μᵇ_j − μᵃ_j`.
    pub mu: BTreeMap<usize, f64>,
    pub active_lower: Vec<usize>,
    pub active_upper: Vec<usize>,
    pub constraint_nodes: Vec<usize>,
    pub kkt_residual: f64,
    /// Outer active-set iterations.
    pub iterations: usize,
    pub newton_iterations: usize,
}

impl KktSolution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.y.mesh()
    }

    /// Lower-bound multiplier `μᵃ_j ≥ 0` at node `j`.
    pub fn lower_multiplier(&self, j: usize) -> f64 {
        self.mu.get(&j).map_or(0.0, |&m| (-m).max(0.0))
    }

    pub fn upper_multiplier(&self, j: usize) -> f64 {
        self.mu.get(&j).map_or(0.0, |&m| m.max(0.0))
    }
}

/// Everything about the discrete problem that is fixed during a solve.
struct Discretization<'a> {
    spec: &'a ProblemSpec,
    mesh: &'a Arc<Mesh>,
    ops: MeshOperators,
    rule: TriangleRule,
    nodes: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    y0: Vec<f64>,
}

impl<'a> Discretization<'a> {
    fn new(spec: &'a ProblemSpec, mesh: &'a Arc<Mesh>) -> Result<Self> {
        let nodes = constraint_nodes(mesh, &spec.region)?;
        spec.validate_on(mesh, &nodes)?;
        let n = mesh.num_vertices();
        let mut lower = vec![f64::NEG_INFINITY; n];
        let mut upper = vec![f64::INFINITY; n];
        for &j in &nodes {
            let x = mesh.vertices()[j];
            lower[j] = spec.state_bounds.lower.eval(x);
            upper[j] = spec.state_bounds.upper.eval(x);
        }
        Ok(Discretization {
            spec,
            mesh,
            ops: MeshOperators::new(mesh),
            rule: TriangleRule::exact_for(spec.quadrature_order)?,
            nodes,
            y0: mesh.vertices().iter().map(|&x| spec.y0.eval(x)).collect(),
            lower,
            upper,
        })
    }

    fn n(&self) -> usize {
        self.mesh.num_vertices()
    }

    fn is_boundary(&self, v: usize) -> bool {
        self.mesh.is_boundary(v)
    }

    /// Nodal `clamp(−p/α)` and the indicator of unclamped nodes.
    fn control(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = self.spec.alpha;
        let mut u = Vec::with_capacity(p.len());
        let mut d = Vec::with_capacity(p.len());
        for &pi in p {
            let raw = -pi / a;
            let c = self.spec.clamp_control(raw);
            u.push(c);
            d.push(if raw > self.spec.u_a && raw < self.spec.u_b { 1.0 } else { 0.0 });
        }
        (u, d)
    }

    /// `K y + Φ(y) − M u(p)`, boundary rows zeroed.
    fn state_residual(&self, y: &[f64], p: &[f64]) -> Vec<f64> {
        let phi = &self.spec.nonlinearity;
        let (u, _) = self.control(p);
        let mut r = self.ops.stiffness.mul_vec(y);
        let nl = assemble_semilinear_nodal(self.mesh, y, |s| phi.phi(s), &self.rule);
        let mu = self.ops.mass.mul_vec(&u);
        for i in 0..r.len() {
            r[i] += nl[i] - mu[i];
        }
        self.zero_boundary(&mut r);
        r
    }

    /// `B(y) p − M(y − Iₕy₀)` without the multiplier term, boundary rows
    /// zeroed.
    fn adjoint_residual(&self, y: &[f64], p: &[f64]) -> Vec<f64> {
        let phi = &self.spec.nonlinearity;
        let mut r = self.ops.stiffness.mul_vec(p);
        let wp = assemble_semilinear_nodal_pair(self.mesh, y, p, &self.rule, |s, q| phi.dphi(s) * q);
        let diff: Vec<f64> = y.iter().zip(&self.y0).map(|(a, b)| a - b).collect();
        let md = self.ops.mass.mul_vec(&diff);
        for i in 0..r.len() {
            r[i] += wp[i] - md[i];
        }
        self.zero_boundary(&mut r);
        r
    }

    fn zero_boundary(&self, r: &mut [f64]) {
        for (ri, &b) in r.iter_mut().zip(self.mesh.boundary_mask()) {
            if b {
                *ri = 0.0;
            }
        }
    }

    /// Residual of the equality system for a fixed active set.
    fn equality_residual(&self, y: &[f64], p: &[f64], pinned: &[Option<f64>]) -> f64 {
        let fs = self.state_residual(y, p);
        let mut fa = self.adjoint_residual(y, p);
        let mut pin: f64 = 0.0;
        for (j, b) in pinned.iter().enumerate() {
            if let Some(b) = b {
                fa[j] = 0.0;
                pin = pin.max((y[j] - b).abs());
            }
        }
        self.ops.dual_norm(&fs).max(self.ops.dual_norm(&fa)).max(pin)
    }
}

/// `∫ g(y, p) ϕ_i` for two nodal fields.
fn assemble_semilinear_nodal_pair<G>(mesh: &Mesh, y: &[f64], p: &[f64], rule: &TriangleRule, g: G) -> Vec<f64>
where
    G: Fn(f64, f64) -> f64 + Sync + Send,
{
    let mut out = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let yv = lam[0] * y[tri[0]] + lam[1] * y[tri[1]] + lam[2] * y[tri[2]];
            let pv = lam[0] * p[tri[0]] + lam[1] * p[tri[1]] + lam[2] * p[tri[2]];
            let s = area * w * g(yv, pv);
            for k in 0..3 {
                out[tri[k]] += s * lam[k];
            }
        }
    }
    out
}

/// Newton matrix in `(δy, δq)` with `q = −p`, on a pattern that never changes:
///
/// ```text
/// [ M − W₂   B      ] [δy]   [ F_adj   ]
/// [ B       −M D/α  ] [δq] = [ −F_state ]
/// ```
///
/// Symmetric whenever no control bound is attained (`D = I`).
struct NewtonSystem {
    matrix: SparseOperator,
    ldlt: Option<LdltSolver>,
    lu: Option<LuSolver>,
}

impl NewtonSystem {
    fn new(mesh: &Mesh) -> Self {
        let pat = mesh.pattern();
        let n = mesh.num_vertices();
        let nnz = pat.cols.len();
        let mut row_ptr = Vec::with_capacity(2 * n + 1);
        let mut cols = Vec::with_capacity(4 * nnz);
        row_ptr.push(0);
        for _block in 0..2 {
            for i in 0..n {
                let r = pat.row_ptr[i]..pat.row_ptr[i + 1];
                cols.extend(pat.cols[r.clone()].iter().copied());
                cols.extend(pat.cols[r].iter().map(|&j| j + n));
                row_ptr.push(cols.len());
            }
        }
        let values = vec![0.0; cols.len()];
        let matrix = SparseOperator::from_csr(2 * n, 2 * n, row_ptr, cols, values).expect("valid block pattern");
        NewtonSystem { matrix, ldlt: None, lu: None }
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(
        &mut self,
        disc: &Discretization<'_>,
        y: &[f64],
        p: &[f64],
        d: &[f64],
        pinned: &[Option<f64>],
        f_adj: &[f64],
        f_state: &[f64],
    ) -> Result<Vec<f64>> {
        let mesh = disc.mesh;
        let n = mesh.num_vertices();
        let pat = mesh.pattern();
        let phi = &disc.spec.nonlinearity;
        let order = disc.spec.quadrature_order;
        let w1 = assemble_weighted_mass(mesh, y, y, |s, _| phi.dphi(s), order)?;
        let w2 = assemble_weighted_mass(mesh, y, p, |s, q| phi.d2phi(s) * q, order)?;
        let (k, m) = (disc.ops.stiffness.values(), disc.ops.mass.values());
        let (w1, w2) = (w1.values(), w2.values());
        let alpha = disc.spec.alpha;
        let nnz = pat.cols.len();

        let mut rhs = Vec::with_capacity(2 * n);
        rhs.extend_from_slice(f_adj);
        rhs.extend(f_state.iter().map(|v| -v));

        // prescribed increments: pinned states and homogeneous boundary values
        let mut fixed: Vec<Option<f64>> = vec![None; 2 * n];
        for v in 0..n {
            if mesh.is_boundary(v) {
                fixed[v] = Some(0.0);
                fixed[n + v] = Some(0.0);
            } else if let Some(b) = pinned[v] {
                fixed[v] = Some(b - y[v]);
            }
        }

        let values = self.matrix.values_mut();
        for i in 0..n {
            let start = pat.row_ptr[i];
            let len = pat.row_ptr[i + 1] - start;
            let top = 2 * start;
            let bottom = 2 * nnz + 2 * start;
            for off in 0..len {
                let kk = start + off;
                let j = pat.cols[kk];
                let b = k[kk] + w1[kk];
                values[top + off] = m[kk] - w2[kk];
                values[top + len + off] = b;
                values[bottom + off] = b;
                values[bottom + len + off] = -m[kk] * d[j] / alpha;
            }
        }
        let row_ptr = self.matrix.row_ptr().to_vec();
        let cols = self.matrix.col_indices().to_vec();
        let values = self.matrix.values_mut();
        for r in 0..2 * n {
            if let Some(dr) = fixed[r] {
                for kk in row_ptr[r]..row_ptr[r + 1] {
                    values[kk] = if cols[kk] == r { 1.0 } else { 0.0 };
                }
                rhs[r] = dr;
                continue;
            }
            for kk in row_ptr[r]..row_ptr[r + 1] {
                if let Some(dc) = fixed[cols[kk]] {
                    rhs[r] -= values[kk] * dc;
                    values[kk] = 0.0;
                }
            }
        }
        Ok(rhs)
    }

    fn solve(&mut self, rhs: &[f64], symmetric: bool) -> Result<Vec<f64>> {
        if symmetric {
            if self.ldlt.is_none() {
                self.ldlt = Some(LdltSolver::new(&self.matrix)?);
            }
            if let Ok(x) = self.ldlt.as_mut().unwrap().solve(&self.matrix, rhs) {
                return Ok(x);
            }
        }
        if self.lu.is_none() {
            self.lu = Some(LuSolver::new(&self.matrix)?);
        }
        self.lu.as_ref().unwrap().solve(&self.matrix, rhs).map_err(|e| match e {
            Error::SingularMatrix(msg) => Error::DegenerateActiveSet(msg),
            e => e,
        })
    }
}

fn pinned_values(disc: &Discretization<'_>, lower: &[usize], upper: &[usize]) -> Vec<Option<f64>> {
    let mut pinned = vec![None; disc.n()];
    for &j in lower {
        pinned[j] = Some(disc.lower[j]);
    }
    for &j in upper {
        pinned[j] = Some(disc.upper[j]);
    }
    pinned
}

/// Semismooth Newton for the equality system of a fixed active set.
/// Returns the number of steps taken.
#[allow(clippy::too_many_arguments)]
fn newton_inner(
    disc: &Discretization<'_>,
    system: &mut NewtonSystem,
    cfg: &PdasConfig,
    y: &mut Vec<f64>,
    p: &mut Vec<f64>,
    pinned: &[Option<f64>],
) -> Result<(usize, f64)> {
    let target = 0.1 * cfg.tol_kkt;
    let mut res = disc.equality_residual(y, p, pinned);
    let mut steps = 0;
    while steps < cfg.max_newton_inner && res > target {
        let (_, d) = disc.control(p);
        let f_state = disc.state_residual(y, p);
        let mut f_adj = disc.adjoint_residual(y, p);
        for (j, b) in pinned.iter().enumerate() {
            if b.is_some() {
                f_adj[j] = 0.0;
            }
        }
        let rhs = system.fill(disc, y, p, &d, pinned, &f_adj, &f_state)?;
        let symmetric = d.iter().all(|&v| v == 1.0);
        let x = match system.solve(&rhs, symmetric) {
            Ok(x) => x,
            Err(Error::DegenerateActiveSet(_)) if !symmetric => {
                // Pinned states with clamped controls can leave rows without
                // a free unknown; step along the unclamped Jacobian instead
                // and let the line search decide.
                let ones = vec![1.0; d.len()];
                let rhs = system.fill(disc, y, p, &ones, pinned, &f_adj, &f_state)?;
                system.solve(&rhs, true)?
            }
            Err(e) => return Err(e),
        };
        let n = disc.n();
        let (dy, dq) = x.split_at(n);

        let mut step = 1.0;
        let mut halvings = 0;
        let accepted = loop {
            let mut ty = y.clone();
            let mut tp = p.clone();
            axpy(step, dy, &mut ty);
            axpy(-step, dq, &mut tp);
            for (j, b) in pinned.iter().enumerate() {
                if let Some(b) = b {
                    if step == 1.0 {
                        ty[j] = *b;
                    }
                }
            }
            let tr = disc.equality_residual(&ty, &tp, pinned);
            if tr < res || halvings == crate::pde::MAX_HALVINGS {
                break Some((ty, tp, tr));
            }
            step *= 0.5;
            halvings += 1;
        };
        steps += 1;
        let Some((ty, tp, tr)) = accepted else { break };
        let stalled = tr >= res;
        *y = ty;
        *p = tp;
        res = tr;
        if stalled || (res <= cfg.tol_kkt && halvings > 0) {
            // at the roundoff floor
            break;
        }
    }
    Ok((steps, res))
}

/// Active sets predicted by the detection rule at the current iterate.
fn detect(disc: &Discretization<'_>, c: f64, y: &[f64], mu: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &j in &disc.nodes {
        if disc.is_boundary(j) {
            continue;
        }
        if disc.lower[j].is_finite() && -mu[j] + c * (disc.lower[j] - y[j]) > 0.0 {
            lower.push(j);
        } else if disc.upper[j].is_finite() && mu[j] + c * (y[j] - disc.upper[j]) > 0.0 {
            upper.push(j);
        }
    }
    (lower, upper)
}

/// Maps active nodes of a coarser solution to vertices of `mesh` with the
/// same coordinates.
fn transfer_nodes(from: &Mesh, nodes: &[usize], mesh: &Mesh) -> Vec<usize> {
    if from.same_as(mesh) {
        return nodes.to_vec();
    }
    if mesh.lineage_from(from).is_some() {
        // refinement keeps coarse vertex indices
        return nodes.to_vec();
    }
    let loc = PointLocator::new(mesh);
    let mut out: Vec<usize> = nodes
        .iter()
        .filter_map(|&j| {
            let (t, lam) = loc.locate(from.vertices()[j])?;
            let k = (0..3).max_by(|&a, &b| lam[a].total_cmp(&lam[b]))?;
            (lam[k] > 1.0 - 1e-9).then_some(mesh.triangles()[t][k])
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Solves the discrete optimality system. A warm start may live on a
/// coarser nested mesh; its fields are prolonged and its active sets reused.
pub fn solve_kkt(
    spec: &ProblemSpec,
    mesh: &Arc<Mesh>,
    cfg: &PdasConfig,
    warm_start: Option<&KktSolution>,
) -> Result<KktSolution> {
    cfg.validate()?;
    let disc = Discretization::new(spec, mesh)?;
    let n = disc.n();
    let c = cfg.weight(spec.alpha);

    let (mut y, mut p, mut lower, mut upper) = match warm_start {
        Some(w) => {
            let y = crate::study::prolong(&w.y, mesh)?.into_coefficients();
            let p = crate::study::prolong(&w.p, mesh)?.into_coefficients();
            let keep = |v: &usize| disc.lower[*v].is_finite() && !disc.is_boundary(*v);
            let lower: Vec<usize> = transfer_nodes(w.mesh(), &w.active_lower, mesh).into_iter().filter(keep).collect();
            let keep = |v: &usize| disc.upper[*v].is_finite() && !disc.is_boundary(*v);
            let upper: Vec<usize> = transfer_nodes(w.mesh(), &w.active_upper, mesh).into_iter().filter(keep).collect();
            (y, p, lower, upper)
        }
        None => (vec![0.0; n], vec![0.0; n], Vec::new(), Vec::new()),
    };
    let mut newton_total = 0;
    let mut outer = 0;
    if warm_start.is_none() && spec.control_bounded() && !disc.nodes.is_empty() {
        // Starting with both constraint kinds tends to pin states where the
        // control is clamped, which leaves the equality system without a
        // solution. Solve without control bounds first and start from there.
        let relaxed = spec.clone().with_control_bounds(f64::NEG_INFINITY, f64::INFINITY);
        if let Ok(r) = solve_kkt(&relaxed, mesh, cfg, None) {
            outer = r.iterations;
            newton_total = r.newton_iterations;
            lower = r.active_lower;
            upper = r.active_upper;
            y = r.y.into_coefficients();
            p = r.p.into_coefficients();
        }
    }
    disc.zero_boundary(&mut y);
    disc.zero_boundary(&mut p);

    let mut system = NewtonSystem::new(mesh);
    loop {
        outer += 1;
        let pinned = pinned_values(&disc, &lower, &upper);
        let (steps, _) = newton_inner(&disc, &mut system, cfg, &mut y, &mut p, &pinned)?;
        newton_total += steps;

        let f_adj = disc.adjoint_residual(&y, &p);
        let mut mu = vec![0.0; n];
        for (j, b) in pinned.iter().enumerate() {
            if b.is_some() {
                mu[j] = f_adj[j];
            }
        }
        let (new_lower, new_upper) = detect(&disc, c, &y, &mu);
        let repeated = new_lower == lower && new_upper == upper;
        if repeated {
            let sol = assemble_solution(&disc, y.clone(), p.clone(), &mu, &lower, &upper, outer, newton_total)?;
            if sol.kkt_residual <= cfg.tol_kkt {
                return Ok(sol);
            }
            if outer >= cfg.max_outer {
                let residual = sol.kkt_residual;
                return Err(Error::KktNonConvergence {
                    iterations: outer,
                    residual,
                    last: alloc::boxed::Box::new(sol),
                });
            }
            continue;
        }
        if outer >= cfg.max_outer {
            let sol = assemble_solution(&disc, y, p, &mu, &lower, &upper, outer, newton_total)?;
            let residual = sol.kkt_residual;
            return Err(Error::KktNonConvergence { iterations: outer, residual, last: alloc::boxed::Box::new(sol) });
        }
        lower = new_lower;
        upper = new_upper;
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble_solution(
    disc: &Discretization<'_>,
    y: Vec<f64>,
    p: Vec<f64>,
    mu: &[f64],
    lower: &[usize],
    upper: &[usize],
    iterations: usize,
    newton_iterations: usize,
) -> Result<KktSolution> {
    let mesh = Arc::clone(disc.mesh);
    let y = FeFunction::new(Arc::clone(&mesh), y)?;
    let p = FeFunction::new(Arc::clone(&mesh), p)?;
    let u = project_control(&p, disc.spec);
    let mu: BTreeMap<usize, f64> = lower.iter().chain(upper).filter(|&&j| mu[j] != 0.0).map(|&j| (j, mu[j])).collect();
    let mut sol = KktSolution {
        u,
        y,
        p,
        mu,
        active_lower: lower.to_vec(),
        active_upper: upper.to_vec(),
        constraint_nodes: disc.nodes.clone(),
        kkt_residual: 0.0,
        iterations,
        newton_iterations,
    };
    sol.kkt_residual = residual_with(disc, &sol)?;
    Ok(sol)
}

fn residual_with(disc: &Discretization<'_>, sol: &KktSolution) -> Result<f64> {
    let n = disc.n();
    let (y, p) = (sol.y.coefficients(), sol.p.coefficients());
    if y.len() != n || p.len() != n || sol.u.nodal.coefficients().len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    let state = disc.ops.dual_norm(&disc.state_residual(y, p));
    let mut f_adj = disc.adjoint_residual(y, p);
    let mut in_nodes = vec![false; n];
    for &j in &disc.nodes {
        in_nodes[j] = true;
    }
    let mut comp: f64 = 0.0;
    for (&j, &m) in &sol.mu {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        f_adj[j] -= m;
        let bound = if m < 0.0 { disc.lower[j] } else { disc.upper[j] };
        let violation = if !in_nodes[j] || !bound.is_finite() { m.abs() } else { m.abs() * (y[j] - bound).abs() };
        comp = comp.max(violation);
    }
    disc.zero_boundary(&mut f_adj);
    let adjoint = disc.ops.dual_norm(&f_adj);
    let control = sol
        .u
        .nodal
        .coefficients()
        .iter()
        .zip(p)
        .map(|(&u, &pi)| (u - disc.spec.clamp_control(-pi / disc.spec.alpha)).abs())
        .fold(0.0, f64::max);
    let feas =
        disc.nodes.iter().map(|&j| (disc.lower[j] - y[j]).max(y[j] - disc.upper[j]).max(0.0)).fold(0.0, f64::max);
    Ok(state.max(adjoint).max(control).max(comp).max(feas))
}

/// Max of the state and adjoint residual dual norms, the control clamp
/// violation, the complementarity violation and the feasibility violation.
pub fn kkt_residual(sol: &KktSolution, spec: &ProblemSpec, mesh: &Arc<Mesh>) -> Result<f64> {
    if !sol.y.mesh().same_as(mesh) {
        return Err(Error::InvalidArgument("solution does not live on the given mesh".into()));
    }
    let disc = Discretization::new(spec, mesh)?;
    residual_with(&disc, sol)
}

/// Reduced objective `½‖Gₕ(u) − Iₕy₀‖² + (α/2)‖u‖²` and its gradient
/// representation `p + αu` (nodal).
fn reduced_objective(
    spec: &ProblemSpec,
    mesh: &Arc<Mesh>,
    ops: &MeshOperators,
    u: &[f64],
    tol: f64,
) -> Result<(f64, FeFunction)> {
    let (y, _) = solve_state_from(spec, &Source::Nodal(u.to_vec()), mesh, tol, None)?;
    let diff: Vec<f64> = y.coefficients().iter().zip(mesh.vertices()).map(|(&v, &x)| v - spec.y0.eval(x)).collect();
    let j = 0.5 * ops.mass.quad_form(&diff) + 0.5 * spec.alpha * ops.mass.quad_form(u);
    Ok((j, y))
}

/// Compares `∫(p + αu)v` with central differences of the reduced objective in
/// five random directions (seeded). Returns the largest relative deviation.
pub fn reduced_gradient_check(
    spec: &ProblemSpec,
    mesh: &Arc<Mesh>,
    u: &FeFunction,
    h_fd: f64,
    seed: u64,
) -> Result<f64> {
    if !u.mesh().same_as(mesh) {
        return Err(Error::InvalidArgument("control does not live on the given mesh".into()));
    }
    if !(h_fd > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h_fd}")));
    }
    let ops = MeshOperators::new(mesh);
    let tol = 1e-14;
    let uc = u.coefficients();
    let (_, y) = reduced_objective(spec, mesh, &ops, uc, tol)?;
    let p = solve_adjoint(spec, &y, &[], &[], mesh)?;
    let grad: Vec<f64> = p.coefficients().iter().zip(uc).map(|(pi, ui)| pi + spec.alpha * ui).collect();
    let mg = ops.mass.mul_vec(&grad);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let v: Vec<f64> = (0..uc.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let analytic = dot(&mg, &v);
        let shifted = |s: f64| -> Result<f64> {
            let w: Vec<f64> = uc.iter().zip(&v).map(|(a, b)| a + s * b).collect();
            Ok(reduced_objective(spec, mesh, &ops, &w, tol)?.0)
        };
        let fd = (shifted(h_fd)? - shifted(-h_fd)?) / (2.0 * h_fd);
        let dev = (fd - analytic).abs() / analytic.abs().max(1e-300);
        worst = worst.max(dev);
    }
    Ok(worst)
}
