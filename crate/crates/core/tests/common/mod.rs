#![allow(dead_code, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdoc_core::fem::{assemble_mass, assemble_stiffness, interpolate};
use vdoc_core::study::mesh_hierarchy;
use vdoc_core::{
    kkt_residual, solve_state, uniform_triangulation, Field, KktSolution, Mesh, Nonlinearity, NormKind, ProblemSpec,
    Source,
};

pub fn mesh(n: usize) -> Arc<Mesh> {
    Arc::new(uniform_triangulation(n).unwrap())
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        assert!(a[k][k].abs() > 1e-300, "singular dense system");
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// True when `a` admits a dense Cholesky factorization.
pub fn is_positive_definite(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= 0.0 {
            return false;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            l[i][j] = (a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    true
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Linear-quadratic oracle for `φ(s) = s` without constraints: builds the
/// dense control-to-state matrix `S` and solves `(αM + SᵀMS)u = SᵀM Iₕy₀`.
/// Returns nodal `(u, y)`.
pub fn linear_quadratic_oracle(spec: &ProblemSpec, m: &Mesh) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(spec.nonlinearity, Nonlinearity::Linear);
    let n = m.num_vertices();
    let k = assemble_stiffness(m).to_dense();
    let mass = assemble_mass(m).to_dense();
    let interior = m.interior_vertices();

    // State operator on interior rows: (K + M)_II y_I = (M u)_I.
    let ni = interior.len();
    let a: Vec<Vec<f64>> = interior.iter().map(|&i| interior.iter().map(|&j| k[i][j] + mass[i][j]).collect()).collect();
    let mut s = vec![vec![0.0; n]; n];
    for c in 0..n {
        let rhs: Vec<f64> = interior.iter().map(|&i| mass[i][c]).collect();
        let col = dense_solve(a.clone(), rhs);
        for r in 0..ni {
            s[interior[r]][c] = col[r];
        }
    }
    let y0: Vec<f64> = m.vertices().iter().map(|&x| spec.y0.eval(x)).collect();
    let ms: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| mass[i][l] * s[l][j]).sum()).collect()).collect();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            h[i][j] = spec.alpha * mass[i][j] + (0..n).map(|l| s[l][i] * ms[l][j]).sum::<f64>();
        }
    }
    let my0 = matvec(&mass, &y0);
    let rhs: Vec<f64> = (0..n).map(|i| (0..n).map(|l| s[l][i] * my0[l]).sum()).collect();
    let u = dense_solve(h, rhs);
    let y = matvec(&s, &u);
    (u, y)
}

pub fn manufactured_state(x: [f64; 2]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// `‖yₕ − Iₕy*‖_{L²}` on levels `first..=last` for `y* = sin(πx₁)sin(πx₂)`,
/// `φ = s³` and the matching source `u = 2π²y* + y*³`.
pub fn manufactured_errors(first: u32, last: u32) -> Vec<(f64, f64)> {
    let spec = ProblemSpec::new(Nonlinearity::Cubic, 1.0, Field::Constant(0.0));
    let source = Source::Field(Field::custom(|x| {
        let y = manufactured_state(x);
        2.0 * PI * PI * y + y * y * y
    }));
    mesh_hierarchy(first, last)
        .unwrap()
        .iter()
        .map(|m| {
            let (y, report) = solve_state(&spec, &source, m, 1e-12).unwrap();
            assert!(report.converged);
            let err = y.sub(&interpolate(m, manufactured_state)).unwrap().norm(NormKind::L2).unwrap();
            (m.h(), err)
        })
        .collect()
}

/// Ratios `‖Gₕ(u) − Gₕ(v)‖_{L²} / ‖u − v‖_{L²}` for random nodal pairs.
pub fn lipschitz_ratios(spec: &ProblemSpec, m: &Arc<Mesh>, pairs: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.num_vertices();
    (0..pairs)
        .map(|_| {
            let scale = rng.gen_range(0.1..20.0);
            let u: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            let (yu, _) = solve_state(spec, &Source::Nodal(u.clone()), m, 1e-13).unwrap();
            let (yv, _) = solve_state(spec, &Source::Nodal(v.clone()), m, 1e-13).unwrap();
            let du = vdoc_core::FeFunction::new(Arc::clone(m), u.iter().zip(&v).map(|(a, b)| a - b).collect()).unwrap();
            yu.sub(&yv).unwrap().norm(NormKind::L2).unwrap() / du.norm(NormKind::L2).unwrap()
        })
        .collect()
}

/// Upper bound `1/λ₁ = 1/(2π²)` for the L² Lipschitz constant of a
/// monotone control-to-state map on the unit square.
pub fn lipschitz_bound() -> f64 {
    1.0 / (2.0 * PI * PI)
}

/// Sign, support, feasibility and control-clamp conditions of a converged
/// solve, at the tolerance `tol`.
pub fn check_invariants(sol: &KktSolution, spec: &ProblemSpec, tol: f64) -> Result<(), String> {
    let m = sol.mesh();
    let residual = kkt_residual(sol, spec, m).map_err(|e| e.to_string())?;
    if !(residual <= tol) {
        return Err(format!("recomputed residual {residual:.3e}"));
    }
    let y = sol.y.coefficients();
    let x = m.vertices();
    for (&j, &mu) in &sol.mu {
        let lower = sol.active_lower.contains(&j);
        let upper = sol.active_upper.contains(&j);
        if !(lower || upper) {
            return Err(format!("multiplier {mu} at inactive node {j}"));
        }
        if (lower && mu > 0.0) || (upper && mu < 0.0) {
            return Err(format!("multiplier {mu} has the wrong sign at node {j}"));
        }
        let bound = if lower { spec.state_bounds.lower.eval(x[j]) } else { spec.state_bounds.upper.eval(x[j]) };
        if (y[j] - bound).abs() > tol {
            return Err(format!("multiplier at node {j} off the bound by {:.3e}", (y[j] - bound).abs()));
        }
    }
    for &j in &sol.constraint_nodes {
        let lo = spec.state_bounds.lower.eval(x[j]);
        let hi = spec.state_bounds.upper.eval(x[j]);
        if y[j] < lo - tol || y[j] > hi + tol {
            return Err(format!("state {} outside [{lo}, {hi}] at node {j}", y[j]));
        }
    }
    for (u, p) in sol.u.nodal.coefficients().iter().zip(sol.p.coefficients()) {
        let clamp = spec.clamp_control(-p / spec.alpha);
        if (u - clamp).abs() > 1e-14 * clamp.abs().max(1.0) {
            return Err(format!("control {u} differs from clamp {clamp}"));
        }
    }
    Ok(())
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}
