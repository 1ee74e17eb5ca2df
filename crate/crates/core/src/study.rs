//! Convergence studies against a fine-mesh reference solution.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::certificate::{certify, CertificateVerdict};
use crate::error::{Error, Result};
use crate::fem::{physical_point, FeFunction};
use crate::kkt::{solve_kkt, KktSolution, PdasConfig};
use crate::math::{ln, sqrt};
use crate::mesh::{refine, uniform_triangulation, Mesh, PointLocator};
use crate::pde::MeshOperators;
use crate::problem::ProblemSpec;
use crate::quadrature::TriangleRule;

/// Exact embedding of a coarse P1 function into a nested finer space.
pub fn prolong(coarse: &FeFunction, fine: &Arc<Mesh>) -> Result<FeFunction> {
    let cm = coarse.mesh();
    if cm.same_as(fine) {
        return FeFunction::new(Arc::clone(fine), coarse.coefficients().to_vec());
    }
    if let Some(chain) = fine.lineage_from(cm) {
        let mut values = coarse.coefficients().to_vec();
        for m in &chain[1..] {
            values = m.extend_from_parent(&values);
        }
        return FeFunction::new(Arc::clone(fine), values);
    }
    prolong_geometric(coarse, fine)
}

/// Point-location fallback for meshes without recorded lineage. Each fine
/// triangle must sit inside one coarse triangle.
fn prolong_geometric(coarse: &FeFunction, fine: &Arc<Mesh>) -> Result<FeFunction> {
    let cm = coarse.mesh();
    let loc = PointLocator::new(cm);
    for t in 0..fine.num_triangles() {
        let centroid = physical_point(fine, t, [1.0 / 3.0; 3]);
        let (ct, _) = loc.locate(centroid).ok_or(Error::NonNested)?;
        for &v in &fine.triangles()[t] {
            let lam = cm.barycentric(ct, fine.vertices()[v]);
            if lam.iter().any(|&l| l < -1e-10) {
                return Err(Error::NonNested);
            }
        }
    }
    let values = fine
        .vertices()
        .iter()
        .map(|&x| {
            let (t, lam) = loc.locate(x).ok_or(Error::NonNested)?;
            Ok(coarse.eval_in(t, lam))
        })
        .collect::<Result<Vec<f64>>>()?;
    FeFunction::new(Arc::clone(fine), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub e_u_l2: f64,
    pub e_y_h1: f64,
    pub e_y_l2: f64,
    pub e_y_linf: f64,
}

/// Errors of `sol` against `reference`, measured on the reference mesh.
pub fn error_functionals(sol: &KktSolution, reference: &KktSolution, spec: &ProblemSpec) -> Result<ErrorRecord> {
    let ops = MeshOperators::new(reference.mesh());
    error_functionals_with(&ops, sol, reference, spec)
}

pub(crate) fn error_functionals_with(
    ops: &MeshOperators,
    sol: &KktSolution,
    reference: &KktSolution,
    spec: &ProblemSpec,
) -> Result<ErrorRecord> {
    let fine = reference.mesh();
    let y = prolong(&sol.y, fine)?;
    let dy = reference.y.sub(&y)?;
    let c = dy.coefficients();
    let l2_sq = ops.mass.quad_form(c).max(0.0);
    let semi = ops.stiffness.quad_form(c).max(0.0);
    let e_y_linf = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let e_u_l2 = if sol.u.any_clamped() || reference.u.any_clamped() {
        // integrate the exact projection of both adjoints
        let p = prolong(&sol.p, fine)?;
        let rule = TriangleRule::exact_for(8)?;
        let mut acc = 0.0;
        for t in 0..fine.num_triangles() {
            let area = fine.triangle_area(t);
            for (lam, w) in rule.points.iter().zip(&rule.weights) {
                let ur = spec.clamp_control(-reference.p.eval_in(t, *lam) / spec.alpha);
                let uh = spec.clamp_control(-p.eval_in(t, *lam) / spec.alpha);
                acc += area * w * (ur - uh) * (ur - uh);
            }
        }
        sqrt(acc)
    } else {
        let u = prolong(&sol.u.nodal, fine)?;
        let du = reference.u.nodal.sub(&u)?;
        sqrt(ops.mass.quad_form(du.coefficients()).max(0.0))
    };
    Ok(ErrorRecord { e_u_l2, e_y_h1: sqrt(l2_sq + semi), e_y_l2: sqrt(l2_sq), e_y_linf })
}

/// `(log E_cur − log E_prev) / (log h_cur − log h_prev)`
pub fn eoc(e_prev: f64, e_cur: f64, h_prev: f64, h_cur: f64) -> Result<f64> {
    for e in [e_prev, e_cur] {
        if !(e > 0.0) {
            return Err(Error::NonPositiveError(e));
        }
    }
    if !(h_prev > 0.0) || !(h_cur > 0.0) || h_prev == h_cur {
        return Err(Error::InvalidArgument(alloc::format!(
            "mesh sizes must be positive and distinct, got {h_prev} and {h_cur}"
        )));
    }
    Ok((ln(e_cur) - ln(e_prev)) / (ln(h_cur) - ln(h_prev)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EocRecord {
    /// `(i − 1, i)`
    pub pair: (u32, u32),
    pub eoc_u_l2: f64,
    pub eoc_y_h1: f64,
    pub eoc_y_l2: f64,
    pub eoc_y_linf: f64,
    /// The coarser level lies within two levels of the reference.
    pub contaminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    /// `(i, h_i)`
    pub levels: Vec<(u32, f64)>,
    pub errors: Vec<ErrorRecord>,
    pub eoc: Vec<EocRecord>,
    pub certificates: Vec<CertificateVerdict>,
    pub reference_level: u32,
    /// Outer active-set iterations per level.
    pub iterations: Vec<usize>,
}

/// Nested meshes for the levels `first..=last`, all refinements of the
/// level-`first` uniform mesh so prolongation follows recorded lineage.
pub fn mesh_hierarchy(first: u32, last: u32) -> Result<Vec<Arc<Mesh>>> {
    if first > last || last > 12 {
        return Err(Error::InvalidArgument(alloc::format!("invalid level range {first}..={last}")));
    }
    let mut meshes = vec![Arc::new(uniform_triangulation(1usize << first)?)];
    for _ in first..last {
        let next = refine(meshes.last().unwrap());
        meshes.push(Arc::new(next));
    }
    Ok(meshes)
}

/// Solves on each mesh in order, warm-starting from the previous level.
pub fn solve_hierarchy(
    spec: &ProblemSpec,
    meshes: &[Arc<Mesh>],
    cfg: &PdasConfig,
    warm_start: bool,
) -> Result<Vec<KktSolution>> {
    let mut out: Vec<KktSolution> = Vec::with_capacity(meshes.len());
    for m in meshes {
        let warm = if warm_start { out.last() } else { None };
        let sol = solve_kkt(spec, m, cfg, warm).map_err(|e| e.at_level(m.level()))?;
        out.push(sol);
    }
    Ok(out)
}

/// Error, EOC and certificate tables for already solved levels.
pub fn report_from(
    spec: &ProblemSpec,
    solutions: &[KktSolution],
    reference: &KktSolution,
    c_q_override: Option<f64>,
) -> Result<StudyReport> {
    let reference_level = reference.mesh().level();
    let ops = MeshOperators::new(reference.mesh());
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    let mut certificates = Vec::new();
    let mut iterations = Vec::new();
    for sol in solutions {
        let m = sol.mesh();
        if m.level() >= reference_level {
            return Err(Error::InvalidArgument(alloc::format!(
                "level {} is not coarser than the reference level {reference_level}",
                m.level()
            )));
        }
        levels.push((m.level(), m.h()));
        errors.push(error_functionals_with(&ops, sol, reference, spec).map_err(|e| e.at_level(m.level()))?);
        certificates.push(certify(sol, spec, m, c_q_override).map_err(|e| e.at_level(m.level()))?);
        iterations.push(sol.iterations);
    }
    let mut eocs = Vec::new();
    for k in 1..levels.len() {
        let (lp, hp) = levels[k - 1];
        let (lc, hc) = levels[k];
        let (ep, ec) = (errors[k - 1], errors[k]);
        let rate = |a: f64, b: f64| eoc(a, b, hp, hc).map_err(|e| e.at_level(lc));
        eocs.push(EocRecord {
            pair: (lp, lc),
            eoc_u_l2: rate(ep.e_u_l2, ec.e_u_l2)?,
            eoc_y_h1: rate(ep.e_y_h1, ec.e_y_h1)?,
            eoc_y_l2: rate(ep.e_y_l2, ec.e_y_l2)?,
            eoc_y_linf: rate(ep.e_y_linf, ec.e_y_linf)?,
            contaminated: reference_level - lc <= 1,
        });
    }
    Ok(StudyReport { levels, errors, eoc: eocs, certificates, reference_level, iterations })
}

/// Solves every level (warm-started), the reference level, and tabulates
/// errors, EOCs and certificates.
pub fn run_study(
    spec: &ProblemSpec,
    levels: RangeInclusive<u32>,
    reference_level: u32,
    cfg: &PdasConfig,
) -> Result<StudyReport> {
    run_study_with(spec, levels, reference_level, cfg, None)
}

pub fn run_study_with(
    spec: &ProblemSpec,
    levels: RangeInclusive<u32>,
    reference_level: u32,
    cfg: &PdasConfig,
    c_q_override: Option<f64>,
) -> Result<StudyReport> {
    let (first, last) = (*levels.start(), *levels.end());
    if first > last {
        return Err(Error::InvalidArgument("empty level range".into()));
    }
    if reference_level <= last + 1 {
        return Err(Error::InvalidArgument(alloc::format!(
            "reference level {reference_level} must be at least two above the finest study level {last}"
        )));
    }
    let meshes = mesh_hierarchy(first, reference_level)?;
    let count = (last - first + 1) as usize;
    let solutions = solve_hierarchy(spec, &meshes[..count], cfg, true)?;
    let ref_mesh = meshes.last().unwrap();
    let reference = solve_kkt(spec, ref_mesh, cfg, solutions.last()).map_err(|e| e.at_level(reference_level))?;
    report_from(spec, &solutions, &reference, c_q_override)
}
