mod common;

use common::mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdoc_core::certificate::{params_for, C4_BOUND};
use vdoc_core::study::{mesh_hierarchy, report_from, solve_hierarchy};
use vdoc_core::{
    certify, eta, run_study, CertificateParams, Classification, Error, Field, Nonlinearity, PdasConfig, ProblemSpec,
};

fn specialized(alpha: f64) -> f64 {
    5f64.powf(-5.0 / 8.0) * 3f64.powf(3.0 / 8.0) * 2f64.sqrt() / C4_BOUND * alpha.powf(3.0 / 8.0)
}

#[test]
fn eta_identity_for_random_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let alpha = 10f64.powf(rng.gen_range(-6.0..0.0));
        let general = eta(&CertificateParams::new(alpha, 2.0, 2.0 * 3f64.sqrt(), C4_BOUND).unwrap());
        let special = specialized(alpha);
        assert!((general - special).abs() <= 1e-13 * special, "alpha = {alpha}");
    }
}

#[test]
fn eta_increases_with_alpha() {
    let m = 2.0 * 3f64.sqrt();
    let mut prev = 0.0;
    for k in 0..40 {
        let alpha = 1e-6 * 1.5f64.powi(k);
        let e = eta(&CertificateParams::new(alpha, 2.0, m, C4_BOUND).unwrap());
        assert!(e > prev);
        prev = e;
    }
}

#[test]
fn zero_adjoint_is_unique_global_with_full_margin() {
    let spec = ProblemSpec::new(Nonlinearity::Cubic, 1e-2, Field::Constant(0.0));
    let m = mesh(8);
    let sol = vdoc_core::solve_kkt(&spec, &m, &PdasConfig::default(), None).unwrap();
    assert!(sol.p.coefficients().iter().all(|&v| v == 0.0));
    let v = certify(&sol, &spec, &m, None).unwrap();
    assert_eq!(v.classification, Classification::UniqueGlobal);
    assert_eq!(v.margin, v.eta_value);
    assert!(v.eta_value > 0.0);
}

#[test]
fn inflated_adjoint_is_inconclusive() {
    let spec = ProblemSpec::pyramid_benchmark();
    let m = mesh(16);
    let mut sol = vdoc_core::solve_kkt(&spec, &m, &PdasConfig::default(), None).unwrap();
    assert_eq!(certify(&sol, &spec, &m, None).unwrap().classification, Classification::UniqueGlobal);
    for v in sol.p.coefficients_mut() {
        *v *= 1e6;
    }
    let verdict = certify(&sol, &spec, &m, None).unwrap();
    assert_eq!(verdict.classification, Classification::Inconclusive);
    assert!(verdict.margin < 0.0);
}

#[test]
fn non_stationary_points_are_refused() {
    let spec = ProblemSpec::pyramid_benchmark();
    let m = mesh(8);
    let mut sol = vdoc_core::solve_kkt(&spec, &m, &PdasConfig::default(), None).unwrap();
    sol.kkt_residual = 1e-3;
    assert!(matches!(certify(&sol, &spec, &m, None), Err(Error::NotStationary { .. })));
}

#[test]
fn override_constant_flows_through() {
    let spec = ProblemSpec::pyramid_benchmark();
    let p = params_for(&spec, Some(0.7)).unwrap();
    assert_eq!(p.c_q, 0.7);
    assert_eq!(p.q, 4.0);
}

#[test]
fn reports_are_reproducible() {
    let spec = ProblemSpec::pyramid_benchmark();
    let cfg = PdasConfig::default();
    let a = run_study(&spec, 1..=4, 6, &cfg).unwrap();
    let b = run_study(&spec, 1..=4, 6, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(matches!(run_study(&spec, 1..=4, 5, &cfg), Err(Error::InvalidArgument(_))));
}

#[test]
fn linear_quadratic_control_error_is_second_order() {
    let spec = ProblemSpec::new(Nonlinearity::Linear, 1e-2, Field::custom(|x| (3.0 * x[0]).sin() + x[1]));
    let r = run_study(&spec, 1..=5, 7, &PdasConfig::default()).unwrap();
    for e in r.eoc.iter().filter(|e| e.pair.0 >= 3) {
        assert!((1.8..=2.2).contains(&e.eoc_u_l2), "{e:?}");
    }
}

#[test]
fn errors_are_ordered_and_decreasing() {
    let spec = ProblemSpec::pyramid_benchmark();
    let cfg = PdasConfig::default();
    let meshes = mesh_hierarchy(1, 9).unwrap();
    let sols = solve_hierarchy(&spec, &meshes, &cfg, true).unwrap();
    let r9 = report_from(&spec, &sols[..6], &sols[8], None).unwrap();
    let r8 = report_from(&spec, &sols[..6], &sols[7], None).unwrap();

    for (lvl, e) in r9.levels.iter().zip(&r9.errors) {
        assert!(e.e_y_h1 >= e.e_y_l2);
        if lvl.0 >= 3 {
            assert!(e.e_y_l2 < e.e_y_linf && e.e_y_linf < e.e_y_h1, "level {}: {e:?}", lvl.0);
        }
    }
    for w in r9.errors.windows(2).skip(1) {
        assert!(w[1].e_u_l2 < w[0].e_u_l2);
        assert!(w[1].e_y_h1 < w[0].e_y_h1);
        assert!(w[1].e_y_l2 < w[0].e_y_l2);
        assert!(w[1].e_y_linf < w[0].e_y_linf);
    }
    for (a, b) in r8.eoc.iter().zip(&r9.eoc).filter(|(a, _)| a.pair == (3, 4) || a.pair == (4, 5)) {
        for (x, y) in
            [(a.eoc_u_l2, b.eoc_u_l2), (a.eoc_y_h1, b.eoc_y_h1), (a.eoc_y_l2, b.eoc_y_l2), (a.eoc_y_linf, b.eoc_y_linf)]
        {
            assert!((x - y).abs() <= 0.05, "pair {:?}: {x} vs {y}", a.pair);
        }
    }
    assert!(r8.eoc.iter().all(|e| !e.contaminated));
}
