//! Global-optimality certificate: a stationary point whose adjoint satisfies
//! `‖pₕ‖_{L^q} ≤ η(α, r)` is a global minimizer, and a unique one under strict
//! inequality.

use alloc::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::NormKind;
use crate::kkt::KktSolution;
use crate::math::powf;
use crate::mesh::Mesh;
use crate::problem::ProblemSpec;

/// Stationarity required before a point is certified.
pub const STATIONARITY_TOL: f64 = 1e-8;
/// Slack for the (measure-zero) equality verdict.
pub const EQUALITY_SLACK: f64 = 1e-14;

/// Gagliardo–Nirenberg-type constant bound for `q = 4`.
pub const C4_BOUND: f64 = 0.648027075;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateParams {
    pub alpha: f64,
    pub r: f64,
    pub m: f64,
    pub c_q: f64,
    /// `(3r − 2)/(r − 1)`
    pub q: f64,
    /// `(r + q)/(rq)`
    pub rho: f64,
}

impl CertificateParams {
    pub fn new(alpha: f64, r: f64, m: f64, c_q: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(r > 1.0) || !(m >= 0.0) || !(c_q > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "certificate needs alpha > 0, r > 1, M >= 0, C_q > 0; got alpha = {alpha}, r = {r}, M = {m}, C_q = {c_q}"
            )));
        }
        let (q, rho) = Self::exponents(r);
        assert!(q > 2.0 && rho > 0.0 && rho < 2.0, "q = {q}, rho = {rho} for r = {r}");
        Ok(CertificateParams { alpha, r, m, c_q, q, rho })
    }

    /// `(q, ρ)` for a growth exponent `r`.
    pub fn exponents(r: f64) -> (f64, f64) {
        let q = (3.0 * r - 2.0) / (r - 1.0);
        let rho = (r + q) / (r * q);
        (q, rho)
    }
}

/// `η(α, r)`; `+∞` when `M = 0`.
pub fn eta(params: &CertificateParams) -> f64 {
    let CertificateParams { alpha, r, m, c_q, q, rho } = *params;
    if m == 0.0 {
        return f64::INFINITY;
    }
    powf(alpha, rho / 2.0) * powf(c_q, (2.0 - 2.0 * r) / r) / m
        * powf((r - 1.0) / (2.0 * r - 1.0), (1.0 - r) / r)
        * powf(q, 1.0 / q)
        * powf(r, 1.0 / r)
        * powf(rho, rho / 2.0)
        * powf(2.0 - rho, rho / 2.0 - 1.0)
}

/// Tabulated upper bound for the constant `C_q`; only `q = 4` is shipped.
pub fn gn_constant_bound(q: f64) -> Result<f64> {
    if q == 4.0 {
        Ok(C4_BOUND)
    } else {
        Err(Error::UnsupportedConstant { q })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    UniqueGlobal,
    Global,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::UniqueGlobal => "unique_global",
            Classification::Global => "global",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

impl core::fmt::Display for Classification {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateVerdict {
    pub eta_value: f64,
    pub p_norm: f64,
    /// `η − ‖p‖`
    pub margin: f64,
    pub classification: Classification,
}

impl CertificateVerdict {
    pub fn from_values(p_norm: f64, eta_value: f64) -> Self {
        let classification = if eta_value.is_infinite() {
            Classification::UniqueGlobal
        } else if (p_norm - eta_value).abs() <= EQUALITY_SLACK {
            Classification::Global
        } else if p_norm < eta_value {
            Classification::UniqueGlobal
        } else {
            Classification::Inconclusive
        };
        CertificateVerdict { eta_value, p_norm, margin: eta_value - p_norm, classification }
    }

    /// `margin / η`, the unused fraction of the threshold.
    pub fn relative_margin(&self) -> f64 {
        if self.eta_value.is_infinite() {
            1.0
        } else {
            self.margin / self.eta_value
        }
    }

    /// `‖p‖ / η`: the smallest κ with `‖p‖ ≤ κη`.
    pub fn kappa(&self) -> f64 {
        self.p_norm / self.eta_value
    }
}

/// Parameters for a problem; `c_q_override` replaces the tabulated constant.
pub fn params_for(spec: &ProblemSpec, c_q_override: Option<f64>) -> Result<CertificateParams> {
    let (r, m) = spec.nonlinearity.growth();
    let (q, _) = CertificateParams::exponents(r);
    let c_q = match c_q_override {
        Some(c) => c,
        None if m == 0.0 => gn_constant_bound(q).unwrap_or(1.0),
        None => gn_constant_bound(q)?,
    };
    CertificateParams::new(spec.alpha, r, m, c_q)
}

/// Classifies a stationary point by comparing `‖pₕ‖_{L^q}` with `η`.
pub fn certify(
    sol: &KktSolution,
    spec: &ProblemSpec,
    mesh: &Arc<Mesh>,
    c_q_override: Option<f64>,
) -> Result<CertificateVerdict> {
    if !sol.p.mesh().same_as(mesh) {
        return Err(Error::InvalidArgument("solution does not live on the given mesh".into()));
    }
    if !(sol.kkt_residual <= STATIONARITY_TOL) {
        return Err(Error::NotStationary { residual: sol.kkt_residual });
    }
    let params = params_for(spec, c_q_override)?;
    let p_norm = sol.p.norm(NormKind::Lq(params.q))?;
    Ok(CertificateVerdict::from_values(p_norm, eta(&params)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specialized(alpha: f64) -> f64 {
        5f64.powf(-5.0 / 8.0) * 3f64.powf(3.0 / 8.0) * 2f64.sqrt() / C4_BOUND * alpha.powf(3.0 / 8.0)
    }

    #[test]
    fn exponents_at_r2() {
        let (q, rho) = CertificateParams::exponents(2.0);
        assert_eq!(q, 4.0);
        assert_eq!(rho, 0.75);
    }

    #[test]
    fn eta_matches_specialized_formula() {
        let p = CertificateParams::new(1e-2, 2.0, 2.0 * 3f64.sqrt(), C4_BOUND).unwrap();
        let e = eta(&p);
        assert!((e - specialized(1e-2)).abs() <= 1e-13 * e);
        assert!((e - 0.21427).abs() < 1e-4, "{e}");
    }

    #[test]
    fn doubling_alpha_scales_by_power() {
        let m = 2.0 * 3f64.sqrt();
        let a = eta(&CertificateParams::new(0.01, 2.0, m, C4_BOUND).unwrap());
        let b = eta(&CertificateParams::new(0.02, 2.0, m, C4_BOUND).unwrap());
        assert!((b / a - 2f64.powf(0.375)).abs() < 1e-14);
    }

    #[test]
    fn constant_table() {
        assert_eq!(gn_constant_bound(4.0).unwrap(), 0.648027075);
        assert!(matches!(gn_constant_bound(3.0), Err(Error::UnsupportedConstant { .. })));
        let p = CertificateParams::new(0.5, 2.0, 1.0, 0.7).unwrap();
        assert_eq!(p.c_q, 0.7);
    }

    #[test]
    fn zero_growth_is_unconditional() {
        let p = CertificateParams::new(0.5, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(eta(&p), f64::INFINITY);
        let v = CertificateVerdict::from_values(1e6, eta(&p));
        assert_eq!(v.classification, Classification::UniqueGlobal);
    }

    #[test]
    fn classification_boundaries() {
        assert_eq!(CertificateVerdict::from_values(0.1, 0.2).classification, Classification::UniqueGlobal);
        assert_eq!(CertificateVerdict::from_values(0.2, 0.2).classification, Classification::Global);
        assert_eq!(CertificateVerdict::from_values(0.3, 0.2).classification, Classification::Inconclusive);
    }
}
