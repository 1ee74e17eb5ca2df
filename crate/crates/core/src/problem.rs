//! Problem data: nonlinearity catalog, scalar fields and bounds.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::{powf, sin, sqrt};
use crate::mesh::{ConstraintRegion, Mesh};

/// Monotone nonlinearity `φ` together with growth parameters `(r, M)` such
/// that `|φ″(s)| ≤ M φ′(s)^{1/r}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `φ(s) = s`
    Linear,
    /// `φ(s) = s³`
    Cubic,
    /// `φ(s) = s + s³`
    LinearCubic,
    /// `φ(s) = Σ c_k s^k`; build with [`Nonlinearity::polynomial`].
    Polynomial { coeffs: Vec<f64>, r: f64, m: f64 },
}

const SAMPLE_RANGE: f64 = 10.0;
const SAMPLES: usize = 4001;

impl Nonlinearity {
    pub const CATALOG: [&'static str; 4] = ["linear", "cubic", "linear_cubic", "polynomial"];

    /// Checked polynomial nonlinearity.
    pub fn polynomial(coeffs: Vec<f64>, r: f64, m: f64) -> Result<Self> {
        if !(r > 1.0) || !(m >= 0.0) || !r.is_finite() || !m.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "growth parameters need r > 1 and M >= 0, got r = {r}, M = {m}"
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProblem("non-finite polynomial coefficient".into()));
        }
        let phi = Nonlinearity::Polynomial { coeffs, r, m };
        phi.check_monotone()?;
        phi.check_growth()?;
        Ok(phi)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Linear => "linear",
            Nonlinearity::Cubic => "cubic",
            Nonlinearity::LinearCubic => "linear_cubic",
            Nonlinearity::Polynomial { .. } => "polynomial",
        }
    }

    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Linear => s,
            Nonlinearity::Cubic => s * s * s,
            Nonlinearity::LinearCubic => s + s * s * s,
            Nonlinearity::Polynomial { coeffs, .. } => horner(coeffs, s),
        }
    }

    #[inline]
    pub fn dphi(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Linear => 1.0,
            Nonlinearity::Cubic => 3.0 * s * s,
            Nonlinearity::LinearCubic => 1.0 + 3.0 * s * s,
            Nonlinearity::Polynomial { coeffs, .. } => {
                let mut acc = 0.0;
                for k in (1..coeffs.len()).rev() {
                    acc = acc * s + k as f64 * coeffs[k];
                }
                acc
            }
        }
    }

    #[inline]
    pub fn d2phi(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Linear => 0.0,
            Nonlinearity::Cubic | Nonlinearity::LinearCubic => 6.0 * s,
            Nonlinearity::Polynomial { coeffs, .. } => {
                let mut acc = 0.0;
                for k in (2..coeffs.len()).rev() {
                    acc = acc * s + (k * (k - 1)) as f64 * coeffs[k];
                }
                acc
            }
        }
    }

    /// `(r, M)`
    pub fn growth(&self) -> (f64, f64) {
        match self {
            Nonlinearity::Linear => (2.0, 0.0),
            Nonlinearity::Cubic | Nonlinearity::LinearCubic => (2.0, 2.0 * sqrt(3.0)),
            Nonlinearity::Polynomial { r, m, .. } => (*r, *m),
        }
    }

    /// True when `φ″ ≡ 0`.
    pub fn is_affine(&self) -> bool {
        match self {
            Nonlinearity::Linear => true,
            Nonlinearity::Polynomial { coeffs, .. } => coeffs.iter().skip(2).all(|&c| c == 0.0),
            _ => false,
        }
    }

    fn samples() -> impl Iterator<Item = f64> {
        (0..SAMPLES).map(|k| -SAMPLE_RANGE + 2.0 * SAMPLE_RANGE * k as f64 / (SAMPLES - 1) as f64)
    }

    /// `φ′ ≥ 0` on a sample grid of `[-10, 10]`.
    pub fn check_monotone(&self) -> Result<()> {
        match Self::samples().find(|&s| self.dphi(s) < 0.0) {
            Some(s) => {
                Err(Error::InvalidProblem(format!("nonlinearity is not monotone: phi'({s}) = {}", self.dphi(s))))
            }
            None => Ok(()),
        }
    }

    /// `|φ″| ≤ M φ′^{1/r} + 1e-12` on a sample grid of `[-10, 10]`.
    pub fn check_growth(&self) -> Result<()> {
        let (r, m) = self.growth();
        for s in Self::samples() {
            let lhs = self.d2phi(s).abs();
            let rhs = m * powf(self.dphi(s).max(0.0), 1.0 / r);
            if lhs > rhs * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::InvalidProblem(format!(
                    "growth condition fails at s = {s}: |phi''| = {lhs} > M phi'^(1/r) = {rhs}"
                )));
            }
        }
        Ok(())
    }
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// Scalar field on the closure of the domain.
#[derive(Clone)]
pub enum Field {
    Constant(f64),
    /// `−1/2 + 1/2·min(x₁+x₂, 1+x₁−x₂, 1−x₁+x₂, 2−x₁−x₂)`
    PyramidLower,
    /// `sin(πx₁) sin(πx₂)`
    SineBump,
    Custom(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Constant(c) => write!(f, "Constant({c})"),
            Field::PyramidLower => f.write_str("PyramidLower"),
            Field::SineBump => f.write_str("SineBump"),
            Field::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Field {
    pub const BUILTINS: [&'static str; 2] = ["pyramid_lower", "sine_bump"];

    pub fn builtin(name: &str) -> Option<Field> {
        match name {
            "pyramid_lower" => Some(Field::PyramidLower),
            "sine_bump" => Some(Field::SineBump),
            _ => None,
        }
    }

    pub fn custom(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Field {
        Field::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            Field::Constant(c) => *c,
            Field::PyramidLower => {
                let [a, b] = x;
                let m = (a + b).min(1.0 + a - b).min(1.0 - a + b).min(2.0 - a - b);
                -0.5 + 0.5 * m
            }
            Field::SineBump => sin(core::f64::consts::PI * x[0]) * sin(core::f64::consts::PI * x[1]),
            Field::Custom(f) => f(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Field::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// `Some(true)` for `+∞`, `Some(false)` for `−∞`.
    pub fn infinite_sign(&self) -> Option<bool> {
        match self {
            Field::Constant(c) if c.is_infinite() => Some(*c > 0.0),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Field::Constant(c) => format!("{c}"),
            Field::PyramidLower => "pyramid_lower".into(),
            Field::SineBump => "sine_bump".into(),
            Field::Custom(_) => "custom".into(),
        }
    }
}

/// Pointwise state bounds `y_a ≤ y ≤ y_b` on the constraint region.
#[derive(Debug, Clone)]
pub struct Bound {
    pub lower: Field,
    pub upper: Field,
}

impl Bound {
    pub fn none() -> Self {
        Bound { lower: Field::Constant(f64::NEG_INFINITY), upper: Field::Constant(f64::INFINITY) }
    }

    pub fn has_lower(&self) -> bool {
        self.lower.infinite_sign() != Some(false)
    }

    pub fn has_upper(&self) -> bool {
        self.upper.infinite_sign() != Some(true)
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub nonlinearity: Nonlinearity,
    pub alpha: f64,
    pub y0: Field,
    pub u_a: f64,
    pub u_b: f64,
    pub state_bounds: Bound,
    pub region: ConstraintRegion,
    pub quadrature_order: u32,
}

impl ProblemSpec {
    /// Unconstrained problem with default quadrature order 4.
    pub fn new(nonlinearity: Nonlinearity, alpha: f64, y0: Field) -> Self {
        ProblemSpec {
            nonlinearity,
            alpha,
            y0,
            u_a: f64::NEG_INFINITY,
            u_b: f64::INFINITY,
            state_bounds: Bound::none(),
            region: ConstraintRegion::Empty,
            quadrature_order: 4,
        }
    }

    /// `φ = s³`, `α = 10⁻²`, `y₀ = −1`, no control bounds, lower state bound
    /// given by the pyramid field on the whole domain.
    pub fn pyramid_benchmark() -> Self {
        ProblemSpec::new(Nonlinearity::Cubic, 1e-2, Field::Constant(-1.0))
            .with_state_bounds(Field::PyramidLower, Field::Constant(f64::INFINITY))
            .with_region(ConstraintRegion::WholeDomain)
    }

    pub fn with_control_bounds(mut self, u_a: f64, u_b: f64) -> Self {
        self.u_a = u_a;
        self.u_b = u_b;
        self
    }

    pub fn with_state_bounds(mut self, lower: Field, upper: Field) -> Self {
        self.state_bounds = Bound { lower, upper };
        self
    }

    pub fn with_region(mut self, region: ConstraintRegion) -> Self {
        self.region = region;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_quadrature_order(mut self, order: u32) -> Self {
        self.quadrature_order = order;
        self
    }

    pub fn control_bounded(&self) -> bool {
        self.u_a.is_finite() || self.u_b.is_finite()
    }

    /// `min(max(u_a, v), u_b)`
    #[inline]
    pub fn clamp_control(&self, v: f64) -> f64 {
        v.max(self.u_a).min(self.u_b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidProblem(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.u_a.is_nan() || self.u_b.is_nan() || self.u_a > self.u_b {
            return Err(Error::InvalidProblem(format!(
                "control bounds need u_a <= u_b, got [{}, {}]",
                self.u_a, self.u_b
            )));
        }
        if self.u_a == f64::INFINITY || self.u_b == f64::NEG_INFINITY {
            return Err(Error::InvalidProblem("control bounds admit no value".into()));
        }
        if !(2..=8).contains(&self.quadrature_order) {
            return Err(Error::UnsupportedQuadrature(self.quadrature_order));
        }
        if let Some(c) = self.y0.as_constant() {
            if !c.is_finite() {
                return Err(Error::InvalidProblem("y0 must be finite".into()));
            }
        }
        if self.state_bounds.lower.infinite_sign() == Some(true)
            || self.state_bounds.upper.infinite_sign() == Some(false)
        {
            return Err(Error::InvalidProblem("state bounds admit no value".into()));
        }
        self.nonlinearity.check_monotone()?;
        self.nonlinearity.check_growth()?;
        Ok(())
    }

    /// Mesh-dependent checks: `y_a < y_b` on the constraint nodes, and
    /// `y_a < 0 < y_b` on the boundary when the whole domain is constrained.
    pub fn validate_on(&self, mesh: &Mesh, nodes: &[usize]) -> Result<()> {
        self.validate()?;
        let b = &self.state_bounds;
        for &j in nodes {
            let x = mesh.vertices()[j];
            let (lo, hi) = (b.lower.eval(x), b.upper.eval(x));
            if !(lo < hi) {
                return Err(Error::InvalidProblem(format!(
                    "state bounds need y_a < y_b on K, violated at ({}, {})",
                    x[0], x[1]
                )));
            }
        }
        if matches!(self.region, ConstraintRegion::WholeDomain) {
            for (v, &x) in mesh.vertices().iter().enumerate() {
                if mesh.is_boundary(v) && !(b.lower.eval(x) < 0.0 && b.upper.eval(x) > 0.0) {
                    return Err(Error::InvalidProblem(format!(
                        "whole-domain constraints need y_a < 0 < y_b on the boundary, violated at ({}, {})",
                        x[0], x[1]
                    )));
                }
            }
        }
        Ok(())
    }
}
