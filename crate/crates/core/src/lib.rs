//! Finite-element solver for the semilinear elliptic optimal control problem
//!
//! ```text
//! min  ½‖y − y₀‖² + (α/2)‖u‖²
//! s.t. −Δy + φ(y) = u in Ω,  y = 0 on ∂Ω,
//!      u_a ≤ u ≤ u_b,  y_a ≤ y ≤ y_b on K,
//! ```
//!
//! discretized variationally: state and adjoint live in continuous P1 finite
//! element spaces on a triangulation of Ω, the control is recovered from the
//! adjoint through the pointwise projection `u = clamp(−p/α, u_a, u_b)`, and the
//! state constraints are imposed at the vertex set 𝒩ₕ with Dirac multipliers.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `std` for the faster dense
//! kernels inside the sparse factorizations and `parallel` for rayon-backed
//! element assembly.
#![no_std]
#![forbid(unsafe_code)]
// `!(x <= tol)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod certificate;
pub mod error;
pub mod fem;
pub mod kkt;
pub mod math;
pub mod mesh;
pub mod pde;
pub mod problem;
pub mod quadrature;
pub mod solve;
pub mod study;

pub use certificate::{certify, eta, gn_constant_bound, CertificateParams, CertificateVerdict, Classification};
pub use error::{Error, Result};
pub use fem::{FeFunction, NormKind, SparseOperator};
pub use kkt::{kkt_residual, reduced_gradient_check, solve_kkt, KktSolution, PdasConfig};
pub use mesh::{constraint_nodes, refine, uniform_triangulation, ConstraintRegion, Mesh};
pub use pde::{project_control, solve_adjoint, solve_state, Control, NewtonReport, Source};
pub use problem::{Bound, Field, Nonlinearity, ProblemSpec};
pub use solve::{solve_spd, solve_unsymmetric, LinearSolveReport};
pub use study::{
    eoc, error_functionals, mesh_hierarchy, prolong, report_from, run_study, run_study_with, solve_hierarchy,
    EocRecord, ErrorRecord, StudyReport,
};
