//! Nonlocal quadratic forms on bounded domains and their local limits.
//!
//! This crate implements a catalog of mollifier families `rho_eps` approximating
//! the Dirac measure, the derived jump kernels `nu_alpha(h) = |h|^{-2} rho_{2-alpha}(h)`,
//! and a zoo of symmetric interaction kernels `J_alpha(x, y)` comparable to `nu_alpha`.
//! On top of those it provides quadrature engines for the interior form
//!
//! ```text
//! E_in(u, v)   = ∬_{Ω×Ω} (u(x)-u(y))(v(x)-v(y)) J_alpha(x,y) dx dy
//! ```
//!
//! and the full form over `(Ω^c×Ω^c)^c`, the limiting diffusion matrix
//! `A = lim_{alpha→2} ∫_{B_δ} h⊗h J_alpha(x, x+h) dh` with the local energy
//! `∫_Ω <A∇u, ∇v>`, Galerkin discretizations of the associated resolvent
//! problems, and experiment drivers that quantify the nonlocal-to-local
//! convergence (pointwise form limits, ellipticity bounds, mollifier
//! concentration, and resolvent comparison) at desk scale.
//!
//! The `nlforms` binary exposes everything as a config-driven experiment
//! runner emitting CSV and JSON artifacts; see the crate README.

pub mod config;
pub mod constants;
pub mod domain;
pub mod experiment;
pub mod forms;
pub mod kernels;
pub mod mosco;
pub mod output;
pub mod quad;

pub use domain::{Domain, DomainSpec, GridFunction, SpaceTag};
pub use forms::{DiffusionMatrix, FormReport, QuadConfig};
pub use kernels::{KernelFamily, KernelKind, Mollifier, MollifierFamily, NuAlpha};

/// Errors surfaced by domain construction, kernel evaluation and quadrature.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: estimated error {estimate:e} above tolerance {tolerance:e} ({context})")]
    QuadratureNonConvergence {
        estimate: f64,
        tolerance: f64,
        context: String,
    },
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
