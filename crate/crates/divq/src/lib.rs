//! Divergence-penalized exterior Q-tensor problem.
//!
//! The library solves the linear Euler–Lagrange system of the elastic energy
//!
//! ```text
//! E(Q) = ∫  (1/2) |∇Q|² + (k/2) |Div Q|²  dx ,     k ∈ (−1, ∞),
//! ```
//!
//! posed on the exterior of the unit ball with homeotropic anchoring
//! `Q_b = ν⊗ν − I/3` on the colloid surface and a uniform uniaxial state
//! `Q_∞ = e_z⊗e_z − I/3` at infinity.  Two independent solution routes are
//! provided and cross-validated:
//!
//! * an analytic route built on closed-form fundamental solutions of the
//!   adjoint operator and a boundary representation formula
//!   ([`fundsol`], [`operators`], [`represent`]);
//! * a discrete route: P1 tetrahedral finite elements on a meshed spherical
//!   shell ([`mesh`], [`fem`]) with post-processing that extracts the
//!   Saturn-ring defect ([`analysis`]).

pub mod cli;
pub mod analysis;
pub mod config;
pub mod fem;
pub mod fundsol;
pub mod harmonic;
pub mod mesh;
pub mod operators;
pub mod output;
pub mod qtensor;
pub mod represent;

/// Crate-wide error type.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// A function argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Evaluation requested at or too close to a kernel singularity.
    #[error("singular evaluation: {0}")]
    Singular(String),
    /// A point lies outside the meshed domain.
    #[error("point outside domain: {0}")]
    OutsideDomain(String),
    /// Unsupported or malformed mesh file.
    #[error("mesh format error: {0}")]
    MeshFormat(String),
    /// Mesh failed a structural validity check.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    /// Iterative solver failed to reach the requested tolerance.
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    /// A least-squares system was too ill-conditioned to trust.
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    /// No eigenvalue exchange found while scanning for the defect ring.
    #[error("no ring found: {0}")]
    NoRing(String),
    /// Configuration file problem.
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
