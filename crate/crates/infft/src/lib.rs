//! Nonequispaced fast Fourier transforms with direct inversion.
//!
//! The crate evaluates trigonometric polynomials at arbitrary points on the
//! d-torus (NFFT), computes the adjoint transform, and recovers Fourier
//! coefficients from nonequispaced samples by two direct methods:
//!
//! * density compensation — precomputed quadrature weights `w_j` such that a
//!   single weighted adjoint NFFT reconstructs the coefficients (exactly for
//!   polynomials of degree `M` whenever the doubled-index quadrature system is
//!   solvable), see [`density`];
//! * spreading-matrix optimization — per-column least-squares optimization of
//!   the sparse spreading matrix so that a modified adjoint NFFT acts as a
//!   left inverse, see [`optimize`].
//!
//! Supporting modules provide the sampling geometries used in the experiments
//! ([`grid`]), window functions ([`window`]), dense and iterative solvers
//! ([`solver`]), and deterministic test signals ([`signal`]).

pub mod density;
pub mod domain;
pub mod grid;
pub mod optimize;
pub mod signal;
pub mod solver;
pub mod transform;
pub mod window;

mod dft;

pub use domain::{CoefficientVector, FrequencyBox, Norm, SampleVector, SamplingSet};
pub use transform::NfftPlan;
pub use window::{WindowKind, WindowSpec};

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// The operation is not defined for the given configuration.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    /// A dense-path size guard was exceeded.
    #[error("capacity guard exceeded: {0}")]
    Capacity(String),
    /// Non-finite values appeared during an iterative solve.
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
