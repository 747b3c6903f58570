//! Simulation and spectral estimation for long-range-dependent functional
//! time series on the sphere.
//!
//! The crate is organised bottom-up:
//!
//! - [`harmonics`]: Legendre/Jacobi polynomials, scale dimensions, zonal
//!   kernels and field reconstruction on the sphere.
//! - [`quadrature`]: Gauss–Legendre rules and graded meshes for integrands
//!   with an integrable singularity at zero frequency.
//! - [`spectral_model`]: the per-scale semiparametric spectral density
//!   `B_n^η(0) M_n(ω) [4 sin²(ω/2)]^{-α(n,θ)/2}` and its ingredients.
//! - [`simulator`]: multifractionally integrated SPHARMA(p,q) sample paths.
//! - [`periodogram`]: functional DFT, periodogram and kernel smoothing.
//! - [`contrast`]: minimum-contrast selection of the long-memory operator.
//! - [`mixed`]: the combined SRD (smoothed) / LRD (parametric) estimator.
//! - [`experiments`]: Monte-Carlo driver, error metrics and CSV artifacts.

pub mod contrast;
pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod mixed;
pub mod periodogram;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod simulator;
pub mod spectral_model;

pub use error::{Error, Result};
