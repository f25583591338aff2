//! Stochastic calculus for centered Gaussian stationary-increment processes
//! driven by a spectral density `m`.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: spectral densities and their admissibility checks.
//! * [`kernel`]: the variance function `r(t)`, the covariance `K_m(t, s)`,
//!   Gram matrices and `T_m` inner products.
//! * [`operator_tm`]: grid functions and the Fourier multiplier `T_m`.
//! * [`sampling`]: exact joint Gaussian draws of path values and Wiener
//!   integrals, plus Girsanov reweighting.
//! * [`wick`]: parameterised Hermite polynomials and the Wick algebra.
//! * [`s_transform`]: the `S_m` transform by closed form, Gauss-Hermite
//!   quadrature and Monte Carlo.
//! * [`ito_integral`]: the `S_m`-defined Wick-Ito integral and Ito formula
//!   checks.
//! * [`cli`]: configuration and subcommands behind the `spectral-wick` binary.
//!
//! All quantities follow one normalisation: the unitary Fourier transform
//! `f^(xi) = (2 pi)^{-1/2} \int e^{-i xi t} f(t) dt`, and
//! `K_m(t, s) = (T_m 1_t, T_m 1_s)`, so `m == 1` gives standard Brownian
//! motion.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod error;
pub mod functions;
pub mod ito_integral;
pub mod kernel;
pub mod operator_tm;
pub mod quadrature;
pub mod s_transform;
pub mod sampling;
pub mod spectral;
pub mod stats;
pub mod wick;

pub use error::{Error, Result};
pub use functions::{GridFunction, TestFunction};
pub use kernel::{GramMatrix, KernelConfig};
pub use s_transform::Probe;
pub use spectral::{DensitySpec, SpectralDensity};
pub use wick::WickPolynomial;

/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
