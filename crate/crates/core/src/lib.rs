//! Cycle statistics of Ewens-distributed permutations and the Gaussian limit
//! of multiplicative class functions.
//!
//! A permutation of size `n` drawn from the Ewens measure with parameter
//! `theta` is described by its cycle counts `C_1, ..., C_n`. For a function
//! `f` on the unit circle and a point `x = e^{2 pi i t}`, the multiplicative
//! class function is `W^n(f) = prod_m f(x^m)^{C_m}`, and its logarithm
//! `w^n(f) = sum_m C_m log f(x^m)`; `f(z) = 1 - z` recovers the
//! characteristic polynomial `det(I - x sigma)`.
//!
//! After normalisation, `w^n(f) / sqrt(log n) - theta sqrt(log n) m(f)`
//! converges to a complex Gaussian whose covariance is built from the
//! `L^2` inner products of `log|f|` and `arg f` on the circle. The crate
//! provides the pieces needed to check this numerically:
//!
//! - [`ewens`]: Feller-coupling sampler, exact pmf and enumeration oracle.
//! - [`circle`]: circle functions, branch-fixed logarithm, `w^n(f)`.
//! - [`point`]: evaluation points (roots of unity and irrationals given by
//!   continued fractions, stored as 128-bit fixed point).
//! - [`mahler`]: centering constant `m(f)` and limit covariance via
//!   singularity-aware quadrature.
//! - [`equidist`]: fractional-part sequences, discrepancy, finite type,
//!   Koksma-type bounds.
//! - [`lab`]: Monte Carlo experiments, exact characteristic functions,
//!   Wasserstein estimates and Stein-identity checks.

pub mod circle;
pub mod equidist;
pub mod error;
pub mod ewens;
pub mod lab;
pub mod mahler;
pub mod point;
pub mod quad;
pub mod rng;

pub use circle::{CircleFunction, LogTable, LogValue};
pub use error::{Error, Result};
pub use ewens::{CycleCounts, EwensParams};
pub use mahler::{LimitParameters, QuadratureConfig};
pub use point::EvaluationPoint;
pub use rng::RngStream;
