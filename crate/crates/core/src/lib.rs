//! Block successive upper-bound minimization (BSUM) for composite convex
//! problems
//!
//! ```text
//! minimize f(x) = g(x_1, ..., x_K) + sum_k h_k(x_k)   subject to x_k in X_k
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`problem`]: block partitions, constraint sets, nonsmooth terms and the
//!   [`problem::SmoothFunction`] oracle trait.
//! - [`surrogate`]: per-block upper bounds `u_k` (exact, prox-linear, custom),
//!   proximal operators and sampled assumption validators.
//! - [`scheduler`]: coordinate selection rules and Jacobi virtual updates.
//! - [`engine`]: the BSUM sweep, SUM, the accelerated two-block variant and a
//!   reference solver.
//! - [`models`]: LASSO, group LASSO, sparse logistic regression, L2-SVM,
//!   smoothed IRLS and synthetic quadratics.
//! - [`diagnostics`]: rate certificates, descent / cost-to-go / envelope
//!   checks, finite-difference and decay-exponent utilities.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! diagnostics tolerances are calibrated for.

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod models;
pub mod problem;
pub mod rng;
pub mod scalar;
pub mod scheduler;
pub mod surrogate;
pub mod trace;

pub use error::{BsumError, Result};
pub use scalar::Scalar;

pub type Problem64 = problem::Problem<f64>;
pub type Surrogate64 = surrogate::Surrogate<f64>;
pub type Trace64 = engine::Trace<f64>;
pub type RunConfig64 = engine::RunConfig<f64>;
pub type RateCertificate64 = diagnostics::RateCertificate<f64>;
pub type DenseMatrix64 = linalg::DenseMatrix<f64>;

pub type Problem32 = problem::Problem<f32>;
pub type Surrogate32 = surrogate::Surrogate<f32>;
pub type Trace32 = engine::Trace<f32>;
