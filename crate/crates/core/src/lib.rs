//! Derivative-free root finding in arbitrary precision.
//!
//! The centerpiece is an optimal eighth-order, three-step Steffensen-type
//! family: four function evaluations per iteration and no derivatives. The
//! first step uses the divided difference `f[z, x]` with the auxiliary node
//! `z = x + alpha * f(x)^m`; the second and third steps are corrected by the
//! weight functions `G` and `H`.
//!
//! Modules:
//!
//! * [`mpcore`] - the [`BigScalar`] arbitrary-precision scalar.
//! * [`expr`] - a small expression language for test functions.
//! * [`problems`] - the standard test suite with reference roots.
//! * [`methods`] - iteration kernels and the common solve loop.
//! * [`analysis`] - order of convergence, efficiency index, weight checks.
//! * [`bench`] - the iteration-count benchmark over the test suite.
//! * [`basins`] - basins-of-attraction rendering in the complex plane.

// `!(a > b)` is used on purpose so that NaN fails the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod basins;
pub mod bench;
pub mod expr;
pub mod methods;
pub mod mpcore;
pub mod problems;

pub use methods::{solve, Method, SchemeConfig, SolveOptions, SolveReport, Status};
pub use mpcore::{BigScalar, MpError};
pub use problems::Problem;
