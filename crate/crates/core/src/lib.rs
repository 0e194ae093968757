//! Regularized primal-dual interior-point method for convex quadratic programs,
//! together with the reinforcement-learning machinery (environment, reward,
//! PPO learner, neural policy) used to learn an online update rule for the
//! solver's proximal regularization weights, and a random-problem generator
//! with controlled conditioning and initial-residual targeting.
//!
//! The crate is `no_std`-compatible (`alloc` required); file formats, CLI and
//! benchmark harness live in the companion `ipal` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ipm;
pub mod linalg;
pub mod policy;
pub mod probgen;
pub mod qp;
pub mod rl;

pub use ipm::{OuterLoop, RegularizationPolicy, SolveReport, SolveStatus, SolverConfig};
pub use qp::{check_termination, residuals, PrimalDualPoint, QpError, QuadraticProgram, ResidualPair};
