//! Flexibility analysis for affine constraint systems with recourse.
//!
//! Computes the feasibility function, the flexibility test and flexibility
//! indexes over hyperbox, ℓ1/ℓ2/ℓ∞ and Gaussian ellipsoidal uncertainty
//! sets. The ellipsoidal index maps to a chi-squared confidence level that
//! lower-bounds the probability of feasible operation, which can itself be
//! estimated by Monte Carlo.

// NaN must fail range checks, and index loops mirror the textbook algorithms
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod activeset;
pub mod error;
pub mod exec;
pub mod flexindex;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod montecarlo;
pub mod qp;
pub mod stats;

pub use error::{FlexError, Result};
