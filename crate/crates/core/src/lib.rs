//! Free noncommutative function theory at desk scale: free polynomials and
//! domains, Douglas factorization, Haar twirls, contractive transfer-function
//! realizations and a free Toeplitz-Corona solver.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corona;
pub mod error;
pub mod factor;
pub mod haar;
pub mod json;
pub mod linalg;
pub mod ncdomain;
pub mod ncpoly;
pub mod par;
pub mod realize;
pub mod selftest;

pub use error::{Error, Result};
