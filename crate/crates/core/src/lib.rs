//! Regularized solvers and verification tools for elliptic-parabolic
//! phase-transition problems `b(u)_t = F(D²u, Du, u)`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod barriers;
pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod io;
pub mod nonlinearity;
pub mod operators;
pub mod regularize;
pub mod solver;

pub use error::{Error, Result};
