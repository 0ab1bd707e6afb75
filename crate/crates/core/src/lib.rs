//! Cyclic reduction for quadratic matrix equations and block tridiagonal
//! Toeplitz systems, with HODLR arithmetic and singular value decay bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block;
pub mod cli;
pub mod cr;
pub mod decay;
pub mod error;
pub mod hodlr;
pub mod linalg;
pub mod parallel;
pub mod problems;
pub mod qcr;
pub mod sylvester;
pub mod table;

pub use error::{Error, Result};
