//! Finite-difference toolkit for degenerate parabolic boundary value problems
//! on singular Riemannian manifolds.

pub mod config;
mod error;
pub mod experiments;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod report;
pub mod solver;
pub mod study;
pub mod tensor_chart;
pub mod weighted;

pub use error::{Error, Result};
