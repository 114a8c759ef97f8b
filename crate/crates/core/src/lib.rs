//! Numerical toolkit for mean-oscillation analysis, dyadic approximation,
//! bilinear Calderón–Zygmund commutators, multiple weights and
//! Fréchet–Kolmogorov compactness diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod error;
pub mod approximation;
pub mod cli;
pub mod compactness;
pub mod funcspace;
pub mod kernels;
pub mod operators;
pub mod oscillation;
pub mod weights;

pub use error::{DomainError, Error, Result};
