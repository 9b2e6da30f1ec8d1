//! Numerical laboratory for the operator `-Δ_g + V` on a bounded domain:
//! spectral calculus, extension and Neumann-to-Dirichlet maps, WKB
//! boundary asymptotics, heat/wave transmutation and gauge invariance.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the tensor notation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod boundary;
pub mod calculus;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod jet;
pub mod operator;
pub mod transmute;
pub mod wkb;

pub use error::{LabError, Result};
