//! Ground states of the weakly coupled cubic Schrödinger system
//!
//! ```text
//! -Δu_i + λ_i u_i = μ_i u_i³ + u_i Σ_{j≠i} b_ij u_j²,   i = 1..d,  x ∈ ℝᴺ
//! ```
//!
//! for radial profiles, computed on the Nehari manifold of a discretized
//! action functional.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod functional;
pub mod grid;
pub mod params;
pub mod phase;
pub mod reduction;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
