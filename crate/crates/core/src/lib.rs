//! Geometry, hypothesis checks, decay certificates and a reference solver
//! for kinetic Fokker–Planck equations
//!
//! ```text
//! ∂t h + v(p)·∂x h = Δp h + W h      on T^N x R^M
//! ```
//!
//! where `Δp` is the Laplace–Beltrami operator of a metric `g` on momentum
//! space and `W = ∂p log u`.

pub mod assumptions;
pub mod certificate;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod solver;
pub mod tensor;

pub use field::DerivScheme;
pub use models::{builtin_classical, builtin_relativistic, ModelSpec};
