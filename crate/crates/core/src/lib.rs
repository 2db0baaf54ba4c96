//! Numerical laboratory for the mixed local-nonlocal Hamilton-Jacobi Cauchy
//! problem
//!
//! ```text
//! ∂ₜu − εΔu + μ(−Δ)ˢu + H(x, ∇u) = f   on 𝕋ᴺ × (0, T)
//! ```
//!
//! and its adjoint transport-diffusion equation, together with residual
//! checks for the identities and a-priori estimates of the adjoint-Bernstein
//! gradient bound.
//!
//! Module map:
//! - [`grid`], [`field`], [`spectral`]: periodic grids, grid functions and
//!   Fourier-multiplier operators.
//! - [`kernel`]: periodized Riesz kernel quadrature, an independent oracle
//!   for the fractional Laplacian.
//! - [`hamiltonian`]: the model Hamiltonian family, its Legendre transform and
//!   the exponent bookkeeping of the threshold conditions.
//! - [`hj_solver`], [`adjoint`]: forward and backward IMEX pseudospectral
//!   solvers.
//! - [`estimates`]: residuals of the identities and integral quantities.
//! - [`harness`]: configuration, presets, experiments and persistence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod error;
pub mod estimates;
pub mod field;
pub mod grid;
pub mod hamiltonian;
pub mod harness;
pub mod hj_solver;
pub mod kernel;
pub mod spectral;
pub mod trajectory;

pub use error::{LabError, Result};
pub use field::{Field, VectorField};
pub use grid::TorusGrid;
pub use hamiltonian::{Coefficient, ExponentBook, HamiltonianSpec};
pub use trajectory::Trajectory;
