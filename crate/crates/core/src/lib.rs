//! Numerical core for stochastic generalized porous-medium and fast-diffusion
//! equations
//!
//! ```text
//! dX = [L Psi(t, X) + Phi(t, X)] dt + B(t, X) dW
//! ```
//!
//! posed on the Gelfand triple `V = L_N ∩ H ⊂ H ⊂ V*`, where `H` is the Green
//! space of a (fractional) Dirichlet Laplacian on the unit interval and `L_N`
//! is the Orlicz space of a Young function `N`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `spme` companion crate.
//!
//! Module map:
//!
//! * [`orlicz`]: Young functions, Legendre duals, Δ₂ regularity, Luxemburg norms.
//! * [`triple`]: the discrete spectral domain, `L`, `L⁻¹`, `⟨·,·⟩_H`, projections.
//! * [`drift`]: `Psi`, `Phi`, the assembled drift and condition certificates.
//! * [`noise`]: diagonal Hilbert–Schmidt diffusion and coupled Brownian increments.
//! * [`galerkin`]: time stepping of the Galerkin system and ensemble statistics.
//! * [`verify`]: Itô ledger, contraction, energy, extinction, OU and ergodicity checks.
#![no_std]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod drift;
pub mod error;
pub mod galerkin;
pub mod math;
pub mod noise;
pub mod orlicz;
pub mod report;
pub mod rng;
pub mod stats;
pub mod triple;
pub mod verify;

pub use error::{Error, Result};
