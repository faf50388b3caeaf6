//! Reduction of N-level Schrödinger dynamics from `U(N)` to Grassmannian coset
//! spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`matcore`]: dense complex kernels (Hermitian square roots, polar
//!   decomposition, exact exponential steps).
//! - [`coset`]: block decomposition over a partition `N = n1 + n2`, the
//!   canonical coset representative and the coset coordinate `Z = B D⁻¹`.
//! - [`dynamics`]: block Hamiltonians and the full (reference) evolution of
//!   `U(t)` and `ψ(t)`.
//! - [`riccati`]: the reduced matrix/vector Riccati equations plus the driven
//!   equations for `γ` and the phase `α`.
//! - [`symplectic`]: the one-form, two-form and Poisson structure on ray
//!   space, the classical Hamiltonian and its flow.
//! - [`phase`]: total, dynamical and geometric phases for Schrödinger
//!   trajectories and for arbitrary curves.
//! - [`rng`]: the portable seeded generator behind every "random" input.

pub mod coset;
pub mod dynamics;
pub mod error;
pub mod matcore;
pub mod phase;
pub mod riccati;
pub mod rng;
pub mod symplectic;

pub use error::{Error, Result};
pub use matcore::{CMat, CVec, ToleranceProfile, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
