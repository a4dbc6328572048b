//! Feedback control of quantum systems using only measurement back-action.
//!
//! A qubit (or N-level system) is steered toward a target state purely by
//! adapting *which* observable is continuously measured, and how strongly.
//! Measuring perpendicular to the Bloch vector with strength `k = κδ²`
//! produces a diffusion gradient in the distance `δ` to the target, and the
//! gradient acts like a restoring force.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: Bloch vectors, reduced `(δ, a)` coordinates, the adaptive
//!   measurement axis and the error probability.
//! - [`sde`]: reproducible Wiener streams, Euler–Maruyama stepping, circle
//!   topology and (importance-weighted) trajectory drivers.
//! - [`protocols`]: the reduced stochastic models and the measurement /
//!   Hamiltonian feedback laws for the four protocols.
//! - [`sme`]: full stochastic master equation integration for qubits and
//!   N-level systems.
//! - [`fokker_planck`]: a conservative finite-volume Fokker–Planck solver used
//!   used as an independent check on the Monte Carlo results.
//! - [`analysis`]: ensemble statistics, rate fits, first passage times,
//!   steady-state estimation and the optimal-`k` sweep.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fokker_planck;
pub mod numeric;
pub mod protocols;
pub mod quantum;
pub mod sde;
pub mod sme;

pub use error::{Error, Result};

/// Shared tolerance for algebraic identities (norms, traces, Hermiticity).
pub const EPS_NUM: f64 = 1e-9;
