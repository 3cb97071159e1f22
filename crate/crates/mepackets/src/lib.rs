//! Maximum-entropy packets and their dynamics, in classical and quantum
//! mechanics, together with the measurement-side machinery they feed into:
//! a finite-dimensional density-operator engine, the solvable harmonic-chain
//! model of a rigid body, an ancilla-based joint position-momentum
//! measurement, and channel-based detector registration models.
//!
//! Every closed-form result carried by the library is cross-checked against
//! an independent numerical oracle (Monte Carlo ensembles, quadrature,
//! truncated-matrix propagation); the [`verify`] module bundles those checks
//! into a machine-readable report.

// negated comparisons like `!(x > 0.0)` are the NaN-rejecting guard used
// throughout the validators
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod joint_meas;
pub mod me_classical;
pub mod me_quantum;
pub mod qcore;
pub mod registration;
pub mod rigid_rod;
pub mod verify;

pub use error::{Error, Result};

/// Planck's reduced constant in the library's natural units.
///
/// All formulas carry hbar symbolically; this is only the default used when
/// a caller does not supply one.
pub const DEFAULT_HBAR: f64 = 1.0;
