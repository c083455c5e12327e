//! Dissipative two-spin adiabatic transport on the Bloch sphere.
//!
//! The two-spin Heisenberg dimer in the `|↓↑⟩, |↑↓⟩` subspace is a single
//! pseudospin. This crate integrates its coherent, noisy, averaged and biased
//! dynamics, cross-checks them against exact small-matrix evolution, and
//! extracts fixed points, spectra and dynamical free energies.

pub mod analysis;
pub mod error;
pub mod flows;
pub mod integrate;
pub mod oracle;
pub mod params;
pub mod spin;

pub use error::{DimerError, Result};
pub use flows::{BiasKind, BiasSpec, Domain, FieldForm, Flow, FlowField, NoiseSpec};
pub use params::{FieldSchedule, ModelParams, ScheduleKind};
pub use spin::{BallState, BlochVector, PseudoSpinState, TwoSpinState};
