//! Deterministic and stochastic time integration, ensembles and sweeps.

mod ensemble;
mod ode;
mod sde;
mod sweep;

use nalgebra::{SVector, Vector3};

pub use ensemble::{run_ensemble, EnsembleSpec, EnsembleStats, FIDELITY_BINS};
pub use ode::{
    integrate_decoupled, integrate_ode, integrate_ode_at, integrate_ode_final, uniform_grid, IntegratorConfig,
    OdeSolution, Sampling,
};
pub(crate) use sde::trajectory_rng;
pub use sde::{integrate_sde, integrate_sde_with_path, NoisePath, SdeScheme, SdeSpec};
pub use sweep::{fidelity, run_sweep, sweep_ensemble, SweepNoise, SweepResult, DEFAULT_FIELD_RANGE};

/// Time series of Bloch (or ball) vectors with optional side channels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector3<f64>>,
    /// Radius `d(t)` when the radial equation is integrated alongside.
    pub radial: Option<Vec<f64>>,
    /// `ln⟨ψ|ψ⟩` for unnormalized evolutions.
    pub log_norm: Option<Vec<f64>>,
    /// Largest `|‖n‖ − 1|` seen before a renormalization.
    pub max_norm_drift: f64,
    pub steps: usize,
}

impl Trajectory {
    pub(crate) fn from_channels<const D: usize>(times: &[f64], states: &[SVector<f64, D>]) -> Self {
        assert!(D >= 3);
        Trajectory {
            times: times.to_vec(),
            states: states
                .iter()
                .map(|s| Vector3::new(s[0], s[1], s[2]))
                .collect(),
            ..Trajectory::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Vector3<f64> {
        *self.states.last().expect("empty trajectory")
    }

    pub fn max_nz(&self) -> f64 {
        self.states.iter().map(|n| n.z).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation; clamps outside the recorded span.
    pub fn interpolate(&self, t: f64) -> Vector3<f64> {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return self.states[0];
        }
        if idx == self.times.len() {
            return self.final_state();
        }
        let (ta, tb) = (self.times[idx - 1], self.times[idx]);
        let w = (t - ta) / (tb - ta);
        self.states[idx - 1] * (1.0 - w) + self.states[idx] * w
    }

    /// Times strictly increasing (or strictly decreasing for backward runs).
    pub fn is_monotone(&self) -> bool {
        let inc = self.times.windows(2).all(|w| w[1] > w[0]);
        let dec = self.times.windows(2).all(|w| w[1] < w[0]);
        inc || dec
    }
}
