//! Whether trajectories from the south pole reach the northern hemisphere.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{DimerError, Result};
use crate::flows::Flow;
use crate::integrate::{integrate_ode, trajectory_rng, IntegratorConfig};
use crate::spin::BlochVector;

/// A trajectory is connected once `n_z` exceeds this value.
pub const CONNECTIVITY_THRESHOLD: f64 = 0.5;
/// Offset of the start state from the south pole along `+ŷ`.
pub const START_DISPLACEMENT: f64 = 1e-6;
/// Default horizon in units of `1/J`.
pub const DEFAULT_HORIZON: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectivityReport {
    pub connected: bool,
    pub max_nz: f64,
    pub horizon: f64,
}

fn max_nz_from<F: Flow + ?Sized>(field: &F, start: BlochVector, horizon: f64) -> Result<f64> {
    let traj = integrate_ode(field, start.into_vector(), (0.0, horizon), &IntegratorConfig::default())?;
    Ok(traj.max_nz())
}

/// Integrates from the displaced south pole up to `horizon` and records the
/// highest `n_z` reached.
pub fn disconnection_test<F: Flow + ?Sized>(field: &F, horizon: f64) -> Result<ConnectivityReport> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(DimerError::invalid("horizon", "must be > 0"));
    }
    let max_nz = max_nz_from(field, BlochVector::displaced_south(START_DISPLACEMENT), horizon)?;
    Ok(ConnectivityReport {
        connected: max_nz > CONNECTIVITY_THRESHOLD,
        max_nz,
        horizon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentReport {
    pub trajectories: usize,
    /// Start states with `n_z` at or below this value were drawn uniformly.
    pub cap_nz: f64,
    pub escaped: usize,
    pub max_nz: f64,
}

/// Seeds `count` trajectories uniformly in the polar cap `n_z ≤ cap_nz` and
/// counts those that ever reach `n_z > 0`.
pub fn separatrix_containment<F: Flow + ?Sized>(
    field: &F,
    count: usize,
    cap_nz: f64,
    seed: u64,
    horizon: f64,
) -> Result<ContainmentReport> {
    if !(-1.0..0.0).contains(&cap_nz) {
        return Err(DimerError::invalid("cap_nz", "must lie in [-1, 0)"));
    }
    let mut rng = trajectory_rng(seed, 0);
    let starts: Vec<BlochVector> = (0..count)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..=cap_nz);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            BlochVector::from_angles(z.acos(), phi)
        })
        .collect();
    let maxima = starts
        .par_iter()
        .map(|s| max_nz_from(field, *s, horizon))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ContainmentReport {
        trajectories: count,
        cap_nz,
        escaped: maxima.iter().filter(|&&m| m > 0.0).count(),
        max_nz: maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
