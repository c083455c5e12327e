//! Adiabatic field sweeps from `|↑↓⟩` towards `|↓↑⟩`.

use nalgebra::Vector3;

use super::ensemble::{run_ensemble, EnsembleSpec, EnsembleStats};
use super::ode::integrate_ode_at;
use super::sde::{integrate_sde, SdeScheme, SdeSpec};
use super::{IntegratorConfig, Trajectory};
use crate::error::{DimerError, Result};
use crate::flows::{FlowField, NoiseSpec};
use crate::params::FieldSchedule;
use crate::spin::BlochVector;

/// Default sweep endpoints `±DEFAULT_FIELD_RANGE · J`.
pub const DEFAULT_FIELD_RANGE: f64 = 20.0;

/// Overlap `|⟨↓↑|ψ⟩|²` of the state with Bloch vector `n`.
pub fn fidelity(n: &Vector3<f64>) -> f64 {
    0.5 * (1.0 + n.z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub trajectory: Trajectory,
    pub final_fidelity: f64,
}

/// Stochastic part of a sweep: noise, fixed step and trajectory index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepNoise {
    pub noise: NoiseSpec,
    pub dt: f64,
    pub index: u64,
}

fn sweep_span(schedule: &FieldSchedule) -> Result<(f64, f64)> {
    schedule.validate()?;
    if schedule.duration <= 0.0 {
        return Err(DimerError::invalid("T", "sweep needs a ramp with positive duration"));
    }
    Ok((0.0, schedule.duration))
}

/// One sweep over `[0, schedule.duration]`, recorded on `samples` uniform points.
///
/// Without noise the adaptive ODE solver is used; with noise the stochastic Heun
/// scheme at the given step.
pub fn run_sweep(
    j: f64,
    schedule: &FieldSchedule,
    noise: Option<SweepNoise>,
    n0: BlochVector,
    cfg: &IntegratorConfig,
    samples: usize,
) -> Result<SweepResult> {
    let t_span = sweep_span(schedule)?;
    let samples = samples.max(2);
    let trajectory = match noise {
        None => {
            let field = FlowField::Unitary {
                j,
                schedule: *schedule,
            };
            let grid = super::uniform_grid(t_span.0, t_span.1, samples);
            integrate_ode_at(&field, n0.into_vector(), t_span.0, &grid, cfg)?
        }
        Some(sn) => {
            let spec = SdeSpec {
                j,
                schedule: *schedule,
                noise: sn.noise,
                n0,
                dt: sn.dt,
                t_span,
                scheme: SdeScheme::Heun,
            };
            let every = (spec.step_count() / (samples - 1)).max(1);
            integrate_sde(&spec, sn.index, every)?
        }
    };
    let final_fidelity = fidelity(&trajectory.final_state());
    Ok(SweepResult {
        trajectory,
        final_fidelity,
    })
}

/// Noisy sweeps of `n` trajectories starting at `|↑↓⟩`.
pub fn sweep_ensemble(
    j: f64,
    schedule: &FieldSchedule,
    noise: NoiseSpec,
    dt: f64,
    n: u64,
    workers: usize,
) -> Result<EnsembleStats> {
    let t_span = sweep_span(schedule)?;
    let spec = EnsembleSpec::new(
        SdeSpec {
            j,
            schedule: *schedule,
            noise,
            n0: BlochVector::SOUTH,
            dt,
            t_span,
            scheme: SdeScheme::Heun,
        },
        101,
    );
    run_ensemble(&spec, n, noise.master_seed, workers)
}
