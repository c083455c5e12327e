//! Noisy precession on the sphere.
//!
//! `dn = (J x̂ + h(t) ẑ) × n dt + σ (ẑ × n) ∘ dW` in the Stratonovich sense,
//! `σ² = variance_rate`. Every trajectory draws its Wiener increments from a
//! ChaCha8 stream selected by `(master_seed, trajectory index)`, so a
//! trajectory is reproducible bit-for-bit no matter which worker runs it.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{DimerError, Result};
use crate::flows::{ito_correction, unitary_field, NoiseSpec};
use crate::params::FieldSchedule;
use crate::spin::BlochVector;

const Z_HAT: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeScheme {
    /// Stochastic Heun: Stratonovich-consistent predictor–corrector.
    #[default]
    Heun,
    /// Euler–Maruyama on the Ito form (explicit drift correction). Cross-check only.
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeSpec {
    pub j: f64,
    pub schedule: FieldSchedule,
    pub noise: NoiseSpec,
    pub n0: BlochVector,
    pub dt: f64,
    pub t_span: (f64, f64),
    pub scheme: SdeScheme,
}

impl SdeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DimerError::invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_span.1 > self.t_span.0) {
            return Err(DimerError::invalid("t_span", "end must exceed start"));
        }
        if !(self.noise.variance_rate.is_finite() && self.noise.variance_rate >= 0.0) {
            return Err(DimerError::invalid("variance_rate", "must be >= 0"));
        }
        self.schedule.validate()
    }

    /// Number of steps; the step is shrunk slightly so they tile the span exactly.
    pub fn step_count(&self) -> usize {
        let span = self.t_span.1 - self.t_span.0;
        ((span / self.dt).round() as usize).max(1)
    }

    pub fn effective_dt(&self) -> f64 {
        (self.t_span.1 - self.t_span.0) / self.step_count() as f64
    }
}

/// Wiener increments of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl NoisePath {
    pub fn generate(master_seed: u64, index: u64, steps: usize, dt: f64) -> Self {
        let mut rng = trajectory_rng(master_seed, index);
        let sqrt_dt = dt.sqrt();
        let increments = (0..steps)
            .map(|_| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                xi * sqrt_dt
            })
            .collect();
        NoisePath { dt, increments }
    }

    /// Constant noise value `ΔW/dt` on step `k`, as seen by a piecewise-constant solver.
    pub fn rate(&self, k: usize) -> f64 {
        self.increments[k] / self.dt
    }
}

pub(crate) fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn heun_step(
    n: &Vector3<f64>,
    t: f64,
    dt: f64,
    dw: f64,
    spec: &SdeSpec,
) -> Vector3<f64> {
    let sigma = spec.noise.amplitude();
    let h0 = spec.schedule.field_at(t);
    let h1 = spec.schedule.field_at(t + dt);
    let f0 = unitary_field(n, spec.j, h0);
    let g0 = sigma * Z_HAT.cross(n);
    let pred = n + f0 * dt + g0 * dw;
    let f1 = unitary_field(&pred, spec.j, h1);
    let g1 = sigma * Z_HAT.cross(&pred);
    let next = n + (f0 + f1) * (0.5 * dt) + (g0 + g1) * (0.5 * dw);
    next / next.norm()
}

fn euler_maruyama_step(
    n: &Vector3<f64>,
    t: f64,
    dt: f64,
    dw: f64,
    spec: &SdeSpec,
) -> Vector3<f64> {
    let sigma = spec.noise.amplitude();
    let drift = unitary_field(n, spec.j, spec.schedule.field_at(t)) + ito_correction(n, &spec.noise);
    let next = n + drift * dt + sigma * Z_HAT.cross(n) * dw;
    next / next.norm()
}

/// Steps the SDE and hands every state (including the initial one) to `visit`.
pub(crate) fn drive<I, V>(spec: &SdeSpec, increments: I, mut visit: V) -> Vector3<f64>
where
    I: IntoIterator<Item = f64>,
    V: FnMut(f64, &Vector3<f64>),
{
    let steps = spec.step_count();
    let dt = spec.effective_dt();
    let t0 = spec.t_span.0;
    let mut n = spec.n0.into_vector();
    visit(t0, &n);
    for (k, dw) in increments.into_iter().take(steps).enumerate() {
        let t = t0 + k as f64 * dt;
        n = match spec.scheme {
            SdeScheme::Heun => heun_step(&n, t, dt, dw, spec),
            SdeScheme::EulerMaruyama => euler_maruyama_step(&n, t, dt, dw, spec),
        };
        let t_next = if k + 1 == steps {
            spec.t_span.1
        } else {
            t0 + (k + 1) as f64 * dt
        };
        visit(t_next, &n);
    }
    n
}

/// Increment stream of trajectory `index`, drawn lazily.
pub(crate) fn increments(spec: &SdeSpec, index: u64) -> impl Iterator<Item = f64> {
    let mut rng = trajectory_rng(spec.noise.master_seed, index);
    let sqrt_dt = spec.effective_dt().sqrt();
    std::iter::repeat_with(move || {
        let xi: f64 = StandardNormal.sample(&mut rng);
        xi * sqrt_dt
    })
}

/// One stochastic trajectory, recorded every `record_every` steps (and at the end).
pub fn integrate_sde(spec: &SdeSpec, index: u64, record_every: usize) -> Result<Trajectory> {
    spec.validate()?;
    Ok(record(spec, increments(spec, index), record_every))
}

/// Same as [`integrate_sde`] with explicitly supplied increments.
pub fn integrate_sde_with_path(
    spec: &SdeSpec,
    path: &NoisePath,
    record_every: usize,
) -> Result<Trajectory> {
    spec.validate()?;
    if path.increments.len() < spec.step_count() {
        return Err(DimerError::invalid(
            "noise path",
            format!(
                "{} increments for {} steps",
                path.increments.len(),
                spec.step_count()
            ),
        ));
    }
    if (path.dt - spec.effective_dt()).abs() > 1e-15 * spec.effective_dt().max(1.0) {
        return Err(DimerError::invalid("noise path", "dt does not match the SDE step"));
    }
    Ok(record(spec, path.increments.iter().copied(), record_every))
}

fn record<I: IntoIterator<Item = f64>>(spec: &SdeSpec, incs: I, record_every: usize) -> Trajectory {
    let every = record_every.max(1);
    let steps = spec.step_count();
    let mut traj = Trajectory::default();
    let mut k = 0usize;
    drive(spec, incs, |t, n| {
        if k.is_multiple_of(every) || k == steps {
            traj.times.push(t);
            traj.states.push(*n);
        }
        k += 1;
    });
    traj.steps = steps;
    traj
}
