//! Adaptive Dormand–Prince 5(4) integration with optional projection.
//!
//! The stepper works on fixed-size state vectors so that sphere flows can be
//! augmented with extra channels (radius, running integrals). A projection
//! hook runs after every accepted step; for sphere flows it rescales the
//! leading three components back to unit norm.

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{DimerError, Result};
use crate::flows::{angular_field, radial_rate, Domain, Flow};
use crate::spin::BallState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub renormalize: bool,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            dt_init: 1e-3,
            dt_max: 1.0,
            renormalize: true,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(DimerError::invalid("rel_tol/abs_tol", "tolerances must be > 0"));
        }
        if !(self.dt_init > 0.0 && self.dt_max > 0.0) {
            return Err(DimerError::invalid("dt_init/dt_max", "step sizes must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(DimerError::invalid("max_steps", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

/// Which instants to record.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Every accepted step, including the initial point.
    Steps,
    /// Exactly these instants, monotone in the direction of integration.
    /// Steps are shortened to land on them, so no interpolation is involved.
    At(Vec<f64>),
    /// Only the end point.
    Final,
}

#[derive(Debug, Clone)]
pub struct OdeSolution<const D: usize> {
    pub times: Vec<f64>,
    pub states: Vec<SVector<f64, D>>,
    pub steps: usize,
    pub rejected: usize,
    /// Largest correction applied by the projection hook.
    pub max_projection: f64,
}

pub(crate) struct Failure<const D: usize> {
    pub reason: String,
    pub partial: OdeSolution<D>,
    pub t_reached: f64,
}

impl<const D: usize> Failure<D> {
    /// Converts to the public error, keeping the first three channels.
    pub fn into_error(self) -> DimerError {
        let steps = self.partial.steps;
        let trajectory = Trajectory::from_channels(&self.partial.times, &self.partial.states);
        DimerError::NonConvergence {
            reason: self.reason,
            steps,
            t_reached: self.t_reached,
            partial: Box::new(trajectory),
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn combine<const D: usize>(
    y: &SVector<f64, D>,
    h: f64,
    coeffs: &[f64],
    k: &[SVector<f64, D>],
) -> SVector<f64, D> {
    let mut out = *y;
    for (c, ki) in coeffs.iter().zip(k) {
        if *c != 0.0 {
            out += ki * (h * c);
        }
    }
    out
}

/// Integrates `ẏ = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// `project` is applied after each accepted step and returns the size of the
/// correction it made.
pub(crate) fn solve<const D: usize, F, P>(
    rhs: F,
    y0: SVector<f64, D>,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut project: P,
    sampling: &Sampling,
) -> std::result::Result<OdeSolution<D>, Failure<D>>
where
    F: Fn(f64, &SVector<f64, D>) -> SVector<f64, D>,
    P: FnMut(&mut SVector<f64, D>) -> f64,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut sol = OdeSolution {
        times: Vec::new(),
        states: Vec::new(),
        steps: 0,
        rejected: 0,
        max_projection: 0.0,
    };

    let targets: Vec<f64> = match sampling {
        Sampling::At(ts) => ts.clone(),
        _ => Vec::new(),
    };
    let mut next_target = 0;
    // Samples at (or before) the starting point.
    while next_target < targets.len() && dir * (targets[next_target] - t0) <= 0.0 {
        sol.times.push(targets[next_target]);
        sol.states.push(y0);
        next_target += 1;
    }
    if matches!(sampling, Sampling::Steps) {
        sol.times.push(t0);
        sol.states.push(y0);
    }

    let mut t = t0;
    let mut y = y0;
    if span == 0.0 {
        if matches!(sampling, Sampling::Final) {
            sol.times.push(t);
            sol.states.push(y);
        }
        return Ok(sol);
    }

    let mut h = cfg.dt_init.min(cfg.dt_max).min(span);
    let mut k: [SVector<f64, D>; 7] = [SVector::zeros(); 7];
    k[0] = rhs(t, &y);
    let mut attempts = 0usize;

    loop {
        let remaining = (t1 - t).abs();
        if remaining <= 1e-15 * span.max(1.0) {
            break;
        }
        attempts += 1;
        if attempts > cfg.max_steps {
            return Err(Failure {
                reason: format!("max_steps = {} exceeded", cfg.max_steps),
                partial: sol,
                t_reached: t,
            });
        }

        // Land exactly on the next requested sample or on t1.
        let mut step = h.min(remaining);
        let mut hits_target = false;
        if next_target < targets.len() {
            let to_target = dir * (targets[next_target] - t);
            if to_target <= step * (1.0 + 1e-12) {
                step = to_target;
                hits_target = true;
            }
        }
        let hs = dir * step;

        k[1] = rhs(t + C[1] * hs, &combine(&y, hs, &A2, &k[..1]));
        k[2] = rhs(t + C[2] * hs, &combine(&y, hs, &A3, &k[..2]));
        k[3] = rhs(t + C[3] * hs, &combine(&y, hs, &A4, &k[..3]));
        k[4] = rhs(t + C[4] * hs, &combine(&y, hs, &A5, &k[..4]));
        k[5] = rhs(t + C[5] * hs, &combine(&y, hs, &A6, &k[..5]));
        let y5 = combine(&y, hs, &B5, &k[..6]);
        let t_new = if hits_target {
            targets[next_target]
        } else if step == remaining {
            t1
        } else {
            t + hs
        };
        k[6] = rhs(t_new, &y5);

        let mut err_sq = 0.0;
        for i in 0..D {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * k[s][i];
            }
            e *= hs;
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y5[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / D as f64).sqrt();
        if !err.is_finite() {
            return Err(Failure {
                reason: "non-finite error estimate".into(),
                partial: sol,
                t_reached: t,
            });
        }

        if err <= 1.0 {
            t = t_new;
            y = y5;
            let correction = project(&mut y);
            sol.max_projection = sol.max_projection.max(correction);
            sol.steps += 1;
            // First-same-as-last unless the projection moved the state.
            k[0] = if correction == 0.0 { k[6] } else { rhs(t, &y) };

            if hits_target {
                sol.times.push(t);
                sol.states.push(y);
                next_target += 1;
                // Coincident duplicates.
                while next_target < targets.len() && targets[next_target] == t {
                    sol.times.push(t);
                    sol.states.push(y);
                    next_target += 1;
                }
            } else if matches!(sampling, Sampling::Steps) {
                sol.times.push(t);
                sol.states.push(y);
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // A step shortened to hit a sample says nothing about the natural step.
            if !hits_target || factor < 1.0 {
                h = (step * factor).min(cfg.dt_max);
            }
        } else {
            sol.rejected += 1;
            h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Failure {
                    reason: format!("step size underflow (h = {h:e})"),
                    partial: sol,
                    t_reached: t,
                });
            }
        }
    }

    if matches!(sampling, Sampling::Final) {
        sol.times.push(t);
        sol.states.push(y);
    }
    // Samples requested beyond the end of the span are not produced.
    Ok(sol)
}

/// Projection hook for sphere flows: rescales the leading three components.
pub(crate) fn renormalize_head<const D: usize>(y: &mut SVector<f64, D>) -> f64 {
    let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return 0.0;
    }
    let drift = (norm - 1.0).abs();
    if drift == 0.0 {
        return 0.0;
    }
    y[0] /= norm;
    y[1] /= norm;
    y[2] /= norm;
    drift
}

fn no_projection<const D: usize>(_: &mut SVector<f64, D>) -> f64 {
    0.0
}

fn run_flow<Fl: Flow + ?Sized>(
    field: &Fl,
    n0: Vector3<f64>,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    sampling: &Sampling,
) -> Result<Trajectory> {
    cfg.validate()?;
    let rhs = |t: f64, y: &Vector3<f64>| field.velocity(t, y);
    let sphere = field.domain() == Domain::Sphere;
    let outcome = if sphere && cfg.renormalize {
        solve(rhs, n0, t0, t1, cfg, renormalize_head::<3>, sampling)
    } else {
        solve(rhs, n0, t0, t1, cfg, no_projection::<3>, sampling)
    };
    let sol = outcome.map_err(Failure::into_error)?;
    let mut traj = Trajectory::from_channels(&sol.times, &sol.states);
    traj.max_norm_drift = sol.max_projection;
    traj.steps = sol.steps;
    Ok(traj)
}

/// Integrates a flow over `t_span`, recording every accepted step.
///
/// Sphere flows are projected back to `‖n‖ = 1` after each step when
/// `cfg.renormalize` is set; the largest pre-projection drift is kept in
/// [`Trajectory::max_norm_drift`].
pub fn integrate_ode<Fl: Flow + ?Sized>(
    field: &Fl,
    n0: Vector3<f64>,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    run_flow(field, n0, t_span.0, t_span.1, cfg, &Sampling::Steps)
}

/// Like [`integrate_ode`] but records the state exactly at `times`.
pub fn integrate_ode_at<Fl: Flow + ?Sized>(
    field: &Fl,
    n0: Vector3<f64>,
    t0: f64,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let t1 = *times
        .last()
        .ok_or_else(|| DimerError::invalid("times", "empty sample grid"))?;
    run_flow(field, n0, t0, t1, cfg, &Sampling::At(times.to_vec()))
}

/// Final state only.
pub fn integrate_ode_final<Fl: Flow + ?Sized>(
    field: &Fl,
    n0: Vector3<f64>,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Vector3<f64>> {
    let traj = run_flow(field, n0, t_span.0, t_span.1, cfg, &Sampling::Final)?;
    Ok(*traj.states.last().expect("final sample"))
}

/// Averaged dynamics from `t = 0`, split into direction and radius: `n` follows
/// [`angular_field`] on the sphere while `d` follows [`radial_rate`].
///
/// The ball vector is recovered as `d·n`; the radius is stored in
/// [`Trajectory::radial`].
pub fn integrate_decoupled(
    j: f64,
    gamma: f64,
    start: &BallState,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let t1 = *times
        .last()
        .ok_or_else(|| DimerError::invalid("times", "empty sample grid"))?;
    let n0 = start.n.into_vector();
    let y0 = SVector::<f64, 4>::new(n0.x, n0.y, n0.z, start.d);
    let rhs = |_t: f64, y: &SVector<f64, 4>| {
        let n = Vector3::new(y[0], y[1], y[2]);
        let v = angular_field(&n, j, gamma);
        SVector::<f64, 4>::new(v.x, v.y, v.z, radial_rate(n.z, y[3], gamma))
    };
    let sol = solve(rhs, y0, 0.0, t1, cfg, renormalize_head::<4>, &Sampling::At(times.to_vec()))
        .map_err(Failure::into_error)?;
    let mut traj = Trajectory::from_channels(&sol.times, &sol.states);
    traj.radial = Some(sol.states.iter().map(|y| y[3]).collect());
    traj.max_norm_drift = sol.max_projection;
    traj.steps = sol.steps;
    Ok(traj)
}

/// Uniform grid of `count` points covering `[t0, t1]`.
pub fn uniform_grid(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t1],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
