//! Full 4×4 dimer evolution with a staggered (optionally noisy) z-field.

use nalgebra::{Matrix2, Matrix4, Vector3};
use num_complex::Complex64;

use super::pseudospin::OracleConfig;
use super::{minus_i_times, rk4_step};
use crate::error::{DimerError, Result};
use crate::integrate::{NoisePath, Trajectory};
use crate::params::FieldSchedule;
use crate::spin::{project_two_spin, TwoSpinState};

fn pauli() -> [Matrix2<Complex64>; 3] {
    let (o, l, i) = (
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    [
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

/// `H = (J/4) σ₁·σ₂ + (h/2)(σ₂ᶻ − σ₁ᶻ)/2` in the basis `(|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩)`.
///
/// Restricted to `(|↓↑⟩, |↑↓⟩)` this is `½(J T_x + h T_z)` up to the constant `−J/4`.
pub fn two_spin_hamiltonian(j: f64, h: f64) -> Matrix4<Complex64> {
    let s = pauli();
    let id = Matrix2::<Complex64>::identity();
    let mut exchange = Matrix4::zeros();
    for p in &s {
        exchange += p.kronecker(p);
    }
    let staggered = id.kronecker(&s[2]) - s[2].kronecker(&id);
    exchange * Complex64::from(0.25 * j) + staggered * Complex64::from(0.25 * h)
}

/// z-noise realization: `η(t) = amplitude · ΔW_k / dt` on step `k`.
#[derive(Debug, Clone, Copy)]
pub struct ZNoise<'a> {
    pub amplitude: f64,
    pub path: &'a NoisePath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSpinEvolution {
    pub times: Vec<f64>,
    pub states: Vec<TwoSpinState>,
    /// Norm outside the zero-magnetization subspace at each record.
    pub residuals: Vec<f64>,
}

impl TwoSpinEvolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Bloch vectors of the pseudospin part.
    pub fn projected_trace(&self) -> Result<Trajectory> {
        let states = self
            .states
            .iter()
            .map(|s| project_two_spin(s).map(|(psi, _)| psi.expectation_vector()))
            .collect::<Result<Vec<Vector3<f64>>>>()?;
        Ok(Trajectory {
            times: self.times.clone(),
            states,
            steps: self.times.len().saturating_sub(1),
            ..Trajectory::default()
        })
    }
}

/// Integrates `i∂Ψ = H(t)Ψ` with RK4.
///
/// Without noise the step is `cfg.dt`. With noise the path fixes the outer step
/// (the field is piecewise constant in `η`) and each outer step is split into
/// enough RK4 substeps to keep them no longer than `cfg.dt`.
pub fn evolve_two_spin(
    j: f64,
    schedule: &FieldSchedule,
    noise: Option<ZNoise<'_>>,
    psi0: &TwoSpinState,
    t_span: (f64, f64),
    cfg: &OracleConfig,
) -> Result<TwoSpinEvolution> {
    if (psi0.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(DimerError::NotNormalized {
            norm_sqr: psi0.norm_sqr(),
        });
    }
    if !(t_span.1 > t_span.0) {
        return Err(DimerError::invalid("t_span", "end must exceed start"));
    }
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(DimerError::invalid("dt", "must be > 0"));
    }
    schedule.validate()?;
    let span = t_span.1 - t_span.0;
    let (outer_steps, outer_dt) = match noise {
        Some(z) => {
            let steps = ((span / z.path.dt).round() as usize).max(1);
            if z.path.increments.len() < steps {
                return Err(DimerError::invalid(
                    "noise path",
                    format!("{} increments for {steps} steps", z.path.increments.len()),
                ));
            }
            (steps, span / steps as f64)
        }
        None => {
            let steps = ((span / cfg.dt).round() as usize).max(1);
            (steps, span / steps as f64)
        }
    };
    let substeps = (outer_dt / cfg.dt).ceil().max(1.0) as usize;
    let inner_dt = outer_dt / substeps as f64;
    let every = cfg.record_every.max(1);

    let mut psi = psi0.amps;
    let mut out = TwoSpinEvolution {
        times: vec![t_span.0],
        states: vec![*psi0],
        residuals: vec![psi0.subspace_residual()],
    };
    for k in 0..outer_steps {
        let eta = noise.map_or(0.0, |z| z.amplitude * z.path.rate(k));
        let rhs = |t: f64, v: &nalgebra::Vector4<Complex64>| {
            minus_i_times(&two_spin_hamiltonian(j, schedule.field_at(t) + eta), v)
        };
        let t_outer = t_span.0 + k as f64 * outer_dt;
        for m in 0..substeps {
            psi = rk4_step(&rhs, t_outer + m as f64 * inner_dt, &psi, inner_dt);
        }
        if (k + 1) % every == 0 || k + 1 == outer_steps {
            let state = TwoSpinState::new(psi);
            out.times.push(if k + 1 == outer_steps {
                t_span.1
            } else {
                t_span.0 + (k + 1) as f64 * outer_dt
            });
            out.residuals.push(state.subspace_residual());
            out.states.push(state);
        }
    }
    Ok(out)
}
