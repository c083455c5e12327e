//! Biased pseudospin evolution `i∂ψ = (H − iκB)ψ` with `H = ½(J T_x + h T_z)`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use super::minus_i_times;
use crate::error::{DimerError, Result};
use crate::flows::BiasKind;
use crate::integrate::Trajectory;
use crate::params::FieldSchedule;
use crate::spin::{t_x, t_z, PseudoSpinState};

/// Pseudospin Hamiltonian parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoSpinHamiltonian {
    pub j: f64,
    pub schedule: FieldSchedule,
}

impl PseudoSpinHamiltonian {
    pub fn constant(j: f64, h: f64) -> Self {
        PseudoSpinHamiltonian {
            j,
            schedule: FieldSchedule::constant(h),
        }
    }
}

/// `H = ½(J T_x + h T_z)`: the Bloch vector precesses as `ṅ = (J x̂ + h ẑ) × n`.
pub fn pseudospin_hamiltonian(j: f64, h: f64) -> Matrix2<Complex64> {
    (t_x() * Complex64::from(j) + t_z() * Complex64::from(h)) * Complex64::from(0.5)
}

/// Bias operator for a state with `⟨T_z⟩ = mz`: `T_z` (linear) or `(T_z − mz)²` (variance).
pub fn bias_operator(kind: BiasKind, mz: f64) -> Matrix2<Complex64> {
    match kind {
        BiasKind::Linear => t_z(),
        BiasKind::Variance => {
            let shifted = t_z() - Matrix2::identity() * Complex64::from(mz);
            shifted * shifted
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Fixed RK4 step.
    pub dt: f64,
    /// Keep every `record_every`-th step (the final step is always kept).
    pub record_every: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            dt: 1e-3,
            record_every: 1,
        }
    }
}

/// `ln⟨ψ|ψ⟩` of the biased evolution next to the running `−2κ∫⟨O⟩dt′`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogNormRecord {
    pub times: Vec<f64>,
    pub log_z: Vec<f64>,
    pub integral: Vec<f64>,
}

impl LogNormRecord {
    /// Largest `|log_z − integral|` over the record.
    pub fn max_mismatch(&self) -> f64 {
        self.log_z
            .iter()
            .zip(&self.integral)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Late-time slope of `log_z` between `t_end/2` and `t_end`.
    pub fn growth_rate(&self) -> f64 {
        let (t_end, l_end) = (
            *self.times.last().expect("non-empty record"),
            *self.log_z.last().expect("non-empty record"),
        );
        let t0 = self.times[0];
        let t_mid = 0.5 * (t0 + t_end);
        let k = self.times.partition_point(|&t| t < t_mid).min(self.times.len() - 1);
        if self.times[k] >= t_end {
            return (l_end - self.log_z[0]) / (t_end - t0);
        }
        (l_end - self.log_z[k]) / (t_end - self.times[k])
    }
}

/// Recorded pseudospin evolution. States are stored normalized; the norm of the
/// unnormalized evolution is carried by `log_norm.log_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSpinEvolution {
    pub times: Vec<f64>,
    pub states: Vec<PseudoSpinState>,
    pub log_norm: LogNormRecord,
}

impl PseudoSpinEvolution {
    pub fn bloch_trace(&self) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(|s| s.expectation_vector()).collect(),
            log_norm: Some(self.log_norm.log_z.clone()),
            steps: self.times.len().saturating_sub(1),
            ..Trajectory::default()
        }
    }

    /// Unnormalized state at record `i`.
    pub fn unnormalized(&self, i: usize) -> Vector2<Complex64> {
        self.states[i].to_vector() * Complex64::from((0.5 * self.log_norm.log_z[i]).exp())
    }
}

fn expectation(op: &Matrix2<Complex64>, psi: &Vector2<Complex64>) -> f64 {
    (psi.adjoint() * op * psi)[(0, 0)].re / psi.norm_squared()
}

/// Observable value `⟨O⟩` for the normalized state: `n_z` or `1 − n_z²`.
fn observable(kind: BiasKind, psi: &Vector2<Complex64>) -> f64 {
    kind.observable(expectation(&t_z(), psi))
}

/// Evolves `psi0` under `i∂ψ = (H − iκB)ψ`.
///
/// With `normalize = false`, `B = O` and `ln⟨ψ|ψ⟩` grows as `−2κ⟨O⟩`. With
/// `normalize = true`, `B = O − ⟨O⟩`, which preserves the norm. In both modes
/// the state is rescaled to unit norm after every step and the logarithm of the
/// removed factor is accumulated, so neither overflow nor underflow can occur.
pub fn evolve_pseudospin(
    ham: &PseudoSpinHamiltonian,
    bias: Option<BiasKind>,
    kappa: f64,
    psi0: &PseudoSpinState,
    t_span: (f64, f64),
    normalize: bool,
    cfg: &OracleConfig,
) -> Result<PseudoSpinEvolution> {
    if !psi0.is_normalized() {
        return Err(DimerError::NotNormalized {
            norm_sqr: psi0.norm_sqr(),
        });
    }
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(DimerError::invalid("dt", "must be > 0"));
    }
    if !(t_span.1 > t_span.0) {
        return Err(DimerError::invalid("t_span", "end must exceed start"));
    }
    if !kappa.is_finite() {
        return Err(DimerError::invalid("kappa", "must be finite"));
    }
    ham.schedule.validate()?;

    let steps = (((t_span.1 - t_span.0) / cfg.dt).round() as usize).max(1);
    let dt = (t_span.1 - t_span.0) / steps as f64;
    let every = cfg.record_every.max(1);

    // Returns (ψ̇, d/dt of the −2κ∫⟨O⟩ channel).
    let rhs = |t: f64, psi: &Vector2<Complex64>| -> (Vector2<Complex64>, f64) {
        let h = pseudospin_hamiltonian(ham.j, ham.schedule.field_at(t));
        let mut dpsi = minus_i_times(&h, psi);
        let mut dint = 0.0;
        if let Some(kind) = bias {
            let mz = expectation(&t_z(), psi);
            let mut b = bias_operator(kind, mz);
            let o = observable(kind, psi);
            if normalize {
                b -= Matrix2::identity() * Complex64::from(o);
            }
            dpsi -= (b * psi) * Complex64::from(kappa);
            dint = -2.0 * kappa * o;
        }
        (dpsi, dint)
    };

    let mut psi = psi0.to_vector();
    let mut log_z = 0.0;
    let mut integral = 0.0;
    let mut out = PseudoSpinEvolution {
        times: vec![t_span.0],
        states: vec![*psi0],
        log_norm: LogNormRecord {
            times: vec![t_span.0],
            log_z: vec![0.0],
            integral: vec![0.0],
        },
    };
    let half = Complex64::from(0.5 * dt);
    let full = Complex64::from(dt);
    for k in 0..steps {
        let t = t_span.0 + k as f64 * dt;
        let (k1, i1) = rhs(t, &psi);
        let (k2, i2) = rhs(t + 0.5 * dt, &(psi + k1 * half));
        let (k3, i3) = rhs(t + 0.5 * dt, &(psi + k2 * half));
        let (k4, i4) = rhs(t + dt, &(psi + k3 * full));
        psi += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4)
            * Complex64::from(dt / 6.0);
        integral += (i1 + 2.0 * i2 + 2.0 * i3 + i4) * dt / 6.0;
        let norm_sqr = psi.norm_squared();
        if !(norm_sqr.is_finite() && norm_sqr > 0.0) {
            return Err(DimerError::NotNormalized { norm_sqr });
        }
        log_z += norm_sqr.ln();
        psi /= Complex64::from(norm_sqr.sqrt());

        if (k + 1) % every == 0 || k + 1 == steps {
            let t_next = if k + 1 == steps {
                t_span.1
            } else {
                t_span.0 + (k + 1) as f64 * dt
            };
            out.times.push(t_next);
            out.states.push(PseudoSpinState::from_vector(psi));
            out.log_norm.times.push(t_next);
            out.log_norm.log_z.push(log_z);
            out.log_norm.integral.push(integral);
        }
    }
    Ok(out)
}
