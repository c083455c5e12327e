//! Right-hand sides of every dynamical regime of the dimer.
//!
//! All sphere flows here are tangent: `f(n)·n = 0` for unit `n`. The
//! "as-printed" variants reproduce alternative published forms for comparison
//! only; they are not tangent or not consistent with the averaged dynamics, and
//! the calibration report quantifies by how much.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{DimerError, Result};
use crate::params::{FieldSchedule, ModelParams};

const X_HAT: Vector3<f64> = Vector3::new(1.0, 0.0, 0.0);
const Z_HAT: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// White z-noise `η̃` with `⟨η̃(t)η̃(t′)⟩ = variance_rate · δ(t − t′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance_rate: f64,
    pub master_seed: u64,
}

impl NoiseSpec {
    /// Intensity `2γ`: the Stratonovich-to-Ito correction of the noisy
    /// precession then equals the dephasing term of the averaged flow.
    pub fn from_params(params: &ModelParams, master_seed: u64) -> Self {
        NoiseSpec {
            variance_rate: 2.0 * params.gamma,
            master_seed,
        }
    }

    pub fn silent() -> Self {
        NoiseSpec {
            variance_rate: 0.0,
            master_seed: 0,
        }
    }

    /// Dephasing rate `γ` this noise generates on average.
    pub fn gamma(&self) -> f64 {
        0.5 * self.variance_rate
    }

    pub fn amplitude(&self) -> f64 {
        self.variance_rate.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    /// Bias by the Schmidt gap `τ_z`.
    Linear,
    /// Bias by the variance `(τ_z − ⟨τ_z⟩)²`, i.e. the concurrence.
    Variance,
}

impl BiasKind {
    /// Expectation of the biasing observable on a pure state with polar component `nz`.
    pub fn observable(self, nz: f64) -> f64 {
        match self {
            BiasKind::Linear => nz,
            BiasKind::Variance => 1.0 - nz * nz,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BiasKind::Linear => "linear",
            BiasKind::Variance => "variance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    pub kind: BiasKind,
    pub s: f64,
}

impl BiasSpec {
    pub fn new(kind: BiasKind, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(DimerError::invalid("s", format!("bias must be >= 0, got {s}")));
        }
        Ok(BiasSpec { kind, s })
    }

    pub fn linear(s: f64) -> Self {
        BiasSpec {
            kind: BiasKind::Linear,
            s,
        }
    }

    pub fn variance(s: f64) -> Self {
        BiasSpec {
            kind: BiasKind::Variance,
            s,
        }
    }
}

/// Precession `ṅ = (J x̂ + h ẑ) × n`.
pub fn unitary_field(n: &Vector3<f64>, j: f64, h: f64) -> Vector3<f64> {
    Vector3::new(j, 0.0, h).cross(n)
}

/// Noise-averaged flow inside the ball: `ṅ̄ = J x̂ × n̄ − γ ẑ × (n̄ × ẑ)`.
pub fn lindblad_field(nbar: &Vector3<f64>, j: f64, gamma: f64) -> Vector3<f64> {
    j * X_HAT.cross(nbar) - gamma * Vector3::new(nbar.x, nbar.y, 0.0)
}

/// Direction part of the averaged flow: `ṅ = J x̂ × n + γ n_z (ẑ − n_z n)`.
pub fn angular_field(n: &Vector3<f64>, j: f64, gamma: f64) -> Vector3<f64> {
    j * X_HAT.cross(n) + gamma * n.z * (Z_HAT - n.z * n)
}

/// Radial part of the averaged flow: `ḋ = −γ d (1 − n_z²)`.
pub fn radial_rate(nz: f64, d: f64, gamma: f64) -> f64 {
    -gamma * d * (1.0 - nz * nz)
}

/// Normalized dynamics of the biased ensemble.
///
/// linear: `ṅ = J x̂ × n + s (n_z n − ẑ)`;
/// variance: `ṅ = J x̂ × n + s n_z (ẑ − n_z n)`, identical to [`angular_field`] with `γ = s`.
pub fn biased_field(n: &Vector3<f64>, j: f64, bias: &BiasSpec) -> Vector3<f64> {
    let precession = j * X_HAT.cross(n);
    match bias.kind {
        BiasKind::Linear => precession + bias.s * (n.z * n - Z_HAT),
        BiasKind::Variance => precession + bias.s * n.z * (Z_HAT - n.z * n),
    }
}

/// Terms of the Stratonovich SDE `dn = drift dt + amplitude (ẑ × n) ∘ dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeTerms {
    pub drift: Vector3<f64>,
    pub diffusion_direction: Vector3<f64>,
    pub amplitude: f64,
}

pub fn sde_terms(n: &Vector3<f64>, j: f64, h: f64, noise: &NoiseSpec) -> SdeTerms {
    SdeTerms {
        drift: unitary_field(n, j, h),
        diffusion_direction: Z_HAT.cross(n),
        amplitude: noise.amplitude(),
    }
}

/// Ito drift correction `½ σ² ẑ × (ẑ × n)` of the z-noise with `σ² = variance_rate`.
pub fn ito_correction(n: &Vector3<f64>, noise: &NoiseSpec) -> Vector3<f64> {
    -0.5 * noise.variance_rate * Vector3::new(n.x, n.y, 0.0)
}

/// Which published variant of a flow to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldForm {
    #[default]
    Canonical,
    AsPrinted,
}

/// `−γ n_z n × (ẑ × n)`: opposite in sign to the canonical angular term.
pub fn printed_angular_field(n: &Vector3<f64>, j: f64, gamma: f64) -> Vector3<f64> {
    j * X_HAT.cross(n) - gamma * n.z * n.cross(&Z_HAT.cross(n))
}

/// `ḋ = −γ (1 − n_z²)` without the factor `d`.
pub fn printed_radial_rate(nz: f64, gamma: f64) -> f64 {
    -gamma * (1.0 - nz * nz)
}

/// `J x̂ × n − s₁ n_z ẑ × (ẑ × n) − s₂ n_z n × (ẑ × n)`. The `s₁` term is not tangent.
pub fn printed_biased_field(n: &Vector3<f64>, j: f64, s1: f64, s2: f64) -> Vector3<f64> {
    j * X_HAT.cross(n) - s1 * n.z * Z_HAT.cross(&Z_HAT.cross(n)) - s2 * n.z * n.cross(&Z_HAT.cross(n))
}

/// Whether a flow lives on the unit sphere or inside the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Sphere,
    Ball,
}

/// A (possibly time-dependent) vector field on the sphere or ball.
pub trait Flow: Sync {
    fn velocity(&self, t: f64, n: &Vector3<f64>) -> Vector3<f64>;

    fn domain(&self) -> Domain {
        Domain::Sphere
    }
}

/// Every flow of the model, selectable at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowField {
    Unitary { j: f64, schedule: FieldSchedule },
    Lindblad { j: f64, gamma: f64 },
    Angular { j: f64, gamma: f64, form: FieldForm },
    Biased { j: f64, bias: BiasSpec, form: FieldForm },
}

impl FlowField {
    pub fn unitary(j: f64, h: f64) -> Self {
        FlowField::Unitary {
            j,
            schedule: FieldSchedule::constant(h),
        }
    }

    pub fn lindblad(j: f64, gamma: f64) -> Self {
        FlowField::Lindblad { j, gamma }
    }

    pub fn angular(j: f64, gamma: f64) -> Self {
        FlowField::Angular {
            j,
            gamma,
            form: FieldForm::Canonical,
        }
    }

    pub fn biased(j: f64, bias: BiasSpec) -> Self {
        FlowField::Biased {
            j,
            bias,
            form: FieldForm::Canonical,
        }
    }
}

impl Flow for FlowField {
    fn velocity(&self, t: f64, n: &Vector3<f64>) -> Vector3<f64> {
        match *self {
            FlowField::Unitary { j, schedule } => unitary_field(n, j, schedule.field_at(t)),
            FlowField::Lindblad { j, gamma } => lindblad_field(n, j, gamma),
            FlowField::Angular {
                j,
                gamma,
                form: FieldForm::Canonical,
            } => angular_field(n, j, gamma),
            FlowField::Angular {
                j,
                gamma,
                form: FieldForm::AsPrinted,
            } => printed_angular_field(n, j, gamma),
            FlowField::Biased {
                j,
                bias,
                form: FieldForm::Canonical,
            } => biased_field(n, j, &bias),
            FlowField::Biased {
                j,
                bias,
                form: FieldForm::AsPrinted,
            } => match bias.kind {
                BiasKind::Linear => printed_biased_field(n, j, bias.s, 0.0),
                BiasKind::Variance => printed_biased_field(n, j, 0.0, bias.s),
            },
        }
    }

    fn domain(&self) -> Domain {
        match self {
            FlowField::Lindblad { .. } => Domain::Ball,
            _ => Domain::Sphere,
        }
    }
}
