//! Pseudospin states of the two-spin dimer.
//!
//! The zero-magnetization subspace is spanned by `|↓↑⟩` and `|↑↓⟩`. Amplitudes
//! are stored in that order, and the pseudospin matrices are fixed as
//!
//! ```text
//! T_x = [[0, 1], [1, 0]]    T_y = [[0, -i], [i, 0]]    T_z = diag(+1, -1)
//! ```
//!
//! so `[T_x, T_y] = 2i T_z` cyclically and every `T_k² = 1`. With this choice
//! `|↓↑⟩` is the north pole of the Bloch sphere and `|↑↓⟩` the south pole,
//! because `T_z = (σ₂ᶻ − σ₁ᶻ)/2` evaluates to `−1` on `|↑↓⟩`.

use nalgebra::{Matrix2, Vector3, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{DimerError, Result};

/// Tolerance on `‖n‖ = 1` accepted by [`BlochVector::new`].
pub const BLOCH_NORM_TOL: f64 = 1e-9;
/// Tolerance on `|n₁|² + |n₂|² = 1` for normalized spinors.
pub const SPINOR_NORM_TOL: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

pub fn t_x() -> Matrix2<Complex64> {
    Matrix2::new(C0, C1, C1, C0)
}

pub fn t_y() -> Matrix2<Complex64> {
    Matrix2::new(C0, -CI, CI, C0)
}

pub fn t_z() -> Matrix2<Complex64> {
    Matrix2::new(C1, C0, C0, -C1)
}

/// The three pseudospin matrices `(T_x, T_y, T_z)`.
pub fn pseudospin_matrices() -> [Matrix2<Complex64>; 3] {
    [t_x(), t_y(), t_z()]
}

/// Unit vector on the Bloch sphere: the direction of a pure pseudospin state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(Vector3<f64>);

impl BlochVector {
    pub const NORTH: BlochVector = BlochVector(Vector3::new(0.0, 0.0, 1.0));
    pub const SOUTH: BlochVector = BlochVector(Vector3::new(0.0, 0.0, -1.0));

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    /// Accepts `v` if it is a unit vector within [`BLOCH_NORM_TOL`].
    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if (norm - 1.0).abs() > BLOCH_NORM_TOL || !norm.is_finite() {
            return Err(DimerError::NotNormalized {
                norm_sqr: norm * norm,
            });
        }
        Ok(BlochVector(v))
    }

    /// Rescales any non-zero finite vector onto the sphere.
    pub fn normalize(v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(DimerError::NotNormalized {
                norm_sqr: norm * norm,
            });
        }
        Ok(BlochVector(v / norm))
    }

    /// Polar angle `θ ∈ [0, π]` measured from the north pole, azimuth `ϕ`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        BlochVector(Vector3::new(st * cp, st * sp, ct))
    }

    /// The south pole `|↑↓⟩` nudged by `offset` along `+ŷ` and renormalized.
    pub fn displaced_south(offset: f64) -> Self {
        let v = Vector3::new(0.0, offset, -1.0);
        BlochVector(v / v.norm())
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn into_vector(self) -> Vector3<f64> {
        self.0
    }

    pub fn polar(&self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).acos()
    }

    pub fn azimuth(&self) -> f64 {
        self.0.y.atan2(self.0.x)
    }
}

/// Averaged state inside the unit ball, split into a direction and a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallState {
    pub n: BlochVector,
    pub d: f64,
}

impl BallState {
    pub fn new(n: BlochVector, d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&d) {
            return Err(DimerError::invalid("d", format!("radius {d} outside [0, 1]")));
        }
        Ok(BallState { n, d })
    }

    /// Splits `n̄` into direction and radius. The origin maps to `d = 0` with
    /// the direction pinned to the south pole.
    pub fn from_ball_vector(nbar: Vector3<f64>) -> Result<Self> {
        let d = nbar.norm();
        if d > 1.0 + BLOCH_NORM_TOL {
            return Err(DimerError::invalid("nbar", format!("‖n̄‖ = {d} exceeds 1")));
        }
        if d == 0.0 {
            return Ok(BallState {
                n: BlochVector::SOUTH,
                d: 0.0,
            });
        }
        Ok(BallState {
            n: BlochVector(nbar / d),
            d: d.min(1.0),
        })
    }

    pub fn ball_vector(&self) -> Vector3<f64> {
        self.n.0 * self.d
    }

    /// Density matrix `½(1 + d n·T)` of the pseudospin.
    pub fn density_matrix(&self) -> Matrix2<Complex64> {
        let [tx, ty, tz] = pseudospin_matrices();
        let v = self.ball_vector();
        (Matrix2::identity() + tx * Complex64::from(v.x) + ty * Complex64::from(v.y)
            + tz * Complex64::from(v.z))
            * Complex64::from(0.5)
    }
}

/// Entanglement spinor `(n₁, n₂)` in the basis `(|↓↑⟩, |↑↓⟩)`.
///
/// Amplitudes are not forced to unit norm; operations that need a physical
/// state check normalization themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoSpinState {
    pub amps: [Complex64; 2],
}

impl PseudoSpinState {
    /// `|↓↑⟩`, the north pole.
    pub const DOWN_UP: PseudoSpinState = PseudoSpinState { amps: [C1, C0] };
    /// `|↑↓⟩`, the south pole and the initial state of the sweep.
    pub const UP_DOWN: PseudoSpinState = PseudoSpinState { amps: [C0, C1] };

    pub fn new(n1: Complex64, n2: Complex64) -> Self {
        PseudoSpinState { amps: [n1, n2] }
    }

    pub fn from_vector(v: nalgebra::Vector2<Complex64>) -> Self {
        PseudoSpinState { amps: [v[0], v[1]] }
    }

    pub fn to_vector(&self) -> nalgebra::Vector2<Complex64> {
        nalgebra::Vector2::new(self.amps[0], self.amps[1])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps[0].norm_sqr() + self.amps[1].norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= SPINOR_NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(DimerError::NotNormalized { norm_sqr: n2 });
        }
        let s = 1.0 / n2.sqrt();
        Ok(PseudoSpinState {
            amps: [self.amps[0] * s, self.amps[1] * s],
        })
    }

    /// `⟨ψ|T|ψ⟩ / ⟨ψ|ψ⟩` without a normalization check.
    pub fn expectation_vector(&self) -> Vector3<f64> {
        let [a, b] = self.amps;
        let cross = a.conj() * b;
        let norm = self.norm_sqr();
        Vector3::new(
            2.0 * cross.re,
            2.0 * cross.im,
            a.norm_sqr() - b.norm_sqr(),
        ) / norm
    }
}

/// Bloch vector `n = ⟨ψ|T|ψ⟩` of a normalized spinor.
pub fn spinor_to_bloch(psi: &PseudoSpinState) -> Result<BlochVector> {
    if !psi.is_normalized() {
        return Err(DimerError::NotNormalized {
            norm_sqr: psi.norm_sqr(),
        });
    }
    Ok(BlochVector(psi.expectation_vector()))
}

/// Spinor for `n` in the gauge where `n₁` is real and non-negative.
pub fn bloch_to_spinor(n: &BlochVector) -> PseudoSpinState {
    // cos(θ/2) and sin(θ/2) from n_z, so the poles come out exact.
    let c = ((1.0 + n.z()) / 2.0).max(0.0).sqrt();
    let s = ((1.0 - n.z()) / 2.0).max(0.0).sqrt();
    let rho = n.x().hypot(n.y());
    let phase = if rho > 0.0 {
        Complex64::new(n.x() / rho, n.y() / rho)
    } else {
        C1
    };
    PseudoSpinState::new(Complex64::from(c), phase * s)
}

/// Amplitudes of the full dimer in the basis `(|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpinState {
    pub amps: Vector4<Complex64>,
}

impl TwoSpinState {
    pub const UP_UP: usize = 0;
    pub const UP_DOWN: usize = 1;
    pub const DOWN_UP: usize = 2;
    pub const DOWN_DOWN: usize = 3;

    pub fn new(amps: Vector4<Complex64>) -> Self {
        TwoSpinState { amps }
    }

    pub fn basis(index: usize) -> Self {
        let mut amps = Vector4::zeros();
        amps[index] = C1;
        TwoSpinState { amps }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    /// Norm of the part outside the zero-magnetization subspace.
    pub fn subspace_residual(&self) -> f64 {
        (self.amps[Self::UP_UP].norm_sqr() + self.amps[Self::DOWN_DOWN].norm_sqr()).sqrt()
    }
}

/// Places `(n₁, n₂)` in the `|↓↑⟩` and `|↑↓⟩` slots; the coherent-state
/// directions stay fixed at `l₁ = +ẑ`, `l₂ = −ẑ`.
pub fn embed_two_spin(psi: &PseudoSpinState) -> TwoSpinState {
    let mut amps = Vector4::zeros();
    amps[TwoSpinState::DOWN_UP] = psi.amps[0];
    amps[TwoSpinState::UP_DOWN] = psi.amps[1];
    TwoSpinState { amps }
}

/// In-subspace part of `state` and the norm of what was discarded.
pub fn project_two_spin(state: &TwoSpinState) -> Result<(PseudoSpinState, f64)> {
    let residual = state.subspace_residual();
    if residual > 1.0 - 1e-12 {
        return Err(DimerError::DegenerateProjection { residual });
    }
    let psi = PseudoSpinState::new(
        state.amps[TwoSpinState::DOWN_UP],
        state.amps[TwoSpinState::UP_DOWN],
    );
    Ok((psi, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementReport {
    /// `λ₁² − λ₂² = n_z`.
    pub schmidt_gap: f64,
    /// `4λ₁²λ₂² = 1 − n_z²`, the variance of `τ_z`.
    pub concurrence: f64,
    pub schmidt: (f64, f64),
}

pub fn entanglement_measures(n: &BlochVector) -> EntanglementReport {
    let nz = n.z().clamp(-1.0, 1.0);
    let l1 = ((1.0 + nz) / 2.0).sqrt();
    let l2 = ((1.0 - nz) / 2.0).sqrt();
    EntanglementReport {
        schmidt_gap: nz,
        concurrence: (1.0 - nz * nz).clamp(0.0, 1.0),
        schmidt: (l1, l2),
    }
}

/// Point of the stereographic plane `w = (n_x + i n_y)/(1 + n_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StereoPoint {
    Finite(Complex64),
    /// Image of the south pole.
    Infinity,
}

impl StereoPoint {
    pub fn finite(&self) -> Option<Complex64> {
        match self {
            StereoPoint::Finite(w) => Some(*w),
            StereoPoint::Infinity => None,
        }
    }
}

pub fn stereo_project(n: &BlochVector) -> StereoPoint {
    let denom = 1.0 + n.z();
    if denom <= f64::EPSILON {
        return StereoPoint::Infinity;
    }
    StereoPoint::Finite(Complex64::new(n.x() / denom, n.y() / denom))
}

pub fn stereo_unproject(w: &StereoPoint) -> BlochVector {
    match w {
        StereoPoint::Infinity => BlochVector::SOUTH,
        StereoPoint::Finite(w) => {
            let r2 = w.norm_sqr();
            if !r2.is_finite() {
                return BlochVector::SOUTH;
            }
            let s = 1.0 / (1.0 + r2);
            BlochVector(Vector3::new(2.0 * w.re * s, 2.0 * w.im * s, (1.0 - r2) * s))
        }
    }
}
