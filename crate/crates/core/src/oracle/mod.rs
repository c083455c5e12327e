//! Exact small-matrix quantum evolution used as an independent reference for
//! the Bloch-vector flows.

mod calibrate;
mod pseudospin;
mod two_spin;

pub use calibrate::{
    calibrate, calibrate_with, BiasCalibration, CalibrationReport, PrintedFormDeviation,
    CALIBRATION_RESIDUAL_THRESHOLD, CALIBRATION_SAMPLES,
};
pub use pseudospin::{
    bias_operator, evolve_pseudospin, pseudospin_hamiltonian, LogNormRecord, OracleConfig,
    PseudoSpinEvolution, PseudoSpinHamiltonian,
};
pub use two_spin::{evolve_two_spin, two_spin_hamiltonian, TwoSpinEvolution, ZNoise};

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

/// One classical RK4 step of `ψ̇ = f(t, ψ)`.
pub(crate) fn rk4_step<const D: usize, F>(
    f: &F,
    t: f64,
    psi: &SVector<Complex64, D>,
    dt: f64,
) -> SVector<Complex64, D>
where
    F: Fn(f64, &SVector<Complex64, D>) -> SVector<Complex64, D>,
{
    let k1 = f(t, psi);
    let k2 = f(t + 0.5 * dt, &(psi + k1 * Complex64::from(0.5 * dt)));
    let k3 = f(t + 0.5 * dt, &(psi + k2 * Complex64::from(0.5 * dt)));
    let k4 = f(t + dt, &(psi + k3 * Complex64::from(dt)));
    psi + (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4)
        * Complex64::from(dt / 6.0)
}

/// `−i M ψ`.
pub(crate) fn minus_i_times<const D: usize>(
    m: &SMatrix<Complex64, D, D>,
    psi: &SVector<Complex64, D>,
) -> SVector<Complex64, D> {
    (m * psi) * Complex64::new(0.0, -1.0)
}
