//! Spectrum of the linear averaged flow `ṅ̄ = L n̄`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DimerError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Underdamped,
    Critical,
    Overdamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRecord {
    pub j: f64,
    pub gamma: f64,
    /// `−γ`, then `(−γ + √(γ² − 4J²))/2` and `(−γ − √(γ² − 4J²))/2`.
    pub eigenvalues: [Complex64; 3],
    pub regime: Regime,
}

/// Generator of the averaged flow in the basis `(x, y, z)`.
pub fn linear_generator(j: f64, gamma: f64) -> Matrix3<f64> {
    Matrix3::new(
        -gamma, 0.0, 0.0, //
        0.0, -gamma, -j, //
        0.0, j, 0.0,
    )
}

/// Closed-form eigenvalues and damping regime. `γ = 2J` is critical.
pub fn linear_spectrum(j: f64, gamma: f64) -> Result<SpectrumRecord> {
    if !(j.is_finite() && j > 0.0) {
        return Err(DimerError::invalid("J", format!("must be > 0, got {j}")));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(DimerError::invalid("gamma", format!("must be >= 0, got {gamma}")));
    }
    let disc = Complex64::from(gamma * gamma - 4.0 * j * j).sqrt();
    let half = Complex64::from(-0.5 * gamma);
    let regime = if gamma < 2.0 * j {
        Regime::Underdamped
    } else if gamma == 2.0 * j {
        Regime::Critical
    } else {
        Regime::Overdamped
    };
    Ok(SpectrumRecord {
        j,
        gamma,
        eigenvalues: [Complex64::from(-gamma), half + disc * 0.5, half - disc * 0.5],
        regime,
    })
}

/// Eigenvalues of [`linear_generator`] from a general eigensolver, ordered like
/// [`linear_spectrum`] (the isolated `−γ` mode first, then by decreasing real and
/// imaginary part).
pub fn numeric_spectrum(j: f64, gamma: f64) -> [Complex64; 3] {
    let ev = linear_generator(j, gamma).complex_eigenvalues();
    let mut v = [ev[0], ev[1], ev[2]];
    // The x-mode decouples; identify it as the eigenvalue closest to −γ with zero imaginary part.
    let iso = (0..3)
        .min_by(|&a, &b| {
            let da = (v[a] - Complex64::from(-gamma)).norm();
            let db = (v[b] - Complex64::from(-gamma)).norm();
            da.total_cmp(&db)
        })
        .expect("three eigenvalues");
    v.swap(0, iso);
    let (a, b) = (v[1], v[2]);
    if (b.re, b.im) > (a.re, a.im) {
        v.swap(1, 2);
    }
    v
}
