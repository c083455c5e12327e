//! Fixed points of sphere flows and their linear stability.
//!
//! Roots are found by Newton iteration in the two stereographic charts
//! `w = (x + iy)/(1 + z)` (everything but the south pole) and
//! `u = (x + iy)/(1 − z)` (everything but the north pole).

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DimerError, Result};
use crate::flows::Flow;
use crate::spin::{stereo_project, BlochVector, StereoPoint};

/// Seeds per axis and chart.
pub const SEED_GRID: usize = 24;
/// Roots closer than this are the same point.
pub const DEDUP_DISTANCE: f64 = 1e-6;
/// Largest `‖f(n*)‖` accepted for a reported fixed point.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Real parts within this band count as zero.
pub const MARGINAL_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-6;
const FD_CHECK_STEP: f64 = 1e-5;
const FD_AGREEMENT: f64 = 1e-4;
const SEED_EXTENT: f64 = 1.1;
const NEWTON_MAX_ITER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointClass {
    Repeller,
    Attractor,
    Saddle,
    Center,
}

impl FixedPointClass {
    pub fn label(self) -> &'static str {
        match self {
            FixedPointClass::Repeller => "repeller",
            FixedPointClass::Attractor => "attractor",
            FixedPointClass::Saddle => "saddle",
            FixedPointClass::Center => "center",
        }
    }

    /// Classification from the real parts of the two tangent eigenvalues.
    pub fn from_eigenvalues(ev: &[Complex64; 2]) -> Self {
        let (a, b) = (ev[0].re, ev[1].re);
        if a > MARGINAL_TOL && b > MARGINAL_TOL {
            FixedPointClass::Repeller
        } else if a < -MARGINAL_TOL && b < -MARGINAL_TOL {
            FixedPointClass::Attractor
        } else if (a > MARGINAL_TOL && b < -MARGINAL_TOL) || (a < -MARGINAL_TOL && b > MARGINAL_TOL) {
            FixedPointClass::Saddle
        } else {
            FixedPointClass::Center
        }
    }
}

/// Linearization of a flow at a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: FixedPointClass,
    /// Eigenvalues of the tangent-plane Jacobian, larger real part first.
    pub eigenvalues: [Complex64; 2],
    /// Tangent-plane Jacobian in the basis of [`tangent_basis`].
    pub jacobian: Matrix2<f64>,
    /// A real part fell inside `±MARGINAL_TOL`.
    pub marginal: bool,
    /// Largest eigenvalue change between the two finite-difference steps.
    pub fd_disagreement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointRecord {
    pub location: BlochVector,
    pub w: StereoPoint,
    pub class: FixedPointClass,
    pub eigenvalues: [Complex64; 2],
    pub residual: f64,
    pub marginal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSearch {
    /// Sorted by `n_z`, then `n_y`, then `n_x`.
    pub points: Vec<FixedPointRecord>,
    /// Some seed sat close to an unresolved near-zero of the field.
    pub incomplete: bool,
    pub seeds: usize,
    pub converged_seeds: usize,
}

impl FixedPointSearch {
    pub fn count(&self, class: FixedPointClass) -> usize {
        self.points.iter().filter(|p| p.class == class).count()
    }
}

/// Orthonormal tangent vectors `(e₁, e₂)` at `n` with `e₁ × e₂ = n`.
pub fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

fn eigen2(m: &Matrix2<f64>) -> [Complex64; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = Complex64::from(0.25 * tr * tr - det).sqrt();
    let half = Complex64::from(0.5 * tr);
    let (a, b) = (half + disc, half - disc);
    if (a.re, a.im) >= (b.re, b.im) {
        [a, b]
    } else {
        [b, a]
    }
}

fn tangent_jacobian<F: Flow + ?Sized>(field: &F, n: &Vector3<f64>, h: f64) -> Matrix2<f64> {
    let (e1, e2) = tangent_basis(n);
    let basis = [e1, e2];
    let mut jac = Matrix2::zeros();
    for (c, e) in basis.iter().enumerate() {
        let plus = (n + e * h).normalize();
        let minus = (n - e * h).normalize();
        let df = (field.velocity(0.0, &plus) - field.velocity(0.0, &minus)) / (2.0 * h);
        for (r, b) in basis.iter().enumerate() {
            jac[(r, c)] = b.dot(&df);
        }
    }
    jac
}

/// Linear stability of `field` at the fixed point `n_star`.
pub fn classify_fixed_point<F: Flow + ?Sized>(field: &F, n_star: &BlochVector) -> Result<Classification> {
    let n = n_star.as_vector();
    let residual = field.velocity(0.0, n).norm();
    if residual > RESIDUAL_TOL {
        return Err(DimerError::invalid(
            "n_star",
            format!("not a fixed point (‖f‖ = {residual:.3e})"),
        ));
    }
    let jacobian = tangent_jacobian(field, n, FD_STEP);
    let eigenvalues = eigen2(&jacobian);
    let check = eigen2(&tangent_jacobian(field, n, FD_CHECK_STEP));
    let fd_disagreement = eigenvalues
        .iter()
        .zip(&check)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if fd_disagreement > FD_AGREEMENT {
        return Err(DimerError::invalid(
            "n_star",
            format!("finite-difference Jacobian is unstable (Δλ = {fd_disagreement:.3e})"),
        ));
    }
    let class = FixedPointClass::from_eigenvalues(&eigenvalues);
    Ok(Classification {
        class,
        eigenvalues,
        jacobian,
        marginal: class == FixedPointClass::Center,
        fd_disagreement,
    })
}

/// Eigenvalues of the full 3×3 Jacobian of a ball flow at `point`.
pub fn ball_jacobian_eigenvalues<F: Flow + ?Sized>(field: &F, point: &Vector3<f64>) -> [Complex64; 3] {
    let mut jac = Matrix3::zeros();
    for c in 0..3 {
        let e = Vector3::ith(c, FD_STEP);
        let df = (field.velocity(0.0, &(point + e)) - field.velocity(0.0, &(point - e))) / (2.0 * FD_STEP);
        jac.set_column(c, &df);
    }
    let ev = jac.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chart {
    North,
    South,
}

impl Chart {
    fn to_sphere(self, p: &Vector2<f64>) -> Vector3<f64> {
        let r2 = p.norm_squared();
        let z = (1.0 - r2) / (1.0 + r2);
        let v = Vector3::new(2.0 * p.x / (1.0 + r2), 2.0 * p.y / (1.0 + r2), z);
        match self {
            Chart::North => v,
            Chart::South => Vector3::new(v.x, v.y, -v.z),
        }
    }

    #[cfg(test)]
    fn project(self, n: &Vector3<f64>) -> Vector2<f64> {
        let denom = match self {
            Chart::North => 1.0 + n.z,
            Chart::South => 1.0 - n.z,
        };
        Vector2::new(n.x, n.y) / denom
    }
}

fn newton<F: Flow + ?Sized>(field: &F, chart: Chart, seed: Vector2<f64>) -> Option<Vector3<f64>> {
    let mut p = seed;
    let scale = 1.0 + p.norm();
    for _ in 0..NEWTON_MAX_ITER {
        let n = chart.to_sphere(&p);
        let fnorm = field.velocity(0.0, &n).norm();
        if fnorm <= 1e-14 {
            return Some(n);
        }
        // Finite-difference Jacobian with the frame fixed at the current point.
        let (e1, e2) = tangent_basis(&n);
        let g = |q: &Vector2<f64>| {
            let f = field.velocity(0.0, &chart.to_sphere(q));
            Vector2::new(e1.dot(&f), e2.dot(&f))
        };
        let g0 = g(&p);
        let h = 1e-7 * scale;
        let mut jac = Matrix2::zeros();
        for c in 0..2 {
            let mut dp = Vector2::zeros();
            dp[c] = h;
            jac.set_column(c, &((g(&(p + dp)) - g(&(p - dp))) / (2.0 * h)));
        }
        let step = jac.lu().solve(&g0)?;
        // Damped update: halve until the residual decreases.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let q = p - step * lambda;
            if q.iter().all(|v| v.is_finite())
                && field.velocity(0.0, &chart.to_sphere(&q)).norm() < fnorm
            {
                p = q;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        if p.norm() > 1e3 {
            return None;
        }
    }
    let n = chart.to_sphere(&p);
    (field.velocity(0.0, &n).norm() <= RESIDUAL_TOL).then_some(n)
}

/// All fixed points of a tangent sphere flow, each verified and classified.
pub fn find_fixed_points<F: Flow + ?Sized>(field: &F) -> Result<FixedPointSearch> {
    let axis: Vec<f64> = (0..SEED_GRID)
        .map(|i| -SEED_EXTENT + 2.0 * SEED_EXTENT * (i as f64 + 0.5) / SEED_GRID as f64)
        .collect();
    let seeds: Vec<(Chart, Vector2<f64>)> = [Chart::North, Chart::South]
        .into_iter()
        .flat_map(|chart| {
            let axis = axis.clone();
            axis.clone()
                .into_iter()
                .flat_map(move |a| axis.clone().into_iter().map(move |b| (chart, Vector2::new(a, b))))
        })
        .collect();
    let outcomes: Vec<Option<Vector3<f64>>> = seeds
        .par_iter()
        .map(|(chart, p)| newton(field, *chart, *p))
        .collect();

    let mut roots: Vec<Vector3<f64>> = Vec::new();
    for n in outcomes.iter().flatten() {
        if roots.iter().all(|r| (r - n).norm() > DEDUP_DISTANCE) {
            roots.push(*n);
        }
    }
    let converged_seeds = outcomes.iter().filter(|o| o.is_some()).count();

    // A failed seed that already sits at a near-zero of the field, far from every root,
    // marks a root that may have been missed.
    let field_scale = seeds
        .iter()
        .map(|(c, p)| field.velocity(0.0, &c.to_sphere(p)).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let incomplete = seeds.iter().zip(&outcomes).any(|((chart, p), out)| {
        let n = chart.to_sphere(p);
        out.is_none()
            && field.velocity(0.0, &n).norm() < 1e-3 * field_scale
            && roots.iter().all(|r| (r - n).norm() > 0.1)
    });

    let mut points = roots
        .into_iter()
        .map(|n| {
            let loc = BlochVector::normalize(n)?;
            let c = classify_fixed_point(field, &loc)?;
            Ok(FixedPointRecord {
                location: loc,
                w: stereo_project(&loc),
                class: c.class,
                eigenvalues: c.eigenvalues,
                residual: field.velocity(0.0, loc.as_vector()).norm(),
                marginal: c.marginal,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        let (p, q) = (a.location.as_vector(), b.location.as_vector());
        (p.z, p.y, p.x)
            .partial_cmp(&(q.z, q.y, q.x))
            .expect("finite coordinates")
    });
    Ok(FixedPointSearch {
        points,
        incomplete,
        seeds: seeds.len(),
        converged_seeds,
    })
}
