//! Velocity fields sampled on regular grids for plotting.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DimerError, Result};
use crate::flows::{Domain, Flow};
use crate::spin::{stereo_unproject, StereoPoint};

/// Where the grid lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridChart {
    /// Square `[−extent, extent]²` of the stereographic plane.
    Stereo { extent: f64 },
    /// The disc `n_x = 0`, `n_y² + n_z² ≤ 1` (only for ball flows; sphere
    /// flows use the unit circle of the same cut).
    YzCut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSample {
    /// Chart coordinates: `(Re w, Im w)` or `(n_y, n_z)`.
    pub u: f64,
    pub v: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Velocity pushed forward into the chart.
    pub du: f64,
    pub dv: f64,
}

/// Stereographic velocity `ẇ` of a tangent velocity `ṅ` at `n`.
fn stereo_velocity(n: &Vector3<f64>, ndot: &Vector3<f64>) -> Complex64 {
    let denom = 1.0 + n.z;
    let num = Complex64::new(n.x, n.y);
    let dnum = Complex64::new(ndot.x, ndot.y);
    (dnum * denom - num * ndot.z) / (denom * denom)
}

/// Samples `field` at `t = 0` on a `resolution × resolution` grid.
pub fn flow_field_grid<F: Flow + ?Sized>(
    field: &F,
    chart: GridChart,
    resolution: usize,
) -> Result<Vec<GridSample>> {
    if resolution < 2 {
        return Err(DimerError::invalid("resolution", "need at least 2 points per axis"));
    }
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        (0..resolution)
            .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let mut out = Vec::with_capacity(resolution * resolution);
    match chart {
        GridChart::Stereo { extent } => {
            if !(extent.is_finite() && extent > 0.0) {
                return Err(DimerError::invalid("extent", "must be > 0"));
            }
            let ax = axis(-extent, extent);
            for &v in &ax {
                for &u in &ax {
                    let n = stereo_unproject(&StereoPoint::Finite(Complex64::new(u, v))).into_vector();
                    let ndot = field.velocity(0.0, &n);
                    let w = stereo_velocity(&n, &ndot);
                    out.push(GridSample {
                        u,
                        v,
                        position: n.into(),
                        velocity: ndot.into(),
                        du: w.re,
                        dv: w.im,
                    });
                }
            }
        }
        GridChart::YzCut => {
            let ax = axis(-1.0, 1.0);
            let ball = field.domain() == Domain::Ball;
            for &v in &ax {
                for &u in &ax {
                    let r2 = u * u + v * v;
                    if r2 > 1.0 + 1e-12 {
                        continue;
                    }
                    let n = if ball {
                        Vector3::new(0.0, u, v)
                    } else if r2 > 0.0 {
                        Vector3::new(0.0, u, v) / r2.sqrt()
                    } else {
                        continue;
                    };
                    let ndot = field.velocity(0.0, &n);
                    out.push(GridSample {
                        u,
                        v,
                        position: n.into(),
                        velocity: ndot.into(),
                        du: ndot.y,
                        dv: ndot.z,
                    });
                }
            }
        }
    }
    Ok(out)
}
