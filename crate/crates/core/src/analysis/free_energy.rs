//! Dynamical free energy `φ(s)` of the biased ensembles and its non-analyticities.
//!
//! The biased flow is integrated from the displaced south pole. Over the late
//! window `[t/2, t]` the state is Hann-averaged to `n̄` and `φ = −s·O(n̄)`; the
//! window end `t` doubles until two successive estimates agree. The Hann-weighted
//! average of `O(n(t))` along the path is reported next to it as `phi_path`.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DimerError, Result};
use crate::flows::{BiasKind, BiasSpec, FlowField};
use crate::integrate::{integrate_ode_at, IntegratorConfig};
use crate::spin::BlochVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergyConfig {
    /// First window end, in `1/J`.
    pub t_initial: f64,
    /// Largest window end, in `1/J`.
    pub horizon: f64,
    /// Spacing of the averaged samples, in `1/J`.
    pub sample_dt: f64,
    /// Agreement required between successive doublings.
    pub tolerance: f64,
    /// Offset of the start state from the pole along `+ŷ`.
    pub displacement: f64,
    pub integrator: IntegratorConfig,
}

impl Default for FreeEnergyConfig {
    fn default() -> Self {
        FreeEnergyConfig {
            t_initial: 50.0,
            horizon: 1e4,
            sample_dt: 0.05,
            tolerance: 1e-3,
            displacement: 1e-6,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl FreeEnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_initial > 0.0 && self.horizon >= self.t_initial) {
            return Err(DimerError::invalid("horizon", "need 0 < t_initial <= horizon"));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt < self.t_initial) {
            return Err(DimerError::invalid("sample_dt", "need 0 < sample_dt < t_initial"));
        }
        if !(self.tolerance > 0.0) {
            return Err(DimerError::invalid("tolerance", "must be > 0"));
        }
        if !(self.displacement > 0.0 && self.displacement < 1.0) {
            return Err(DimerError::invalid("displacement", "must lie in (0, 1)"));
        }
        self.integrator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    pub s: f64,
    /// `−s·O(n̄)` with `n̄` the windowed mean state.
    pub phi: f64,
    /// `−s·⟨O(n)⟩` averaged along the path over the same window.
    pub phi_path: f64,
    pub converged: bool,
    /// End of the last window; the window is `[t_final/2, t_final]`.
    pub t_final: f64,
    pub doublings: usize,
    /// Same estimate from the displaced north pole (variance bias only).
    pub phi_alternate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Kink,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub kind: TransitionKind,
    /// Best location estimate.
    pub s: f64,
    /// Grid index of the flagged row.
    pub index: usize,
    /// `|Δ²φ|` for a kink, the refined gap for a jump.
    pub strength: f64,
    /// Bracket after refinement (jumps) or the grid neighbourhood (kinks).
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyCurve {
    pub bias: BiasKind,
    #[serde(rename = "J")]
    pub j: f64,
    pub points: Vec<FreeEnergyEstimate>,
    pub transitions: Vec<Transition>,
}

impl FreeEnergyCurve {
    pub fn s_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.s).collect()
    }

    pub fn phi_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.phi).collect()
    }

    pub fn transitions_of(&self, kind: TransitionKind) -> Vec<Transition> {
        self.transitions.iter().copied().filter(|t| t.kind == kind).collect()
    }
}

struct Windowed {
    phi: f64,
    phi_path: f64,
}

fn hann_average(bias: &BiasSpec, times: &[f64], states: &[Vector3<f64>], t_end: f64) -> Windowed {
    let t_start = 0.5 * t_end;
    let width = t_end - t_start;
    let mut wsum = 0.0;
    let mut nbar = Vector3::zeros();
    let mut obar = 0.0;
    let lo = times.partition_point(|&t| t < t_start);
    for (t, n) in times[lo..].iter().zip(&states[lo..]) {
        if *t > t_end {
            break;
        }
        let w = (std::f64::consts::PI * (t - t_start) / width).sin().powi(2);
        wsum += w;
        nbar += n * w;
        obar += w * bias.kind.observable(n.z);
    }
    nbar /= wsum;
    obar /= wsum;
    // `+ 0.0` turns a negative zero into zero.
    Windowed {
        phi: -bias.s * bias.kind.observable(nbar.z) + 0.0,
        phi_path: -bias.s * obar + 0.0,
    }
}

fn estimate_from(
    bias: &BiasSpec,
    j: f64,
    start: BlochVector,
    cfg: &FreeEnergyConfig,
) -> Result<(Windowed, bool, f64, usize)> {
    let field = FlowField::biased(j, *bias);
    let mut times = vec![0.0];
    let mut states = vec![start.into_vector()];
    let mut t_end = cfg.t_initial.min(cfg.horizon);
    let mut previous: Option<f64> = None;
    let mut doublings = 0;
    loop {
        let t_last = *times.last().expect("non-empty");
        let k0 = times.len();
        let k1 = (t_end / cfg.sample_dt).round() as usize;
        let grid: Vec<f64> = (k0..=k1).map(|k| k as f64 * cfg.sample_dt).collect();
        if !grid.is_empty() {
            let seg = integrate_ode_at(
                &field,
                *states.last().expect("non-empty"),
                t_last,
                &grid,
                &cfg.integrator,
            )?;
            times.extend_from_slice(&seg.times);
            states.extend_from_slice(&seg.states);
        }
        let t_now = *times.last().expect("non-empty");
        let w = hann_average(bias, &times, &states, t_now);
        let converged = previous.is_some_and(|p| (w.phi - p).abs() <= cfg.tolerance);
        if converged || t_now >= cfg.horizon {
            return Ok((w, converged, t_now, doublings));
        }
        previous = Some(w.phi);
        t_end = (2.0 * t_now).min(cfg.horizon);
        doublings += 1;
    }
}

fn displaced_north(offset: f64) -> BlochVector {
    BlochVector::normalize(Vector3::new(0.0, offset, 1.0)).expect("non-zero vector")
}

/// `φ(s)` for one bias strength.
pub fn free_energy(bias: &BiasSpec, j: f64, cfg: &FreeEnergyConfig) -> Result<FreeEnergyEstimate> {
    cfg.validate()?;
    if !(j.is_finite() && j > 0.0) {
        return Err(DimerError::invalid("J", "must be > 0"));
    }
    if !(bias.s.is_finite() && bias.s >= 0.0) {
        return Err(DimerError::invalid("s", "must be >= 0"));
    }
    let start = BlochVector::displaced_south(cfg.displacement);
    let (w, converged, t_final, doublings) = estimate_from(bias, j, start, cfg)?;
    let phi_alternate = match bias.kind {
        BiasKind::Variance => Some(estimate_from(bias, j, displaced_north(cfg.displacement), cfg)?.0.phi),
        BiasKind::Linear => None,
    };
    Ok(FreeEnergyEstimate {
        s: bias.s,
        phi: w.phi,
        phi_path: w.phi_path,
        converged,
        t_final,
        doublings,
        phi_alternate,
    })
}

/// Detection thresholds for [`phi_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionConfig {
    /// A candidate must exceed this multiple of its local floor.
    pub floor_factor: f64,
    pub refine_levels: usize,
    /// Smallest refined-to-initial gap ratio that confirms a jump.
    pub confirm_ratio: f64,
    /// Grid points on each side of a jump excluded from the kink search.
    pub jump_exclusion: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            floor_factor: 10.0,
            refine_levels: 4,
            confirm_ratio: 0.5,
            jump_exclusion: 3,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Residual of the step `i → i+1` against linear extrapolation from either side.
fn gap_residuals(s: &[f64], phi: &[f64]) -> Vec<f64> {
    let n = s.len();
    (0..n.saturating_sub(1))
        .map(|i| {
            let h = s[i + 1] - s[i];
            let left = (i >= 1).then(|| {
                let slope = (phi[i] - phi[i - 1]) / (s[i] - s[i - 1]);
                (phi[i + 1] - (phi[i] + slope * h)).abs()
            });
            let right = (i + 2 < n).then(|| {
                let slope = (phi[i + 2] - phi[i + 1]) / (s[i + 2] - s[i + 1]);
                (phi[i] - (phi[i + 1] - slope * h)).abs()
            });
            match (left, right) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => (phi[i + 1] - phi[i]).abs(),
            }
        })
        .collect()
}

/// Locates kinks and jumps in a sampled curve. `eval` recomputes `φ` at new
/// bias strengths during jump refinement.
pub fn detect_transitions<E>(
    s: &[f64],
    phi: &[f64],
    noise_floor: f64,
    cfg: &TransitionConfig,
    eval: E,
) -> Result<Vec<Transition>>
where
    E: Fn(f64) -> Result<f64>,
{
    let n = s.len();
    let mut out = Vec::new();
    if n < 3 {
        return Ok(out);
    }
    let gaps = gap_residuals(s, phi);
    let mut jump_indices = Vec::new();
    for i in 0..gaps.len() {
        let neighbours: Vec<f64> = (i.saturating_sub(5)..(i + 6).min(gaps.len()))
            .filter(|&k| k + 1 < i || k > i + 1)
            .map(|k| gaps[k])
            .collect();
        let floor = median(neighbours).max(noise_floor);
        if gaps[i] <= cfg.floor_factor * floor {
            continue;
        }
        let (mut a, mut b) = (s[i], s[i + 1]);
        let (mut fa, mut fb) = (phi[i], phi[i + 1]);
        let gap0 = (fb - fa).abs();
        if gap0 == 0.0 {
            continue;
        }
        for _ in 0..cfg.refine_levels {
            let m = 0.5 * (a + b);
            let fm = eval(m)?;
            if (fm - fa).abs() >= (fb - fm).abs() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
        }
        let gap = (fb - fa).abs();
        if gap / gap0 >= cfg.confirm_ratio {
            jump_indices.push(i);
            out.push(Transition {
                kind: TransitionKind::Jump,
                s: 0.5 * (a + b),
                index: if (0.5 * (a + b) - s[i]).abs() <= (s[i + 1] - 0.5 * (a + b)).abs() {
                    i
                } else {
                    i + 1
                },
                strength: gap,
                bracket: (a, b),
            });
        }
    }

    let second: Vec<(usize, f64)> = (1..n - 1)
        .map(|i| {
            let (hl, hr) = (s[i] - s[i - 1], s[i + 1] - s[i]);
            let d2 = 2.0 * ((phi[i + 1] - phi[i]) / hr - (phi[i] - phi[i - 1]) / hl) / (hl + hr);
            (i, (d2 * hl * hr).abs())
        })
        .collect();
    let typical = median(second.iter().map(|&(_, v)| v).collect());
    let excluded = |i: usize| {
        jump_indices
            .iter()
            .any(|&j| i + cfg.jump_exclusion >= j && i <= j + 1 + cfg.jump_exclusion)
    };
    if let Some(&(i, peak)) = second
        .iter()
        .filter(|(i, _)| !excluded(*i))
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        if peak > cfg.floor_factor * typical.max(noise_floor) {
            out.push(Transition {
                kind: TransitionKind::Kink,
                s: s[i],
                index: i,
                strength: peak,
                bracket: (s[i - 1], s[i + 1]),
            });
        }
    }
    out.sort_by(|a, b| a.s.total_cmp(&b.s));
    Ok(out)
}

/// `φ` over a grid of bias strengths, with transitions located.
pub fn phi_sweep(
    kind: BiasKind,
    j: f64,
    s_grid: &[f64],
    cfg: &FreeEnergyConfig,
    detect: &TransitionConfig,
) -> Result<FreeEnergyCurve> {
    if s_grid.is_empty() {
        return Err(DimerError::invalid("s_grid", "empty grid"));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DimerError::invalid("s_grid", "must be strictly increasing"));
    }
    let points = s_grid
        .par_iter()
        .map(|&s| free_energy(&BiasSpec::new(kind, s)?, j, cfg))
        .collect::<Result<Vec<_>>>()?;
    let s: Vec<f64> = points.iter().map(|p| p.s).collect();
    let phi: Vec<f64> = points.iter().map(|p| p.phi).collect();
    let transitions = detect_transitions(&s, &phi, cfg.tolerance, detect, |x| {
        Ok(free_energy(&BiasSpec::new(kind, x)?, j, cfg)?.phi)
    })?;
    Ok(FreeEnergyCurve {
        bias: kind,
        j,
        points,
        transitions,
    })
}

/// Closed-form `φ` where it is known: linear bias everywhere, variance bias on
/// the overdamped branch `s ≥ 2J` (the underdamped value `−s` follows from the
/// vanishing orbit mean).
pub fn phi_closed_form(kind: BiasKind, j: f64, s: f64) -> f64 {
    match kind {
        BiasKind::Linear if s > j => (s * s - j * j).sqrt(),
        BiasKind::Linear => 0.0,
        BiasKind::Variance if s >= 2.0 * j => {
            -s * (1.0 - (1.0 - 4.0 * j * j / (s * s)).sqrt()) / 2.0
        }
        BiasKind::Variance => -s,
    }
}
