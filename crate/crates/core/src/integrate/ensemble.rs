//! Parallel Monte-Carlo ensembles with mergeable accumulators.
//!
//! Trajectories are grouped in fixed chunks of [`CHUNK`] indices; each chunk is
//! reduced sequentially and the chunk results are merged in index order, so the
//! statistics do not depend on the worker count.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::sde::{drive, increments, SdeSpec};
use super::sweep::fidelity;
use crate::error::{DimerError, Result};

pub const FIDELITY_BINS: usize = 20;
const CHUNK: u64 = 64;

/// What to run and where to record it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub sde: SdeSpec,
    /// Uniform output grid over `sde.t_span`.
    pub grid_points: usize,
    /// A trajectory counts as crossing once `n_z` exceeds this value.
    pub crossing_threshold: f64,
}

impl EnsembleSpec {
    pub fn new(sde: SdeSpec, grid_points: usize) -> Self {
        EnsembleSpec {
            sde,
            grid_points,
            crossing_threshold: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sde.validate()?;
        if self.grid_points < 2 {
            return Err(DimerError::invalid("grid_points", "need at least 2"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        super::uniform_grid(self.sde.t_span.0, self.sde.t_span.1, self.grid_points)
    }
}

/// Running moments over trajectories, one accumulator per grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub sample_count: u64,
    pub mean: Vec<Vector3<f64>>,
    /// Sum of squared deviations per component.
    pub m2: Vec<Vector3<f64>>,
    pub crossings: u64,
    pub fidelity_histogram: [u64; FIDELITY_BINS],
    pub fidelity_mean: f64,
    pub fidelity_m2: f64,
}

impl EnsembleStats {
    pub fn empty(times: Vec<f64>) -> Self {
        let k = times.len();
        EnsembleStats {
            times,
            sample_count: 0,
            mean: vec![Vector3::zeros(); k],
            m2: vec![Vector3::zeros(); k],
            crossings: 0,
            fidelity_histogram: [0; FIDELITY_BINS],
            fidelity_mean: 0.0,
            fidelity_m2: 0.0,
        }
    }

    /// Adds one trajectory sampled on `self.times`.
    pub fn push(&mut self, samples: &[Vector3<f64>], crossed: bool) {
        assert_eq!(samples.len(), self.times.len(), "sample grid mismatch");
        self.sample_count += 1;
        let n = self.sample_count as f64;
        for ((mean, m2), x) in self.mean.iter_mut().zip(&mut self.m2).zip(samples) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta.component_mul(&(x - *mean));
        }
        self.crossings += u64::from(crossed);
        let f = fidelity(samples.last().expect("non-empty grid"));
        self.fidelity_histogram[fidelity_bin(f)] += 1;
        let df = f - self.fidelity_mean;
        self.fidelity_mean += df / n;
        self.fidelity_m2 += df * (f - self.fidelity_mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &EnsembleStats) {
        assert_eq!(self.times, other.times, "merging stats on different grids");
        if other.sample_count == 0 {
            return;
        }
        if self.sample_count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.sample_count as f64;
        let nb = other.sample_count as f64;
        let n = na + nb;
        for i in 0..self.times.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] = (self.mean[i] * na + other.mean[i] * nb) / n;
            self.m2[i] += other.m2[i] + delta.component_mul(&delta) * (na * nb / n);
        }
        let df = other.fidelity_mean - self.fidelity_mean;
        self.fidelity_mean = (self.fidelity_mean * na + other.fidelity_mean * nb) / n;
        self.fidelity_m2 += other.fidelity_m2 + df * df * (na * nb / n);
        for (a, b) in self.fidelity_histogram.iter_mut().zip(&other.fidelity_histogram) {
            *a += b;
        }
        self.crossings += other.crossings;
        self.sample_count += other.sample_count;
    }

    /// Unbiased sample variance per component at grid index `i`.
    pub fn variance(&self, i: usize) -> Vector3<f64> {
        if self.sample_count < 2 {
            return Vector3::zeros();
        }
        self.m2[i] / (self.sample_count - 1) as f64
    }

    pub fn standard_error(&self, i: usize) -> Vector3<f64> {
        (self.variance(i) / self.sample_count as f64).map(f64::sqrt)
    }

    pub fn crossing_fraction(&self) -> f64 {
        self.crossings as f64 / self.sample_count.max(1) as f64
    }

    pub fn fidelity_standard_error(&self) -> f64 {
        if self.sample_count < 2 {
            return 0.0;
        }
        let var = self.fidelity_m2 / (self.sample_count - 1) as f64;
        (var / self.sample_count as f64).sqrt()
    }

    pub fn final_mean(&self) -> Vector3<f64> {
        *self.mean.last().expect("non-empty grid")
    }
}

fn fidelity_bin(f: f64) -> usize {
    ((f * FIDELITY_BINS as f64).floor().max(0.0) as usize).min(FIDELITY_BINS - 1)
}

/// Samples one trajectory on `grid`, interpolating linearly between SDE steps.
pub(crate) fn sample_trajectory(
    spec: &EnsembleSpec,
    grid: &[f64],
    index: u64,
) -> (Vec<Vector3<f64>>, bool) {
    let mut out = Vec::with_capacity(grid.len());
    let mut prev: Option<(f64, Vector3<f64>)> = None;
    let mut crossed = false;
    let threshold = spec.crossing_threshold;
    drive(&spec.sde, increments(&spec.sde, index), |t, n| {
        crossed |= n.z > threshold;
        while out.len() < grid.len() && grid[out.len()] <= t {
            let g = grid[out.len()];
            let value = match prev {
                Some((tp, np)) if t > tp => np + (n - np) * ((g - tp) / (t - tp)),
                _ => *n,
            };
            out.push(value);
        }
        prev = Some((t, *n));
    });
    let last = prev.expect("at least the initial state").1;
    out.resize(grid.len(), last);
    (out, crossed)
}

/// Runs trajectories `0..n` of `spec` with `master_seed` on `workers` threads.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    n: u64,
    master_seed: u64,
    workers: usize,
) -> Result<EnsembleStats> {
    if n == 0 {
        return Err(DimerError::invalid("N", "ensemble needs at least one trajectory"));
    }
    if workers == 0 {
        return Err(DimerError::invalid("workers", "must be >= 1"));
    }
    spec.validate()?;
    let mut spec = spec.clone();
    spec.sde.noise.master_seed = master_seed;
    let grid = spec.grid();
    let chunks: Vec<(u64, u64)> = (0..n.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n)))
        .collect();
    let reduce_chunk = |&(lo, hi): &(u64, u64)| {
        let mut stats = EnsembleStats::empty(grid.clone());
        for index in lo..hi {
            let (samples, crossed) = sample_trajectory(&spec, &grid, index);
            stats.push(&samples, crossed);
        }
        stats
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DimerError::invalid("workers", e.to_string()))?;
    let partials: Vec<EnsembleStats> = pool.install(|| chunks.par_iter().map(reduce_chunk).collect());
    let mut total = EnsembleStats::empty(grid);
    for p in &partials {
        total.merge(p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{FlowField, NoiseSpec};
    use crate::integrate::{integrate_ode_at, integrate_sde, IntegratorConfig, SdeScheme};
    use crate::params::FieldSchedule;
    use crate::spin::BlochVector;
    use proptest::prelude::*;

    fn spec(gamma: f64, t1: f64, grid_points: usize) -> EnsembleSpec {
        EnsembleSpec::new(
            SdeSpec {
                j: 1.0,
                schedule: FieldSchedule::constant(0.0),
                noise: NoiseSpec {
                    variance_rate: 2.0 * gamma,
                    master_seed: 0,
                },
                n0: BlochVector::SOUTH,
                dt: 1e-3,
                t_span: (0.0, t1),
                scheme: SdeScheme::Heun,
            },
            grid_points,
        )
    }

    #[test]
    fn single_trajectory_stats_equal_the_trajectory() {
        let s = spec(1.0, 2.0, 21);
        let stats = run_ensemble(&s, 1, 11, 1).unwrap();
        let mut sde = s.sde;
        sde.noise.master_seed = 11;
        let traj = integrate_sde(&sde, 0, 100).unwrap();
        assert_eq!(traj.len(), 21);
        for (m, x) in stats.mean.iter().zip(&traj.states) {
            assert!((m - x).norm() < 1e-12);
        }
        assert!(stats.m2.iter().all(|v| v.norm() == 0.0));
        assert_eq!(stats.fidelity_histogram.iter().sum::<u64>(), 1);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let s = spec(1.0, 3.0, 31);
        let a = run_ensemble(&s, 300, 42, 1).unwrap();
        let b = run_ensemble(&s, 300, 42, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_sampling_interpolates_between_steps() {
        let mut s = spec(0.0, 1.0, 4);
        s.sde.dt = 0.3;
        let grid = s.grid();
        let (samples, _) = sample_trajectory(&s, &grid, 0);
        assert_eq!(samples.len(), 4);
        assert_eq!(samples[0], s.sde.n0.into_vector());
    }

    #[test]
    fn crossing_counter_matches_per_trajectory_maxima() {
        let mut s = spec(1.5, 5.0, 11);
        s.crossing_threshold = 0.5;
        let stats = run_ensemble(&s, 64, 3, 2).unwrap();
        let mut sde = s.sde;
        sde.noise.master_seed = 3;
        let expected = (0..64)
            .filter(|&i| integrate_sde(&sde, i, 1).unwrap().max_nz() > 0.5)
            .count() as u64;
        assert_eq!(stats.crossings, expected);
    }

    #[test]
    fn ensemble_mean_follows_averaged_flow() {
        let s = spec(1.0, 5.0, 26);
        let stats = run_ensemble(&s, 4000, 7, 4).unwrap();
        let grid = s.grid();
        let reference = integrate_ode_at(
            &FlowField::lindblad(1.0, 1.0),
            s.sde.n0.into_vector(),
            0.0,
            &grid,
            &IntegratorConfig::default(),
        )
        .unwrap();
        for i in 0..grid.len() {
            let se = stats.standard_error(i);
            let diff = stats.mean[i] - reference.states[i];
            for c in 0..3 {
                assert!(
                    diff[c].abs() <= 5.0 * se[c] + 1e-3,
                    "t={} c={c} diff={} se={}",
                    grid[i],
                    diff[c],
                    se[c]
                );
            }
        }
    }

    #[test]
    fn rejects_empty_ensemble() {
        assert!(run_ensemble(&spec(1.0, 1.0, 3), 0, 0, 1).is_err());
        assert!(run_ensemble(&spec(1.0, 1.0, 3), 1, 0, 0).is_err());
    }

    fn synthetic(values: &[f64]) -> EnsembleStats {
        let mut s = EnsembleStats::empty(vec![0.0, 1.0]);
        for &v in values {
            let x = Vector3::new(v, -v, 0.5 * v);
            s.push(&[x, x * 0.5], v > 0.0);
        }
        s
    }

    proptest! {
        #[test]
        fn merge_is_associative_and_commutative(
            a in prop::collection::vec(-1.0f64..1.0, 0..20),
            b in prop::collection::vec(-1.0f64..1.0, 0..20),
            c in prop::collection::vec(-1.0f64..1.0, 0..20),
        ) {
            let (sa, sb, sc) = (synthetic(&a), synthetic(&b), synthetic(&c));
            let mut left = sa.clone();
            left.merge(&sb);
            left.merge(&sc);
            let mut bc = sb.clone();
            bc.merge(&sc);
            let mut right = sa.clone();
            right.merge(&bc);
            let mut swapped = sb.clone();
            swapped.merge(&sa);
            let mut ab = sa.clone();
            ab.merge(&sb);
            let all: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
            let direct = synthetic(&all);
            for (x, y) in [(&left, &right), (&ab, &swapped), (&left, &direct)] {
                prop_assert_eq!(x.sample_count, y.sample_count);
                prop_assert_eq!(x.crossings, y.crossings);
                prop_assert_eq!(x.fidelity_histogram, y.fidelity_histogram);
                for i in 0..2 {
                    prop_assert!((x.mean[i] - y.mean[i]).norm() <= 1e-12);
                    prop_assert!((x.m2[i] - y.m2[i]).norm() <= 1e-12 * (1.0 + y.m2[i].norm()));
                }
                prop_assert!((x.fidelity_mean - y.fidelity_mean).abs() <= 1e-12);
            }
        }
    }
}
