//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p dimer-dpt --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dimer_core::analysis::{
    disconnection_test, find_fixed_points, free_energy, linear_spectrum, numeric_spectrum,
    phi_sweep, FixedPointClass, FreeEnergyConfig, Regime, TransitionConfig, TransitionKind,
};
use dimer_core::analysis::connectivity::DEFAULT_HORIZON;
use dimer_core::integrate::{
    integrate_decoupled, integrate_ode_at, integrate_sde_with_path, run_ensemble, run_sweep,
    sweep_ensemble, uniform_grid, EnsembleSpec, EnsembleStats, IntegratorConfig, NoisePath,
    SdeScheme, SdeSpec,
};
use dimer_core::oracle::{
    calibrate, evolve_pseudospin, evolve_two_spin, OracleConfig, PseudoSpinHamiltonian, ZNoise,
};
use dimer_core::spin::{bloch_to_spinor, embed_two_spin};
use dimer_core::{
    BallState, BiasKind, BiasSpec, BlochVector, FieldSchedule, FlowField, NoiseSpec,
    PseudoSpinState,
};
use nalgebra::Vector3;
use num_complex::Complex64;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tight() -> IntegratorConfig {
    IntegratorConfig::default().with_tolerances(1e-12, 1e-14)
}

fn spectral_transition() -> Outcome {
    let j = 1.0;
    let mut worst: f64 = 0.0;
    for gamma in [0.0, 0.3, 1.0, 1.5, 1.9, 2.1, 2.5, 3.0, 5.0] {
        let exact = linear_spectrum(j, gamma).map_err(|e| e.to_string())?;
        let disc = Complex64::from(gamma * gamma - 4.0 * j * j).sqrt();
        let formula = [
            Complex64::from(-gamma),
            (Complex64::from(-gamma) + disc) / 2.0,
            (Complex64::from(-gamma) - disc) / 2.0,
        ];
        let numeric = numeric_spectrum(j, gamma);
        for k in 0..3 {
            ensure(exact.eigenvalues[k] == formula[k], || format!("γ={gamma}: closed form mismatch"))?;
            worst = worst.max((exact.eigenvalues[k] - numeric[k]).norm());
        }
        let regime = if gamma < 2.0 { Regime::Underdamped } else { Regime::Overdamped };
        ensure(exact.regime == regime, || format!("γ={gamma}: regime {:?}", exact.regime))?;
    }
    ensure(worst <= 1e-12, || format!("eigensolver deviation {worst:e}"))?;
    let critical = linear_spectrum(j, 2.0).map_err(|e| e.to_string())?;
    ensure(critical.regime == Regime::Critical, || "γ=2J not critical".into())?;
    Ok(format!("max |closed − numeric| = {worst:.1e}; regime flips at γ/J = 2"))
}

fn fixed_point_structure() -> Outcome {
    let j = 1.0;
    for gamma in [0.5, 1.0, 1.9] {
        let s = find_fixed_points(&FlowField::angular(j, gamma)).map_err(|e| e.to_string())?;
        ensure(s.points.len() == 2 && s.count(FixedPointClass::Repeller) == 2, || {
            format!("γ={gamma}: {} points", s.points.len())
        })?;
    }
    let mut worst: f64 = 0.0;
    for gamma in [2.1, 3.0, 5.0] {
        let s = find_fixed_points(&FlowField::angular(j, gamma)).map_err(|e| e.to_string())?;
        let counts = [
            s.count(FixedPointClass::Repeller),
            s.count(FixedPointClass::Saddle),
            s.count(FixedPointClass::Attractor),
        ];
        ensure(s.points.len() == 6 && counts == [2, 2, 2], || {
            format!("γ={gamma}: {} points, R/S/A = {counts:?}", s.points.len())
        })?;
        for p in s.points.iter().filter(|p| p.class != FixedPointClass::Repeller) {
            let n = p.location;
            worst = worst.max(n.x().abs()).max((n.y() * n.z() + j / gamma).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("identity residual {worst:e}"))?;
    Ok(format!("{{2R}} below, {{2R,2S,2A}} above γ=2J; identity residual {worst:.1e}"))
}

fn disconnection_transition() -> Outcome {
    let mut report = Vec::new();
    for (gamma, expect) in [
        (0.0, true),
        (0.5, true),
        (1.0, true),
        (1.5, true),
        (1.9, true),
        (2.1, false),
        (2.5, false),
        (3.0, false),
        (5.0, false),
    ] {
        let r = disconnection_test(&FlowField::angular(1.0, gamma), DEFAULT_HORIZON).map_err(|e| e.to_string())?;
        ensure(r.connected == expect, || format!("γ={gamma}: connected={} (max n_z {:.3})", r.connected, r.max_nz))?;
        report.push(format!("{gamma}:{:.2}", r.max_nz));
    }
    Ok(format!("max n_z by γ: {}", report.join(" ")))
}

fn angular_radial_equivalence() -> Outcome {
    let times = uniform_grid(0.0, 50.0, 1001);
    let start = BallState::new(BlochVector::displaced_south(1e-3), 1.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for gamma in [0.5, 1.9, 2.1, 5.0] {
        let split = integrate_decoupled(1.0, gamma, &start, &times, &tight()).map_err(|e| e.to_string())?;
        let ball = integrate_ode_at(&FlowField::lindblad(1.0, gamma), start.ball_vector(), 0.0, &times, &tight())
            .map_err(|e| e.to_string())?;
        let radius = split.radial.as_ref().ok_or("no radial channel")?;
        for ((n, d), nbar) in split.states.iter().zip(radius).zip(&ball.states) {
            worst = worst.max((n * *d - nbar).norm());
        }
    }
    ensure(worst <= 1e-6, || format!("max ‖d·n − n̄‖ = {worst:e}"))?;
    Ok(format!("max ‖d·n − n̄‖ = {worst:.1e}"))
}

fn ensemble_spec() -> EnsembleSpec {
    EnsembleSpec::new(
        SdeSpec {
            j: 1.0,
            schedule: FieldSchedule::constant(0.0),
            noise: NoiseSpec {
                variance_rate: 2.0,
                master_seed: 0,
            },
            n0: BlochVector::SOUTH,
            dt: 1e-3,
            t_span: (0.0, 5.0),
            scheme: SdeScheme::Heun,
        },
        51,
    )
}

fn rms(stats: &EnsembleStats, reference: &[Vector3<f64>]) -> f64 {
    let s: f64 = stats.mean.iter().zip(reference).map(|(m, r)| (m - r).norm_squared()).sum();
    (s / reference.len() as f64).sqrt()
}

fn stochastic_average() -> Outcome {
    let spec = ensemble_spec();
    let grid = spec.grid();
    let reference = integrate_ode_at(&FlowField::lindblad(1.0, 1.0), spec.sde.n0.into_vector(), 0.0, &grid, &tight())
        .map_err(|e| e.to_string())?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let full = run_ensemble(&spec, 10_000, 2024, workers).map_err(|e| e.to_string())?;
    let mut worst_z: f64 = 0.0;
    for i in 0..grid.len() {
        let se = full.standard_error(i);
        let diff = full.mean[i] - reference.states[i];
        for c in 0..3 {
            ensure(diff[c].abs() <= 5.0 * se[c], || {
                format!("t={} component {c}: |Δ|={:.2e} > 5·SE={:.2e}", grid[i], diff[c].abs(), 5.0 * se[c])
            })?;
            if se[c] > 0.0 {
                worst_z = worst_z.max(diff[c].abs() / se[c]);
            }
        }
    }
    let quarter = run_ensemble(&spec, 2_500, 2025, workers).map_err(|e| e.to_string())?;
    let ratio = rms(&quarter, &reference.states) / rms(&full, &reference.states);
    ensure((1.4..=2.9).contains(&ratio), || format!("rms ratio N→4N = {ratio:.2}, expected ≈ 2"))?;
    let mean_se = |s: &EnsembleStats| (1..grid.len()).map(|i| s.standard_error(i).norm()).sum::<f64>();
    let se_ratio = mean_se(&quarter) / mean_se(&full);
    ensure((se_ratio - 2.0).abs() <= 0.15, || format!("SE ratio N→4N = {se_ratio:.3}, expected 2"))?;
    Ok(format!(
        "max |Δ|/SE = {worst_z:.2}; N→4N shrinks SE by {se_ratio:.3}, rms error by {ratio:.2}"
    ))
}

fn oracle_equivalence() -> Outcome {
    let report = calibrate().map_err(|e| e.to_string())?;
    let lin = report.bias(BiasKind::Linear).ok_or("no linear calibration")?;
    let var = report.bias(BiasKind::Variance).ok_or("no variance calibration")?;
    ensure((lin.kappa_over_s - 0.5).abs() < 1e-12 && (var.kappa_over_s - 0.25).abs() < 1e-12, || {
        format!("κ/s = {} (linear), {} (variance)", lin.kappa_over_s, var.kappa_over_s)
    })?;
    let fit = lin.max_residual.max(var.max_residual);
    ensure(fit <= 1e-10, || format!("fit residual {fit:e}"))?;

    let n0 = BlochVector::from_angles(2.2, 0.7);
    let mut trace_gap: f64 = 0.0;
    for (kind, slope) in [(BiasKind::Linear, lin.kappa_over_s), (BiasKind::Variance, var.kappa_over_s)] {
        for s in [0.5, 1.5, 3.0] {
            let ev = evolve_pseudospin(
                &PseudoSpinHamiltonian::constant(1.0, 0.0),
                Some(kind),
                slope * s,
                &bloch_to_spinor(&n0),
                (0.0, 10.0),
                true,
                &OracleConfig { dt: 1e-3, record_every: 100 },
            )
            .map_err(|e| e.to_string())?;
            let trace = ev.bloch_trace();
            let reference = integrate_ode_at(
                &FlowField::biased(1.0, BiasSpec::new(kind, s).map_err(|e| e.to_string())?),
                n0.into_vector(),
                0.0,
                &trace.times,
                &tight(),
            )
            .map_err(|e| e.to_string())?;
            for (a, b) in trace.states.iter().zip(&reference.states) {
                trace_gap = trace_gap.max((a - b).norm());
            }
        }
    }
    ensure(trace_gap <= 1e-6, || format!("2×2 trace gap {trace_gap:e}"))?;

    // Noiseless 4×4 against the classical equation of motion.
    let schedule = FieldSchedule::linear_ramp(-3.0, 3.0, 6.0).map_err(|e| e.to_string())?;
    let start = BlochVector::from_angles(2.5, 0.3);
    let ev = evolve_two_spin(
        1.0,
        &schedule,
        None,
        &embed_two_spin(&bloch_to_spinor(&start)),
        (0.0, 6.0),
        &OracleConfig { dt: 1e-3, record_every: 50 },
    )
    .map_err(|e| e.to_string())?;
    let mut leak = ev.max_residual();
    let trace = ev.projected_trace().map_err(|e| e.to_string())?;
    let reference = integrate_ode_at(&FlowField::Unitary { j: 1.0, schedule }, start.into_vector(), 0.0, &trace.times, &tight())
        .map_err(|e| e.to_string())?;
    let mut eom_gap: f64 = 0.0;
    for (a, b) in trace.states.iter().zip(&reference.states) {
        eom_gap = eom_gap.max((a - b).norm());
    }

    // Noisy 4×4 against the stochastic equation of motion on one shared path.
    let (dt, t1): (f64, f64) = (5e-6, 1.0);
    let noise = NoiseSpec { variance_rate: 0.2, master_seed: 21 };
    let path = NoisePath::generate(noise.master_seed, 0, (t1 / dt).round() as usize, dt);
    let sde = SdeSpec {
        j: 1.0,
        schedule: FieldSchedule::constant(0.4),
        noise,
        n0: BlochVector::from_angles(2.0, 0.5),
        dt,
        t_span: (0.0, t1),
        scheme: SdeScheme::Heun,
    };
    let heun = integrate_sde_with_path(&sde, &path, 1000).map_err(|e| e.to_string())?;
    let exact = evolve_two_spin(
        1.0,
        &sde.schedule,
        Some(ZNoise { amplitude: noise.amplitude(), path: &path }),
        &embed_two_spin(&bloch_to_spinor(&sde.n0)),
        sde.t_span,
        &OracleConfig { dt, record_every: 1000 },
    )
    .map_err(|e| e.to_string())?;
    leak = leak.max(exact.max_residual());
    let projected = exact.projected_trace().map_err(|e| e.to_string())?;
    for (a, b) in projected.states.iter().zip(&heun.states) {
        eom_gap = eom_gap.max((a - b).norm());
    }
    ensure(leak <= 1e-10, || format!("subspace leakage {leak:e}"))?;
    ensure(eom_gap <= 1e-6, || format!("4×4 projection gap {eom_gap:e}"))?;
    Ok(format!(
        "κ/s = 1/2, 1/4 (fit {fit:.1e}); 2×2 gap {trace_gap:.1e}; 4×4 leak {leak:.1e}, gap {eom_gap:.1e}"
    ))
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn linear_free_energy() -> Outcome {
    let cfg = FreeEnergyConfig::default();
    let phi = |s: f64| free_energy(&BiasSpec::linear(s), 1.0, &cfg).map(|e| e.phi).map_err(|e| e.to_string());
    let mut below: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        below = below.max(phi(s)?.abs());
    }
    ensure(below <= 5e-3, || format!("|φ| below threshold up to {below:e}"))?;
    let mut above: f64 = 0.0;
    for s in [1.5, 2.0, 3.0] {
        let ev = evolve_pseudospin(
            &PseudoSpinHamiltonian::constant(1.0, 0.0),
            Some(BiasKind::Linear),
            s / 2.0,
            &PseudoSpinState::UP_DOWN,
            (0.0, 200.0),
            false,
            &OracleConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let growth = ev.log_norm.growth_rate();
        let value = phi(s)?;
        let closed = (s * s - 1.0f64).sqrt();
        above = above.max((value - growth).abs()).max((value - closed).abs());
    }
    ensure(above <= 2e-3, || format!("deviation above threshold {above:e}"))?;
    let curve = phi_sweep(BiasKind::Linear, 1.0, &grid(0.0, 2.5, 0.02), &cfg, &TransitionConfig::default())
        .map_err(|e| e.to_string())?;
    let kinks = curve.transitions_of(TransitionKind::Kink);
    let jumps = curve.transitions_of(TransitionKind::Jump);
    ensure(kinks.len() == 1 && jumps.is_empty(), || format!("transitions {:?}", curve.transitions))?;
    ensure((kinks[0].s - 1.0).abs() <= 0.02 + 1e-12, || format!("kink at s/J = {}", kinks[0].s))?;
    Ok(format!(
        "|φ| ≤ {below:.1e} below, ≤ {above:.1e} from √(s²−J²) and norm growth above; kink at s/J = {:.2}",
        kinks[0].s
    ))
}

fn variance_free_energy() -> Outcome {
    let cfg = FreeEnergyConfig::default();
    let curve = phi_sweep(BiasKind::Variance, 1.0, &grid(0.0, 4.0, 0.04), &cfg, &TransitionConfig::default())
        .map_err(|e| e.to_string())?;
    let jumps = curve.transitions_of(TransitionKind::Jump);
    ensure(jumps.len() == 1, || format!("transitions {:?}", curve.transitions))?;
    ensure((jumps[0].s - 2.0).abs() <= 0.04 + 1e-12, || format!("jump at s/J = {}", jumps[0].s))?;
    let mut worst: f64 = 0.0;
    for s in [2.5, 3.0, 4.0] {
        let est = free_energy(&BiasSpec::variance(s), 1.0, &cfg).map_err(|e| e.to_string())?;
        let nz2 = (1.0 + (1.0 - 4.0 / (s * s)).sqrt()) / 2.0;
        worst = worst.max((est.phi - (-s * (1.0 - nz2))).abs());
    }
    ensure(worst <= 2e-3, || format!("overdamped branch deviation {worst:e}"))?;
    Ok(format!(
        "jump at s/J = {:.4} (gap {:.3}); overdamped branch within {worst:.1e}",
        jumps[0].s, jumps[0].strength
    ))
}

fn adiabatic_sweep() -> Outcome {
    let ramp = FieldSchedule::linear_ramp(-20.0, 20.0, 200.0).map_err(|e| e.to_string())?;
    let pure = run_sweep(1.0, &ramp, None, BlochVector::SOUTH, &tight(), 2).map_err(|e| e.to_string())?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let short = FieldSchedule::linear_ramp(-20.0, 20.0, 20.0).map_err(|e| e.to_string())?;
    let mut means = Vec::new();
    for gamma in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let noise = NoiseSpec { variance_rate: 2.0 * gamma, master_seed: 77 };
        let stats = sweep_ensemble(1.0, &short, noise, 1e-3, 1000, workers).map_err(|e| e.to_string())?;
        means.push(stats.fidelity_mean);
    }
    let listed = means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" > ");
    ensure(means.windows(2).all(|w| w[1] < w[0]), || format!("mean fidelity not decreasing: {listed}"))?;
    ensure(pure.final_fidelity >= 0.999, || {
        format!(
            "noiseless fidelity {:.6} < 0.999 (ensemble means at T=20/J: {listed})",
            pure.final_fidelity
        )
    })?;
    Ok(format!("noiseless fidelity {:.6}; ensemble means {listed}", pure.final_fidelity))
}

fn run_cli(dir: &Path, config: &Path, command: &str, workers: usize) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("{command}-{workers}"));
    let status = Command::new(env!("CARGO_BIN_EXE_dimer-dpt"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(&out)
        .arg("--workers")
        .arg(workers.to_string())
        .env_remove("DIMER_DPT_WORKERS")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!("{command} failed: {}", String::from_utf8_lossy(&status.stderr))
    })?;
    let ext = if command == "fixed-points" { "ndjson" } else { "csv" };
    std::fs::read(out.join(format!("{command}.{ext}"))).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "model": {"J": 1.0, "gamma": 2.5},
  "seed": 99,
  "time": {"t0": 0.0, "t1": 4.0, "samples": 41},
  "ensemble": {"trajectories": 300, "grid_points": 41},
  "trajectory": "sde",
  "free_energy": {"bias": "variance", "s_min": 1.6, "s_max": 2.4, "s_step": 0.1}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut bytes = 0;
    for command in ["ensemble", "trajectory", "fixed-points", "free-energy"] {
        let a = run_cli(dir.path(), &config, command, 1)?;
        let b = run_cli(dir.path(), &config, command, 4)?;
        let c = run_cli(dir.path(), &config, command, 4)?;
        ensure(a == b && b == c, || format!("{command}: outputs differ across runs/workers"))?;
        bytes += a.len();
    }
    Ok(format!("4 products ({bytes} bytes) identical across reruns and 1 vs 4 workers"))
}

fn main() {
    let criteria = [
        Criterion { name: "spectral transition", budget: Duration::from_secs(1), run: spectral_transition },
        Criterion { name: "fixed-point structure", budget: Duration::from_secs(10), run: fixed_point_structure },
        Criterion { name: "disconnection transition", budget: Duration::from_secs(30), run: disconnection_transition },
        Criterion { name: "angular/radial equivalence", budget: Duration::from_secs(10), run: angular_radial_equivalence },
        Criterion { name: "stochastic average", budget: Duration::from_secs(120), run: stochastic_average },
        Criterion { name: "oracle equivalence", budget: Duration::from_secs(30), run: oracle_equivalence },
        Criterion { name: "free energy, linear bias", budget: Duration::from_secs(300), run: linear_free_energy },
        Criterion { name: "free energy, variance bias", budget: Duration::from_secs(300), run: variance_free_energy },
        Criterion { name: "adiabatic sweep", budget: Duration::from_secs(120), run: adiabatic_sweep },
        Criterion { name: "determinism", budget: Duration::from_secs(120), run: determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let clock = Instant::now();
        let outcome = (c.run)();
        let elapsed = clock.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; runtime over {:?} budget", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:<28} {detail} [{:.2}s]", c.name, elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:<28} {detail} [{:.2}s]", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
