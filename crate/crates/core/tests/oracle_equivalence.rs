use dimer_core::integrate::{
    integrate_ode_at, integrate_sde_with_path, IntegratorConfig, NoisePath, SdeScheme, SdeSpec,
};
use dimer_core::oracle::{
    calibrate, evolve_pseudospin, evolve_two_spin, OracleConfig, PseudoSpinHamiltonian, ZNoise,
};
use dimer_core::spin::{bloch_to_spinor, embed_two_spin};
use dimer_core::{BiasKind, BiasSpec, BlochVector, FieldSchedule, FlowField, NoiseSpec};

fn tight() -> IntegratorConfig {
    IntegratorConfig::default().with_tolerances(1e-12, 1e-14)
}

#[test]
fn biased_oracle_traces_follow_the_canonical_flow() {
    let report = calibrate().unwrap();
    let n0 = BlochVector::from_angles(2.2, 0.7);
    for kind in [BiasKind::Linear, BiasKind::Variance] {
        let slope = report.bias(kind).unwrap().kappa_over_s;
        for s in [0.5, 1.5, 3.0] {
            let ev = evolve_pseudospin(
                &PseudoSpinHamiltonian::constant(1.0, 0.0),
                Some(kind),
                slope * s,
                &bloch_to_spinor(&n0),
                (0.0, 10.0),
                true,
                &OracleConfig {
                    dt: 1e-3,
                    record_every: 100,
                },
            )
            .unwrap();
            let trace = ev.bloch_trace();
            let reference = integrate_ode_at(
                &FlowField::biased(1.0, BiasSpec::new(kind, s).unwrap()),
                n0.into_vector(),
                0.0,
                &trace.times[1..],
                &tight(),
            )
            .unwrap();
            for (a, b) in trace.states[1..].iter().zip(&reference.states) {
                assert!((a - b).norm() < 1e-6, "{kind:?} s={s}: {}", (a - b).norm());
            }
        }
    }
}

#[test]
fn noiseless_two_spin_projects_onto_the_classical_flow() {
    let schedule = FieldSchedule::linear_ramp(-3.0, 3.0, 6.0).unwrap();
    let n0 = BlochVector::from_angles(2.5, 0.3);
    let ev = evolve_two_spin(
        1.0,
        &schedule,
        None,
        &embed_two_spin(&bloch_to_spinor(&n0)),
        (0.0, 6.0),
        &OracleConfig {
            dt: 1e-3,
            record_every: 50,
        },
    )
    .unwrap();
    assert!(ev.max_residual() <= 1e-10);
    let trace = ev.projected_trace().unwrap();
    let field = FlowField::Unitary { j: 1.0, schedule };
    let reference = integrate_ode_at(&field, n0.into_vector(), 0.0, &trace.times[1..], &tight()).unwrap();
    for (a, b) in trace.states[1..].iter().zip(&reference.states) {
        assert!((a - b).norm() < 1e-6, "{}", (a - b).norm());
    }
}

fn noisy_gap(gamma: f64, t1: f64, dt: f64, index: u64) -> f64 {
    let noise = NoiseSpec {
        variance_rate: 2.0 * gamma,
        master_seed: 21,
    };
    let steps = (t1 / dt).round() as usize;
    let path = NoisePath::generate(noise.master_seed, index, steps, dt);
    let spec = SdeSpec {
        j: 1.0,
        schedule: FieldSchedule::constant(0.4),
        noise,
        n0: BlochVector::from_angles(2.0, 0.5),
        dt,
        t_span: (0.0, t1),
        scheme: SdeScheme::Heun,
    };
    let sde = integrate_sde_with_path(&spec, &path, 1).unwrap();
    let exact = evolve_two_spin(
        1.0,
        &spec.schedule,
        Some(ZNoise {
            amplitude: noise.amplitude(),
            path: &path,
        }),
        &embed_two_spin(&bloch_to_spinor(&spec.n0)),
        spec.t_span,
        &OracleConfig {
            dt: dt.min(1e-4),
            record_every: 1,
        },
    )
    .unwrap();
    assert!(exact.max_residual() <= 1e-10);
    let trace = exact.projected_trace().unwrap();
    assert_eq!(trace.len(), sde.len());
    trace
        .states
        .iter()
        .zip(&sde.states)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

fn mean_gap(gamma: f64, dt: f64) -> f64 {
    (0..8).map(|i| noisy_gap(gamma, 1.0, dt, i)).sum::<f64>() / 8.0
}

#[test]
fn heun_converges_to_the_exact_noisy_evolution_at_first_order() {
    let errors: Vec<f64> = [2e-3, 5e-4, 1.25e-4].iter().map(|&dt| mean_gap(0.5, dt)).collect();
    let order = (errors[0] / errors[2]).log(16.0);
    assert!(order > 0.85 && order < 1.3, "{errors:?}, order {order}");
}

#[test]
fn weak_noise_two_spin_matches_heun_within_tolerance() {
    let gap = noisy_gap(0.1, 1.0, 5e-6, 0);
    assert!(gap < 1e-6, "{gap:e}");
}

fn oracle_sweep_fidelity(h: f64, duration: f64) -> f64 {
    let ham = PseudoSpinHamiltonian {
        j: 1.0,
        schedule: FieldSchedule::linear_ramp(-h, h, duration).unwrap(),
    };
    let ev = evolve_pseudospin(
        &ham,
        None,
        0.0,
        &dimer_core::PseudoSpinState::UP_DOWN,
        (0.0, duration),
        false,
        &OracleConfig {
            dt: 2e-3,
            record_every: 1_000_000,
        },
    )
    .unwrap();
    ev.states.last().unwrap().to_vector()[0].norm_sqr()
}

#[test]
fn sweep_fidelity_matches_the_two_level_oracle() {
    use dimer_core::integrate::run_sweep;
    for (h, duration) in [(20.0, 200.0), (40.0, 200.0), (40.0, 400.0)] {
        let schedule = FieldSchedule::linear_ramp(-h, h, duration).unwrap();
        let sweep = run_sweep(1.0, &schedule, None, BlochVector::SOUTH, &tight(), 2).unwrap();
        let exact = oracle_sweep_fidelity(h, duration);
        assert!(
            (sweep.final_fidelity - exact).abs() < 1e-7,
            "±{h} over {duration}: {} vs {exact}",
            sweep.final_fidelity
        );
    }
}
