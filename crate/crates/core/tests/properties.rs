use dimer_core::analysis::{classify_fixed_point, find_fixed_points, FixedPointClass};
use dimer_core::flows::Flow;
use dimer_core::integrate::{integrate_ode, IntegratorConfig};
use dimer_core::{BiasSpec, BlochVector, FieldSchedule, FlowField};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ramps_hit_their_endpoints_and_stay_between(
        h0 in -30.0..30.0f64,
        h1 in -30.0..30.0f64,
        duration in 0.1..500.0f64,
        frac in 0.0..1.0f64,
    ) {
        for schedule in [
            FieldSchedule::linear_ramp(h0, h1, duration).unwrap(),
            FieldSchedule::tanh_ramp(h0, h1, duration).unwrap(),
        ] {
            prop_assert!((schedule.field_at(0.0) - h0).abs() < 1e-9 * (1.0 + h0.abs()));
            prop_assert!((schedule.field_at(duration) - h1).abs() < 1e-9 * (1.0 + h1.abs()));
            let h = schedule.field_at(frac * duration);
            prop_assert!(h >= h0.min(h1) - 1e-12 && h <= h0.max(h1) + 1e-12);
        }
    }

    #[test]
    fn biased_trajectories_stay_on_the_sphere(
        s in 0.0..4.0f64,
        theta in 0.01..3.13f64,
        phi in -std::f64::consts::PI..std::f64::consts::PI,
        variance in any::<bool>(),
    ) {
        let bias = if variance { BiasSpec::variance(s) } else { BiasSpec::linear(s) };
        let traj = integrate_ode(
            &FlowField::biased(1.0, bias),
            BlochVector::from_angles(theta, phi).into_vector(),
            (0.0, 20.0),
            &IntegratorConfig::default(),
        )
        .unwrap();
        prop_assert!(traj.max_norm_drift <= 1e-6);
        prop_assert!(traj.states.iter().all(|n| (n.norm() - 1.0).abs() <= 1e-9));
    }

    #[test]
    fn fixed_points_are_roots_with_stable_classification(gamma in 0.2..5.0f64) {
        let field = FlowField::angular(1.0, gamma);
        let search = find_fixed_points(&field).unwrap();
        prop_assert!(!search.incomplete);
        let expected = if gamma > 2.0 { 6 } else { 2 };
        if (gamma - 2.0).abs() > 0.02 {
            prop_assert_eq!(search.points.len(), expected);
        }
        for p in &search.points {
            prop_assert!(field.velocity(0.0, p.location.as_vector()).norm() <= 1e-8);
            let c = classify_fixed_point(&field, &p.location).unwrap();
            prop_assert_eq!(c.class, p.class);
            prop_assert!(c.fd_disagreement < 1e-4);
        }
        prop_assert_eq!(search.count(FixedPointClass::Repeller), 2);
    }
}
