//! One function per subcommand. Each returns the data product as text plus a
//! JSON summary for the manifest.

use dimer_core::analysis::{
    find_fixed_points, flow_field_grid, linear_spectrum, phi_sweep, Regime, TransitionConfig,
    TransitionKind,
};
use dimer_core::flows::Domain;
use dimer_core::integrate::{
    fidelity, integrate_decoupled, integrate_ode_at, integrate_sde, run_ensemble, run_sweep,
    sweep_ensemble, uniform_grid, EnsembleSpec, SdeSpec,
};
use dimer_core::oracle::calibrate_with;
use dimer_core::spin::StereoPoint;
use dimer_core::{
    BallState, BiasKind, BiasSpec, BlochVector, DimerError, Flow, FlowField, NoiseSpec, Result,
};
use nalgebra::Vector3;
use serde_json::{json, Value};

use crate::config::{Command, FlowKind, RunConfig, TrajectoryMode};
use crate::output::{num, Csv, Field, Ndjson};

/// Output of one subcommand.
#[derive(Debug, Clone)]
pub struct Product {
    pub file_name: String,
    pub contents: String,
    pub summary: Value,
    /// Set when the data was written but some part failed to converge.
    pub incomplete: Option<String>,
}

impl Product {
    fn csv(command: Command, csv: &Csv, summary: Value) -> Self {
        Product {
            file_name: format!("{}.csv", command.name()),
            contents: csv.render(),
            summary,
            incomplete: None,
        }
    }

    fn ndjson(command: Command, nd: &Ndjson, summary: Value) -> Self {
        Product {
            file_name: format!("{}.ndjson", command.name()),
            contents: nd.render(),
            summary,
            incomplete: None,
        }
    }
}

/// Inputs shared by all subcommands after flag overrides.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
}

pub fn execute(command: Command, ctx: &Context) -> Result<Product> {
    match command {
        Command::Flowfield => flowfield(ctx),
        Command::Trajectory => trajectory(ctx),
        Command::Ensemble => ensemble(ctx),
        Command::Sweep => sweep(ctx),
        Command::FixedPoints => fixed_points(ctx),
        Command::Spectrum => spectrum(ctx),
        Command::FreeEnergy => free_energy(ctx),
        Command::Calibrate => calibrate(ctx),
    }
}

pub fn build_flow(cfg: &RunConfig) -> FlowField {
    let m = &cfg.model;
    let form = cfg.flow.form;
    match cfg.flow.kind {
        FlowKind::Unitary => FlowField::Unitary {
            j: m.j,
            schedule: cfg.schedule,
        },
        FlowKind::Lindblad => FlowField::lindblad(m.j, m.gamma),
        FlowKind::Angular => FlowField::Angular {
            j: m.j,
            gamma: m.gamma,
            form,
        },
        FlowKind::LinearBias => FlowField::Biased {
            j: m.j,
            bias: BiasSpec::linear(m.s1),
            form,
        },
        FlowKind::VarianceBias => FlowField::Biased {
            j: m.j,
            bias: BiasSpec::variance(m.s2),
            form,
        },
    }
}

fn start_direction(cfg: &RunConfig) -> Result<BlochVector> {
    BlochVector::normalize(Vector3::from(cfg.initial.n))
}

fn sde_spec(ctx: &Context) -> Result<SdeSpec> {
    let cfg = &ctx.config;
    Ok(SdeSpec {
        j: cfg.model.j,
        schedule: cfg.schedule,
        noise: NoiseSpec::from_params(&cfg.model, ctx.seed),
        n0: start_direction(cfg)?,
        dt: cfg.sde.dt,
        t_span: (cfg.time.t0, cfg.time.t1),
        scheme: cfg.sde.scheme,
    })
}

fn vec3(v: &Vector3<f64>) -> [String; 3] {
    [num(v.x), num(v.y), num(v.z)]
}

fn flowfield(ctx: &Context) -> Result<Product> {
    let cfg = &ctx.config;
    let field = build_flow(cfg);
    let grid = flow_field_grid(&field, cfg.flowfield.chart, cfg.flowfield.resolution)?;
    let mut csv = Csv::new(&[
        ("u", ""),
        ("v", ""),
        ("nx", ""),
        ("ny", ""),
        ("nz", ""),
        ("vx", "J"),
        ("vy", "J"),
        ("vz", "J"),
        ("du", "J"),
        ("dv", "J"),
    ]);
    for g in &grid {
        let mut row = vec![num(g.u), num(g.v)];
        row.extend(g.position.iter().map(|&x| num(x)));
        row.extend(g.velocity.iter().map(|&x| num(x)));
        row.push(num(g.du));
        row.push(num(g.dv));
        csv.push(row);
    }
    Ok(Product::csv(
        Command::Flowfield,
        &csv,
        json!({ "points": csv.len(), "chart": cfg.flowfield.chart }),
    ))
}

fn trajectory(ctx: &Context) -> Result<Product> {
    let cfg = &ctx.config;
    let t = &cfg.time;
    let times = uniform_grid(t.t0, t.t1, t.samples);
    let n0 = start_direction(cfg)?;
    match cfg.trajectory {
        TrajectoryMode::Ode => {
            let field = build_flow(cfg);
            let ball = field.domain() == Domain::Ball;
            let start = if ball {
                BallState::new(n0, cfg.initial.d)?.ball_vector()
            } else {
                n0.into_vector()
            };
            let traj = integrate_ode_at(&field, start, t.t0, &times, &cfg.integrator)?;
            let mut csv = Csv::new(&[("t", "1/J"), ("nx", ""), ("ny", ""), ("nz", "")]);
            for (ti, n) in traj.times.iter().zip(&traj.states) {
                let mut row = vec![num(*ti)];
                row.extend(vec3(n));
                csv.push(row);
            }
            Ok(Product::csv(
                Command::Trajectory,
                &csv,
                json!({ "mode": "ode", "steps": traj.steps, "max_norm_drift": traj.max_norm_drift }),
            ))
        }
        TrajectoryMode::Sde => {
            let spec = sde_spec(ctx)?;
            let every = (spec.step_count() / (t.samples - 1).max(1)).max(1);
            let traj = integrate_sde(&spec, cfg.sde.index, every)?;
            let mut csv = Csv::new(&[("t", "1/J"), ("nx", ""), ("ny", ""), ("nz", "")]);
            for (ti, n) in traj.times.iter().zip(&traj.states) {
                let mut row = vec![num(*ti)];
                row.extend(vec3(n));
                csv.push(row);
            }
            Ok(Product::csv(
                Command::Trajectory,
                &csv,
                json!({
                    "mode": "sde",
                    "index": cfg.sde.index,
                    "steps": traj.steps,
                    "final_fidelity": fidelity(&traj.final_state()),
                }),
            ))
        }
        TrajectoryMode::Decoupled => {
            if t.t0 != 0.0 {
                return Err(DimerError::InvalidParameter {
                    name: "t0",
                    reason: "decoupled runs start at t0 = 0".to_string(),
                });
            }
            let start = BallState::new(n0, cfg.initial.d)?;
            let traj = integrate_decoupled(cfg.model.j, cfg.model.gamma, &start, &times, &cfg.integrator)?;
            let radial = traj.radial.clone().unwrap_or_default();
            let mut csv = Csv::new(&[
                ("t", "1/J"),
                ("nx", ""),
                ("ny", ""),
                ("nz", ""),
                ("d", ""),
                ("nbar_x", ""),
                ("nbar_y", ""),
                ("nbar_z", ""),
            ]);
            for ((ti, n), d) in traj.times.iter().zip(&traj.states).zip(&radial) {
                let mut row = vec![num(*ti)];
                row.extend(vec3(n));
                row.push(num(*d));
                row.extend(vec3(&(n * *d)));
                csv.push(row);
            }
            Ok(Product::csv(
                Command::Trajectory,
                &csv,
                json!({ "mode": "decoupled", "steps": traj.steps }),
            ))
        }
    }
}

fn ensemble(ctx: &Context) -> Result<Product> {
    let cfg = &ctx.config;
    let mut spec = EnsembleSpec::new(sde_spec(ctx)?, cfg.ensemble.grid_points);
    spec.crossing_threshold = cfg.ensemble.crossing_threshold;
    let stats = run_ensemble(&spec, cfg.ensemble.trajectories, ctx.seed, ctx.workers)?;
    // The averaged flow has no field term, so it is a reference only for h = 0.
    let lindblad = if cfg.schedule.kind == dimer_core::ScheduleKind::Constant && cfg.schedule.h0 == 0.0 {
        Some(integrate_ode_at(
            &FlowField::lindblad(cfg.model.j, cfg.model.gamma),
            spec.sde.n0.into_vector(),
            cfg.time.t0,
            &stats.times,
            &cfg.integrator,
        )?)
    } else {
        None
    };
    let mut csv = Csv::new(&[
        ("t", "1/J"),
        ("mean_x", ""),
        ("mean_y", ""),
        ("mean_z", ""),
        ("se_x", ""),
        ("se_y", ""),
        ("se_z", ""),
        ("lindblad_x", ""),
        ("lindblad_y", ""),
        ("lindblad_z", ""),
    ]);
    for (i, t) in stats.times.iter().enumerate() {
        let mut row = vec![num(*t)];
        row.extend(vec3(&stats.mean[i]));
        row.extend(vec3(&stats.standard_error(i)));
        match &lindblad {
            Some(l) => row.extend(vec3(&l.states[i])),
            None => row.extend(["nan".to_string(), "nan".to_string(), "nan".to_string()]),
        }
        csv.push(row);
    }
    Ok(Product::csv(
        Command::Ensemble,
        &csv,
        json!({
            "trajectories": stats.sample_count,
            "crossing_threshold": spec.crossing_threshold,
            "crossing_fraction": stats.crossing_fraction(),
            "fidelity_mean": stats.fidelity_mean,
            "fidelity_standard_error": stats.fidelity_standard_error(),
            "fidelity_histogram": stats.fidelity_histogram,
        }),
    ))
}

fn sweep(ctx: &Context) -> Result<Product> {
    let cfg = &ctx.config;
    let j = cfg.model.j;
    let n0 = start_direction(cfg)?;
    let pure = run_sweep(j, &cfg.schedule, None, n0, &cfg.integrator, 2)?;
    let mut csv = Csv::new(&[
        ("gamma", "J"),
        ("trajectories", ""),
        ("mean_fidelity", ""),
        ("fidelity_se", ""),
        ("crossing_fraction", ""),
    ]);
    for &gamma in &cfg.sweep.gammas {
        let noise = NoiseSpec {
            variance_rate: 2.0 * gamma,
            master_seed: ctx.seed,
        };
        let stats = sweep_ensemble(j, &cfg.schedule, noise, cfg.sde.dt, cfg.sweep.trajectories, ctx.workers)?;
        csv.push(vec![
            num(gamma),
            stats.sample_count.to_string(),
            num(stats.fidelity_mean),
            num(stats.fidelity_standard_error()),
            num(stats.crossing_fraction()),
        ]);
    }
    Ok(Product::csv(
        Command::Sweep,
        &csv,
        json!({ "noiseless_fidelity": pure.final_fidelity, "schedule": cfg.schedule }),
    ))
}

fn stereo_fields(w: &StereoPoint) -> (Field, Field) {
    match w.finite() {
        Some(c) => (Field::from(c.re), Field::from(c.im)),
        None => (Field::Null, Field::Null),
    }
}

fn fixed_points(ctx: &Context) -> Result<Product> {
    let field = build_flow(&ctx.config);
    let search = find_fixed_points(&field)?;
    let mut nd = Ndjson::default();
    for p in &search.points {
        let (w_re, w_im) = stereo_fields(&p.w);
        nd.push(&[
            ("nx", p.location.x().into()),
            ("ny", p.location.y().into()),
            ("nz", p.location.z().into()),
            ("w_re", w_re),
            ("w_im", w_im),
            ("class", p.class.label().into()),
            ("eig_re1", p.eigenvalues[0].re.into()),
            ("eig_im1", p.eigenvalues[0].im.into()),
            ("eig_re2", p.eigenvalues[1].re.into()),
            ("eig_im2", p.eigenvalues[1].im.into()),
            ("residual", p.residual.into()),
            ("marginal", p.marginal.into()),
        ]);
    }
    let mut product = Product::ndjson(
        Command::FixedPoints,
        &nd,
        json!({
            "points": search.points.len(),
            "seeds": search.seeds,
            "converged_seeds": search.converged_seeds,
            "incomplete": search.incomplete,
        }),
    );
    if search.incomplete {
        product.incomplete = Some("fixed-point search did not cover every seed".into());
    }
    Ok(product)
}

fn regime_label(r: Regime) -> &'static str {
    match r {
        Regime::Underdamped => "underdamped",
        Regime::Critical => "critical",
        Regime::Overdamped => "overdamped",
    }
}

fn spectrum(ctx: &Context) -> Result<Product> {
    let cfg = &ctx.config;
    let gammas = if cfg.spectrum.gammas.is_empty() {
        vec![cfg.model.gamma]
    } else {
        cfg.spectrum.gammas.clone()
    };
    let mut csv = Csv::new(&[
        ("gamma", "J"),
        ("regime", ""),
        ("l1_re", "J"),
        ("l1_im", "J"),
        ("l2_re", "J"),
        ("l2_im", "J"),
        ("l3_re", "J"),
        ("l3_im", "J"),
    ]);
    for gamma in gammas {
        let r = linear_spectrum(cfg.model.j, gamma)?;
        let mut row = vec![num(gamma), regime_label(r.regime).to_string()];
        for l in &r.eigenvalues {
            row.push(num(l.re));
            row.push(num(l.im));
        }
        csv.push(row);
    }
    Ok(Product::csv(Command::Spectrum, &csv, json!({ "rows": csv.len() })))
}

fn free_energy(ctx: &Context) -> Result<Product> {
    let cfg = &ctx.config;
    let section = &cfg.free_energy;
    let grid = section.grid();
    let curve = phi_sweep(
        section.bias,
        cfg.model.j,
        &grid,
        &section.estimator_config(cfg.integrator),
        &TransitionConfig::default(),
    )?;
    let mut csv = Csv::new(&[
        ("s", "J"),
        ("phi", "J"),
        ("converged", ""),
        ("estimator", ""),
        ("phi_path", "J"),
        ("phi_alternate", "J"),
        ("t_final", "1/J"),
        ("transition", ""),
    ]);
    for (i, p) in curve.points.iter().enumerate() {
        let flag = curve
            .transitions
            .iter()
            .find(|t| t.index == i)
            .map_or("", |t| match t.kind {
                TransitionKind::Kink => "kink",
                TransitionKind::Jump => "jump",
            });
        csv.push(vec![
            num(p.s),
            num(p.phi),
            p.converged.to_string(),
            "windowed_mean_state".to_string(),
            num(p.phi_path),
            p.phi_alternate.map_or_else(|| "nan".to_string(), num),
            num(p.t_final),
            flag.to_string(),
        ]);
    }
    let all_converged = curve.points.iter().all(|p| p.converged);
    let mut product = Product::csv(
        Command::FreeEnergy,
        &csv,
        json!({
            "bias": section.bias,
            "transitions": curve.transitions,
            "all_converged": all_converged,
        }),
    );
    if !all_converged {
        product.incomplete = Some("some estimates did not converge before the horizon".into());
    }
    Ok(product)
}

fn calibrate(ctx: &Context) -> Result<Product> {
    let cfg = &ctx.config;
    let report = calibrate_with(cfg.calibrate.samples, ctx.seed, cfg.model.j, &cfg.calibrate.s_values)?;
    let mut nd = Ndjson::default();
    for b in &report.biases {
        for (s, k) in b.s_values.iter().zip(&b.kappa) {
            nd.push(&[
                ("record", "bias".into()),
                ("kind", b.kind.name().into()),
                ("s", (*s).into()),
                ("kappa", (*k).into()),
                ("kappa_over_s", b.kappa_over_s.into()),
                ("max_residual", b.max_residual.into()),
            ]);
        }
    }
    for d in &report.printed_forms {
        nd.push(&[
            ("record", "printed_form".into()),
            ("name", d.name.as_str().into()),
            ("description", d.description.as_str().into()),
            ("max_tangency_violation", d.max_tangency_violation.into()),
            ("max_deviation", d.max_deviation.into()),
            ("analytic_tangency_violation", d.analytic_tangency_violation.into()),
        ]);
    }
    let slope = |k: BiasKind| report.bias(k).map(|b| b.kappa_over_s);
    Ok(Product::ndjson(
        Command::Calibrate,
        &nd,
        json!({
            "samples": report.samples,
            "residual_threshold": report.residual_threshold,
            "kappa_over_s_linear": slope(BiasKind::Linear),
            "kappa_over_s_variance": slope(BiasKind::Variance),
        }),
    ))
}
