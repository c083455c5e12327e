//! JSON run configuration: parsing, unknown-key suggestions and validation.

use std::fmt;
use std::path::Path;

use dimer_core::analysis::{FreeEnergyConfig, GridChart};
use dimer_core::integrate::{IntegratorConfig, SdeScheme};
use dimer_core::{BiasKind, FieldForm, FieldSchedule, ModelParams, ScheduleKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Flowfield,
    Trajectory,
    Ensemble,
    Sweep,
    FixedPoints,
    Spectrum,
    FreeEnergy,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Flowfield => "flowfield",
            Command::Trajectory => "trajectory",
            Command::Ensemble => "ensemble",
            Command::Sweep => "sweep",
            Command::FixedPoints => "fixed-points",
            Command::Spectrum => "spectrum",
            Command::FreeEnergy => "free-energy",
            Command::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Unitary,
    Lindblad,
    Angular,
    LinearBias,
    VarianceBias,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub kind: FlowKind,
    pub form: FieldForm,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            kind: FlowKind::Angular,
            form: FieldForm::Canonical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// Direction of the start state (normalized on use).
    pub n: [f64; 3],
    /// Radius for ball flows.
    pub d: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            n: [0.0, 0.0, -1.0],
            d: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t0: f64,
    pub t1: f64,
    /// Output samples, both ends included.
    pub samples: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            t0: 0.0,
            t1: 50.0,
            samples: 501,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMode {
    #[default]
    Ode,
    Sde,
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSection {
    pub dt: f64,
    pub scheme: SdeScheme,
    /// Trajectory index for single-trajectory runs.
    pub index: u64,
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            dt: 1e-3,
            scheme: SdeScheme::Heun,
            index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub trajectories: u64,
    pub grid_points: usize,
    pub crossing_threshold: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            trajectories: 1000,
            grid_points: 101,
            crossing_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
    pub trajectories: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            gammas: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            trajectories: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowfieldSection {
    pub chart: GridChart,
    pub resolution: usize,
}

impl Default for FlowfieldSection {
    fn default() -> Self {
        FlowfieldSection {
            chart: GridChart::Stereo { extent: 3.0 },
            resolution: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Dephasing rates to tabulate; empty means `model.gamma` only.
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeEnergySection {
    pub bias: BiasKind,
    pub s_min: f64,
    pub s_max: f64,
    pub s_step: f64,
    pub t_initial: f64,
    pub horizon: f64,
    pub sample_dt: f64,
    pub tolerance: f64,
}

impl Default for FreeEnergySection {
    fn default() -> Self {
        let d = FreeEnergyConfig::default();
        FreeEnergySection {
            bias: BiasKind::Linear,
            s_min: 0.0,
            s_max: 2.5,
            s_step: 0.02,
            t_initial: d.t_initial,
            horizon: d.horizon,
            sample_dt: d.sample_dt,
            tolerance: d.tolerance,
        }
    }
}

impl FreeEnergySection {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.s_max - self.s_min) / self.s_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.s_min + i as f64 * self.s_step).collect()
    }

    pub fn estimator_config(&self, integrator: IntegratorConfig) -> FreeEnergyConfig {
        FreeEnergyConfig {
            t_initial: self.t_initial,
            horizon: self.horizon,
            sample_dt: self.sample_dt,
            tolerance: self.tolerance,
            integrator,
            ..FreeEnergyConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub samples: usize,
    pub s_values: Vec<f64>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection {
            samples: dimer_core::oracle::CALIBRATION_SAMPLES,
            s_values: vec![0.5, 1.0, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

fn default_model() -> ModelParams {
    ModelParams {
        j: 1.0,
        gamma: 0.0,
        s1: 0.0,
        s2: 0.0,
    }
}

fn default_schedule() -> FieldSchedule {
    FieldSchedule::constant(0.0)
}

/// Everything a run needs. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_model")]
    pub model: ModelParams,
    #[serde(default = "default_schedule")]
    pub schedule: FieldSchedule,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub trajectory: TrajectoryMode,
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub flowfield: FlowfieldSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub free_energy: FreeEnergySection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// One problem with a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
    pub line: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

/// Backticked names in a serde message: the offending name first, then the
/// expected ones.
fn backticked(msg: &str) -> Vec<&str> {
    msg.split('`').skip(1).step_by(2).collect()
}

fn suggestion(unknown: &str, expected: &[&str]) -> Option<String> {
    expected
        .iter()
        .map(|c| (strsim::damerau_levenshtein(unknown, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

fn parse_violation(err: &serde_json::Error) -> Violation {
    let full = err.to_string();
    let msg = full
        .rsplit_once(" at line ")
        .map_or(full.as_str(), |(m, _)| m)
        .to_string();
    let line = (err.line() > 0).then_some(err.line());
    let names = backticked(&msg);
    if (msg.starts_with("unknown field") || msg.starts_with("unknown variant")) && !names.is_empty() {
        let hint = suggestion(names[0], &names[1..])
            .map(|s| format!(" (did you mean `{s}`?)"))
            .unwrap_or_default();
        return Violation {
            field: names[0].to_string(),
            message: format!("{msg}{hint}"),
            line,
        };
    }
    Violation {
        field: "config".into(),
        message: msg,
        line,
    }
}

/// First line of `raw` mentioning the JSON key `key`.
fn locate(raw: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    raw.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

impl RunConfig {
    pub fn parse(raw: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(raw).map_err(|e| ConfigError::Invalid(vec![parse_violation(&e)]))?;
        let violations = cfg.violations(raw);
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&raw)
    }

    /// Physics and range checks; `raw` is used only to attach line numbers.
    pub fn violations(&self, raw: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &str, message: String| {
            if !ok {
                out.push(Violation {
                    field: key.to_string(),
                    message,
                    line: locate(raw, key),
                });
            }
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let non_negative = |x: f64| x.is_finite() && x >= 0.0;

        let m = &self.model;
        check(positive(m.j), "J", format!("must be > 0, got {}", m.j));
        check(non_negative(m.gamma), "gamma", format!("must be >= 0, got {}", m.gamma));
        check(non_negative(m.s1), "s1", format!("must be >= 0, got {}", m.s1));
        check(non_negative(m.s2), "s2", format!("must be >= 0, got {}", m.s2));

        let sch = &self.schedule;
        check(
            sch.h0.is_finite() && sch.h1.is_finite(),
            "h0",
            "field endpoints must be finite".into(),
        );
        check(
            sch.kind == ScheduleKind::Constant || positive(sch.duration),
            "T",
            format!("ramp duration must be > 0, got {}", sch.duration),
        );

        let ig = &self.integrator;
        check(positive(ig.rel_tol), "rel_tol", "must be > 0".into());
        check(positive(ig.abs_tol), "abs_tol", "must be > 0".into());
        check(positive(ig.dt_init), "dt_init", "must be > 0".into());
        check(positive(ig.dt_max), "dt_max", "must be > 0".into());
        check(ig.max_steps > 0, "max_steps", "must be >= 1".into());

        let n = self.initial.n;
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        check(positive(norm), "n", "start direction must be non-zero".into());
        check(
            (0.0..=1.0).contains(&self.initial.d),
            "d",
            format!("radius must lie in [0, 1], got {}", self.initial.d),
        );

        let t = &self.time;
        check(
            t.t0.is_finite() && t.t1.is_finite() && t.t1 > t.t0,
            "t1",
            format!("need t1 > t0, got [{}, {}]", t.t0, t.t1),
        );
        check(t.samples >= 2, "samples", "need at least 2 samples".into());

        check(positive(self.sde.dt), "dt", format!("must be > 0, got {}", self.sde.dt));

        let e = &self.ensemble;
        check(e.trajectories >= 1, "trajectories", "need at least 1 trajectory".into());
        check(e.grid_points >= 2, "grid_points", "need at least 2 grid points".into());
        check(
            (-1.0..=1.0).contains(&e.crossing_threshold),
            "crossing_threshold",
            "must lie in [-1, 1]".into(),
        );

        check(!self.sweep.gammas.is_empty(), "gammas", "sweep needs at least one rate".into());
        check(
            self.sweep.gammas.iter().all(|&g| non_negative(g)),
            "gammas",
            "rates must be >= 0".into(),
        );
        check(
            self.spectrum.gammas.iter().all(|&g| non_negative(g)),
            "gammas",
            "rates must be >= 0".into(),
        );

        check(self.flowfield.resolution >= 2, "resolution", "need at least 2".into());
        if let GridChart::Stereo { extent } = self.flowfield.chart {
            check(positive(extent), "extent", format!("must be > 0, got {extent}"));
        }

        let fe = &self.free_energy;
        check(non_negative(fe.s_min), "s_min", "must be >= 0".into());
        check(fe.s_max.is_finite() && fe.s_max >= fe.s_min, "s_max", "must be >= s_min".into());
        check(positive(fe.s_step), "s_step", "must be > 0".into());
        check(positive(fe.t_initial), "t_initial", "must be > 0".into());
        check(
            fe.horizon.is_finite() && fe.horizon >= fe.t_initial,
            "horizon",
            "must be >= t_initial".into(),
        );
        check(
            positive(fe.sample_dt) && fe.sample_dt < fe.t_initial,
            "sample_dt",
            "need 0 < sample_dt < t_initial".into(),
        );
        check(positive(fe.tolerance), "tolerance", "must be > 0".into());

        let c = &self.calibrate;
        check(c.samples >= 1000, "samples", "calibration needs at least 1000 samples".into());
        check(
            !c.s_values.is_empty() && c.s_values.iter().all(|&s| positive(s)),
            "s_values",
            "need positive bias strengths".into(),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(raw: &str) -> Vec<Violation> {
        match RunConfig::parse(raw) {
            Err(ConfigError::Invalid(v)) => v,
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::parse("{}").unwrap();
        assert_eq!(cfg.model.j, 1.0);
        assert_eq!(cfg.flow.kind, FlowKind::Angular);
        assert_eq!(cfg.free_energy.grid().len(), 126);
    }

    #[test]
    fn negative_rate_names_the_field_and_line() {
        let v = messages("{\n  \"model\": {\n    \"J\": 1.0,\n    \"gamma\": -1\n  }\n}");
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "gamma");
        assert_eq!(v[0].line, Some(4));
    }

    #[test]
    fn unknown_key_gets_a_suggestion() {
        let v = messages("{\"model\": {\"J\": 1.0, \"gama\": 1.0}}");
        assert_eq!(v[0].field, "gama");
        assert!(v[0].message.contains("did you mean `gamma`"), "{}", v[0]);
        let v = messages("{\"comand\": \"spectrum\"}");
        assert!(v[0].message.contains("`command`"), "{}", v[0]);
    }

    #[test]
    fn unknown_variant_gets_a_suggestion() {
        let v = messages("{\"sde\": {\"scheme\": \"huen\"}}");
        assert!(v[0].message.contains("did you mean `heun`"), "{}", v[0]);
    }

    #[test]
    fn all_violations_are_reported() {
        let v = messages("{\"model\": {\"J\": 0, \"gamma\": -1}, \"time\": {\"samples\": 1}}");
        let fields: Vec<&str> = v.iter().map(|x| x.field.as_str()).collect();
        assert_eq!(fields, ["J", "gamma", "samples"]);
    }

    #[test]
    fn free_energy_grid_includes_the_end() {
        let fe = FreeEnergySection {
            s_max: 1.0,
            s_step: 0.1,
            ..FreeEnergySection::default()
        };
        let g = fe.grid();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
    }
}
