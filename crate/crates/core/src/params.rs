use serde::{Deserialize, Serialize};

use crate::error::{DimerError, Result};

/// Couplings of the dimer. All rates share the inverse-time unit of `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "J")]
    pub j: f64,
    pub gamma: f64,
    #[serde(default)]
    pub s1: f64,
    #[serde(default)]
    pub s2: f64,
}

impl ModelParams {
    pub fn new(j: f64, gamma: f64) -> Result<Self> {
        let p = ModelParams {
            j,
            gamma,
            s1: 0.0,
            s2: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(DimerError::invalid("J", format!("must be > 0, got {}", self.j)));
        }
        for (name, v) in [("gamma", self.gamma), ("s1", self.s1), ("s2", self.s2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DimerError::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    LinearRamp,
    TanhRamp,
}

/// Steepness of the tanh ramp: `h` covers ~99% of its range in the middle of `[0, T]`.
pub const TANH_RAMP_STEEPNESS: f64 = 3.0;

/// Staggered field `h(t)`. Ramps run from `h0` at `t = 0` to `h1` at `t = duration`
/// and hold their end values outside that interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSchedule {
    pub kind: ScheduleKind,
    pub h0: f64,
    #[serde(default)]
    pub h1: f64,
    #[serde(rename = "T", default)]
    pub duration: f64,
}

impl FieldSchedule {
    pub fn constant(h: f64) -> Self {
        FieldSchedule {
            kind: ScheduleKind::Constant,
            h0: h,
            h1: h,
            duration: 0.0,
        }
    }

    pub fn linear_ramp(h0: f64, h1: f64, duration: f64) -> Result<Self> {
        let s = FieldSchedule {
            kind: ScheduleKind::LinearRamp,
            h0,
            h1,
            duration,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn tanh_ramp(h0: f64, h1: f64, duration: f64) -> Result<Self> {
        let s = FieldSchedule {
            kind: ScheduleKind::TanhRamp,
            h0,
            h1,
            duration,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h0.is_finite() && self.h1.is_finite()) {
            return Err(DimerError::invalid("schedule", "field endpoints must be finite"));
        }
        if self.kind != ScheduleKind::Constant && !(self.duration.is_finite() && self.duration > 0.0)
        {
            return Err(DimerError::invalid(
                "T",
                format!("ramp duration must be > 0, got {}", self.duration),
            ));
        }
        Ok(())
    }

    pub fn field_at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.h0,
            ScheduleKind::LinearRamp => {
                let u = (t / self.duration).clamp(0.0, 1.0);
                self.h0 + (self.h1 - self.h0) * u
            }
            ScheduleKind::TanhRamp => {
                let u = (t / self.duration).clamp(0.0, 1.0);
                let mid = 0.5 * (self.h0 + self.h1);
                let half = 0.5 * (self.h1 - self.h0);
                let a = TANH_RAMP_STEEPNESS;
                mid + half * (a * (2.0 * u - 1.0)).tanh() / a.tanh()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramps_hit_endpoints() {
        for s in [
            FieldSchedule::linear_ramp(-20.0, 20.0, 200.0).unwrap(),
            FieldSchedule::tanh_ramp(-20.0, 20.0, 200.0).unwrap(),
        ] {
            assert!((s.field_at(0.0) + 20.0).abs() < 1e-12);
            assert!((s.field_at(200.0) - 20.0).abs() < 1e-12);
            assert!(s.field_at(100.0).abs() < 1e-12);
            assert_eq!(s.field_at(-1.0), s.field_at(0.0));
        }
    }

    #[test]
    fn ramp_needs_positive_duration() {
        assert!(FieldSchedule::linear_ramp(-1.0, 1.0, 0.0).is_err());
        assert_eq!(FieldSchedule::constant(0.5).field_at(123.0), 0.5);
    }

    #[test]
    fn model_params_validation() {
        assert!(ModelParams::new(1.0, 0.0).is_ok());
        assert!(ModelParams::new(0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0).is_err());
    }
}
