//! Curriculum schedules for the sampling rates.
//!
//! A schedule maps the epoch fraction `z = i / total` to a rate by
//! interpolating between `start` and `end` along a normalized shape
//! `f: [0, 1] -> [0, 1]` with `f(0) = 0` and `f(1) = 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sharpness of the exponential shape.
const EXP_SHARPNESS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Static,
    Linear,
    Sigmoid,
    Exponential,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::Static,
        ScheduleKind::Linear,
        ScheduleKind::Sigmoid,
        ScheduleKind::Exponential,
    ];

    /// Normalized base shape.
    pub fn shape(self, z: f64) -> f64 {
        match self {
            ScheduleKind::Static => 1.0,
            ScheduleKind::Linear => z,
            ScheduleKind::Sigmoid => {
                (1.0 + (z * std::f64::consts::PI - std::f64::consts::FRAC_PI_2).sin()) / 2.0
            }
            ScheduleKind::Exponential => (EXP_SHARPNESS * z).exp_m1() / EXP_SHARPNESS.exp_m1(),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Static => "static",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Sigmoid => "sigmoid",
            ScheduleKind::Exponential => "exponential",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" | "constant" => Ok(ScheduleKind::Static),
            "linear" => Ok(ScheduleKind::Linear),
            "sigmoid" | "s-curve" | "scurve" => Ok(ScheduleKind::Sigmoid),
            "exponential" | "exp" => Ok(ScheduleKind::Exponential),
            other => Err(Error::invalid(format!(
                "unknown schedule kind {other:?} (static, linear, sigmoid, exponential)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    kind: ScheduleKind,
    start: f64,
    end: f64,
}

impl Schedule {
    /// A static schedule holds its end rate for the whole run, so its start
    /// rate is set to the end rate.
    pub fn new(kind: ScheduleKind, start: f64, end: f64) -> Result<Self> {
        for (name, r) in [("start", start), ("end", end)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(format!("{name} rate {r} outside [0, 1]")));
            }
        }
        let start = if kind == ScheduleKind::Static {
            if start != end {
                log::warn!("static schedule ignores start rate {start}; using {end} throughout");
            }
            end
        } else {
            start
        };
        Ok(Self { kind, start, end })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(ScheduleKind::Static, rate, rate)
    }

    pub fn off() -> Self {
        Self {
            kind: ScheduleKind::Static,
            start: 0.0,
            end: 0.0,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn rate(&self, z: f64) -> f64 {
        let z = if (0.0..=1.0).contains(&z) {
            z
        } else {
            log::warn!("schedule position {z} outside [0, 1]; clamping");
            if z.is_nan() {
                0.0
            } else {
                z.clamp(0.0, 1.0)
            }
        };
        let r = self.start + (self.end - self.start) * self.kind.shape(z);
        r.clamp(self.start.min(self.end), self.start.max(self.end))
    }
}

/// `(epsilon, gamma)` for `epoch` of `total`, both evaluated at `epoch / total`.
pub fn rates_for_epoch(ss: &Schedule, nnrs: &Schedule, epoch: usize, total: usize) -> (f64, f64) {
    let z = epoch as f64 / total.max(1) as f64;
    (ss.rate(z), nnrs.rate(z))
}
