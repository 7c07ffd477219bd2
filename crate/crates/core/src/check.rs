//! Named pass/fail records shared by the verification routines and reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub max_residual: f64,
    pub samples: usize,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `max_residual <= tolerance` and at least one sample ran.
    pub fn threshold(name: impl Into<String>, max_residual: f64, samples: usize, tolerance: f64) -> Self {
        let status = if samples > 0 && max_residual.is_finite() && max_residual <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Check {
            name: name.into(),
            status,
            max_residual,
            samples,
            tolerance,
            note: None,
        }
    }

    /// Passes when every sampled magnitude is at least `floor`; the recorded
    /// residual is the smallest magnitude seen.
    pub fn nonvanishing(name: impl Into<String>, min_magnitude: f64, samples: usize, floor: f64) -> Self {
        let status = if samples > 0 && min_magnitude.is_finite() && min_magnitude >= floor {
            Status::Pass
        } else {
            Status::Fail
        };
        Check {
            name: name.into(),
            status,
            max_residual: min_magnitude,
            samples,
            tolerance: floor,
            note: None,
        }
    }

    pub fn skip(name: impl Into<String>, note: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: Status::Skip,
            max_residual: 0.0,
            samples: 0,
            tolerance: 0.0,
            note: Some(note.into()),
        }
    }

    pub fn fail(name: impl Into<String>, note: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: Status::Fail,
            max_residual: f64::NAN,
            samples: 0,
            tolerance: 0.0,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Running maximum and mean of absolute values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub samples: usize,
}

impl ResidualStats {
    pub fn push(&mut self, value: f64) {
        let a = value.abs();
        // NaN must not be swallowed by max().
        self.max_abs = if a.is_nan() || self.max_abs.is_nan() {
            f64::NAN
        } else {
            self.max_abs.max(a)
        };
        self.mean_abs += (a - self.mean_abs) / (self.samples + 1) as f64;
        self.samples += 1;
    }

    pub fn within(&self, tol: f64) -> bool {
        self.samples > 0 && self.max_abs <= tol
    }
}

impl FromIterator<f64> for ResidualStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ResidualStats::default();
        for v in iter {
            s.push(v);
        }
        s
    }
}
