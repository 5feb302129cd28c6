use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponentially decaying value:
/// `end + (initial - end) * exp(-episode / decay)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub initial: f64,
    #[serde(rename = "final")]
    pub end: f64,
    pub decay: f64,
}

impl NoiseSchedule {
    pub const fn new(initial: f64, end: f64, decay: f64) -> Self {
        Self { initial, end, decay }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, value, 1.0)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.end >= 0.0 && self.end <= self.initial && self.initial.is_finite()) {
            return Err(Error::Config(format!(
                "{name}: need 0 <= final <= initial (got {} -> {})",
                self.initial, self.end
            )));
        }
        if !(self.decay > 0.0) {
            return Err(Error::Config(format!("{name}: decay must be > 0")));
        }
        Ok(())
    }

    pub fn value(&self, episode: u64) -> f64 {
        self.end + (self.initial - self.end) * (-(episode as f64) / self.decay).exp()
    }
}
