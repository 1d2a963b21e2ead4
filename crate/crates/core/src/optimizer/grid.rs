use serde::{Deserialize, Serialize};

use super::OptimizerError;

/// Uniform grid of indoor temperatures; transitions are rounded to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureGrid {
    min: f64,
    max: f64,
    resolution: f64,
    len: usize,
}

impl TemperatureGrid {
    pub fn new(min: f64, max: f64, resolution: f64) -> Result<Self, OptimizerError> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(OptimizerError::Config(format!("grid needs min < max, got [{min}, {max}]")));
        }
        if !(resolution > 0.0) {
            return Err(OptimizerError::Config(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        let steps = ((max - min) / resolution).round();
        if ((min + steps * resolution) - max).abs() > 1e-9 * resolution.max(1.0) {
            return Err(OptimizerError::Config(format!(
                "grid span {} is not a multiple of the resolution {resolution}",
                max - min
            )));
        }
        Ok(Self { min, max, resolution, len: steps as usize + 1 })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn temperature(&self, index: usize) -> f64 {
        self.min + index as f64 * self.resolution
    }

    pub fn temperatures(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.temperature(i))
    }

    /// Nearest cell, and whether `t` lay outside the grid and was clamped.
    pub fn nearest(&self, t: f64) -> (usize, bool) {
        let x = ((t - self.min) / self.resolution).round();
        if !(x >= 0.0) {
            (0, true)
        } else if x > (self.len - 1) as f64 {
            (self.len - 1, true)
        } else {
            (x as usize, false)
        }
    }

    pub fn covers(&self, lower: f64, upper: f64) -> bool {
        self.min <= lower && upper <= self.max
    }
}
