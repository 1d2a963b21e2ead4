//! Learned stand-in for the one-slot indoor-temperature transition: a
//! one-hidden-layer network trained offline on transitions of the exact
//! model and used by the optimizer in its place.

mod dataset;
mod network;
mod speed;
mod train;
mod validate;

pub use dataset::{generate_training_data, ActionSampler, CoverageReport, TrainingSample};
pub use network::{CompiledModel, SurrogateModel, FORMAT_VERSION, INPUTS, OUTPUTS};
pub use speed::{measure_speedup, SpeedupReport};
pub use train::{train, training_loss, TrainParams, TrainingReport};
pub use validate::{closed_loop_drift, validate, validate_with, BandError, ValidationReport};

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::optimizer::{OptimizerError, Transition, TransitionOutcome};
use crate::thermal::{HvacAction, HvacSpec, OutdoorRamp, ThermalError};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("model file, line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

/// The surrogate packaged as an optimizer transition.
#[derive(Debug)]
pub struct SurrogateTransition {
    model: SurrogateModel,
    compiled: CompiledModel,
    hvac: HvacSpec,
    slot_hours: f64,
    clamped: AtomicUsize,
}

impl SurrogateTransition {
    /// Accepts the model only if its held-out MAE is within `gate` °C.
    pub fn gated(
        model: SurrogateModel,
        hvac: HvacSpec,
        slot_hours: f64,
        report: &ValidationReport,
        gate: f64,
    ) -> Result<Self, OptimizerError> {
        if !(report.mae <= gate) {
            return Err(OptimizerError::SurrogateRejected { mae: report.mae, gate });
        }
        Ok(Self { compiled: model.compile(), model, hvac, slot_hours, clamped: AtomicUsize::new(0) })
    }

    pub fn model(&self) -> &SurrogateModel {
        &self.model
    }

    /// Number of predictions whose inputs had to be clamped into the
    /// training envelope.
    pub fn clamped_inputs(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }
}

impl Transition for SurrogateTransition {
    fn label(&self) -> &str {
        "surrogate"
    }

    fn supports(&self, action: HvacAction) -> bool {
        self.hvac.supports(action)
    }

    #[inline]
    fn next(
        &self,
        t_in: f64,
        t_out: OutdoorRamp,
        action: HvacAction,
    ) -> Result<TransitionOutcome, OptimizerError> {
        let (t, on, clamped) = self.compiled.predict_full(action, t_in, t_out.start, t_out.end);
        if clamped {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        Ok(TransitionOutcome { t_in: t, on_fraction: on })
    }

    fn hvac_energy_kwh(&self, on_fraction: f64) -> f64 {
        self.hvac.rating_kw * on_fraction * self.slot_hours
    }
}
