//! Lumped two-node thermal model of a single-zone building with an optional
//! PCM layer in its envelope.
//!
//! The envelope node (temperature `T_e`) carries the opaque construction and
//! the PCM; the air node (`T_in`) carries the indoor air. Doors and windows
//! are a pure resistance between outdoor and indoor air.

mod envelope;
mod model;
mod pcm;

pub use envelope::{
    compute_envelope_params, infiltration_gain, lightweight_layers, BuildingGeometry,
    EnvelopeParams, FenestrationElement, Infiltration, MaterialLayer, AIR_DENSITY,
    AIR_SPECIFIC_HEAT,
};
pub use model::{
    hvac_thermal_power, HvacAction, HvacCapability, HvacLimits, HvacSpec, OutdoorRamp, Plant,
    SlotOutcome, ThermalModel, ThermalState, SANITY_BAND,
};
pub use pcm::{
    pcm_enthalpy_delta, pcm_soc, pcm_specific_heat, PcmSpec, J_PER_KWH, PEAK_SPECIFIC_HEAT,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration failed at step {step}: {detail}")]
    Integration { step: usize, detail: String },
}

/// Everything needed to build a [`Plant`], as it appears in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildingConfig {
    pub geometry: BuildingGeometry,
    pub layers: Vec<MaterialLayer>,
    pub accessibility: f64,
    /// Air changes per hour.
    pub infiltration_ach: f64,
    pub hvac: HvacSpec,
    pub limits: HvacLimits,
    pub pcm_layer_thickness: f64,
    pub pcm_conductivity: f64,
    pub pcm_density: f64,
    /// Total PCM mass, kg. Derived from the envelope area when absent.
    pub pcm_mass: Option<f64>,
    pub slot_seconds: f64,
    pub substeps: usize,
}

impl Default for BuildingConfig {
    fn default() -> Self {
        Self {
            geometry: BuildingGeometry::default(),
            layers: lightweight_layers(),
            // Only the plasterboard sits between the PCM and the room.
            accessibility: 0.06,
            infiltration_ach: 0.5,
            hvac: HvacSpec::default(),
            limits: HvacLimits::default(),
            pcm_layer_thickness: 0.03,
            pcm_conductivity: 2.8,
            pcm_density: 545.0,
            pcm_mass: Some(2806.0),
            slot_seconds: 1800.0,
            substeps: 30,
        }
    }
}

impl BuildingConfig {
    pub fn envelope(&self) -> Result<EnvelopeParams, ThermalError> {
        compute_envelope_params(&self.geometry, &self.layers, self.accessibility)
    }

    pub fn pcm(&self, melting_point: f64) -> Result<PcmSpec, ThermalError> {
        let mut spec = PcmSpec {
            melting_point,
            layer_thickness: self.pcm_layer_thickness,
            conductivity: self.pcm_conductivity,
            density: self.pcm_density,
            mass: 0.0,
        };
        spec.mass = match self.pcm_mass {
            Some(m) => m,
            None => spec.mass_for_area(self.geometry.gross_envelope_area()),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the plant with a PCM layer melting at `melting_point`, or
    /// without PCM when `None`.
    pub fn plant(&self, melting_point: Option<f64>) -> Result<Plant, ThermalError> {
        let pcm = melting_point.map(|tp| self.pcm(tp)).transpose()?;
        let infiltration =
            Infiltration { ach: self.infiltration_ach, volume: self.geometry.volume() };
        let model = ThermalModel::new(self.envelope()?, pcm, infiltration)?;
        Plant::new(model, self.hvac, self.limits, self.slot_seconds, self.substeps)
    }
}
