//! Deadband (hysteresis) thermostat for the baseline scenarios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{ComfortBand, ComfortPenalty, SlotData};
use crate::thermal::{HvacAction, Plant, ThermalError, ThermalState};
use crate::trajectory::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeadbandConfig {
    pub heat_setpoint: f64,
    pub cool_setpoint: f64,
    /// Half-width of the band around each setpoint, °C.
    pub width: f64,
}

impl Default for DeadbandConfig {
    fn default() -> Self {
        Self { heat_setpoint: 21.0, cool_setpoint: 23.0, width: 1.0 }
    }
}

impl DeadbandConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.width > 0.0) {
            return Err(ControlError::Config(format!("deadband width must be positive, got {}", self.width)));
        }
        if !(self.heat_setpoint + self.width <= self.cool_setpoint - self.width) {
            return Err(ControlError::Config(format!(
                "heating band around {} overlaps cooling band around {} (width {})",
                self.heat_setpoint, self.cool_setpoint, self.width
            )));
        }
        Ok(())
    }

    pub fn heat_on(&self) -> f64 {
        self.heat_setpoint - self.width
    }

    pub fn heat_off(&self) -> f64 {
        self.heat_setpoint + self.width
    }

    pub fn cool_on(&self) -> f64 {
        self.cool_setpoint + self.width
    }

    pub fn cool_off(&self) -> f64 {
        self.cool_setpoint - self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    pub action: HvacAction,
}

/// One hysteresis decision. A running unit only stops once the reading
/// crosses its off threshold, and switching between heating and cooling
/// always passes through off.
pub fn deadband_decide(t_in: f64, prev: ControllerState, cfg: &DeadbandConfig) -> ControllerState {
    let action = match prev.action {
        HvacAction::Off if t_in < cfg.heat_on() => HvacAction::Heat,
        HvacAction::Off if t_in > cfg.cool_on() => HvacAction::Cool,
        HvacAction::Heat if t_in > cfg.heat_off() => HvacAction::Off,
        HvacAction::Cool if t_in < cfg.cool_off() => HvacAction::Off,
        a => a,
    };
    ControllerState { action }
}

/// Closed-loop run of the deadband controller. The controller reads the
/// settled indoor temperature at each slot boundary and holds its decision
/// for the slot.
pub fn simulate_deadband(
    plant: &Plant,
    slots: &[SlotData],
    initial: ThermalState,
    cfg: &DeadbandConfig,
    comfort: &ComfortBand,
    penalty: &ComfortPenalty,
) -> Result<(Trajectory, ThermalState), ControlError> {
    cfg.validate()?;
    let mut traj = Trajectory { records: Vec::with_capacity(slots.len()) };
    let mut state = initial;
    let mut ctl = ControllerState::default();
    for data in slots {
        let reading = plant.reading(&state, data.t_out.start);
        ctl = deadband_decide(reading, ctl, cfg);
        let action = if plant.hvac.supports(ctl.action) { ctl.action } else { HvacAction::Off };
        let out = plant.advance(state, data.t_out, action)?;
        traj.push_slot(plant, data, action, &out, comfort, penalty);
        state = out.state;
    }
    Ok((traj, state))
}

/// Largest distance by which the readings of `traj` left
/// [heat_on, cool_on].
pub fn band_excursion(traj: &Trajectory, cfg: &DeadbandConfig) -> f64 {
    traj.records
        .iter()
        .map(|r| (cfg.heat_on() - r.t_in).max(r.t_in - cfg.cool_on()).max(0.0))
        .fold(0.0, f64::max)
}
