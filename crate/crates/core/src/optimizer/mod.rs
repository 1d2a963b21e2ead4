//! HVAC scheduling as a deterministic finite-horizon MDP over a grid of
//! indoor temperatures.
//!
//! The state is the settled indoor temperature: what the air relaxes to
//! within minutes once the unit pauses, given the envelope temperature. It
//! is a one-to-one function of the envelope temperature at a given outdoor
//! temperature, so the one-dimensional state loses nothing for plants that
//! start each slot at rest.

mod grid;
mod hems;
mod madp;
mod mdp;
mod simulate;

pub use grid::TemperatureGrid;
pub use hems::{
    grid_exchange, stage_cost, terminal_values, ComfortBand, ComfortPenalty, ExactTransition,
    HemsMdp, LayerEntry, SlotData, StageCost, Transition, TransitionLayers, TransitionOutcome,
};
pub use madp::{madp_solve, madp_solve_shared, SiteSolution, SolveReport, SolverParams};
pub use mdp::{value_iteration, DiscreteMdp, Policy, Step, ValueTable};
pub use simulate::simulate_policy;

use thiserror::Error;

use crate::thermal::ThermalError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no feasible action at slot {slot}, state {state}")]
    Infeasible { slot: usize, state: usize },
    #[error("surrogate rejected: validation MAE {mae:.4} °C exceeds the gate {gate:.4} °C")]
    SurrogateRejected { mae: f64, gate: f64 },
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}
