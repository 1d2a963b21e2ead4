use crate::thermal::{HvacAction, Plant, ThermalState};
use crate::trajectory::Trajectory;

use super::grid::TemperatureGrid;
use super::hems::{ComfortBand, ComfortPenalty, SlotData};
use super::mdp::Policy;
use super::OptimizerError;

/// Runs `policy` on the exact plant from `initial`, looking the action up
/// at the grid cell nearest to each slot's indoor reading.
pub fn simulate_policy(
    plant: &Plant,
    policy: &Policy,
    grid: &TemperatureGrid,
    slots: &[SlotData],
    initial: ThermalState,
    comfort: &ComfortBand,
    penalty: &ComfortPenalty,
) -> Result<(Trajectory, ThermalState), OptimizerError> {
    if policy.horizon() != slots.len() {
        return Err(OptimizerError::Config(format!(
            "policy covers {} slots but {} were given",
            policy.horizon(),
            slots.len()
        )));
    }
    if policy.num_states() != grid.len() {
        return Err(OptimizerError::Config("policy and grid sizes differ".into()));
    }
    let mut traj = Trajectory { records: Vec::with_capacity(slots.len()) };
    let mut state = initial;
    let mut outside = 0usize;
    for (k, data) in slots.iter().enumerate() {
        let reading = plant.reading(&state, data.t_out.start);
        let (cell, clamped) = grid.nearest(reading);
        if clamped {
            outside += 1;
        }
        let action = HvacAction::from_index(policy.get(k, cell));
        let out = plant.advance(state, data.t_out, action)?;
        traj.push_slot(plant, data, action, &out, comfort, penalty);
        state = out.state;
    }
    if outside > 0 {
        log::warn!("{outside} slots started outside the grid; nearest cell used");
    }
    Ok((traj, state))
}
