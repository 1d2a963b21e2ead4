//! The HEMS scheduling problem: per-slot exogenous data, the stage cost and
//! the indoor-temperature transition, tabulated on the grid.

use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};
use crate::thermal::{HvacAction, OutdoorRamp, Plant};

use super::grid::TemperatureGrid;
use super::mdp::{DiscreteMdp, Step};
use super::OptimizerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortBand {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ComfortBand {
    fn default() -> Self {
        Self { lower: 20.0, upper: 24.0 }
    }
}

impl ComfortBand {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(OptimizerError::Config(format!(
                "comfort band [{}, {}] is empty",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Distance outside the band, °C; zero inside.
    pub fn violation(&self, t: f64) -> f64 {
        (self.lower - t).max(t - self.upper).max(0.0)
    }
}

/// Cost charged for ending a slot outside the comfort band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortPenalty {
    /// $ per violated slot.
    pub per_slot: f64,
    /// $ per °C of violation depth.
    pub per_degree: f64,
}

impl Default for ComfortPenalty {
    fn default() -> Self {
        Self { per_slot: 10.0, per_degree: 1.0 }
    }
}

impl ComfortPenalty {
    pub fn cost(&self, depth: f64) -> f64 {
        if depth > 0.0 {
            self.per_slot + self.per_degree * depth
        } else {
            0.0
        }
    }
}

/// Exogenous data of one half-hour slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotData {
    pub t_out: OutdoorRamp,
    pub pv_kwh: f64,
    pub demand_kwh: f64,
    /// Import price, $/kWh.
    pub import_price: f64,
    /// Feed-in credit, $/kWh.
    pub feed_in_price: f64,
}

impl SlotData {
    pub fn validate(&self, slot: usize) -> Result<(), OptimizerError> {
        let vals = [
            self.t_out.start,
            self.t_out.end,
            self.pv_kwh,
            self.demand_kwh,
            self.import_price,
            self.feed_in_price,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(OptimizerError::Config(format!("slot {slot} has non-finite data")));
        }
        if self.pv_kwh < 0.0 || self.demand_kwh < 0.0 {
            return Err(OptimizerError::Config(format!("slot {slot} has negative pv or demand")));
        }
        Ok(())
    }
}

/// Grid exchange for a slot: (import, export) in kWh.
pub fn grid_exchange(demand_kwh: f64, hvac_kwh: f64, pv_kwh: f64) -> (f64, f64) {
    let net = demand_kwh + hvac_kwh - pv_kwh;
    (net.max(0.0), (-net).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageCost {
    pub import_kwh: f64,
    pub export_kwh: f64,
    /// Import charges minus feed-in credit, $.
    pub energy_cost: f64,
    /// Comfort penalty, $.
    pub penalty: f64,
}

impl StageCost {
    pub fn total(&self) -> f64 {
        self.energy_cost + self.penalty
    }
}

/// Cost of a slot in which the HVAC draws `hvac_kwh` and the indoor
/// temperature ends at `next_t_in`.
pub fn stage_cost(
    hvac_kwh: f64,
    slot: &SlotData,
    next_t_in: f64,
    comfort: &ComfortBand,
    penalty: &ComfortPenalty,
) -> StageCost {
    let (import_kwh, export_kwh) = grid_exchange(slot.demand_kwh, hvac_kwh, slot.pv_kwh);
    StageCost {
        import_kwh,
        export_kwh,
        energy_cost: slot.import_price * import_kwh - slot.feed_in_price * export_kwh,
        penalty: penalty.cost(comfort.violation(next_t_in)),
    }
}

/// Terminal cost-to-go: zero inside the comfort band, the slot penalty
/// outside it.
pub fn terminal_values(
    grid: &TemperatureGrid,
    comfort: &ComfortBand,
    penalty: &ComfortPenalty,
) -> Vec<f64> {
    grid.temperatures().map(|t| penalty.cost(comfort.violation(t))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionOutcome {
    /// Indoor temperature at the end of the slot, °C.
    pub t_in: f64,
    /// Share of the slot the HVAC ran at full output.
    pub on_fraction: f64,
}

/// One-slot model of the indoor temperature under a held HVAC action.
pub trait Transition: Sync {
    fn label(&self) -> &str;
    fn supports(&self, action: HvacAction) -> bool;
    fn next(
        &self,
        t_in: f64,
        t_out: OutdoorRamp,
        action: HvacAction,
    ) -> Result<TransitionOutcome, OptimizerError>;
    /// Electrical energy at the given on-fraction, kWh.
    fn hvac_energy_kwh(&self, on_fraction: f64) -> f64;
}

/// Transition by integrating the thermal ODEs.
#[derive(Debug, Clone, Copy)]
pub struct ExactTransition {
    pub plant: Plant,
}

impl Transition for ExactTransition {
    fn label(&self) -> &str {
        "exact"
    }

    fn supports(&self, action: HvacAction) -> bool {
        self.plant.hvac.supports(action)
    }

    fn next(
        &self,
        t_in: f64,
        t_out: OutdoorRamp,
        action: HvacAction,
    ) -> Result<TransitionOutcome, OptimizerError> {
        let (t_in, on_fraction) = self.plant.indoor_transition(t_in, t_out, action)?;
        Ok(TransitionOutcome { t_in, on_fraction })
    }

    fn hvac_energy_kwh(&self, on_fraction: f64) -> f64 {
        self.plant.hvac_energy_kwh(on_fraction)
    }
}

/// A tabulated transition for one (slot, cell, action).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerEntry {
    /// Grid cell nearest to the successor temperature.
    pub next: u32,
    /// Successor temperature before rounding, °C.
    pub t_next: f64,
    pub hvac_kwh: f64,
}

const INFEASIBLE: u32 = u32::MAX;

/// Transitions of every grid cell under every action for a run of slots.
/// These depend only on the weather, so sites sharing a weather file share
/// one table.
#[derive(Debug, Clone)]
pub struct TransitionLayers {
    cells: usize,
    slots: usize,
    entries: Vec<LayerEntry>,
    clamped: usize,
}

impl TransitionLayers {
    pub fn build<T: Transition + ?Sized>(
        transition: &T,
        grid: &TemperatureGrid,
        ramps: &[OutdoorRamp],
        exec: Execution,
    ) -> Result<Self, OptimizerError> {
        let cells = grid.len();
        let per_slot = cells * HvacAction::ALL.len();
        let entries = par::try_map_indices(exec, ramps.len() * per_slot, |i| {
            let k = i / per_slot;
            let cell = (i % per_slot) / HvacAction::ALL.len();
            let action = HvacAction::from_index(i % HvacAction::ALL.len());
            if !transition.supports(action) {
                return Ok((
                    LayerEntry { next: INFEASIBLE, t_next: f64::NAN, hvac_kwh: 0.0 },
                    false,
                ));
            }
            let out = transition.next(grid.temperature(cell), ramps[k], action)?;
            let (next, clamped) = grid.nearest(out.t_in);
            Ok::<_, OptimizerError>((
                LayerEntry {
                    next: next as u32,
                    t_next: out.t_in,
                    hvac_kwh: transition.hvac_energy_kwh(out.on_fraction),
                },
                clamped,
            ))
        })?;
        let clamped = entries.iter().filter(|(_, c)| *c).count();
        if clamped > 0 {
            log::debug!("{clamped} tabulated transitions left the grid and were clamped");
        }
        Ok(Self {
            cells,
            slots: ramps.len(),
            entries: entries.into_iter().map(|(e, _)| e).collect(),
            clamped,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Number of tabulated transitions that had to be clamped onto the grid.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, slot: usize, cell: usize, action: usize) -> Option<&LayerEntry> {
        let e = &self.entries[(slot * self.cells + cell) * HvacAction::ALL.len() + action];
        (e.next != INFEASIBLE).then_some(e)
    }
}

/// The HEMS MDP over a run of slots with pre-tabulated transitions.
pub struct HemsMdp<'a> {
    pub layers: &'a TransitionLayers,
    pub slots: &'a [SlotData],
    pub comfort: ComfortBand,
    pub penalty: ComfortPenalty,
}

impl DiscreteMdp for HemsMdp<'_> {
    fn horizon(&self) -> usize {
        self.slots.len()
    }

    fn num_states(&self) -> usize {
        self.layers.cells()
    }

    fn num_actions(&self) -> usize {
        HvacAction::ALL.len()
    }

    fn evaluate(&self, slot: usize, state: usize, action: usize) -> Result<Step, OptimizerError> {
        Ok(match self.layers.get(slot, state, action) {
            Some(e) => Step {
                next: e.next as usize,
                cost: stage_cost(e.hvac_kwh, &self.slots[slot], e.t_next, &self.comfort, &self.penalty)
                    .total(),
            },
            None => Step { next: 0, cost: f64::INFINITY },
        })
    }
}
