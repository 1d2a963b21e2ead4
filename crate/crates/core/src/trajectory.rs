//! Per-slot record of a closed-loop simulation, shared by the deadband and
//! HEMS drivers.

use serde::{Deserialize, Serialize};

use crate::optimizer::{stage_cost, ComfortBand, ComfortPenalty, SlotData};
use crate::thermal::{HvacAction, Plant, SlotOutcome, ThermalState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    /// Outdoor temperature at the start of the slot, °C.
    pub t_out: f64,
    /// Settled indoor temperature at the end of the slot, °C.
    pub t_in: f64,
    /// Indoor air temperature at the end of the slot, °C.
    pub t_air: f64,
    pub t_envelope: f64,
    pub min_air: f64,
    pub max_air: f64,
    pub action: HvacAction,
    pub on_fraction: f64,
    pub hvac_kwh: f64,
    pub demand_kwh: f64,
    pub pv_kwh: f64,
    pub import_kwh: f64,
    pub export_kwh: f64,
    pub import_price: f64,
    pub feed_in_price: f64,
    /// Import charges minus feed-in credit, $.
    pub energy_cost: f64,
    /// Comfort violation at the end of the slot, °C.
    pub violation: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<SlotRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Import charges minus feed-in credit over the run, $.
    pub fn energy_cost(&self) -> f64 {
        self.records.iter().map(|r| r.energy_cost).sum()
    }

    pub fn penalty(&self) -> f64 {
        self.records.iter().map(|r| r.penalty).sum()
    }

    /// Energy cost plus comfort penalties: the optimizer's objective.
    pub fn objective(&self) -> f64 {
        self.energy_cost() + self.penalty()
    }

    pub fn hvac_kwh(&self) -> f64 {
        self.records.iter().map(|r| r.hvac_kwh).sum()
    }

    pub fn violated_slots(&self) -> usize {
        self.records.iter().filter(|r| r.violation > 0.0).count()
    }

    /// Number of slot boundaries at which the unit switched on or off.
    pub fn toggles(&self) -> usize {
        let mut prev = false;
        let mut n = 0;
        for r in &self.records {
            let on = r.action.is_on();
            if on != prev {
                n += 1;
            }
            prev = on;
        }
        n
    }

    pub(crate) fn push_slot(
        &mut self,
        plant: &Plant,
        data: &SlotData,
        action: HvacAction,
        out: &SlotOutcome,
        comfort: &ComfortBand,
        penalty: &ComfortPenalty,
    ) {
        let state: ThermalState = out.state;
        let t_in = plant.reading(&state, data.t_out.end);
        let hvac_kwh = plant.hvac_energy_kwh(out.on_fraction);
        let cost = stage_cost(hvac_kwh, data, t_in, comfort, penalty);
        self.records.push(SlotRecord {
            slot: self.records.len(),
            t_out: data.t_out.start,
            t_in,
            t_air: state.t_indoor,
            t_envelope: state.t_envelope,
            min_air: out.min_indoor,
            max_air: out.max_indoor,
            action,
            on_fraction: out.on_fraction,
            hvac_kwh,
            demand_kwh: data.demand_kwh,
            pv_kwh: data.pv_kwh,
            import_kwh: cost.import_kwh,
            export_kwh: cost.export_kwh,
            import_price: data.import_price,
            feed_in_price: data.feed_in_price,
            energy_cost: cost.energy_cost,
            violation: comfort.violation(t_in),
            penalty: cost.penalty,
        });
    }
}
