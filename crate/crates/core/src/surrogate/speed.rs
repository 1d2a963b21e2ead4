use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::optimizer::Transition;
use crate::thermal::{hvac_thermal_power, HvacAction, OutdoorRamp, Plant, ThermalState};

use super::{SurrogateError, SurrogateTransition};

/// Per-call cost of the surrogate transition against one fixed-step ODE
/// slot of the same plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub surrogate_ns: f64,
    pub ode_ns: f64,
    pub substeps: usize,
    pub speedup: f64,
}

fn inputs(i: usize) -> (f64, OutdoorRamp, HvacAction) {
    let t_in = 15.0 + (i % 150) as f64 * 0.1;
    let t_out = 5.0 + (i % 31) as f64;
    (t_in, OutdoorRamp { start: t_out, end: t_out + 0.5 }, HvacAction::ALL[i % 3])
}

/// Best of `rounds` timings for each side; `calls` is the number of ODE
/// slots per round (the surrogate gets 50 times as many).
pub fn measure_speedup(
    surrogate: &SurrogateTransition,
    plant: &Plant,
    calls: usize,
    rounds: usize,
) -> Result<SpeedupReport, SurrogateError> {
    let calls = calls.max(1);
    let sur_calls = calls * 50;
    let mut sur_best = f64::INFINITY;
    let mut ode_best = f64::INFINITY;
    let mut sink = 0.0;
    for _ in 0..rounds.max(1) {
        let t = Instant::now();
        for i in 0..sur_calls {
            let (t_in, ramp, a) = inputs(i);
            let out = black_box(surrogate)
                .next(black_box(t_in), ramp, a)
                .map_err(|e| SurrogateError::Invalid(e.to_string()))?;
            sink += out.t_in;
        }
        sur_best = sur_best.min(t.elapsed().as_secs_f64() / sur_calls as f64);

        let t = Instant::now();
        for i in 0..calls {
            let (t_in, ramp, a) = inputs(i);
            let q = if plant.hvac.supports(a) { hvac_thermal_power(a, &plant.hvac)? } else { 0.0 };
            let s = plant.model.step(
                ThermalState::uniform(black_box(t_in)),
                ramp,
                q,
                plant.slot_seconds,
                plant.substeps,
            )?;
            sink += s.t_indoor;
        }
        ode_best = ode_best.min(t.elapsed().as_secs_f64() / calls as f64);
    }
    black_box(sink);
    Ok(SpeedupReport {
        surrogate_ns: sur_best * 1e9,
        ode_ns: ode_best * 1e9,
        substeps: plant.substeps,
        speedup: ode_best / sur_best,
    })
}
