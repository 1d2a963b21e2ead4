//! Multi-timescale decomposition: the horizon is cut into sub-horizons
//! solved last-to-first, each one's terminal values being the initial-layer
//! values of its successor.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::par::Execution;

use super::grid::TemperatureGrid;
use super::hems::{terminal_values, ComfortBand, ComfortPenalty, HemsMdp, SlotData, Transition, TransitionLayers};
use super::mdp::{value_iteration, Policy};
use super::OptimizerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_resolution: f64,
    pub comfort: ComfortBand,
    pub penalty: ComfortPenalty,
    /// Slots per sub-problem.
    pub sub_horizon: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            grid_min: 15.0,
            grid_max: 30.0,
            grid_resolution: 0.1,
            comfort: ComfortBand::default(),
            penalty: ComfortPenalty::default(),
            sub_horizon: 48,
        }
    }
}

impl SolverParams {
    pub fn grid(&self) -> Result<TemperatureGrid, OptimizerError> {
        let grid = TemperatureGrid::new(self.grid_min, self.grid_max, self.grid_resolution)?;
        self.comfort.validate()?;
        if !grid.covers(self.comfort.lower, self.comfort.upper) {
            return Err(OptimizerError::Config(format!(
                "grid [{}, {}] does not cover the comfort band [{}, {}]",
                grid.min(),
                grid.max(),
                self.comfort.lower,
                self.comfort.upper
            )));
        }
        if self.sub_horizon == 0 {
            return Err(OptimizerError::Config("sub-horizon must be at least one slot".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteSolution {
    pub policy: Policy,
    /// Cost-to-go of every grid cell at the first slot.
    pub initial_values: Vec<f64>,
}

/// Machine-readable summary of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub transition: String,
    pub sites: usize,
    pub slots: usize,
    pub sub_horizon: usize,
    pub sub_problems: usize,
    pub cells: usize,
    pub transitions_tabulated: usize,
    pub clamped_transitions: usize,
    pub transition_seconds: f64,
    pub sweep_seconds: f64,
    pub total_seconds: f64,
}

/// Solves several sites that share weather (hence transitions) but differ
/// in demand, PV and prices.
pub fn madp_solve_shared<T: Transition + ?Sized>(
    transition: &T,
    sites: &[&[SlotData]],
    params: &SolverParams,
    exec: Execution,
) -> Result<(Vec<SiteSolution>, SolveReport), OptimizerError> {
    let started = Instant::now();
    let grid = params.grid()?;
    let Some(first) = sites.first() else {
        return Err(OptimizerError::Config("no sites to solve".into()));
    };
    let horizon = first.len();
    for (i, site) in sites.iter().enumerate() {
        if site.len() != horizon {
            return Err(OptimizerError::Config(format!(
                "site {i} has {} slots, expected {horizon}",
                site.len()
            )));
        }
        if site.iter().zip(first.iter()).any(|(a, b)| a.t_out != b.t_out) {
            return Err(OptimizerError::Config(format!(
                "site {i} does not share the weather of site 0"
            )));
        }
        for (k, s) in site.iter().enumerate() {
            s.validate(k)?;
        }
    }
    let ramps: Vec<_> = first.iter().map(|s| s.t_out).collect();
    let terminal = terminal_values(&grid, &params.comfort, &params.penalty);
    let mut handoff = vec![terminal; sites.len()];
    let mut chunks: Vec<Vec<Policy>> = Vec::new();

    let mut report = SolveReport {
        transition: transition.label().to_string(),
        sites: sites.len(),
        slots: horizon,
        sub_horizon: params.sub_horizon,
        sub_problems: 0,
        cells: grid.len(),
        transitions_tabulated: 0,
        clamped_transitions: 0,
        transition_seconds: 0.0,
        sweep_seconds: 0.0,
        total_seconds: 0.0,
    };

    let starts: Vec<usize> = (0..horizon).step_by(params.sub_horizon).collect();
    for &start in starts.iter().rev() {
        let end = (start + params.sub_horizon).min(horizon);
        let t0 = Instant::now();
        let layers = TransitionLayers::build(transition, &grid, &ramps[start..end], exec)?;
        report.transition_seconds += t0.elapsed().as_secs_f64();
        report.transitions_tabulated += layers.len();
        report.clamped_transitions += layers.clamped();

        let t1 = Instant::now();
        let mut chunk = Vec::with_capacity(sites.len());
        for (site, values) in sites.iter().zip(handoff.iter_mut()) {
            let mdp = HemsMdp {
                layers: &layers,
                slots: &site[start..end],
                comfort: params.comfort,
                penalty: params.penalty,
            };
            let (table, policy) = value_iteration(&mdp, values, exec)?;
            *values = table.layer(0).to_vec();
            chunk.push(policy);
        }
        report.sweep_seconds += t1.elapsed().as_secs_f64();
        report.sub_problems += 1;
        chunks.push(chunk);
    }

    let mut solutions: Vec<SiteSolution> = handoff
        .into_iter()
        .map(|v| SiteSolution { policy: Policy::empty(grid.len()), initial_values: v })
        .collect();
    for chunk in chunks.iter().rev() {
        for (sol, p) in solutions.iter_mut().zip(chunk) {
            sol.policy.extend(p);
        }
    }
    report.total_seconds = started.elapsed().as_secs_f64();
    if report.clamped_transitions > 0 {
        log::warn!(
            "{} of {} tabulated transitions left the grid and were clamped",
            report.clamped_transitions,
            report.transitions_tabulated
        );
    }
    Ok((solutions, report))
}

/// Single-site solve.
pub fn madp_solve<T: Transition + ?Sized>(
    transition: &T,
    slots: &[SlotData],
    params: &SolverParams,
    exec: Execution,
) -> Result<(SiteSolution, SolveReport), OptimizerError> {
    let (mut sols, report) = madp_solve_shared(transition, &[slots], params, exec)?;
    Ok((sols.remove(0), report))
}
