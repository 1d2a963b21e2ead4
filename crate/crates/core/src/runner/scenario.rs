use std::time::Instant;

use crate::control::simulate_deadband;
use crate::optimizer::{
    madp_solve_shared, simulate_policy, terminal_values, value_iteration, ExactTransition,
    HemsMdp, SlotData, SolveReport, Transition, TransitionLayers,
};
use crate::par::{self, Execution};
use crate::thermal::{Plant, ThermalState};
use crate::trajectory::Trajectory;

use super::config::{ControllerKind, HorizonMode, RunConfig, Scenario};
use super::inputs::SiteInputs;
use super::RunnerError;

/// Outcome of one scenario at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteRun {
    pub site: String,
    pub city: String,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteFailure {
    pub site: String,
    pub city: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub melting_point: Option<f64>,
    /// One entry per input site, in input order.
    pub sites: Vec<Result<SiteRun, SiteFailure>>,
    /// Present for HEMS scenarios.
    pub solve: Option<SolveReport>,
    pub seconds: f64,
}

impl ScenarioRun {
    pub fn failures(&self) -> impl Iterator<Item = &SiteFailure> {
        self.sites.iter().filter_map(|s| s.as_ref().err())
    }

    pub fn completed(&self) -> impl Iterator<Item = &SiteRun> {
        self.sites.iter().filter_map(|s| s.as_ref().ok())
    }
}

fn failure(site: &str, city: &str, e: impl std::fmt::Display) -> SiteFailure {
    SiteFailure { site: site.to_string(), city: city.to_string(), error: e.to_string() }
}

/// Input sites grouped by identical outdoor temperature, so that HEMS
/// transitions are tabulated once per group. Groups keep first-appearance
/// order; failed inputs are left out.
fn weather_groups(inputs: &[Result<SiteInputs, RunnerError>]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, inp) in inputs.iter().enumerate() {
        let Ok(inp) = inp else { continue };
        let found = groups.iter_mut().find(|g| match &inputs[g[0]] {
            Ok(first) => first.weather == inp.weather && first.slots() == inp.slots(),
            Err(_) => false,
        });
        match found {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

fn initial_state(plant: &Plant, cfg: &RunConfig, slots: &[SlotData]) -> ThermalState {
    let t_out = slots.first().map_or(cfg.initial_t_in, |s| s.t_out.start);
    plant.reconstruct(cfg.initial_t_in, t_out)
}

fn empty_report(label: &str, cfg: &RunConfig, cells: usize) -> SolveReport {
    SolveReport {
        transition: label.to_string(),
        sites: 0,
        slots: 0,
        sub_horizon: cfg.solver.sub_horizon,
        sub_problems: 0,
        cells,
        transitions_tabulated: 0,
        clamped_transitions: 0,
        transition_seconds: 0.0,
        sweep_seconds: 0.0,
        total_seconds: 0.0,
    }
}

fn merge(into: &mut SolveReport, r: &SolveReport) {
    into.sites += r.sites;
    into.slots = into.slots.max(r.slots);
    into.sub_problems += r.sub_problems;
    into.transitions_tabulated += r.transitions_tabulated;
    into.clamped_transitions += r.clamped_transitions;
    into.transition_seconds += r.transition_seconds;
    into.sweep_seconds += r.sweep_seconds;
    into.total_seconds += r.total_seconds;
}

type GroupOutcome = (Vec<(usize, Result<Trajectory, String>)>, SolveReport);

/// Sub-horizons solved independently, each simulated from the state the
/// previous one ended in.
fn hems_daily<T: Transition + ?Sized>(
    cfg: &RunConfig,
    plant: &Plant,
    transition: &T,
    sites: &[(usize, Vec<SlotData>)],
    exec: Execution,
) -> Result<GroupOutcome, RunnerError> {
    let started = Instant::now();
    let grid = cfg.solver.grid()?;
    let (comfort, penalty) = (cfg.solver.comfort, cfg.solver.penalty);
    let terminal = terminal_values(&grid, &comfort, &penalty);
    let ramps: Vec<_> = sites[0].1.iter().map(|s| s.t_out).collect();
    let n = ramps.len();
    let mut report = empty_report(transition.label(), cfg, grid.len());
    report.sites = sites.len();
    report.slots = n;

    let mut state: Vec<Result<(Trajectory, ThermalState), String>> = sites
        .iter()
        .map(|(_, slots)| Ok((Trajectory::default(), initial_state(plant, cfg, slots))))
        .collect();
    for start in (0..n).step_by(cfg.solver.sub_horizon) {
        let end = (start + cfg.solver.sub_horizon).min(n);
        let t0 = Instant::now();
        let layers = TransitionLayers::build(transition, &grid, &ramps[start..end], exec)?;
        report.transition_seconds += t0.elapsed().as_secs_f64();
        report.transitions_tabulated += layers.len();
        report.clamped_transitions += layers.clamped();
        report.sub_problems += 1;

        let t1 = Instant::now();
        for ((_, slots), st) in sites.iter().zip(state.iter_mut()) {
            let Ok((traj, thermal)) = st else { continue };
            let chunk = &slots[start..end];
            let mdp = HemsMdp { layers: &layers, slots: chunk, comfort, penalty };
            let step = value_iteration(&mdp, &terminal, exec).and_then(|(_, policy)| {
                simulate_policy(plant, &policy, &grid, chunk, *thermal, &comfort, &penalty)
            });
            match step {
                Ok((part, next)) => {
                    traj.records.extend(part.records.into_iter().map(|mut r| {
                        r.slot += start;
                        r
                    }));
                    *thermal = next;
                }
                Err(e) => *st = Err(format!("slots {start}..{end}: {e}")),
            }
        }
        report.sweep_seconds += t1.elapsed().as_secs_f64();
    }
    report.total_seconds = started.elapsed().as_secs_f64();
    let out = sites.iter().zip(state).map(|((i, _), st)| (*i, st.map(|(t, _)| t))).collect();
    Ok((out, report))
}

/// One value-chained solve over the whole horizon, then a single forward
/// simulation per site.
fn hems_full<T: Transition + ?Sized>(
    cfg: &RunConfig,
    plant: &Plant,
    transition: &T,
    sites: &[(usize, Vec<SlotData>)],
    exec: Execution,
) -> Result<GroupOutcome, RunnerError> {
    let grid = cfg.solver.grid()?;
    let slices: Vec<&[SlotData]> = sites.iter().map(|(_, s)| s.as_slice()).collect();
    let (solutions, report) = madp_solve_shared(transition, &slices, &cfg.solver, exec)?;
    let out = sites
        .iter()
        .zip(solutions)
        .map(|((i, slots), sol)| {
            let init = initial_state(plant, cfg, slots);
            let traj = simulate_policy(plant, &sol.policy, &grid, slots, init, &cfg.solver.comfort, &cfg.solver.penalty)
                .map(|(t, _)| t)
                .map_err(|e| e.to_string());
            (*i, traj)
        })
        .collect();
    Ok((out, report))
}

/// Runs `scenario` for every site. HEMS scenarios use `transition` when
/// given and the exact plant otherwise; the realized trajectory is always
/// simulated on the exact plant.
pub fn run_scenario(
    cfg: &RunConfig,
    scenario: Scenario,
    inputs: &[Result<SiteInputs, RunnerError>],
    transition: Option<&dyn Transition>,
    exec: Execution,
) -> Result<ScenarioRun, RunnerError> {
    let started = Instant::now();
    let melting_point = cfg.melting_point_for(scenario);
    let plant = cfg.building.plant(melting_point)?;
    let mut sites: Vec<Result<SiteRun, SiteFailure>> = inputs
        .iter()
        .enumerate()
        .map(|(i, inp)| match inp {
            Ok(_) => Err(failure(&cfg.sites[i].name, &cfg.sites[i].city, "not run")),
            Err(e) => Err(failure(&cfg.sites[i].name, &cfg.sites[i].city, format!("inputs: {e}"))),
        })
        .collect();
    let slot_data = |i: usize| inputs[i].as_ref().map(|s| s.slot_data(&cfg.tariff)).ok();

    let mut solve = None;
    match scenario.controller() {
        ControllerKind::Deadband => {
            let results = par::map_indices(exec, inputs.len(), |i| {
                let slots = slot_data(i)?;
                let init = initial_state(&plant, cfg, &slots);
                Some(
                    simulate_deadband(&plant, &slots, init, &cfg.deadband, &cfg.solver.comfort, &cfg.solver.penalty)
                        .map(|(t, _)| t)
                        .map_err(|e| e.to_string()),
                )
            });
            for (i, r) in results.into_iter().enumerate() {
                if let (Some(r), Ok(inp)) = (r, &inputs[i]) {
                    sites[i] = r
                        .map(|trajectory| SiteRun { site: inp.name.clone(), city: inp.city.clone(), trajectory })
                        .map_err(|e| failure(&inp.name, &inp.city, e));
                }
            }
        }
        ControllerKind::Hems => {
            let exact = ExactTransition { plant: plant.clone() };
            let transition: &dyn Transition = match transition {
                Some(t) => t,
                None => &exact,
            };
            let groups = weather_groups(inputs);
            let outcomes = par::map_indices(exec, groups.len(), |g| {
                let members: Vec<(usize, Vec<SlotData>)> =
                    groups[g].iter().map(|&i| (i, slot_data(i).expect("grouped inputs are valid"))).collect();
                match cfg.horizon {
                    HorizonMode::Daily => hems_daily(cfg, &plant, transition, &members, exec),
                    HorizonMode::Full => hems_full(cfg, &plant, transition, &members, exec),
                }
            });
            let mut report = empty_report(transition.label(), cfg, cfg.solver.grid()?.len());
            for (g, outcome) in outcomes.into_iter().enumerate() {
                match outcome {
                    Ok((runs, r)) => {
                        merge(&mut report, &r);
                        for (i, traj) in runs {
                            let inp = inputs[i].as_ref().expect("grouped inputs are valid");
                            sites[i] = traj
                                .map(|trajectory| SiteRun { site: inp.name.clone(), city: inp.city.clone(), trajectory })
                                .map_err(|e| failure(&inp.name, &inp.city, e));
                        }
                    }
                    Err(e) => {
                        for &i in &groups[g] {
                            sites[i] = Err(failure(&cfg.sites[i].name, &cfg.sites[i].city, &e));
                        }
                    }
                }
            }
            if report.clamped_transitions > 0 {
                log::warn!(
                    "{scenario}: {} of {} tabulated transitions left the grid and were clamped",
                    report.clamped_transitions,
                    report.transitions_tabulated
                );
            }
            solve = Some(report);
        }
    }
    for f in sites.iter().filter_map(|s| s.as_ref().err()) {
        log::error!("{scenario} at site {}: {}", f.site, f.error);
    }
    Ok(ScenarioRun { scenario, melting_point, sites, solve, seconds: started.elapsed().as_secs_f64() })
}
