use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::metrics::ScenarioResult;
use crate::optimizer::Transition;
use crate::par::Execution;
use crate::surrogate::{
    generate_training_data, measure_speedup, train, validate, ActionSampler, CoverageReport,
    SurrogateModel, SurrogateTransition, TrainingReport, TrainingSample, ValidationReport,
};
use crate::thermal::Plant;

use super::config::{ControllerKind, RunConfig, Scenario, TransitionKind};
use super::inputs::{prepare_inputs, resolve, sha256_hex, sub_seed, SiteInputs};
use super::output::{
    create_dir, trajectory_path, trajectory_rows, write_csv, write_csv_with_header, write_json,
    FailureRow, RunManifest, ScenarioManifest, SiteManifest, SolveReports, SummaryRow,
    SurrogateManifest, Timings, FAILURES_FILE, INPUT_DIR, MANIFEST_FILE, SOLVE_REPORT_FILE,
    SUMMARY_FILE,
};
use super::scenario::{run_scenario, ScenarioRun};
use super::RunnerError;

pub(crate) const SUMMARY_HEADER: [&str; 16] = [
    "scenario", "site", "city", "pcm", "pv_capacity_kw", "slots", "cost", "hvac_kwh", "import_kwh",
    "export_kwh", "pv_kwh", "demand_kwh", "self_consumption", "violated_slots", "penalty", "toggles",
];
pub(crate) const FAILURE_HEADER: [&str; 4] = ["scenario", "site", "city", "error"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub exec: Execution,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub runs: Vec<ScenarioRun>,
    pub summary: Vec<SummaryRow>,
    pub manifest: RunManifest,
}

/// File-name stem of the surrogate for a plant.
pub fn surrogate_label(melting_point: Option<f64>) -> String {
    match melting_point {
        None => "no-pcm".to_string(),
        Some(tp) => format!("pcm-{tp}"),
    }
}

/// Training, validation and coverage figures of a freshly trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedSurrogate {
    pub label: String,
    pub training: TrainingReport,
    pub validation: ValidationReport,
    pub coverage: CoverageReport,
}

fn samples_over(
    cfg: &RunConfig,
    plant: &Plant,
    weathers: &[Vec<f64>],
    n: usize,
    tag: &str,
) -> Result<(Vec<TrainingSample>, CoverageReport), RunnerError> {
    let grid = cfg.solver.grid()?;
    let sampler = ActionSampler::Random { switch_probability: cfg.surrogate.switch_probability };
    let per = n.div_ceil(weathers.len().max(1));
    let mut all = Vec::with_capacity(per * weathers.len());
    for (g, w) in weathers.iter().enumerate() {
        let seed = sub_seed(cfg.seed, &format!("{tag}/{g}"));
        let (s, _) = generate_training_data(plant, w, &grid, sampler, per, cfg.surrogate.trajectory_len, seed)?;
        all.extend(s);
    }
    all.truncate(n);
    let coverage = CoverageReport::new(&grid, &all);
    Ok((all, coverage))
}

/// Trains the surrogate of `plant` on transitions through the given
/// outdoor-temperature traces and validates it on an independent set.
pub fn train_surrogate_for(
    cfg: &RunConfig,
    plant: &Plant,
    weathers: &[Vec<f64>],
    label: &str,
) -> Result<(SurrogateModel, TrainedSurrogate), RunnerError> {
    if weathers.is_empty() {
        return Err(RunnerError::Config("no weather to train the surrogate on".into()));
    }
    let (samples, coverage) = samples_over(cfg, plant, weathers, cfg.surrogate.samples, &format!("surrogate/{label}/train"))?;
    if !coverage.empty_bands.is_empty() {
        log::warn!("{label}: no training samples in the bands starting at {:?}", coverage.empty_bands);
    }
    let (model, training) = train(&samples, &cfg.surrogate.train)?;
    let (held, _) =
        samples_over(cfg, plant, weathers, cfg.surrogate.validation_samples, &format!("surrogate/{label}/held-out"))?;
    let validation = validate(&model, &held);
    log::info!(
        "{label}: {} epochs, held-out MAE {:.4} °C (max {:.4})",
        training.epochs_run,
        validation.mae,
        validation.max_error
    );
    Ok((model, TrainedSurrogate { label: label.to_string(), training, validation, coverage }))
}

/// Gated surrogate transitions, one per plant the HEMS scenarios need.
#[derive(Debug, Default)]
pub struct SurrogateSet {
    models: Vec<(Option<f64>, SurrogateTransition)>,
    pub manifests: Vec<SurrogateManifest>,
    pub seconds: f64,
}

impl SurrogateSet {
    /// Loads each needed model from the configured model directory or
    /// trains it, then checks it against the gate and times it against the
    /// ODE step. Trained models are written under `out_dir/surrogates`.
    pub fn prepare(
        cfg: &RunConfig,
        data_dir: Option<&Path>,
        inputs: &[Result<SiteInputs, RunnerError>],
        melting_points: &[Option<f64>],
        out_dir: Option<&Path>,
    ) -> Result<Self, RunnerError> {
        let started = Instant::now();
        let mut weathers: Vec<Vec<f64>> = Vec::new();
        for inp in inputs.iter().flatten() {
            if !weathers.contains(&inp.weather.values) {
                weathers.push(inp.weather.values.clone());
            }
        }
        let mut set = SurrogateSet::default();
        for &tp in melting_points {
            if set.models.iter().any(|(m, _)| *m == tp) {
                continue;
            }
            let label = surrogate_label(tp);
            let plant = cfg.building.plant(tp)?;
            let stored = cfg.surrogate.model_dir.as_ref().map(|d| resolve(data_dir, d).join(format!("{label}.txt")));
            let (model, report, path, trained) = match stored.filter(|p| p.exists()) {
                Some(p) => {
                    let model = SurrogateModel::load(&p)?;
                    let (held, _) = samples_over(
                        cfg,
                        &plant,
                        &weathers,
                        cfg.surrogate.validation_samples,
                        &format!("surrogate/{label}/held-out"),
                    )?;
                    let validation = validate(&model, &held);
                    (model, (None, validation), p.display().to_string(), false)
                }
                None => {
                    let (model, t) = train_surrogate_for(cfg, &plant, &weathers, &label)?;
                    let mut path = String::new();
                    if let Some(out) = out_dir {
                        let dir = out.join("surrogates");
                        create_dir(&dir)?;
                        let p = dir.join(format!("{label}.txt"));
                        model.save(&p)?;
                        write_json(&dir.join(format!("{label}.report.json")), &t)?;
                        path = p.display().to_string();
                    }
                    (model, (Some(t.training), t.validation), path, true)
                }
            };
            let (training, validation) = report;
            let transition = SurrogateTransition::gated(
                model,
                plant.hvac,
                plant.slot_hours(),
                &validation,
                cfg.surrogate.gate,
            )?;
            let speedup = measure_speedup(&transition, &plant, 2000, 3)?;
            log::info!("{label}: surrogate {:.0} ns vs ODE {:.0} ns ({:.0}x)", speedup.surrogate_ns, speedup.ode_ns, speedup.speedup);
            set.manifests.push(SurrogateManifest {
                label,
                path,
                trained,
                training,
                validation_mae: validation.mae,
                speedup,
            });
            set.models.push((tp, transition));
        }
        set.seconds = started.elapsed().as_secs_f64();
        Ok(set)
    }

    pub fn get(&self, melting_point: Option<f64>) -> Option<&SurrogateTransition> {
        self.models.iter().find(|(m, _)| *m == melting_point).map(|(_, t)| t)
    }
}

/// Runs each scenario in turn over all sites.
pub fn run_scenarios(
    cfg: &RunConfig,
    inputs: &[Result<SiteInputs, RunnerError>],
    scenarios: &[Scenario],
    surrogates: Option<&SurrogateSet>,
    exec: Execution,
) -> Result<Vec<ScenarioRun>, RunnerError> {
    scenarios
        .iter()
        .map(|&sc| {
            let transition: Option<&dyn Transition> = match (sc.controller(), surrogates) {
                (ControllerKind::Hems, Some(set)) => Some(
                    set.get(cfg.melting_point_for(sc))
                        .ok_or_else(|| RunnerError::Config(format!("no surrogate prepared for {sc}")))?,
                ),
                _ => None,
            };
            log::info!("running {sc} over {} sites", inputs.len());
            run_scenario(cfg, sc, inputs, transition, exec)
        })
        .collect()
}

/// Totals of every completed (scenario, site) pair, scenario-major.
pub fn summary_rows(cfg: &RunConfig, runs: &[ScenarioRun]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for run in runs {
        let pcm = if run.scenario.has_pcm() { cfg.melting_point.label() } else { "" };
        for s in run.completed() {
            let result = ScenarioResult::from_trajectory(run.scenario.label(), &s.site, &s.trajectory);
            rows.push(SummaryRow::new(&result, &s.city, pcm, cfg.pv_capacity_kw));
        }
    }
    rows
}

/// The whole pipeline: inputs, optional surrogates, every configured
/// scenario, and all output files under `opts.out_dir`.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, RunnerError> {
    let started = Instant::now();
    cfg.validate()?;
    let out = &opts.out_dir;
    create_dir(out)?;
    let config_sha256 = sha256_hex(cfg.to_toml()?.as_bytes());

    let t_inputs = Instant::now();
    let inputs = prepare_inputs(cfg, opts.data_dir.as_deref())?;
    let mut sites: Vec<SiteManifest> = Vec::with_capacity(cfg.sites.len());
    for (site, inp) in cfg.sites.iter().zip(&inputs) {
        let mut m = SiteManifest {
            name: site.name.clone(),
            city: site.city.clone(),
            inputs: None,
            results: BTreeMap::new(),
            errors: BTreeMap::new(),
        };
        match inp {
            Ok(inp) => {
                let rel = format!("{INPUT_DIR}/{}", inp.name);
                create_dir(&out.join(&rel))?;
                inp.weather.save(&out.join(&rel).join("weather.csv"))?;
                inp.pv.save(&out.join(&rel).join("pv.csv"))?;
                inp.demand.save(&out.join(&rel).join("demand.csv"))?;
                m.inputs = Some(inp.hashes()?.into_files(&rel));
            }
            Err(e) => {
                m.errors.insert("inputs".into(), e.to_string());
            }
        }
        sites.push(m);
    }
    let inputs_seconds = t_inputs.elapsed().as_secs_f64();

    let surrogates = if cfg.transition == TransitionKind::Surrogate {
        let tps: Vec<Option<f64>> = cfg
            .scenarios
            .iter()
            .filter(|s| s.controller() == ControllerKind::Hems)
            .map(|&s| cfg.melting_point_for(s))
            .collect();
        Some(SurrogateSet::prepare(cfg, opts.data_dir.as_deref(), &inputs, &tps, Some(out))?)
    } else {
        None
    };

    let t_runs = Instant::now();
    let runs = run_scenarios(cfg, &inputs, &cfg.scenarios, surrogates.as_ref(), opts.exec)?;
    let scenarios_seconds = t_runs.elapsed().as_secs_f64();

    let mut failures = Vec::new();
    let mut reports = BTreeMap::new();
    let mut scenario_manifests = Vec::new();
    for run in &runs {
        let label = run.scenario.label();
        let pcm_spec = run.melting_point.map(|tp| cfg.building.pcm(tp)).transpose()?;
        for (i, res) in run.sites.iter().enumerate() {
            match res {
                Ok(s) => {
                    let start = inputs[i].as_ref().map(|x| x.start()).expect("completed sites have inputs");
                    let rows = trajectory_rows(&s.trajectory, start, pcm_spec.as_ref(), cfg.building.hvac.cop)?;
                    let path = trajectory_path(out, label, &s.site);
                    write_csv(&path, &rows)?;
                    let rel = path.strip_prefix(out).unwrap_or(&path).display().to_string();
                    sites[i].results.insert(label.to_string(), rel);
                }
                Err(f) => {
                    sites[i].errors.insert(label.to_string(), f.error.clone());
                    failures.push(FailureRow {
                        scenario: label.to_string(),
                        site: f.site.clone(),
                        city: f.city.clone(),
                        error: f.error.clone(),
                    });
                }
            }
        }
        if let Some(r) = &run.solve {
            reports.insert(label.to_string(), r.clone());
        }
        scenario_manifests.push(ScenarioManifest {
            scenario: label.to_string(),
            pcm: if run.scenario.has_pcm() { cfg.melting_point.label().to_string() } else { String::new() },
            completed: run.completed().count(),
            failed: run.failures().count(),
            seconds: run.seconds,
        });
    }
    let summary = summary_rows(cfg, &runs);
    write_csv_with_header(&out.join(SUMMARY_FILE), &SUMMARY_HEADER, &summary)?;
    write_csv_with_header(&out.join(FAILURES_FILE), &FAILURE_HEADER, &failures)?;
    write_json(&out.join(SOLVE_REPORT_FILE), &SolveReports { reports })?;

    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256,
        seed: cfg.seed,
        year: cfg.year,
        start_day: cfg.start_day,
        days: cfg.days,
        execution: format!("{:?}", opts.exec).to_lowercase(),
        transition: format!("{:?}", cfg.transition).to_lowercase(),
        failures: failures.len(),
        sites,
        scenarios: scenario_manifests,
        surrogates: surrogates.as_ref().map(|s| s.manifests.clone()).unwrap_or_default(),
        timings: Timings {
            inputs_seconds,
            surrogate_seconds: surrogates.as_ref().map_or(0.0, |s| s.seconds),
            scenarios_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
        },
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome { runs, summary, manifest })
}
