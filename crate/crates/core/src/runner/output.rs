use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::TIMESTAMP_FORMAT;
use crate::metrics::ScenarioResult;
use crate::optimizer::SolveReport;
use crate::surrogate::{SpeedupReport, TrainingReport};
use crate::thermal::{pcm_soc, PcmSpec};
use crate::trajectory::Trajectory;

use super::inputs::{InputHashes, SLOT_SECONDS};
use super::RunnerError;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOLVE_REPORT_FILE: &str = "solve_report.json";
pub const TRAJECTORY_DIR: &str = "trajectories";
pub const INPUT_DIR: &str = "inputs";

/// Specific-heat fraction of the peak excess that bounds the PCM operating
/// range; the state of charge is measured from its lower end.
pub const SOC_RANGE_FRACTION: f64 = 0.018_315_638_888_734_18;

/// One slot of a site trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub timestamp: String,
    pub t_out: f64,
    /// Settled indoor temperature at the end of the slot, °C.
    pub t_in: f64,
    pub t_air: f64,
    pub t_envelope: f64,
    pub action: String,
    pub on_fraction: f64,
    pub hvac_kwh: f64,
    pub demand_kwh: f64,
    pub pv_kwh: f64,
    pub import_kwh: f64,
    pub export_kwh: f64,
    pub import_price: f64,
    pub energy_cost: f64,
    pub violation: f64,
    pub penalty: f64,
    /// PCM state of charge at the end of the slot as HVAC-equivalent kWh.
    pub soc_kwh: f64,
}

pub fn trajectory_rows(
    traj: &Trajectory,
    start: NaiveDateTime,
    pcm: Option<&PcmSpec>,
    cop: f64,
) -> Result<Vec<TrajectoryRow>, RunnerError> {
    let reference = pcm.map(|p| p.operating_range(SOC_RANGE_FRACTION).0);
    traj.records
        .iter()
        .map(|r| {
            let soc_kwh = match (pcm, reference) {
                (Some(p), Some(t_ref)) => pcm_soc(r.t_envelope, t_ref, p, cop)?,
                _ => 0.0,
            };
            Ok(TrajectoryRow {
                timestamp: (start + Duration::seconds(SLOT_SECONDS * r.slot as i64))
                    .format(TIMESTAMP_FORMAT)
                    .to_string(),
                t_out: r.t_out,
                t_in: r.t_in,
                t_air: r.t_air,
                t_envelope: r.t_envelope,
                action: r.action.as_str().to_string(),
                on_fraction: r.on_fraction,
                hvac_kwh: r.hvac_kwh,
                demand_kwh: r.demand_kwh,
                pv_kwh: r.pv_kwh,
                import_kwh: r.import_kwh,
                export_kwh: r.export_kwh,
                import_price: r.import_price,
                energy_cost: r.energy_cost,
                violation: r.violation,
                penalty: r.penalty,
                soc_kwh,
            })
        })
        .collect()
}

/// Run totals of one scenario at one site, one row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub site: String,
    pub city: String,
    /// Melting-point label, empty without PCM.
    pub pcm: String,
    pub pv_capacity_kw: f64,
    pub slots: usize,
    /// Import charges minus feed-in credit, $.
    pub cost: f64,
    pub hvac_kwh: f64,
    pub import_kwh: f64,
    pub export_kwh: f64,
    pub pv_kwh: f64,
    pub demand_kwh: f64,
    /// PV self-consumption, %; empty without PV.
    pub self_consumption: Option<f64>,
    pub violated_slots: usize,
    pub penalty: f64,
    pub toggles: usize,
}

impl SummaryRow {
    pub fn new(result: &ScenarioResult, city: &str, pcm: &str, pv_capacity_kw: f64) -> Self {
        let t = &result.totals;
        Self {
            scenario: result.scenario.clone(),
            site: result.site.clone(),
            city: city.to_string(),
            pcm: pcm.to_string(),
            pv_capacity_kw,
            slots: result.hvac_kwh.len(),
            cost: t.cost,
            hvac_kwh: t.hvac_kwh,
            import_kwh: t.import_kwh,
            export_kwh: t.export_kwh,
            pv_kwh: t.pv_kwh,
            demand_kwh: t.demand_kwh,
            self_consumption: t.self_consumption,
            violated_slots: t.violated_slots,
            penalty: t.penalty,
            toggles: t.toggles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRow {
    pub scenario: String,
    pub site: String,
    pub city: String,
    pub error: String,
}

pub fn create_dir(path: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(path).map_err(|e| RunnerError::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RunnerError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let csv_err = |e: csv::Error| RunnerError::Csv { path: path.display().to_string(), detail: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RunnerError::io(path, e))
}

/// Writes only the header when `rows` is empty.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), RunnerError> {
    if rows.is_empty() {
        if let Some(parent) = path.parent() {
            create_dir(parent)?;
        }
        return fs::write(path, format!("{}\n", header.join(","))).map_err(|e| RunnerError::io(path, e));
    }
    write_csv(path, rows)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, RunnerError> {
    let csv_err = |e: csv::Error| RunnerError::Csv { path: path.display().to_string(), detail: e.to_string() };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunnerError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| RunnerError::Csv { path: path.display().to_string(), detail: e.to_string() })?;
    fs::write(path, text + "\n").map_err(|e| RunnerError::io(path, e))
}

pub fn trajectory_path(out: &Path, scenario: &str, site: &str) -> PathBuf {
    out.join(TRAJECTORY_DIR).join(scenario).join(format!("{site}.csv"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteManifest {
    pub name: String,
    pub city: String,
    /// Written copies of the series every scenario consumed.
    pub inputs: Option<BTreeMap<String, InputFile>>,
    pub results: BTreeMap<String, String>,
    pub errors: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub scenario: String,
    pub pcm: String,
    pub completed: usize,
    pub failed: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateManifest {
    pub label: String,
    pub path: String,
    pub trained: bool,
    pub training: Option<TrainingReport>,
    pub validation_mae: f64,
    pub speedup: SpeedupReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub inputs_seconds: f64,
    pub surrogate_seconds: f64,
    pub scenarios_seconds: f64,
    pub total_seconds: f64,
}

/// Provenance of a run. Everything except `timings`, the scenario
/// `seconds` and the surrogate timings is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub year: i32,
    pub start_day: usize,
    pub days: usize,
    pub execution: String,
    pub transition: String,
    pub sites: Vec<SiteManifest>,
    pub scenarios: Vec<ScenarioManifest>,
    pub surrogates: Vec<SurrogateManifest>,
    pub failures: usize,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReports {
    pub reports: BTreeMap<String, SolveReport>,
}

impl InputHashes {
    pub fn into_files(self, site_dir: &str) -> BTreeMap<String, InputFile> {
        [("weather", self.weather), ("pv", self.pv), ("demand", self.demand)]
            .into_iter()
            .map(|(k, h)| (k.to_string(), InputFile { path: format!("{site_dir}/{k}.csv"), sha256: h }))
            .collect()
    }
}
