//! Orchestration: builds site inputs, runs the deadband and HEMS scenarios
//! with and without PCM, and writes trajectories, summary tables, solve
//! reports and a run manifest. Also compares scenarios, sweeps the PCM
//! melting point and cuts plot-ready weeks out of trajectories.

mod compare;
mod config;
mod inputs;
mod output;
mod pipeline;
mod plots;
mod scenario;

pub use compare::{
    compare_scenarios, histogram, melting_point_sweep, CityComparison, Comparison, HistogramBin,
    SiteComparison, SweepReport, SweepRow,
};
pub use config::{
    ControllerKind, DemandConfig, HorizonMode, MeltingPoint, RunConfig, Scenario, SiteConfig,
    SurrogateConfig, TransitionKind,
};
pub use inputs::{prepare_inputs, sha256_hex, sub_seed, InputFactory, InputHashes, SiteInputs, SLOTS_PER_DAY, SLOT_SECONDS};
pub use output::{
    read_csv, trajectory_path, trajectory_rows, write_csv, write_json, FailureRow, RunManifest,
    ScenarioManifest, SiteManifest, SolveReports, SummaryRow, SurrogateManifest, Timings,
    TrajectoryRow, FAILURES_FILE, MANIFEST_FILE, SOLVE_REPORT_FILE, SUMMARY_FILE, TRAJECTORY_DIR,
};
pub use pipeline::{run, run_scenarios, summary_rows, surrogate_label, train_surrogate_for, RunOptions, RunOutcome, SurrogateSet, TrainedSurrogate};
pub use plots::{emit_plot_data, emit_plots, PlotRow, PlotWeek, PLOT_SLOTS_PER_WEEK};
pub use scenario::{run_scenario, ScenarioRun, SiteFailure, SiteRun};

use std::path::Path;

use thiserror::Error;

use crate::control::ControlError;
use crate::data::DataError;
use crate::metrics::MetricsError;
use crate::optimizer::OptimizerError;
use crate::surrogate::SurrogateError;
use crate::thermal::ThermalError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("selection error: {0}")]
    Selection(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Csv { path: String, detail: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io { path: path.display().to_string(), source }
    }
}
