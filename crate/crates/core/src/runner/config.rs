use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::DeadbandConfig;
use crate::data::{city_preset, TariffSchedule};
use crate::optimizer::SolverParams;
use crate::surrogate::TrainParams;
use crate::thermal::BuildingConfig;

use super::RunnerError;

/// The four compared configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "DB")]
    Db,
    #[serde(rename = "DB-PCM")]
    DbPcm,
    #[serde(rename = "HEMS")]
    Hems,
    #[serde(rename = "HEMS-PCM")]
    HemsPcm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Deadband,
    Hems,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Db, Scenario::DbPcm, Scenario::Hems, Scenario::HemsPcm];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Db => "DB",
            Scenario::DbPcm => "DB-PCM",
            Scenario::Hems => "HEMS",
            Scenario::HemsPcm => "HEMS-PCM",
        }
    }

    pub fn controller(self) -> ControllerKind {
        match self {
            Scenario::Db | Scenario::DbPcm => ControllerKind::Deadband,
            Scenario::Hems | Scenario::HemsPcm => ControllerKind::Hems,
        }
    }

    pub fn has_pcm(self) -> bool {
        matches!(self, Scenario::DbPcm | Scenario::HemsPcm)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| RunnerError::Config(format!("unknown scenario `{s}`")))
    }
}

/// PCM product by melting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeltingPoint {
    #[serde(rename = "MT21")]
    Mt21,
    #[serde(rename = "MT23")]
    Mt23,
}

impl MeltingPoint {
    pub fn celsius(self) -> f64 {
        match self {
            MeltingPoint::Mt21 => 21.0,
            MeltingPoint::Mt23 => 23.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MeltingPoint::Mt21 => "MT21",
            MeltingPoint::Mt23 => "MT23",
        }
    }
}

impl MeltingPoint {
    pub const ALL: [MeltingPoint; 2] = [MeltingPoint::Mt21, MeltingPoint::Mt23];
}

impl FromStr for MeltingPoint {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MeltingPoint::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| RunnerError::Config(format!("unknown melting point `{s}`")))
    }
}

/// How a long horizon is split for the HEMS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonMode {
    /// Each sub-horizon is solved on its own and simulated from the state
    /// reached at the end of the previous one.
    #[default]
    Daily,
    /// One solve over the whole horizon, sub-horizons chained by their
    /// value functions.
    Full,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    #[default]
    Exact,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// Annual household demand the synthetic source profile is scaled to, kWh.
    pub annual_kwh: f64,
    pub bins: usize,
    /// Metered profile to fit the Markov chain on, relative to the data
    /// directory. A synthetic profile is used when absent.
    pub source: Option<PathBuf>,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self { annual_kwh: 4685.3, bins: 10, source: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub samples: usize,
    pub validation_samples: usize,
    pub trajectory_len: usize,
    pub switch_probability: f64,
    /// Largest held-out MAE, °C, at which the model may replace the ODE.
    pub gate: f64,
    /// Directory holding trained model files; models missing there are
    /// trained on the fly.
    pub model_dir: Option<PathBuf>,
    pub train: TrainParams,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            validation_samples: 20_000,
            trajectory_len: 8,
            switch_probability: 0.5,
            gate: 0.05,
            model_dir: None,
            train: TrainParams::default(),
        }
    }
}

/// One household. Series paths are relative to the data directory; any
/// missing series is synthesized from the city preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub name: String,
    pub city: String,
    #[serde(default)]
    pub weather: Option<PathBuf>,
    /// Generation profile of the reference PV size.
    #[serde(default)]
    pub pv: Option<PathBuf>,
    #[serde(default)]
    pub demand: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub year: i32,
    /// First simulated day, counted from 1 January (0-based).
    pub start_day: usize,
    pub days: usize,
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
    pub melting_point: MeltingPoint,
    pub pv_capacity_kw: f64,
    /// Size the PV profiles describe; others are scaled from it.
    pub pv_reference_kw: f64,
    /// PV sizes compared by the melting-point sweep.
    pub sweep_pv_capacities_kw: Vec<f64>,
    /// Settled indoor temperature at the start of the horizon, °C.
    pub initial_t_in: f64,
    pub horizon: HorizonMode,
    pub transition: TransitionKind,
    pub building: BuildingConfig,
    pub solver: SolverParams,
    pub deadband: DeadbandConfig,
    pub tariff: TariffSchedule,
    pub demand: DemandConfig,
    pub surrogate: SurrogateConfig,
    pub sites: Vec<SiteConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            year: 2019,
            start_day: 0,
            days: 365,
            seed: 42,
            scenarios: Scenario::ALL.to_vec(),
            melting_point: MeltingPoint::Mt21,
            pv_capacity_kw: 5.0,
            pv_reference_kw: 5.0,
            sweep_pv_capacities_kw: vec![5.0, 8.0],
            initial_t_in: 21.0,
            horizon: HorizonMode::Daily,
            transition: TransitionKind::Exact,
            building: BuildingConfig::default(),
            solver: SolverParams::default(),
            deadband: DeadbandConfig::default(),
            tariff: TariffSchedule::default(),
            demand: DemandConfig::default(),
            surrogate: SurrogateConfig::default(),
            sites: crate::data::CITIES
                .iter()
                .map(|c| SiteConfig {
                    name: format!("{}-1", c.name),
                    city: c.name.to_string(),
                    weather: None,
                    pv: None,
                    demand: None,
                })
                .collect(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, RunnerError> {
        toml::to_string(self).map_err(|e| RunnerError::Config(e.to_string()))
    }

    /// Checks everything that can be checked without touching the data
    /// directory.
    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: String| Err(RunnerError::Config(m));
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        let in_year = if chrono::NaiveDate::from_ymd_opt(self.year, 2, 29).is_some() { 366 } else { 365 };
        if self.start_day + self.days > in_year {
            return bad(format!(
                "days {}..{} run past the end of {}",
                self.start_day,
                self.start_day + self.days,
                self.year
            ));
        }
        if self.scenarios.is_empty() {
            return bad("no scenarios selected".into());
        }
        for (name, v) in [("pv_capacity_kw", self.pv_capacity_kw), ("pv_reference_kw", self.pv_reference_kw)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.sweep_pv_capacities_kw.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("sweep PV capacities must be positive".into());
        }
        if self.sites.is_empty() {
            return bad("no sites configured".into());
        }
        let mut names: Vec<&str> = self.sites.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate site name `{}`", w[0]));
        }
        for s in &self.sites {
            if s.name.is_empty() || s.name.contains(['/', '\\']) {
                return bad(format!("site name `{}` is not a valid file stem", s.name));
            }
            let synthesized = s.weather.is_none() || s.pv.is_none();
            if synthesized && city_preset(&s.city).is_none() {
                return bad(format!(
                    "site `{}`: no climate preset for city `{}` to synthesize missing series",
                    s.name, s.city
                ));
            }
        }
        if !(self.initial_t_in.is_finite()) {
            return bad("initial_t_in must be finite".into());
        }
        if self.demand.bins < 2 {
            return bad("demand.bins must be at least 2".into());
        }
        if !(self.demand.annual_kwh > 0.0) {
            return bad("demand.annual_kwh must be positive".into());
        }
        if !(self.surrogate.gate > 0.0) {
            return bad("surrogate.gate must be positive".into());
        }
        self.solver.grid()?;
        self.deadband.validate()?;
        self.tariff.validate()?;
        self.building.plant(Some(self.melting_point.celsius()))?;
        Ok(())
    }

    /// PCM melting point used by a scenario, if it has PCM.
    pub fn melting_point_for(&self, scenario: Scenario) -> Option<f64> {
        scenario.has_pcm().then(|| self.melting_point.celsius())
    }
}
