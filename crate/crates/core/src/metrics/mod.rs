//! Cost, PV self-consumption and cross-site summary statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{SlotRecord, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Share of PV generation consumed on site, percent:
/// 100 · Σ min(consumption, pv) / Σ pv.
pub fn self_consumption(consumption: &[f64], pv: &[f64]) -> Result<f64, MetricsError> {
    if consumption.len() != pv.len() {
        return Err(MetricsError::Invalid(format!(
            "consumption has {} slots, pv has {}",
            consumption.len(),
            pv.len()
        )));
    }
    let total: f64 = pv.iter().sum();
    if !(total > 0.0) {
        return Err(MetricsError::Undefined("self-consumption with zero PV generation".into()));
    }
    let used: f64 = consumption.iter().zip(pv).map(|(c, p)| c.min(*p)).sum();
    Ok(100.0 * used / total)
}

/// Import charges minus feed-in credit, $.
pub fn annual_cost(slots: &[SlotRecord]) -> f64 {
    slots.iter().map(|r| r.import_price * r.import_kwh - r.feed_in_price * r.export_kwh).sum()
}

/// Cost split by tariff window; `window_of[k]` is the window of slot `k`.
pub fn cost_by_window(
    slots: &[SlotRecord],
    window_of: &[usize],
    windows: usize,
) -> Result<Vec<f64>, MetricsError> {
    if window_of.len() != slots.len() {
        return Err(MetricsError::Invalid("window index and slots differ in length".into()));
    }
    let mut out = vec![0.0; windows];
    for (r, &w) in slots.iter().zip(window_of) {
        let slot = out
            .get_mut(w)
            .ok_or_else(|| MetricsError::Invalid(format!("window {w} out of range")))?;
        *slot += r.import_price * r.import_kwh - r.feed_in_price * r.export_kwh;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSaving {
    /// $.
    pub absolute: f64,
    /// Percent of the base cost.
    pub percent: f64,
}

pub fn cost_saving(base: f64, variant: f64) -> Result<CostSaving, MetricsError> {
    if !(base > 0.0) {
        return Err(MetricsError::Undefined(format!("percentage saving over a base cost of {base}")));
    }
    let absolute = base - variant;
    Ok(CostSaving { absolute, percent: 100.0 * absolute / base })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std_error: f64,
    pub std_dev: f64,
    pub n: usize,
    /// Set when n = 1: the deviation is then reported as 0.
    pub insufficient: bool,
}

/// Mean, sample standard deviation (n − 1) and standard error σ/√n.
pub fn summarize(values: &[f64]) -> Result<SummaryStats, MetricsError> {
    let n = values.len();
    if n == 0 {
        return Err(MetricsError::Invalid("cannot summarize an empty set".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(SummaryStats { mean, std_error: 0.0, std_dev: 0.0, n, insufficient: true });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std_dev = var.sqrt();
    Ok(SummaryStats { mean, std_error: std_dev / (n as f64).sqrt(), std_dev, n, insufficient: false })
}

/// Per-slot series and run totals of one scenario at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub site: String,
    pub import_kwh: Vec<f64>,
    pub export_kwh: Vec<f64>,
    pub pv_kwh: Vec<f64>,
    pub demand_kwh: Vec<f64>,
    pub hvac_kwh: Vec<f64>,
    pub t_in: Vec<f64>,
    pub totals: ScenarioTotals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTotals {
    /// Import charges minus feed-in credit, $.
    pub cost: f64,
    pub hvac_kwh: f64,
    pub import_kwh: f64,
    pub export_kwh: f64,
    pub pv_kwh: f64,
    pub demand_kwh: f64,
    /// PV self-consumption, percent; absent without PV.
    pub self_consumption: Option<f64>,
    pub violated_slots: usize,
    pub penalty: f64,
    pub toggles: usize,
}

impl ScenarioResult {
    pub fn from_trajectory(scenario: &str, site: &str, traj: &Trajectory) -> Self {
        let col = |f: fn(&SlotRecord) -> f64| traj.records.iter().map(f).collect::<Vec<f64>>();
        let import_kwh = col(|r| r.import_kwh);
        let export_kwh = col(|r| r.export_kwh);
        let pv_kwh = col(|r| r.pv_kwh);
        let demand_kwh = col(|r| r.demand_kwh);
        let hvac_kwh = col(|r| r.hvac_kwh);
        let consumption: Vec<f64> = demand_kwh.iter().zip(&hvac_kwh).map(|(d, h)| d + h).collect();
        let totals = ScenarioTotals {
            cost: annual_cost(&traj.records),
            hvac_kwh: hvac_kwh.iter().sum(),
            import_kwh: import_kwh.iter().sum(),
            export_kwh: export_kwh.iter().sum(),
            pv_kwh: pv_kwh.iter().sum(),
            demand_kwh: demand_kwh.iter().sum(),
            self_consumption: self_consumption(&consumption, &pv_kwh).ok(),
            violated_slots: traj.violated_slots(),
            penalty: traj.penalty(),
            toggles: traj.toggles(),
        };
        Self {
            scenario: scenario.into(),
            site: site.into(),
            import_kwh,
            export_kwh,
            pv_kwh,
            demand_kwh,
            hvac_kwh,
            t_in: col(|r| r.t_in),
            totals,
        }
    }
}
