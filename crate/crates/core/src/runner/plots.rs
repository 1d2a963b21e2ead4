use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::data::{TariffSchedule, TIMESTAMP_FORMAT};

use super::output::{read_csv, write_csv, TrajectoryRow, TRAJECTORY_DIR};
use super::RunnerError;

pub const PLOT_SLOTS_PER_WEEK: usize = 7 * 48;

/// One half-hour of a plotted week: the five panel series plus the
/// tariff window in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub timestamp: String,
    pub t_out: f64,
    pub t_in: f64,
    pub pv_kwh: f64,
    pub demand_kwh: f64,
    pub hvac_kwh: f64,
    pub import_price: f64,
    pub tariff_window: String,
    /// Label of the window that starts at this slot, empty elsewhere.
    pub boundary: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotWeek {
    pub week: usize,
    pub rows: Vec<PlotRow>,
}

impl PlotWeek {
    /// (timestamp, window label) of every tariff-window start in the week.
    pub fn boundaries(&self) -> Vec<(&str, &str)> {
        self.rows
            .iter()
            .filter(|r| !r.boundary.is_empty())
            .map(|r| (r.timestamp.as_str(), r.boundary.as_str()))
            .collect()
    }
}

/// Cuts week `week` (0-based from the start of the trajectory) out of a
/// trajectory and annotates it with the tariff windows.
pub fn emit_plot_data(rows: &[TrajectoryRow], week: usize, tariff: &TariffSchedule) -> Result<PlotWeek, RunnerError> {
    let from = week * PLOT_SLOTS_PER_WEEK;
    let to = from + PLOT_SLOTS_PER_WEEK;
    if to > rows.len() {
        return Err(RunnerError::Selection(format!(
            "week {week} needs slots {from}..{to} but the trajectory has {}",
            rows.len()
        )));
    }
    let out = rows[from..to]
        .iter()
        .map(|r| {
            let at = NaiveDateTime::parse_from_str(&r.timestamp, TIMESTAMP_FORMAT)
                .map_err(|e| RunnerError::Selection(format!("bad timestamp `{}`: {e}", r.timestamp)))?;
            let w = &tariff.windows[tariff.window_index(at.time())];
            Ok(PlotRow {
                timestamp: r.timestamp.clone(),
                t_out: r.t_out,
                t_in: r.t_in,
                pv_kwh: r.pv_kwh,
                demand_kwh: r.demand_kwh,
                hvac_kwh: r.hvac_kwh,
                import_price: w.price,
                tariff_window: w.label.clone(),
                boundary: if at.time() == w.start { w.label.clone() } else { String::new() },
            })
        })
        .collect::<Result<Vec<_>, RunnerError>>()?;
    Ok(PlotWeek { week, rows: out })
}

/// Writes `plot_dir/<site>/<scenario>_week<w>.csv` for every trajectory
/// under `run_dir` and every requested week. Returns the written paths.
pub fn emit_plots(
    run_dir: &Path,
    plot_dir: &Path,
    weeks: &[usize],
    tariff: &TariffSchedule,
) -> Result<Vec<PathBuf>, RunnerError> {
    let root = run_dir.join(TRAJECTORY_DIR);
    let mut scenarios: Vec<PathBuf> = list(&root)?.into_iter().filter(|p| p.is_dir()).collect();
    scenarios.sort();
    if scenarios.is_empty() {
        return Err(RunnerError::Selection(format!("no trajectories under {}", root.display())));
    }
    let mut written = Vec::new();
    for sc_dir in scenarios {
        let scenario = sc_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut files: Vec<PathBuf> = list(&sc_dir)?.into_iter().filter(|p| p.extension().is_some_and(|e| e == "csv")).collect();
        files.sort();
        for f in files {
            let site = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let rows: Vec<TrajectoryRow> = read_csv(&f)?;
            for &w in weeks {
                let week = emit_plot_data(&rows, w, tariff)?;
                let path = plot_dir.join(&site).join(format!("{scenario}_week{w}.csv"));
                write_csv(&path, &week.rows)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn list(dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    std::fs::read_dir(dir)
        .map_err(|e| RunnerError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| RunnerError::io(dir, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};

    fn rows(n: usize) -> Vec<TrajectoryRow> {
        let start = NaiveDate::from_ymd_opt(2019, 7, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..n)
            .map(|k| TrajectoryRow {
                timestamp: (start + Duration::minutes(30 * k as i64)).format(TIMESTAMP_FORMAT).to_string(),
                t_out: 10.0,
                t_in: 21.0,
                t_air: 21.0,
                t_envelope: 21.0,
                action: "off".into(),
                on_fraction: 0.0,
                hvac_kwh: 0.0,
                demand_kwh: 0.5,
                pv_kwh: 0.0,
                import_kwh: 0.5,
                export_kwh: 0.0,
                import_price: 0.25,
                energy_cost: 0.125,
                violation: 0.0,
                penalty: 0.0,
                soc_kwh: 0.0,
            })
            .collect()
    }

    #[test]
    fn full_week_has_336_rows_and_daily_boundaries() {
        let week = emit_plot_data(&rows(2 * PLOT_SLOTS_PER_WEEK), 1, &TariffSchedule::default()).unwrap();
        assert_eq!(week.rows.len(), 336);
        assert_eq!(week.rows[0].timestamp, "2019-07-08T00:00:00");
        let b = week.boundaries();
        assert_eq!(b.len(), 28);
        let times: Vec<&str> = b[..4].iter().map(|(t, _)| &t[11..16]).collect();
        assert_eq!(times, ["07:30", "14:30", "20:30", "22:30"]);
        assert_eq!(b[3].1, "off-peak");
        assert_eq!(week.rows[0].tariff_window, "off-peak");
    }

    #[test]
    fn week_outside_the_horizon_is_a_selection_error() {
        let r = rows(PLOT_SLOTS_PER_WEEK + 10);
        assert!(emit_plot_data(&r, 0, &TariffSchedule::default()).is_ok());
        assert!(matches!(emit_plot_data(&r, 1, &TariffSchedule::default()), Err(RunnerError::Selection(_))));
    }
}
