use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{cost_saving, summarize};
use crate::par::Execution;

use super::config::{MeltingPoint, RunConfig, Scenario, TransitionKind};
use super::inputs::prepare_inputs;
use super::output::{FailureRow, SummaryRow};
use super::pipeline::{run_scenarios, summary_rows, SurrogateSet};
use super::RunnerError;

/// Baseline against variant at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteComparison {
    pub site: String,
    pub city: String,
    pub pv_capacity_kw: f64,
    pub baseline_cost: f64,
    pub variant_cost: f64,
    /// Baseline cost minus variant cost, $.
    pub saving: f64,
    /// Saving relative to the baseline cost, %; empty when that cost is
    /// not positive.
    pub saving_percent: Option<f64>,
    pub baseline_self_consumption: Option<f64>,
    pub variant_self_consumption: Option<f64>,
    /// Drop in self-consumption, percentage points.
    pub sc_reduction: Option<f64>,
    pub baseline_hvac_kwh: f64,
    pub variant_hvac_kwh: f64,
    pub hvac_reduction_percent: Option<f64>,
}

/// Cross-site statistics for one city and PV size. Empty statistics mean
/// no paired site had the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityComparison {
    pub city: String,
    pub pv_capacity_kw: f64,
    pub sites: usize,
    /// Sites seen in either scenario without a result in both.
    pub missing: usize,
    pub saving_mean: Option<f64>,
    pub saving_se: Option<f64>,
    pub saving_sd: Option<f64>,
    pub saving_percent_mean: Option<f64>,
    pub saving_percent_se: Option<f64>,
    pub saving_percent_sd: Option<f64>,
    pub sc_reduction_mean: Option<f64>,
    pub sc_reduction_se: Option<f64>,
    pub sc_reduction_sd: Option<f64>,
    /// Fewer than two paired sites, so the spread is not defined.
    pub insufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub metric: String,
    pub pv_capacity_kw: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub variant: String,
    pub sites: Vec<SiteComparison>,
    pub cities: Vec<CityComparison>,
    pub histogram: Vec<HistogramBin>,
}

/// Equal-width bins spanning the values; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let vals: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if vals.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![(lo, hi, vals.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in vals {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width }, c))
        .collect()
}

type Stats = (Option<f64>, Option<f64>, Option<f64>);

fn stats(values: &[f64]) -> Result<Stats, RunnerError> {
    if values.is_empty() {
        return Ok((None, None, None));
    }
    let s = summarize(values)?;
    Ok((Some(s.mean), Some(s.std_error), Some(s.std_dev)))
}

fn key(site: &str, pv: f64) -> (String, u64) {
    (site.to_string(), pv.to_bits())
}

/// Pairs `variant` against `baseline` site by site and PV size, and
/// summarizes each city.
pub fn compare_scenarios(
    rows: &[SummaryRow],
    failures: &[FailureRow],
    baseline: &str,
    variant: &str,
    bins: usize,
) -> Result<Comparison, RunnerError> {
    let pick = |name: &str| -> BTreeMap<(String, u64), &SummaryRow> {
        rows.iter().filter(|r| r.scenario == name).map(|r| (key(&r.site, r.pv_capacity_kw), r)).collect()
    };
    let base = pick(baseline);
    let var = pick(variant);
    if base.is_empty() && var.is_empty() {
        return Err(RunnerError::Selection(format!("no results for `{baseline}` or `{variant}`")));
    }

    let mut sites = Vec::new();
    // (city, pv bits) -> (paired comparisons, names seen)
    let mut seen: BTreeMap<(String, u64), Vec<String>> = BTreeMap::new();
    for r in base.values().chain(var.values()) {
        let names = seen.entry((r.city.clone(), r.pv_capacity_kw.to_bits())).or_default();
        if !names.contains(&r.site) {
            names.push(r.site.clone());
        }
    }
    let pv_sizes: Vec<u64> = {
        let mut v: Vec<u64> = seen.keys().map(|k| k.1).collect();
        v.dedup();
        v
    };
    for f in failures.iter().filter(|f| f.scenario == baseline || f.scenario == variant) {
        for &pv in &pv_sizes {
            let names = seen.entry((f.city.clone(), pv)).or_default();
            if !names.contains(&f.site) {
                names.push(f.site.clone());
            }
        }
    }

    for (k, b) in &base {
        let Some(v) = var.get(k) else { continue };
        let saving = cost_saving(b.cost, v.cost);
        let sc_reduction = match (b.self_consumption, v.self_consumption) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        };
        sites.push(SiteComparison {
            site: b.site.clone(),
            city: b.city.clone(),
            pv_capacity_kw: b.pv_capacity_kw,
            baseline_cost: b.cost,
            variant_cost: v.cost,
            saving: b.cost - v.cost,
            saving_percent: saving.ok().map(|s| s.percent),
            baseline_self_consumption: b.self_consumption,
            variant_self_consumption: v.self_consumption,
            sc_reduction,
            baseline_hvac_kwh: b.hvac_kwh,
            variant_hvac_kwh: v.hvac_kwh,
            hvac_reduction_percent: (b.hvac_kwh > 0.0).then(|| 100.0 * (b.hvac_kwh - v.hvac_kwh) / b.hvac_kwh),
        });
    }
    sites.sort_by(|a, b| (&a.city, a.pv_capacity_kw.to_bits(), &a.site).cmp(&(&b.city, b.pv_capacity_kw.to_bits(), &b.site)));

    let mut cities = Vec::new();
    for ((city, pv_bits), names) in &seen {
        let paired: Vec<&SiteComparison> =
            sites.iter().filter(|s| &s.city == city && s.pv_capacity_kw.to_bits() == *pv_bits).collect();
        let col = |f: fn(&SiteComparison) -> Option<f64>| paired.iter().filter_map(|s| f(s)).collect::<Vec<f64>>();
        let (saving_mean, saving_se, saving_sd) = stats(&col(|s| Some(s.saving)))?;
        let (saving_percent_mean, saving_percent_se, saving_percent_sd) = stats(&col(|s| s.saving_percent))?;
        let (sc_reduction_mean, sc_reduction_se, sc_reduction_sd) = stats(&col(|s| s.sc_reduction))?;
        cities.push(CityComparison {
            city: city.clone(),
            pv_capacity_kw: f64::from_bits(*pv_bits),
            sites: paired.len(),
            missing: names.len() - paired.len(),
            saving_mean,
            saving_se,
            saving_sd,
            saving_percent_mean,
            saving_percent_se,
            saving_percent_sd,
            sc_reduction_mean,
            sc_reduction_se,
            sc_reduction_sd,
            insufficient: paired.len() < 2,
        });
    }

    let mut hist = Vec::new();
    for &pv_bits in &pv_sizes {
        let at: Vec<&SiteComparison> = sites.iter().filter(|s| s.pv_capacity_kw.to_bits() == pv_bits).collect();
        let metrics: [(&str, Vec<f64>); 3] = [
            ("saving", at.iter().map(|s| s.saving).collect()),
            ("saving_percent", at.iter().filter_map(|s| s.saving_percent).collect()),
            ("sc_reduction", at.iter().filter_map(|s| s.sc_reduction).collect()),
        ];
        for (metric, values) in metrics {
            for (lo, hi, count) in histogram(&values, bins) {
                hist.push(HistogramBin { metric: metric.into(), pv_capacity_kw: f64::from_bits(pv_bits), lo, hi, count });
            }
        }
    }
    Ok(Comparison { baseline: baseline.into(), variant: variant.into(), sites, cities, histogram: hist })
}

/// One city, PV size and melting point of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub city: String,
    pub pv_capacity_kw: f64,
    pub melting_point: String,
    pub sites: usize,
    pub missing: usize,
    pub saving_mean: Option<f64>,
    pub saving_percent_mean: Option<f64>,
    pub saving_percent_se: Option<f64>,
    pub sc_reduction_mean: Option<f64>,
    pub sc_reduction_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub melting_points: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Totals of every run behind the report.
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<FailureRow>,
}

impl SweepReport {
    /// Wide layout: one line per city and PV size, cost saving for each
    /// melting point followed by the self-consumption reduction for each.
    pub fn write_table(&self, path: &Path) -> Result<(), RunnerError> {
        let csv_err = |e: csv::Error| RunnerError::Csv { path: path.display().to_string(), detail: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["city".to_string(), "pv_capacity_kw".to_string()];
        header.extend(self.melting_points.iter().map(|m| format!("{m}_saving_percent")));
        header.extend(self.melting_points.iter().map(|m| format!("{m}_sc_reduction")));
        w.write_record(&header).map_err(csv_err)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut keys: Vec<(String, u64)> = self.rows.iter().map(|r| (r.city.clone(), r.pv_capacity_kw.to_bits())).collect();
        keys.dedup();
        for (city, pv) in keys {
            let find = |m: &str| self.rows.iter().find(|r| r.city == city && r.pv_capacity_kw.to_bits() == pv && r.melting_point == m);
            let mut rec = vec![city.clone(), f64::from_bits(pv).to_string()];
            rec.extend(self.melting_points.iter().map(|m| fmt(find(m).and_then(|r| r.saving_percent_mean))));
            rec.extend(self.melting_points.iter().map(|m| fmt(find(m).and_then(|r| r.sc_reduction_mean))));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| RunnerError::io(path, e))
    }
}

/// HEMS-PCM at each melting point against HEMS without PCM, for every
/// configured PV size.
pub fn melting_point_sweep(
    cfg: &RunConfig,
    melting_points: &[MeltingPoint],
    data_dir: Option<&Path>,
    exec: Execution,
) -> Result<SweepReport, RunnerError> {
    cfg.validate()?;
    if melting_points.is_empty() {
        return Err(RunnerError::Config("no melting points to sweep".into()));
    }
    let capacities =
        if cfg.sweep_pv_capacities_kw.is_empty() { vec![cfg.pv_capacity_kw] } else { cfg.sweep_pv_capacities_kw.clone() };
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let mut surrogates: Option<SurrogateSet> = None;
    for &cap in &capacities {
        let cfg_p = RunConfig { pv_capacity_kw: cap, ..cfg.clone() };
        let inputs = prepare_inputs(&cfg_p, data_dir)?;
        if cfg.transition == TransitionKind::Surrogate && surrogates.is_none() {
            let mut tps = vec![None];
            tps.extend(melting_points.iter().map(|m| Some(m.celsius())));
            surrogates = Some(SurrogateSet::prepare(cfg, data_dir, &inputs, &tps, None)?);
        }
        let base_runs = run_scenarios(&cfg_p, &inputs, &[Scenario::Hems], surrogates.as_ref(), exec)?;
        let base_rows = summary_rows(&cfg_p, &base_runs);
        let base_failures = failure_rows(&base_runs);
        summary.extend(base_rows.iter().cloned());
        failures.extend(base_failures.iter().cloned());
        for &mp in melting_points {
            let cfg_m = RunConfig { melting_point: mp, ..cfg_p.clone() };
            let runs = run_scenarios(&cfg_m, &inputs, &[Scenario::HemsPcm], surrogates.as_ref(), exec)?;
            let var_rows = summary_rows(&cfg_m, &runs);
            let var_failures = failure_rows(&runs);
            let mut all = base_rows.clone();
            all.extend(var_rows.iter().cloned());
            let mut all_failures = base_failures.clone();
            all_failures.extend(var_failures.iter().cloned());
            let cmp = compare_scenarios(&all, &all_failures, Scenario::Hems.label(), Scenario::HemsPcm.label(), 10)?;
            for c in cmp.cities {
                rows.push(SweepRow {
                    city: c.city,
                    pv_capacity_kw: c.pv_capacity_kw,
                    melting_point: mp.label().to_string(),
                    sites: c.sites,
                    missing: c.missing,
                    saving_mean: c.saving_mean,
                    saving_percent_mean: c.saving_percent_mean,
                    saving_percent_se: c.saving_percent_se,
                    sc_reduction_mean: c.sc_reduction_mean,
                    sc_reduction_se: c.sc_reduction_se,
                });
            }
            summary.extend(var_rows);
            failures.extend(var_failures);
        }
    }
    let mut labels: Vec<String> = Vec::new();
    for m in melting_points {
        if !labels.iter().any(|l| l == m.label()) {
            labels.push(m.label().to_string());
        }
    }
    Ok(SweepReport { melting_points: labels, rows, summary, failures })
}

fn failure_rows(runs: &[super::scenario::ScenarioRun]) -> Vec<FailureRow> {
    runs.iter()
        .flat_map(|r| {
            r.failures().map(|f| FailureRow {
                scenario: r.scenario.label().to_string(),
                site: f.site.clone(),
                city: f.city.clone(),
                error: f.error.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(scenario: &str, site: &str, city: &str, cost: f64, sc: f64, hvac: f64) -> SummaryRow {
        SummaryRow {
            scenario: scenario.into(),
            site: site.into(),
            city: city.into(),
            pcm: String::new(),
            pv_capacity_kw: 5.0,
            slots: 48,
            cost,
            hvac_kwh: hvac,
            import_kwh: 0.0,
            export_kwh: 0.0,
            pv_kwh: 1.0,
            demand_kwh: 1.0,
            self_consumption: Some(sc),
            violated_slots: 0,
            penalty: 0.0,
            toggles: 0,
        }
    }

    #[test]
    fn baseline_against_itself_saves_nothing() {
        let rows = vec![row("HEMS", "a", "x", 100.0, 40.0, 10.0), row("HEMS", "b", "x", 80.0, 30.0, 8.0)];
        let c = compare_scenarios(&rows, &[], "HEMS", "HEMS", 5).unwrap();
        assert!(c.sites.iter().all(|s| s.saving == 0.0 && s.saving_percent == Some(0.0) && s.sc_reduction == Some(0.0)));
        assert_eq!(c.cities[0].saving_mean, Some(0.0));
    }

    #[test]
    fn hand_built_pair_matches_hand_arithmetic() {
        let rows = vec![
            row("HEMS", "a", "x", 100.0, 40.0, 10.0),
            row("HEMS-PCM", "a", "x", 90.0, 38.0, 7.0),
            row("HEMS", "b", "x", 200.0, 50.0, 20.0),
            row("HEMS-PCM", "b", "x", 150.0, 49.0, 15.0),
            row("HEMS", "c", "y", 50.0, 20.0, 5.0),
        ];
        let c = compare_scenarios(&rows, &[], "HEMS", "HEMS-PCM", 4).unwrap();
        assert_eq!(c.sites.len(), 2);
        let a = &c.sites[0];
        assert_eq!((a.saving, a.saving_percent, a.sc_reduction), (10.0, Some(10.0), Some(2.0)));
        assert_relative_eq!(a.hvac_reduction_percent.unwrap(), 30.0, epsilon = 1e-12);
        let x = &c.cities[0];
        assert_eq!((x.city.as_str(), x.sites, x.missing), ("x", 2, 0));
        // Savings 10 and 50: mean 30, sd 28.284, se 20.
        assert_relative_eq!(x.saving_mean.unwrap(), 30.0);
        assert_relative_eq!(x.saving_sd.unwrap(), 800f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(x.saving_se.unwrap(), 20.0, epsilon = 1e-12);
        assert_relative_eq!(x.saving_percent_mean.unwrap(), 17.5);
        assert_relative_eq!(x.sc_reduction_mean.unwrap(), 1.5);
        let y = &c.cities[1];
        assert_eq!((y.sites, y.missing, y.saving_mean), (0, 1, None));
        assert!(y.insufficient);
    }

    #[test]
    fn se_is_sd_over_root_n() {
        let mut rows = Vec::new();
        for (i, (b, v)) in [(10.0, 9.0), (12.0, 9.5), (11.0, 10.8), (9.0, 7.0)].into_iter().enumerate() {
            rows.push(row("HEMS", &format!("s{i}"), "x", b, 50.0, 1.0));
            rows.push(row("HEMS-PCM", &format!("s{i}"), "x", v, 49.0 - i as f64, 1.0));
        }
        let c = compare_scenarios(&rows, &[], "HEMS", "HEMS-PCM", 3).unwrap();
        let x = &c.cities[0];
        for (se, sd) in [(x.saving_se, x.saving_sd), (x.saving_percent_se, x.saving_percent_sd), (x.sc_reduction_se, x.sc_reduction_sd)] {
            assert_relative_eq!(se.unwrap(), sd.unwrap() / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn failed_sites_count_as_missing() {
        let rows = vec![row("HEMS", "a", "x", 100.0, 40.0, 10.0), row("HEMS-PCM", "a", "x", 90.0, 38.0, 7.0)];
        let failures = vec![FailureRow { scenario: "HEMS".into(), site: "b".into(), city: "x".into(), error: "e".into() }];
        let c = compare_scenarios(&rows, &failures, "HEMS", "HEMS-PCM", 3).unwrap();
        assert_eq!((c.cities[0].sites, c.cities[0].missing), (1, 1));
        assert!(compare_scenarios(&rows, &[], "DB", "DB-PCM", 3).is_err());
    }

    #[test]
    fn histogram_bins() {
        assert_eq!(histogram(&[], 3), vec![]);
        assert_eq!(histogram(&[2.0, 2.0], 3), vec![(2.0, 2.0, 2)]);
        let h = histogram(&[0.0, 1.0, 2.0, 3.0, 3.0], 3);
        assert_eq!(h.iter().map(|b| b.2).collect::<Vec<_>>(), vec![1, 1, 3]);
        assert_eq!(h[2].1, 3.0);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 5);
    }
}
