use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    city_preset, fit_markov_chain, load_series, sample_profile, synth_demand_source, synth_pv,
    synth_weather, DataError, DemandMarkovModel, TariffSchedule, TimeSeries, Units,
};
use crate::optimizer::SlotData;
use crate::thermal::OutdoorRamp;

use super::{RunConfig, RunnerError, SiteConfig};

pub const SLOT_SECONDS: i64 = 1800;
pub const SLOTS_PER_DAY: usize = 48;

/// A 64-bit seed derived from the run seed and a label, so that every
/// generator gets its own stream regardless of site order.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has at least 8 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHashes {
    pub weather: String,
    pub pv: String,
    pub demand: String,
}

/// Everything one site feeds into the scenarios, already cut to the
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteInputs {
    pub name: String,
    pub city: String,
    /// Outdoor temperature at the horizon's slot boundaries: one sample
    /// per slot plus the closing one when the source extends that far.
    pub weather: TimeSeries,
    /// PV generation for the configured capacity, kWh per slot.
    pub pv: TimeSeries,
    pub demand: TimeSeries,
}

impl SiteInputs {
    pub fn slots(&self) -> usize {
        self.pv.len()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.pv.start
    }

    pub fn ramps(&self) -> Vec<OutdoorRamp> {
        let w = &self.weather.values;
        (0..self.slots())
            .map(|k| OutdoorRamp { start: w[k], end: *w.get(k + 1).unwrap_or(&w[k]) })
            .collect()
    }

    pub fn slot_data(&self, tariff: &TariffSchedule) -> Vec<SlotData> {
        self.ramps()
            .into_iter()
            .enumerate()
            .map(|(k, t_out)| SlotData {
                t_out,
                pv_kwh: self.pv.values[k],
                demand_kwh: self.demand.values[k],
                import_price: tariff.price_at(self.pv.timestamp(k)),
                feed_in_price: tariff.feed_in,
            })
            .collect()
    }

    pub fn csv_bytes(series: &TimeSeries) -> Result<Vec<u8>, RunnerError> {
        let mut buf = Vec::new();
        series.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn hashes(&self) -> Result<InputHashes, RunnerError> {
        Ok(InputHashes {
            weather: sha256_hex(&Self::csv_bytes(&self.weather)?),
            pv: sha256_hex(&Self::csv_bytes(&self.pv)?),
            demand: sha256_hex(&Self::csv_bytes(&self.demand)?),
        })
    }
}

/// Slots `[start, start + len)` of `series`, located by timestamp.
fn select(series: &TimeSeries, start: NaiveDateTime, len: usize, what: &str) -> Result<TimeSeries, RunnerError> {
    let offset = (start - series.start).num_seconds();
    if offset < 0 || offset % series.slot_seconds != 0 {
        return Err(RunnerError::Selection(format!(
            "{what} series starts at {} and does not contain slot {start}",
            series.start
        )));
    }
    let from = (offset / series.slot_seconds) as usize;
    series.window(from, len).map_err(|_| {
        RunnerError::Selection(format!(
            "{what} series ({} slots from {}) does not cover {len} slots from {start}",
            series.len(),
            series.start
        ))
    })
}

fn days_in_year(year: i32) -> usize {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

/// Shared generators for the series that sites do not supply.
pub struct InputFactory<'a> {
    cfg: &'a RunConfig,
    data_dir: Option<&'a Path>,
    demand_model: Option<DemandMarkovModel>,
}

impl<'a> InputFactory<'a> {
    /// Fits the demand Markov chain if any site needs synthetic demand.
    pub fn new(cfg: &'a RunConfig, data_dir: Option<&'a Path>) -> Result<Self, RunnerError> {
        let demand_model = if cfg.sites.iter().any(|s| s.demand.is_none()) {
            let source = match &cfg.demand.source {
                Some(p) => load_series(&resolve(data_dir, p), Units::Kwh, SLOT_SECONDS)?,
                None => synth_demand_source(cfg.year, cfg.demand.annual_kwh, sub_seed(cfg.seed, "demand-source"))?,
            };
            Some(fit_markov_chain(&source, cfg.demand.bins)?)
        } else {
            None
        };
        Ok(Self { cfg, data_dir, demand_model })
    }

    pub fn demand_model(&self) -> Option<&DemandMarkovModel> {
        self.demand_model.as_ref()
    }

    fn start(&self) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(self.cfg.year, 1, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .expect("validated year")
            + Duration::days(self.cfg.start_day as i64)
    }

    fn load(&self, path: &Path, units: Units) -> Result<TimeSeries, RunnerError> {
        Ok(load_series(&resolve(self.data_dir, path), units, SLOT_SECONDS)?)
    }

    pub fn build(&self, site: &SiteConfig) -> Result<SiteInputs, RunnerError> {
        let cfg = self.cfg;
        let start = self.start();
        let n = cfg.days * SLOTS_PER_DAY;
        let preset = || {
            city_preset(&site.city).ok_or_else(|| RunnerError::Config(format!("no preset for city `{}`", site.city)))
        };
        let weather_seed = sub_seed(cfg.seed, &format!("weather/{}", site.city.to_lowercase()));

        let weather_full = match &site.weather {
            Some(p) => self.load(p, Units::DegC)?,
            None => synth_weather(&preset()?, cfg.year, weather_seed)?,
        };
        // Take the closing boundary sample too when the series has it.
        let weather = select(&weather_full, start, n + 1, "weather")
            .or_else(|_| select(&weather_full, start, n, "weather"))?;

        let pv_ref = match &site.pv {
            Some(p) => self.load(p, Units::Kwh)?,
            None => synth_pv(
                &preset()?,
                cfg.pv_reference_kw,
                cfg.year,
                weather_seed,
                sub_seed(cfg.seed, &format!("pv/{}", site.name)),
            )?,
        };
        let mut pv = select(&pv_ref, start, n, "pv")?;
        let scale = cfg.pv_capacity_kw / cfg.pv_reference_kw;
        pv.values.iter_mut().for_each(|v| *v *= scale);

        let demand_full = match (&site.demand, &self.demand_model) {
            (Some(p), _) => self.load(p, Units::Kwh)?,
            (None, Some(model)) => {
                let year_start = start - Duration::days(cfg.start_day as i64);
                sample_profile(model, year_start, days_in_year(cfg.year), sub_seed(cfg.seed, &format!("demand/{}", site.name)))?
            }
            (None, None) => return Err(RunnerError::Data(DataError::Invalid("no demand model".into()))),
        };
        let demand = select(&demand_full, start, n, "demand")?;

        Ok(SiteInputs { name: site.name.clone(), city: site.city.clone(), weather, pv, demand })
    }
}

pub fn resolve(data_dir: Option<&Path>, p: &Path) -> std::path::PathBuf {
    match data_dir {
        Some(d) if p.is_relative() => d.join(p),
        _ => p.to_path_buf(),
    }
}

/// Inputs for every configured site, in config order; a site whose data
/// cannot be prepared carries its error.
pub fn prepare_inputs(
    cfg: &RunConfig,
    data_dir: Option<&Path>,
) -> Result<Vec<Result<SiteInputs, RunnerError>>, RunnerError> {
    let factory = InputFactory::new(cfg, data_dir)?;
    Ok(cfg.sites.iter().map(|s| factory.build(s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_cfg() -> RunConfig {
        RunConfig { days: 3, start_day: 10, ..RunConfig::default() }
    }

    #[test]
    fn sub_seeds_differ_by_label() {
        assert_ne!(sub_seed(1, "a"), sub_seed(1, "b"));
        assert_ne!(sub_seed(1, "a"), sub_seed(2, "a"));
        assert_eq!(sub_seed(7, "x"), sub_seed(7, "x"));
    }

    #[test]
    fn synthetic_inputs_cover_the_horizon() {
        let cfg = short_cfg();
        let inputs = prepare_inputs(&cfg, None).unwrap();
        let a = inputs[0].as_ref().unwrap();
        assert_eq!(a.slots(), 144);
        assert_eq!(a.weather.len(), 145);
        assert_eq!(a.start(), NaiveDate::from_ymd_opt(2019, 1, 11).unwrap().and_hms_opt(0, 0, 0).unwrap());
        let slots = a.slot_data(&cfg.tariff);
        assert_eq!(slots.len(), 144);
        assert_eq!(slots[0].t_out.end, slots[1].t_out.start);
        // 00:00 is off-peak, 15:00 is peak.
        assert_eq!(slots[0].import_price, 0.15);
        assert_eq!(slots[30].import_price, 0.50);
        assert!(slots.iter().all(|s| s.feed_in_price == 0.09));
    }

    #[test]
    fn pv_scales_with_capacity() {
        let five = prepare_inputs(&short_cfg(), None).unwrap().remove(0).unwrap();
        let eight = prepare_inputs(&RunConfig { pv_capacity_kw: 8.0, ..short_cfg() }, None).unwrap().remove(0).unwrap();
        for (a, b) in five.pv.values.iter().zip(&eight.pv.values) {
            assert!((b - a * 1.6).abs() < 1e-12);
        }
        assert_eq!(five.demand, eight.demand);
        assert_eq!(five.weather, eight.weather);
    }

    #[test]
    fn last_day_has_a_constant_closing_ramp() {
        let cfg = RunConfig { start_day: 364, days: 1, ..RunConfig::default() };
        let a = prepare_inputs(&cfg, None).unwrap().remove(0).unwrap();
        assert_eq!(a.weather.len(), 48);
        let r = a.ramps();
        assert_eq!(r[47].start, r[47].end);
    }

    #[test]
    fn loaded_series_are_windowed_by_timestamp() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = short_cfg();
        let synth = prepare_inputs(&RunConfig { start_day: 0, days: 30, ..cfg.clone() }, None).unwrap().remove(0).unwrap();
        synth.demand.save(&dir.path().join("d.csv")).unwrap();
        let mut cfg = cfg;
        cfg.sites[0].demand = Some("d.csv".into());
        let loaded = prepare_inputs(&cfg, Some(dir.path())).unwrap().remove(0).unwrap();
        assert_eq!(loaded.demand.values[..], synth.demand.values[480..624]);

        cfg.sites[0].demand = Some("missing.csv".into());
        let res = prepare_inputs(&cfg, Some(dir.path())).unwrap();
        assert!(res[0].is_err());
        assert!(res[1].is_ok());
    }

    #[test]
    fn short_files_are_a_selection_error() {
        let dir = tempfile::tempdir().unwrap();
        let synth = prepare_inputs(&RunConfig { start_day: 0, days: 2, ..short_cfg() }, None).unwrap().remove(0).unwrap();
        synth.pv.save(&dir.path().join("pv.csv")).unwrap();
        let mut cfg = short_cfg();
        cfg.sites[0].pv = Some("pv.csv".into());
        let res = prepare_inputs(&cfg, Some(dir.path())).unwrap();
        assert!(matches!(res[0], Err(RunnerError::Selection(_))));
    }
}
