//! Synthetic stand-ins for measured weather, PV and demand data. Each
//! generator is seeded and calibrated to published annual statistics.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeries, Units};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimatePreset {
    pub name: &'static str,
    /// Annual dry-bulb minimum, maximum and mean, °C.
    pub t_min: f64,
    pub t_max: f64,
    pub t_mean: f64,
    /// Degrees, negative south.
    pub latitude: f64,
    /// Annual PV yield, kWh per kW installed.
    pub pv_yield: f64,
}

pub const CITIES: [ClimatePreset; 5] = [
    ClimatePreset { name: "sydney", t_min: 6.2, t_max: 39.3, t_mean: 18.8, latitude: -33.87, pv_yield: 1583.2 },
    ClimatePreset { name: "brisbane", t_min: 7.6, t_max: 41.0, t_mean: 21.6, latitude: -27.47, pv_yield: 1838.5 },
    ClimatePreset { name: "melbourne", t_min: 2.4, t_max: 43.2, t_mean: 15.7, latitude: -37.81, pv_yield: 1466.5 },
    ClimatePreset { name: "adelaide", t_min: 2.3, t_max: 46.2, t_mean: 17.5, latitude: -34.93, pv_yield: 1658.9 },
    ClimatePreset { name: "perth", t_min: 2.1, t_max: 41.8, t_mean: 18.6, latitude: -31.95, pv_yield: 1901.3 },
];

pub fn city_preset(name: &str) -> Option<ClimatePreset> {
    CITIES.iter().copied().find(|c| c.name.eq_ignore_ascii_case(name))
}

const SLOT_SECONDS: i64 = 1800;
const SLOTS_PER_DAY: usize = 48;

fn year_start(year: i32) -> Result<NaiveDateTime, DataError> {
    NaiveDate::from_ymd_opt(year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| DataError::Invalid(format!("bad year {year}")))
}

fn days_in_year(year: i32) -> usize {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite standard deviation")
}

/// Maps `x` piecewise-linearly about its mean so that its minimum, maximum
/// and mean hit the targets exactly.
fn calibrate(x: &mut [f64], t_min: f64, t_max: f64, t_mean: f64) -> Result<(), DataError> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let a = x.iter().copied().fold(f64::INFINITY, f64::min) - m;
    let b = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - m;
    let d_hi: f64 = x.iter().map(|v| (v - m).max(0.0)).sum::<f64>() / n;
    let d_lo = -d_hi;
    // c + a s_lo = t_min, c + b s_hi = t_max, c + d_lo s_lo + d_hi s_hi = t_mean
    let (s_lo, s_hi, c) = {
        // Eliminate c: (a - d_lo) s_lo - d_hi s_hi = t_min - t_mean,
        //              -d_lo s_lo + (b - d_hi) s_hi = t_max - t_mean.
        let (p, q, r) = (a - d_lo, -d_hi, t_min - t_mean);
        let (u, v, w) = (-d_lo, b - d_hi, t_max - t_mean);
        let det = p * v - q * u;
        let s_lo = (r * v - q * w) / det;
        let s_hi = (p * w - r * u) / det;
        (s_lo, s_hi, t_min - a * s_lo)
    };
    if !(s_lo > 0.0 && s_hi > 0.0) {
        return Err(DataError::Invalid("weather calibration is not monotone".into()));
    }
    for v in x.iter_mut() {
        let d = *v - m;
        *v = c + if d < 0.0 { d * s_lo } else { d * s_hi };
    }
    Ok(())
}

/// Half-hourly outdoor temperature for a calendar year: seasonal and daily
/// cycles plus persistent synoptic anomalies, calibrated to the preset's
/// annual minimum, maximum and mean.
pub fn synth_weather(preset: &ClimatePreset, year: i32, seed: u64) -> Result<TimeSeries, DataError> {
    let start = year_start(year)?;
    let days = days_in_year(year);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let synoptic = normal(2.5);
    let fast = normal(0.35);
    let mut anomaly = 0.0;
    let mut wobble = 0.0;
    let mut x = Vec::with_capacity(days * SLOTS_PER_DAY);
    for d in 0..days {
        anomaly = 0.75 * anomaly + synoptic.sample(&mut rng);
        // Southern hemisphere: warmest in late January.
        let season = (2.0 * PI * (d as f64 - 25.0) / days as f64).cos();
        let swing = 4.0 + 1.5 * season;
        for s in 0..SLOTS_PER_DAY {
            let hour = s as f64 / 2.0;
            wobble = 0.9 * wobble + fast.sample(&mut rng);
            let daily = (2.0 * PI * (hour - 15.0) / 24.0).cos();
            x.push(6.0 * season + swing * daily + anomaly + wobble);
        }
    }
    calibrate(&mut x, preset.t_min, preset.t_max, preset.t_mean)?;
    TimeSeries::new(start, SLOT_SECONDS, Units::DegC, x)
}

/// Sine of the solar elevation at `hour` (local solar time) on day `doy`.
fn sun_height(latitude: f64, doy: usize, hour: f64) -> f64 {
    let decl = (23.44f64).to_radians() * (2.0 * PI * (284.0 + doy as f64) / 365.0).sin();
    let lat = latitude.to_radians();
    let omega = (15.0 * (hour - 12.0)).to_radians();
    lat.sin() * decl.sin() + lat.cos() * decl.cos() * omega.cos()
}

/// Clearness of each day of the year for a city, shared by its sites.
fn clearness(days: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shock = normal(0.8);
    let mut z = 0.0;
    (0..days)
        .map(|_| {
            z = 0.5 * z + shock.sample(&mut rng);
            // Logistic map onto (0.15, 1].
            0.15 + 0.85 / (1.0 + (-1.2 - z).exp())
        })
        .collect()
}

/// Half-hourly PV generation (kWh per slot) for `capacity_kw` installed,
/// scaled so that its annual total equals `capacity_kw · pv_yield`. Days
/// share cloudiness through `weather_seed`; `site_seed` adds site-level
/// variation.
pub fn synth_pv(
    preset: &ClimatePreset,
    capacity_kw: f64,
    year: i32,
    weather_seed: u64,
    site_seed: u64,
) -> Result<TimeSeries, DataError> {
    if !(capacity_kw > 0.0) {
        return Err(DataError::Invalid(format!("PV capacity must be positive, got {capacity_kw}")));
    }
    let start = year_start(year)?;
    let days = days_in_year(year);
    let sky = clearness(days, weather_seed ^ 0x5f37_59df);
    let mut rng = ChaCha8Rng::seed_from_u64(site_seed);
    let site = normal(0.08);
    let mut x = Vec::with_capacity(days * SLOTS_PER_DAY);
    for (d, &k) in sky.iter().enumerate() {
        let local = (k * (1.0 + site.sample(&mut rng))).clamp(0.05, 1.1);
        let doy = start.date().ordinal0() as usize + d + 1;
        for s in 0..SLOTS_PER_DAY {
            let h = sun_height(preset.latitude, doy, (s as f64 + 0.5) / 2.0);
            x.push(if h > 0.0 { local * h.powf(1.2) } else { 0.0 });
        }
    }
    // Rescale to the annual yield, clipping at the inverter rating.
    let target = capacity_kw * preset.pv_yield;
    let cap = capacity_kw * SLOT_SECONDS as f64 / 3600.0;
    for _ in 0..200 {
        let scale = target / x.iter().sum::<f64>();
        x.iter_mut().for_each(|v| *v = (*v * scale).min(cap));
        if (x.iter().sum::<f64>() / target - 1.0).abs() < 1e-12 {
            break;
        }
    }
    TimeSeries::new(start, SLOT_SECONDS, Units::Kwh, x)
}

/// A metered-looking household demand profile (kWh per slot) totalling
/// `annual_kwh`, with morning and evening peaks, winter uplift and
/// day-to-day and slot-to-slot variability.
pub fn synth_demand_source(year: i32, annual_kwh: f64, seed: u64) -> Result<TimeSeries, DataError> {
    let start = year_start(year)?;
    let days = days_in_year(year);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let day_noise = normal(0.15);
    let slot_noise = normal(0.35);
    let mut x = Vec::with_capacity(days * SLOTS_PER_DAY);
    for d in 0..days {
        let winter = 1.0 + 0.15 * (2.0 * PI * (d as f64 - 196.0) / days as f64).cos();
        let weekend = if (start.date() + chrono::Days::new(d as u64)).weekday().number_from_monday() > 5 { 1.1 } else { 1.0 };
        let level = winter * weekend * day_noise.sample(&mut rng).exp();
        for s in 0..SLOTS_PER_DAY {
            let h = s as f64 / 2.0;
            let bump = |c: f64, w: f64, a: f64| a * (-(h - c) * (h - c) / (2.0 * w * w)).exp();
            let shape = 0.25 + bump(7.5, 1.2, 0.45) + bump(19.0, 2.0, 0.9) + bump(13.0, 3.0, 0.15);
            x.push(shape * level * slot_noise.sample(&mut rng).exp());
        }
    }
    let mut s = TimeSeries::new(start, SLOT_SECONDS, Units::Kwh, x)?;
    scale_to_total(&mut s, annual_kwh)?;
    Ok(s)
}

/// Multiplies `series` so that its values sum to `total`.
pub fn scale_to_total(series: &mut TimeSeries, total: f64) -> Result<(), DataError> {
    let current = series.total();
    if !(current > 0.0 && total >= 0.0) {
        return Err(DataError::Invalid("cannot rescale a series with a non-positive total".into()));
    }
    let k = total / current;
    series.values.iter_mut().for_each(|v| *v *= k);
    Ok(())
}
