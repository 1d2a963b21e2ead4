use chrono::{NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeries, Units};

const SMOOTHING: f64 = 1e-6;
/// Minimum number of observations per (bin, slot-of-day) pair on average.
const COVERAGE: usize = 10;

/// First-order demand chain conditioned on the slot of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandMarkovModel {
    pub slots_per_day: usize,
    pub slot_seconds: i64,
    /// Interior cut points between bins, ascending.
    pub cuts: Vec<f64>,
    /// Mean member value of each bin, kWh per slot.
    pub representatives: Vec<f64>,
    /// Bin occupancy per slot of day, `[slot][bin]`.
    pub marginals: Vec<f64>,
    /// `[slot][from][to]`: probability of moving from the bin at the
    /// previous slot to the bin at `slot`.
    pub transitions: Vec<f64>,
}

impl DemandMarkovModel {
    pub fn bins(&self) -> usize {
        self.representatives.len()
    }

    pub fn bin_of(&self, v: f64) -> usize {
        self.cuts.iter().take_while(|&&c| v >= c).count()
    }

    pub fn row(&self, slot: usize, from: usize) -> &[f64] {
        let b = self.bins();
        let i = (slot * b + from) * b;
        &self.transitions[i..i + b]
    }

    pub fn marginal(&self, slot: usize) -> &[f64] {
        let b = self.bins();
        &self.marginals[slot * b..(slot + 1) * b]
    }
}

fn slot_of_day(t: NaiveDateTime, slot_seconds: i64) -> usize {
    (t.num_seconds_from_midnight() as i64 / slot_seconds) as usize
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Fits quantile bins and per-slot-of-day transition matrices.
pub fn fit_markov_chain(series: &TimeSeries, bins: usize) -> Result<DemandMarkovModel, DataError> {
    if bins == 0 {
        return Err(DataError::Invalid("bin count must be positive".into()));
    }
    if 86_400 % series.slot_seconds != 0 {
        return Err(DataError::Invalid("slot length must divide a day".into()));
    }
    let spd = (86_400 / series.slot_seconds) as usize;
    let need = bins * spd * COVERAGE;
    if series.len() < need {
        return Err(DataError::Invalid(format!(
            "{} slots are too few to fit {bins} bins (need {need})",
            series.len()
        )));
    }
    let mut sorted = series.values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..bins).map(|j| quantile(&sorted, j as f64 / bins as f64)).collect();
    cuts.dedup();
    // Drop cuts that leave a bin empty.
    cuts.retain(|&c| c > sorted[0] && c <= sorted[sorted.len() - 1]);
    let mut kept: Vec<f64> = Vec::new();
    for c in cuts {
        let prev = kept.last().copied().unwrap_or(f64::NEG_INFINITY);
        if sorted.iter().any(|&v| v >= prev && v < c) {
            kept.push(c);
        }
    }
    let cuts = kept;
    let b = cuts.len() + 1;
    if b == 1 {
        log::warn!("demand series is constant; the chain has a single bin");
    }
    let bin_of = |v: f64| cuts.iter().take_while(|&&c| v >= c).count();

    let mut sums = vec![0.0; b];
    let mut members = vec![0usize; b];
    let mut counts = vec![0.0; spd * b * b];
    let mut occupancy = vec![0.0; spd * b];
    let mut prev: Option<usize> = None;
    for (i, &v) in series.values.iter().enumerate() {
        let bin = bin_of(v);
        sums[bin] += v;
        members[bin] += 1;
        let slot = slot_of_day(series.timestamp(i), series.slot_seconds);
        occupancy[slot * b + bin] += 1.0;
        if let Some(p) = prev {
            counts[(slot * b + p) * b + bin] += 1.0;
        }
        prev = Some(bin);
    }
    let representatives: Vec<f64> =
        sums.iter().zip(&members).map(|(s, &n)| s / n.max(1) as f64).collect();
    for row in counts.chunks_mut(b).chain(occupancy.chunks_mut(b)) {
        let total: f64 = row.iter().map(|c| c + SMOOTHING).sum();
        for c in row.iter_mut() {
            *c = (*c + SMOOTHING) / total;
        }
    }
    Ok(DemandMarkovModel {
        slots_per_day: spd,
        slot_seconds: series.slot_seconds,
        cuts,
        representatives,
        marginals: occupancy,
        transitions: counts,
    })
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples `days` days of demand starting at `start` (kWh per slot).
pub fn sample_profile(
    model: &DemandMarkovModel,
    start: NaiveDateTime,
    days: usize,
    seed: u64,
) -> Result<TimeSeries, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = days * model.slots_per_day;
    let first = slot_of_day(start, model.slot_seconds);
    let mut values = Vec::with_capacity(n);
    let mut bin = draw(&mut rng, model.marginal(first));
    values.push(model.representatives[bin]);
    for i in 1..n {
        let slot = (first + i) % model.slots_per_day;
        bin = draw(&mut rng, model.row(slot, bin));
        values.push(model.representatives[bin]);
    }
    values.truncate(n);
    TimeSeries::new(start, model.slot_seconds, Units::Kwh, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(start(), 1800, Units::Kwh, values).unwrap()
    }

    #[test]
    fn alternating_series_flips_every_slot() {
        let v: Vec<f64> = (0..48 * 20).map(|i| if i % 2 == 0 { 0.2 } else { 1.0 }).collect();
        let m = fit_markov_chain(&series(v), 2).unwrap();
        assert_eq!(m.bins(), 2);
        assert!((m.representatives[0] - 0.2).abs() < 1e-12);
        assert!((m.representatives[1] - 1.0).abs() < 1e-12);
        for slot in 0..48 {
            // Odd slots are always high, even slots low.
            let (from, to) = if slot % 2 == 1 { (0, 1) } else { (1, 0) };
            assert!(m.row(slot, from)[to] > 1.0 - 1e-5);
        }
    }

    #[test]
    fn constant_series_has_one_bin() {
        let m = fit_markov_chain(&series(vec![0.7; 48 * 100]), 10).unwrap();
        assert_eq!(m.bins(), 1);
        assert_eq!(m.row(5, 0), &[1.0]);
        let s = sample_profile(&m, start(), 2, 1).unwrap();
        assert!(s.values.iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(fit_markov_chain(&series(vec![1.0; 100]), 10).is_err());
    }

    fn noisy_source(seed: u64, days: usize) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..days * 48)
            .map(|i| {
                let h = (i % 48) as f64 / 2.0;
                let base = 0.2 + 0.5 * (-(h - 19.0) * (h - 19.0) / 6.0).exp();
                base * rng.random_range(0.5..1.5)
            })
            .collect();
        series(v)
    }

    #[test]
    fn rows_sum_to_one_and_sampling_is_seeded() {
        let m = fit_markov_chain(&noisy_source(3, 200), 10).unwrap();
        for slot in 0..48 {
            for from in 0..m.bins() {
                assert!((m.row(slot, from).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        let a = sample_profile(&m, start(), 3, 42).unwrap();
        let b = sample_profile(&m, start(), 3, 42).unwrap();
        assert_eq!(a, b);
        let lo = m.representatives[0];
        let hi = m.representatives[m.bins() - 1];
        assert!(a.values.iter().all(|&v| v >= lo && v <= hi && v >= 0.0));
    }

    #[test]
    fn sampled_mean_matches_source() {
        let src = noisy_source(9, 365);
        let m = fit_markov_chain(&src, 10).unwrap();
        let src_daily = src.total() / 365.0;
        let mut total = 0.0;
        let years = 40;
        for seed in 0..years {
            total += sample_profile(&m, start(), 365, seed).unwrap().total();
        }
        let sampled_daily = total / (365.0 * years as f64);
        assert!((sampled_daily / src_daily - 1.0).abs() < 0.05);
    }
}
