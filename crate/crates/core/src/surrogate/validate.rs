use serde::{Deserialize, Serialize};

use crate::thermal::{HvacAction, OutdoorRamp, Plant};

use super::{SurrogateError, SurrogateModel, TrainingSample};

/// Error over the samples whose starting temperature lies in [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandError {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    /// Mean absolute indoor-temperature error, °C.
    pub mae: f64,
    pub max_error: f64,
    /// Mean absolute on-fraction error over samples with the HVAC on.
    pub on_fraction_mae: f64,
    pub bands: Vec<BandError>,
}

const BAND_RANGE: (f64, f64) = (15.0, 30.0);

/// Scores any predictor returning (indoor temperature, on-fraction).
pub fn validate_with<F: Fn(&TrainingSample) -> (f64, f64)>(samples: &[TrainingSample], predict: F) -> ValidationReport {
    let (lo, hi) = BAND_RANGE;
    let nb = (hi - lo) as usize;
    let mut bands: Vec<BandError> =
        (0..nb).map(|i| BandError { lo: lo + i as f64, hi: lo + i as f64 + 1.0, n: 0, mae: 0.0 }).collect();
    let mut sum = 0.0;
    let mut max_error: f64 = 0.0;
    let mut on_sum = 0.0;
    let mut on_n = 0usize;
    for s in samples {
        let (t, on) = predict(s);
        let e = (t - s.target_t_in).abs();
        sum += e;
        max_error = max_error.max(e);
        if s.action.is_on() {
            on_sum += (on - s.target_on_fraction).abs();
            on_n += 1;
        }
        let b = (s.t_in_prev - lo).floor();
        if b >= 0.0 && (b as usize) < nb {
            let band = &mut bands[b as usize];
            band.n += 1;
            band.mae += e;
        }
    }
    for b in &mut bands {
        if b.n > 0 {
            b.mae /= b.n as f64;
        }
    }
    let n = samples.len();
    ValidationReport {
        n,
        mae: if n > 0 { sum / n as f64 } else { 0.0 },
        max_error,
        on_fraction_mae: if on_n > 0 { on_sum / on_n as f64 } else { 0.0 },
        bands,
    }
}

pub fn validate(model: &SurrogateModel, samples: &[TrainingSample]) -> ValidationReport {
    validate_with(samples, |s| {
        let (t, on, _) = model.predict_full(s.action, s.t_in_prev, s.t_out_prev, s.t_out);
        (t, on)
    })
}

/// Largest gap between the surrogate fed its own predictions and the exact
/// plant over a sequence of slots.
pub fn closed_loop_drift(
    model: &SurrogateModel,
    plant: &Plant,
    ramps: &[OutdoorRamp],
    actions: &[HvacAction],
    t0: f64,
) -> Result<f64, SurrogateError> {
    if ramps.len() != actions.len() {
        return Err(SurrogateError::Invalid("ramps and actions differ in length".into()));
    }
    let mut state = plant.reconstruct(t0, ramps.first().map_or(t0, |r| r.start));
    let mut predicted = t0;
    let mut worst: f64 = 0.0;
    for (ramp, &a) in ramps.iter().zip(actions) {
        predicted = model.predict(a, predicted, ramp.start, ramp.end);
        state = plant.advance(state, *ramp, a)?.state;
        worst = worst.max((predicted - plant.reading(&state, ramp.end)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, target: f64) -> TrainingSample {
        TrainingSample {
            action: HvacAction::Off,
            t_in_prev: t,
            t_out_prev: 10.0,
            t_out: 10.0,
            target_t_in: target,
            target_on_fraction: 0.0,
        }
    }

    #[test]
    fn perfect_lookup_scores_zero() {
        let s: Vec<_> = (0..50).map(|i| sample(15.0 + i as f64 * 0.3, 15.0 + i as f64 * 0.29)).collect();
        let r = validate_with(&s, |x| (x.target_t_in, x.target_on_fraction));
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.max_error, 0.0);
    }

    #[test]
    fn band_breakdown_covers_grid() {
        let s = vec![sample(15.2, 15.0), sample(29.9, 30.0), sample(22.5, 22.0)];
        let r = validate_with(&s, |x| (x.t_in_prev, 0.0));
        assert_eq!(r.bands.len(), 15);
        assert_eq!(r.bands[0].lo, 15.0);
        assert_eq!(r.bands[14].hi, 30.0);
        assert_eq!(r.bands.iter().map(|b| b.n).sum::<usize>(), 3);
        assert!((r.bands[7].mae - 0.5).abs() < 1e-12);
        assert!((r.max_error - 0.5).abs() < 1e-12);
    }
}
