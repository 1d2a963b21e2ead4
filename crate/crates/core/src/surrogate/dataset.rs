use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::optimizer::TemperatureGrid;
use crate::thermal::{HvacAction, OutdoorRamp, Plant};

use super::SurrogateError;

/// One exact transition of the settled indoor temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub action: HvacAction,
    pub t_in_prev: f64,
    pub t_out_prev: f64,
    pub t_out: f64,
    /// Indoor temperature at the end of the slot, °C.
    pub target_t_in: f64,
    pub target_on_fraction: f64,
}

/// How actions are drawn along generated trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSampler {
    /// Keep the previous action, or redraw uniformly with this probability.
    Random { switch_probability: f64 },
    Constant(HvacAction),
}

/// Sample counts per 1 °C band of starting indoor temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub band_starts: Vec<f64>,
    pub counts: Vec<usize>,
    /// Bands without a single sample.
    pub empty_bands: Vec<f64>,
}

impl CoverageReport {
    pub fn new(grid: &TemperatureGrid, samples: &[TrainingSample]) -> Self {
        let lo = grid.min().floor();
        let bands = ((grid.max() - lo).ceil() as usize).max(1);
        let mut counts = vec![0usize; bands];
        for s in samples {
            let b = (s.t_in_prev - lo).floor();
            if b >= 0.0 && (b as usize) < bands {
                counts[b as usize] += 1;
            }
        }
        let band_starts: Vec<f64> = (0..bands).map(|i| lo + i as f64).collect();
        let empty_bands = band_starts.iter().zip(&counts).filter(|(_, &c)| c == 0).map(|(&b, _)| b).collect();
        Self { band_starts, counts, empty_bands }
    }
}

/// Runs short trajectories of the exact settled-temperature transition
/// through `weather` (outdoor temperature at slot boundaries) under sampled
/// actions, restarting from a uniformly drawn grid temperature after
/// `trajectory_len` slots or whenever the state leaves the grid.
pub fn generate_training_data(
    plant: &Plant,
    weather: &[f64],
    grid: &TemperatureGrid,
    sampler: ActionSampler,
    n: usize,
    trajectory_len: usize,
    seed: u64,
) -> Result<(Vec<TrainingSample>, CoverageReport), SurrogateError> {
    if n == 0 {
        return Ok((Vec::new(), CoverageReport::new(grid, &[])));
    }
    if weather.len() < 2 {
        return Err(SurrogateError::Invalid("weather needs at least two samples".into()));
    }
    if trajectory_len == 0 {
        return Err(SurrogateError::Invalid("trajectory length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions: Vec<HvacAction> = HvacAction::ALL.into_iter().filter(|a| plant.hvac.supports(*a)).collect();
    let mut samples = Vec::with_capacity(n);
    let mut t = grid.min();
    let mut k = 0usize;
    let mut left = 0usize;
    let mut action = HvacAction::Off;
    while samples.len() < n {
        if left == 0 || !(grid.min()..=grid.max()).contains(&t) {
            t = rng.random_range(grid.min()..=grid.max());
            k = rng.random_range(0..weather.len() - 1);
            left = trajectory_len;
        }
        action = match sampler {
            ActionSampler::Constant(a) => a,
            ActionSampler::Random { switch_probability } => {
                if rng.random::<f64>() < switch_probability {
                    actions[rng.random_range(0..actions.len())]
                } else {
                    action
                }
            }
        };
        let ramp = OutdoorRamp { start: weather[k], end: weather[k + 1] };
        let (next, on) = plant.indoor_transition(t, ramp, action)?;
        samples.push(TrainingSample {
            action,
            t_in_prev: t,
            t_out_prev: ramp.start,
            t_out: ramp.end,
            target_t_in: next,
            target_on_fraction: on,
        });
        t = next;
        k = (k + 1) % (weather.len() - 1);
        left -= 1;
    }
    let coverage = CoverageReport::new(grid, &samples);
    if !coverage.empty_bands.is_empty() {
        log::warn!("training data has no samples in the 1 °C bands starting at {:?}", coverage.empty_bands);
    }
    Ok((samples, coverage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::BuildingConfig;

    fn grid() -> TemperatureGrid {
        TemperatureGrid::new(15.0, 30.0, 0.1).unwrap()
    }

    #[test]
    fn zero_samples() {
        let p = BuildingConfig::default().plant(None).unwrap();
        let (s, _) = generate_training_data(&p, &[10.0, 11.0], &grid(), ActionSampler::Constant(HvacAction::Off), 0, 8, 1).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn all_off_targets_follow_the_exact_model() {
        let p = BuildingConfig::default().plant(Some(21.0)).unwrap();
        let weather = [20.0; 10];
        let (s, _) = generate_training_data(&p, &weather, &grid(), ActionSampler::Constant(HvacAction::Off), 40, 5, 2).unwrap();
        for x in &s {
            let (want, on) = p.indoor_transition(x.t_in_prev, OutdoorRamp::constant(20.0), HvacAction::Off).unwrap();
            assert_eq!(x.target_t_in, want);
            assert_eq!(on, 0.0);
        }
        // Within a trajectory each sample starts where the last one ended.
        for w in s.windows(2).take(4) {
            assert_eq!(w[1].t_in_prev, w[0].target_t_in);
        }
    }
}
