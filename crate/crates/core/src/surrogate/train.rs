use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{activation, activation_slope, SurrogateModel, INPUTS, OUTPUTS};
use super::{SurrogateError, TrainingSample};

const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub hidden: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Learning-rate factor applied after every epoch.
    pub lr_decay: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            hidden: 16,
            max_epochs: 400,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_decay: 0.99,
            patience: 40,
            validation_fraction: 0.2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub seed: u64,
    pub hidden: usize,
    pub samples_train: usize,
    pub samples_validation: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Mean absolute error of the indoor temperature, °C.
    pub train_mae: f64,
    pub validation_mae: f64,
    pub seconds: f64,
}

/// A standardized training row; `mask` zeroes the on-fraction loss when
/// the HVAC is off.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Row {
    pub z: [f64; INPUTS],
    pub y: [f64; OUTPUTS],
    pub mask: [f64; OUTPUTS],
}

fn targets(s: &TrainingSample) -> [f64; OUTPUTS] {
    [s.target_t_in - s.t_in_prev, s.target_on_fraction]
}

fn inputs(s: &TrainingSample) -> [f64; INPUTS] {
    SurrogateModel::raw_inputs(s.action, s.t_in_prev, s.t_out_prev, s.t_out)
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

fn fit_normalization(model: &mut SurrogateModel, train: &[TrainingSample]) {
    for i in 0..INPUTS {
        let it = train.iter().map(move |s| inputs(s)[i]);
        (model.input_mean[i], model.input_scale[i]) = mean_std(it.clone());
        model.input_min[i] = it.clone().fold(f64::INFINITY, f64::min);
        model.input_max[i] = it.fold(f64::NEG_INFINITY, f64::max);
    }
    for o in 0..OUTPUTS {
        let it = train.iter().filter(move |s| o == 0 || s.action.is_on()).map(move |s| targets(s)[o]);
        if it.clone().next().is_some() {
            (model.output_mean[o], model.output_scale[o]) = mean_std(it);
        }
    }
}

pub(crate) fn rows(model: &SurrogateModel, samples: &[TrainingSample]) -> Vec<Row> {
    samples
        .iter()
        .map(|s| {
            let t = targets(s);
            Row {
                z: model.standardize(&inputs(s)),
                y: std::array::from_fn(|o| (t[o] - model.output_mean[o]) / model.output_scale[o]),
                mask: [1.0, if s.action.is_on() { 1.0 } else { 0.0 }],
            }
        })
        .collect()
}

/// Mean over `batch` of the masked squared error summed over outputs, and
/// its gradient with respect to the flat parameter vector.
pub(crate) fn loss_and_gradient(model: &SurrogateModel, batch: &[&Row], grad: &mut [f64]) -> f64 {
    let (b1, w2, b2) = model.offsets();
    let h_n = model.hidden;
    let p = &model.params;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut pre = vec![0.0; h_n];
    let mut act = vec![0.0; h_n];
    for row in batch {
        let mut y = [p[b2], p[b2 + 1]];
        for j in 0..h_n {
            let w = &p[j * INPUTS..(j + 1) * INPUTS];
            pre[j] = p[b1 + j] + (0..INPUTS).map(|i| w[i] * row.z[i]).sum::<f64>();
            act[j] = activation(pre[j]);
            for (o, yo) in y.iter_mut().enumerate() {
                *yo += p[w2 + o * h_n + j] * act[j];
            }
        }
        let mut dy = [0.0; OUTPUTS];
        for o in 0..OUTPUTS {
            let e = (y[o] - row.y[o]) * row.mask[o];
            loss += e * e * scale;
            dy[o] = 2.0 * e * scale;
            grad[b2 + o] += dy[o];
        }
        for j in 0..h_n {
            let mut dh = 0.0;
            for o in 0..OUTPUTS {
                grad[w2 + o * h_n + j] += dy[o] * act[j];
                dh += dy[o] * p[w2 + o * h_n + j];
            }
            let dpre = dh * activation_slope(pre[j]);
            grad[b1 + j] += dpre;
            for i in 0..INPUTS {
                grad[j * INPUTS + i] += dpre * row.z[i];
            }
        }
    }
    loss
}

/// Training loss of `model` on `samples` under its own normalization, and
/// the analytic gradient with respect to [`SurrogateModel::params`].
pub fn training_loss(model: &SurrogateModel, samples: &[TrainingSample]) -> (f64, Vec<f64>) {
    let data = rows(model, samples);
    let batch: Vec<&Row> = data.iter().collect();
    let mut grad = vec![0.0; model.params.len()];
    let loss = loss_and_gradient(model, &batch, &mut grad);
    (loss, grad)
}

/// Mean absolute indoor-temperature error, °C.
pub(crate) fn temperature_mae(model: &SurrogateModel, rows: &[Row]) -> f64 {
    let s: f64 = rows.iter().map(|r| (model.forward(&r.z)[0] - r.y[0]).abs()).sum();
    s * model.output_scale[0] / rows.len().max(1) as f64
}

/// Mini-batch gradient descent with momentum and early stopping on the
/// validation error. The validation split is drawn by a seeded shuffle and
/// never trained on.
pub fn train(
    samples: &[TrainingSample],
    params: &TrainParams,
) -> Result<(SurrogateModel, TrainingReport), SurrogateError> {
    let started = std::time::Instant::now();
    if samples.len() < MIN_SAMPLES {
        return Err(SurrogateError::Invalid(format!(
            "{} samples are too few to train on (need {MIN_SAMPLES})",
            samples.len()
        )));
    }
    if !(0.0 < params.validation_fraction && params.validation_fraction < 1.0) {
        return Err(SurrogateError::Invalid("validation fraction must lie in (0, 1)".into()));
    }
    if params.hidden == 0 || params.batch_size == 0 {
        return Err(SurrogateError::Invalid("hidden units and batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((samples.len() as f64 * params.validation_fraction).round() as usize).max(1);
    let val: Vec<TrainingSample> = order[..n_val].iter().map(|&i| samples[i]).collect();
    let tr: Vec<TrainingSample> = order[n_val..].iter().map(|&i| samples[i]).collect();

    let mut model = SurrogateModel::random(params.hidden, params.seed);
    fit_normalization(&mut model, &tr);
    let train_rows = rows(&model, &tr);
    let val_rows = rows(&model, &val);

    let mut best = model.params.clone();
    let mut best_mae = temperature_mae(&model, &val_rows);
    let mut best_epoch = 0;
    let mut velocity = vec![0.0; model.params.len()];
    let mut grad = vec![0.0; model.params.len()];
    let mut lr = params.learning_rate;
    let mut idx: Vec<usize> = (0..train_rows.len()).collect();
    let mut epochs_run = 0;
    let mut batch: Vec<&Row> = Vec::with_capacity(params.batch_size);
    for epoch in 1..=params.max_epochs {
        epochs_run = epoch;
        idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in idx.chunks(params.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train_rows[i]));
            let loss = loss_and_gradient(&model, &batch, &mut grad);
            if !loss.is_finite() {
                return Err(SurrogateError::Divergence { epoch, loss });
            }
            epoch_loss += loss;
            for ((p, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = params.momentum * *v - lr * g;
                *p += *v;
            }
        }
        if !epoch_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(SurrogateError::Divergence { epoch, loss: epoch_loss });
        }
        lr *= params.lr_decay;
        let mae = temperature_mae(&model, &val_rows);
        if mae < best_mae {
            best_mae = mae;
            best_epoch = epoch;
            best.clone_from(&model.params);
        } else if epoch - best_epoch >= params.patience {
            break;
        }
    }
    model.params = best;
    let report = TrainingReport {
        seed: params.seed,
        hidden: params.hidden,
        samples_train: tr.len(),
        samples_validation: val.len(),
        epochs_run,
        best_epoch,
        train_mae: temperature_mae(&model, &train_rows),
        validation_mae: best_mae,
        seconds: started.elapsed().as_secs_f64(),
    };
    log::info!(
        "surrogate trained: {} epochs (best {}), train MAE {:.4} °C, validation MAE {:.4} °C",
        report.epochs_run,
        report.best_epoch,
        report.train_mae,
        report.validation_mae
    );
    Ok((model, report))
}
