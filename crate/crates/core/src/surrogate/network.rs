use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::thermal::HvacAction;

use super::SurrogateError;

pub const INPUTS: usize = 4;
/// Indoor temperature increment over the slot and HVAC on-fraction.
pub const OUTPUTS: usize = 2;
pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "pcm-hems-surrogate";
const ACTIVATION: &str = "x/sqrt(1+x^2)";

#[inline]
pub(crate) fn activation(x: f64) -> f64 {
    x / (1.0 + x * x).sqrt()
}

#[inline]
pub(crate) fn activation_slope(x: f64) -> f64 {
    let s = 1.0 + x * x;
    1.0 / (s * s.sqrt())
}

/// One hidden layer with a smooth sigmoidal activation and standardized
/// inputs and outputs. Inputs are (action sign, previous indoor, previous
/// outdoor, current outdoor temperature).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub hidden: usize,
    pub input_mean: [f64; INPUTS],
    pub input_scale: [f64; INPUTS],
    /// Range of the training inputs; predictions clamp into it.
    pub input_min: [f64; INPUTS],
    pub input_max: [f64; INPUTS],
    pub output_mean: [f64; OUTPUTS],
    pub output_scale: [f64; OUTPUTS],
    /// w1 (hidden × inputs, row-major), b1, w2 (outputs × hidden), b2.
    pub params: Vec<f64>,
}

impl SurrogateModel {
    pub fn param_count(hidden: usize) -> usize {
        hidden * INPUTS + hidden + OUTPUTS * hidden + OUTPUTS
    }

    /// Identity normalization and Xavier-uniform weights.
    pub fn random(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; Self::param_count(hidden)];
        let a1 = (6.0 / (INPUTS + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + OUTPUTS) as f64).sqrt();
        for v in &mut params[..hidden * INPUTS] {
            *v = rng.random_range(-a1..a1);
        }
        let w2 = hidden * INPUTS + hidden;
        for v in &mut params[w2..w2 + OUTPUTS * hidden] {
            *v = rng.random_range(-a2..a2);
        }
        Self {
            hidden,
            input_mean: [0.0; INPUTS],
            input_scale: [1.0; INPUTS],
            input_min: [f64::NEG_INFINITY; INPUTS],
            input_max: [f64::INFINITY; INPUTS],
            output_mean: [0.0; OUTPUTS],
            output_scale: [1.0; OUTPUTS],
            params,
        }
    }

    pub(crate) fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * INPUTS;
        let w2 = b1 + self.hidden;
        let b2 = w2 + OUTPUTS * self.hidden;
        (b1, w2, b2)
    }

    pub fn raw_inputs(action: HvacAction, t_in_prev: f64, t_out_prev: f64, t_out: f64) -> [f64; INPUTS] {
        [action.sign(), t_in_prev, t_out_prev, t_out]
    }

    pub(crate) fn standardize(&self, x: &[f64; INPUTS]) -> [f64; INPUTS] {
        std::array::from_fn(|i| (x[i] - self.input_mean[i]) / self.input_scale[i])
    }

    /// Network output in standardized units.
    #[inline]
    pub(crate) fn forward(&self, z: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let mut y = [p[b2], p[b2 + 1]];
        for j in 0..self.hidden {
            let w = &p[j * INPUTS..(j + 1) * INPUTS];
            let pre = p[b1 + j] + w[0] * z[0] + w[1] * z[1] + w[2] * z[2] + w[3] * z[3];
            let h = activation(pre);
            y[0] += p[w2 + j] * h;
            y[1] += p[w2 + self.hidden + j] * h;
        }
        y
    }

    /// Next indoor temperature, on-fraction, and whether the inputs were
    /// clamped into the training range.
    pub fn predict_full(
        &self,
        action: HvacAction,
        t_in_prev: f64,
        t_out_prev: f64,
        t_out: f64,
    ) -> (f64, f64, bool) {
        let raw = Self::raw_inputs(action, t_in_prev, t_out_prev, t_out);
        let (x, clamped) = clamp_inputs(&raw, &self.input_min, &self.input_max);
        let y = self.forward(&self.standardize(&x));
        let delta = self.output_mean[0] + self.output_scale[0] * y[0];
        let on = self.output_mean[1] + self.output_scale[1] * y[1];
        finish(action, t_in_prev, delta, on, clamped)
    }

    /// Inference form with the normalization folded into the weights.
    pub fn compile(&self) -> CompiledModel {
        let (b1, w2, b2) = self.offsets();
        let h = self.hidden;
        let padded = h.div_ceil(LANES) * LANES;
        let p = &self.params;
        let mut w_in = vec![vec![0.0; padded]; INPUTS];
        let mut bias = vec![0.0; padded];
        for j in 0..h {
            bias[j] = p[b1 + j];
            for i in 0..INPUTS {
                let w = p[j * INPUTS + i] / self.input_scale[i];
                w_in[i][j] = w;
                bias[j] -= w * self.input_mean[i];
            }
        }
        let w_out: [Vec<f64>; OUTPUTS] = std::array::from_fn(|o| {
            (0..padded)
                .map(|j| if j < h { p[w2 + o * h + j] * self.output_scale[o] } else { 0.0 })
                .collect()
        });
        let b_out = std::array::from_fn(|o| self.output_mean[o] + self.output_scale[o] * p[b2 + o]);
        CompiledModel {
            w_in: std::array::from_fn(|i| w_in[i].clone()),
            bias,
            w_out,
            b_out,
            input_min: self.input_min,
            input_max: self.input_max,
        }
    }

    /// Predicted indoor temperature at the end of the slot, °C.
    pub fn predict(&self, action: HvacAction, t_in_prev: f64, t_out_prev: f64, t_out: f64) -> f64 {
        self.predict_full(action, t_in_prev, t_out_prev, t_out).0
    }

    /// Flat text form: a versioned header, dimensions, normalization
    /// constants and row-major weights.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, name: &str, v: &[f64]| {
            let _ = write!(s, "{name}");
            for x in v {
                let _ = write!(s, " {x}");
            }
            s.push('\n');
        };
        let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "inputs {INPUTS}");
        let _ = writeln!(s, "hidden {}", self.hidden);
        let _ = writeln!(s, "outputs {OUTPUTS}");
        let _ = writeln!(s, "activation {ACTIVATION}");
        row(&mut s, "input_mean", &self.input_mean);
        row(&mut s, "input_scale", &self.input_scale);
        row(&mut s, "input_min", &self.input_min);
        row(&mut s, "input_max", &self.input_max);
        row(&mut s, "output_mean", &self.output_mean);
        row(&mut s, "output_scale", &self.output_scale);
        let (b1, w2, b2) = self.offsets();
        row(&mut s, "w1", &self.params[..b1]);
        row(&mut s, "b1", &self.params[b1..w2]);
        row(&mut s, "w2", &self.params[w2..b2]);
        row(&mut s, "b2", &self.params[b2..]);
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SurrogateError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |key: &str| -> Result<(usize, Vec<String>), SurrogateError> {
            let (i, l) = lines.next().ok_or_else(|| SurrogateError::Format {
                line: 0,
                detail: format!("missing `{key}`"),
            })?;
            let mut parts = l.split_whitespace().map(str::to_string);
            let head = parts.next().unwrap_or_default();
            if head != key {
                return Err(SurrogateError::Format { line: i + 1, detail: format!("expected `{key}`, found `{head}`") });
            }
            Ok((i + 1, parts.collect()))
        };
        let (line, v) = next(MAGIC)?;
        if v.first().map(String::as_str) != Some(&FORMAT_VERSION.to_string()) {
            return Err(SurrogateError::Format { line, detail: format!("unsupported format version {v:?}") });
        }
        let int = |(line, v): (usize, Vec<String>)| -> Result<usize, SurrogateError> {
            v.first()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| SurrogateError::Format { line, detail: "expected an integer".into() })
        };
        let floats = |(line, v): (usize, Vec<String>), n: usize| -> Result<Vec<f64>, SurrogateError> {
            let out: Result<Vec<f64>, _> = v.iter().map(|s| s.parse::<f64>()).collect();
            let out = out.map_err(|e| SurrogateError::Format { line, detail: e.to_string() })?;
            if out.len() != n {
                return Err(SurrogateError::Format { line, detail: format!("expected {n} values, found {}", out.len()) });
            }
            Ok(out)
        };
        if int(next("inputs")?)? != INPUTS {
            return Err(SurrogateError::Format { line: 2, detail: format!("only {INPUTS} inputs are supported") });
        }
        let hidden = int(next("hidden")?)?;
        if int(next("outputs")?)? != OUTPUTS {
            return Err(SurrogateError::Format { line: 4, detail: format!("only {OUTPUTS} outputs are supported") });
        }
        let (line, act) = next("activation")?;
        if act.join(" ") != ACTIVATION {
            return Err(SurrogateError::Format { line, detail: format!("unknown activation {act:?}") });
        }
        let arr4 = |v: Vec<f64>| -> [f64; INPUTS] { std::array::from_fn(|i| v[i]) };
        let arr2 = |v: Vec<f64>| -> [f64; OUTPUTS] { std::array::from_fn(|i| v[i]) };
        let input_mean = arr4(floats(next("input_mean")?, INPUTS)?);
        let input_scale = arr4(floats(next("input_scale")?, INPUTS)?);
        let input_min = arr4(floats(next("input_min")?, INPUTS)?);
        let input_max = arr4(floats(next("input_max")?, INPUTS)?);
        let output_mean = arr2(floats(next("output_mean")?, OUTPUTS)?);
        let output_scale = arr2(floats(next("output_scale")?, OUTPUTS)?);
        let mut params = floats(next("w1")?, hidden * INPUTS)?;
        params.extend(floats(next("b1")?, hidden)?);
        params.extend(floats(next("w2")?, OUTPUTS * hidden)?);
        params.extend(floats(next("b2")?, OUTPUTS)?);
        Ok(Self { hidden, input_mean, input_scale, input_min, input_max, output_mean, output_scale, params })
    }

    pub fn save(&self, path: &Path) -> Result<(), SurrogateError> {
        std::fs::write(path, self.to_text())
            .map_err(|source| SurrogateError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, SurrogateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SurrogateError::Io { path: path.display().to_string(), source })?;
        Self::from_text(&text)
    }
}

#[inline]
fn clamp_inputs(
    raw: &[f64; INPUTS],
    lo: &[f64; INPUTS],
    hi: &[f64; INPUTS],
) -> ([f64; INPUTS], bool) {
    let mut clamped = false;
    let x = std::array::from_fn(|i| {
        let v = raw[i].clamp(lo[i], hi[i]);
        clamped |= v != raw[i];
        v
    });
    (x, clamped)
}

#[inline]
fn finish(action: HvacAction, t_in_prev: f64, delta: f64, on: f64, clamped: bool) -> (f64, f64, bool) {
    let on = if action.is_on() { on.clamp(0.0, 1.0) } else { 0.0 };
    (t_in_prev + delta, on, clamped)
}

const LANES: usize = 4;

/// [`SurrogateModel`] with input and output scaling folded into the
/// weights, laid out for vectorized evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModel {
    w_in: [Vec<f64>; INPUTS],
    bias: Vec<f64>,
    w_out: [Vec<f64>; OUTPUTS],
    b_out: [f64; OUTPUTS],
    input_min: [f64; INPUTS],
    input_max: [f64; INPUTS],
}

impl CompiledModel {
    /// Same contract as [`SurrogateModel::predict_full`].
    #[inline]
    pub fn predict_full(
        &self,
        action: HvacAction,
        t_in_prev: f64,
        t_out_prev: f64,
        t_out: f64,
    ) -> (f64, f64, bool) {
        let raw = SurrogateModel::raw_inputs(action, t_in_prev, t_out_prev, t_out);
        let (x, clamped) = clamp_inputs(&raw, &self.input_min, &self.input_max);
        let [w0, w1, w2, w3] = &self.w_in;
        let [v0, v1] = &self.w_out;
        // Hidden units are padded to a multiple of LANES with zero output
        // weights, so lane-wise accumulators cover every unit.
        let mut acc0 = [0.0; LANES];
        let mut acc1 = [0.0; LANES];
        let chunks = self
            .bias
            .chunks_exact(LANES)
            .zip(w0.chunks_exact(LANES))
            .zip(w1.chunks_exact(LANES))
            .zip(w2.chunks_exact(LANES))
            .zip(w3.chunks_exact(LANES))
            .zip(v0.chunks_exact(LANES).zip(v1.chunks_exact(LANES)));
        for (((((b, a0), a1), a2), a3), (c0, c1)) in chunks {
            for l in 0..LANES {
                let pre = b[l] + a0[l] * x[0] + a1[l] * x[1] + a2[l] * x[2] + a3[l] * x[3];
                let h = activation(pre);
                acc0[l] += c0[l] * h;
                acc1[l] += c1[l] * h;
            }
        }
        let y0 = self.b_out[0] + acc0.iter().sum::<f64>();
        let y1 = self.b_out[1] + acc1.iter().sum::<f64>();
        finish(action, t_in_prev, y0, y1, clamped)
    }
}
