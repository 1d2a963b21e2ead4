//! Phase-change material properties: temperature-dependent specific heat,
//! enthalpy change between two temperatures and the electrical-equivalent
//! state of charge.

use serde::{Deserialize, Serialize};

use super::ThermalError;

/// Joules per kilowatt-hour.
pub const J_PER_KWH: f64 = 3.6e6;

/// Specific heat far below the melting point, J/(kg·K).
const SOLID_BASE: f64 = 1200.0;
/// Specific heat far above the melting point, J/(kg·K).
const LIQUID_BASE: f64 = 1300.0;
/// Peak specific heat at the melting point, J/(kg·K).
pub const PEAK_SPECIFIC_HEAT: f64 = 20_000.0;
/// Width of the exponential rise below the melting point, K.
const SOLID_DECAY_WIDTH: f64 = 1.5;
/// Curvature of the Gaussian-like fall above the melting point, 1/K².
const LIQUID_DECAY_RATE: f64 = 4.0;

/// PCM layer integrated in the building envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcmSpec {
    /// Temperature of maximum specific heat, °C.
    pub melting_point: f64,
    /// Layer thickness, m.
    pub layer_thickness: f64,
    /// Thermal conductivity, W/(m·K).
    pub conductivity: f64,
    /// Density, kg/m³.
    pub density: f64,
    /// Total mass in the envelope, kg.
    pub mass: f64,
}

impl PcmSpec {
    /// Honeycomb PCM with the given melting point and total mass.
    pub fn honeycomb(melting_point: f64, mass: f64) -> Self {
        Self {
            melting_point,
            layer_thickness: 0.03,
            conductivity: 2.8,
            density: 545.0,
            mass,
        }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if !self.melting_point.is_finite() {
            return Err(ThermalError::Config(format!(
                "PCM melting point must be finite, got {}",
                self.melting_point
            )));
        }
        for (name, v) in [
            ("layer_thickness", self.layer_thickness),
            ("conductivity", self.conductivity),
            ("density", self.density),
            ("mass", self.mass),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ThermalError::Config(format!(
                    "PCM {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Mass implied by density × thickness × covered area.
    pub fn mass_for_area(&self, area: f64) -> f64 {
        self.density * self.layer_thickness * area
    }

    /// Specific heat at `t` (°C) in J/(kg·K). No finiteness check; see
    /// [`pcm_specific_heat`] for the checked variant.
    #[inline]
    pub fn specific_heat(&self, t: f64) -> f64 {
        let below = self.melting_point - t;
        if t < self.melting_point {
            SOLID_BASE + (PEAK_SPECIFIC_HEAT - SOLID_BASE) * (-below / SOLID_DECAY_WIDTH).exp()
        } else {
            LIQUID_BASE
                + (PEAK_SPECIFIC_HEAT - LIQUID_BASE) * (-LIQUID_DECAY_RATE * below * below).exp()
        }
    }

    /// Total heat capacity of the layer at `t`, J/K.
    #[inline]
    pub fn heat_capacity(&self, t: f64) -> f64 {
        self.mass * self.specific_heat(t)
    }

    /// Temperature range where the specific heat exceeds `fraction` of its
    /// peak excess over the sensible baseline. With `fraction = 0.0183`
    /// (e^-4) this is the PCM operating range.
    pub fn operating_range(&self, fraction: f64) -> (f64, f64) {
        let below = -SOLID_DECAY_WIDTH * fraction.ln();
        let above = (-fraction.ln() / LIQUID_DECAY_RATE).sqrt();
        (self.melting_point - below, self.melting_point + above)
    }
}

/// Specific heat of the PCM at `t` (°C), J/(kg·K).
pub fn pcm_specific_heat(t: f64, spec: &PcmSpec) -> Result<f64, ThermalError> {
    if !t.is_finite() {
        return Err(ThermalError::Domain(format!("temperature must be finite, got {t}")));
    }
    Ok(spec.specific_heat(t))
}

/// Energy stored (positive) or released (negative) by the PCM when its
/// temperature moves from `t1` to `t2`, in joules.
pub fn pcm_enthalpy_delta(t1: f64, t2: f64, spec: &PcmSpec) -> Result<f64, ThermalError> {
    if !t1.is_finite() || !t2.is_finite() {
        return Err(ThermalError::Domain(format!(
            "temperatures must be finite, got {t1} and {t2}"
        )));
    }
    if t1 == t2 {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if t1 < t2 { (t1, t2, 1.0) } else { (t2, t1, -1.0) };
    // c_pcm has a kink at the melting point; integrate each smooth piece.
    let tp = spec.melting_point;
    let f = |t: f64| spec.specific_heat(t);
    let integral = if lo < tp && tp < hi {
        adaptive_simpson(&f, lo, tp, 1e-9) + adaptive_simpson(&f, tp, hi, 1e-9)
    } else {
        adaptive_simpson(&f, lo, hi, 1e-9)
    };
    Ok(sign * spec.mass * integral)
}

/// PCM state of charge relative to `t_ref`, expressed as the HVAC electrical
/// energy (kWh) that would move the same heat at the given COP.
pub fn pcm_soc(t: f64, t_ref: f64, spec: &PcmSpec, cop: f64) -> Result<f64, ThermalError> {
    if !(cop > 0.0) {
        return Err(ThermalError::Config(format!("COP must be positive, got {cop}")));
    }
    Ok(pcm_enthalpy_delta(t_ref, t, spec)? / cop / J_PER_KWH)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
