//! Time stepping of the two-node envelope/air model and the slot-level HVAC
//! drive built on top of it.

use serde::{Deserialize, Serialize};

use super::envelope::{EnvelopeParams, Infiltration};
use super::pcm::PcmSpec;
use super::ThermalError;

/// Plausible range for any simulated temperature, °C.
pub const SANITY_BAND: (f64, f64) = (-20.0, 60.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    /// Envelope (and PCM) node temperature, °C.
    pub t_envelope: f64,
    /// Indoor air temperature, °C.
    pub t_indoor: f64,
}

impl ThermalState {
    pub fn uniform(t: f64) -> Self {
        Self { t_envelope: t, t_indoor: t }
    }

    pub fn is_finite(&self) -> bool {
        self.t_envelope.is_finite() && self.t_indoor.is_finite()
    }

    pub fn in_sanity_band(&self) -> bool {
        let (lo, hi) = SANITY_BAND;
        (lo..=hi).contains(&self.t_envelope) && (lo..=hi).contains(&self.t_indoor)
    }
}

/// What the HVAC unit is able to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HvacCapability {
    Heat,
    Cool,
    Both,
}

/// Per-slot HVAC command.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum HvacAction {
    #[default]
    Off,
    Heat,
    Cool,
}

impl HvacAction {
    /// Tie-break order: off, then heat, then cool.
    pub const ALL: [HvacAction; 3] = [HvacAction::Off, HvacAction::Heat, HvacAction::Cool];

    pub fn index(self) -> usize {
        match self {
            HvacAction::Off => 0,
            HvacAction::Heat => 1,
            HvacAction::Cool => 2,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    /// +1 heating, -1 cooling, 0 off.
    pub fn sign(self) -> f64 {
        match self {
            HvacAction::Off => 0.0,
            HvacAction::Heat => 1.0,
            HvacAction::Cool => -1.0,
        }
    }

    pub fn is_on(self) -> bool {
        self != HvacAction::Off
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HvacAction::Off => "off",
            HvacAction::Heat => "heat",
            HvacAction::Cool => "cool",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvacSpec {
    /// Electrical rating, kW.
    pub rating_kw: f64,
    pub cop: f64,
    pub capability: HvacCapability,
}

impl Default for HvacSpec {
    fn default() -> Self {
        Self { rating_kw: 4.0, cop: 4.5, capability: HvacCapability::Both }
    }
}

impl HvacSpec {
    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.rating_kw > 0.0) {
            return Err(ThermalError::Config(format!(
                "HVAC rating must be positive, got {}",
                self.rating_kw
            )));
        }
        if !(self.cop > 1.0) {
            return Err(ThermalError::Config(format!("HVAC COP must exceed 1, got {}", self.cop)));
        }
        Ok(())
    }

    pub fn supports(&self, action: HvacAction) -> bool {
        match (action, self.capability) {
            (HvacAction::Off, _) => true,
            (_, HvacCapability::Both) => true,
            (HvacAction::Heat, HvacCapability::Heat) => true,
            (HvacAction::Cool, HvacCapability::Cool) => true,
            _ => false,
        }
    }

    /// Full thermal output, W.
    pub fn thermal_capacity_w(&self) -> f64 {
        self.rating_kw * 1000.0 * self.cop
    }
}

/// Thermal power delivered to the indoor air, W (positive heats).
pub fn hvac_thermal_power(action: HvacAction, hvac: &HvacSpec) -> Result<f64, ThermalError> {
    if !hvac.supports(action) {
        return Err(ThermalError::Config(format!(
            "HVAC with capability {:?} cannot {}",
            hvac.capability,
            action.as_str()
        )));
    }
    Ok(action.sign() * hvac.thermal_capacity_w())
}

/// Outdoor temperature over one step, linearly interpolated between the
/// slot-boundary samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutdoorRamp {
    pub start: f64,
    pub end: f64,
}

impl OutdoorRamp {
    pub fn constant(t: f64) -> Self {
        Self { start: t, end: t }
    }

    #[inline]
    fn at(&self, fraction: f64) -> f64 {
        self.start + (self.end - self.start) * fraction
    }
}

/// Envelope, optional PCM layer and infiltration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    pub envelope: EnvelopeParams,
    pub pcm: Option<PcmSpec>,
    pub infiltration: Infiltration,
}

impl ThermalModel {
    pub fn new(
        envelope: EnvelopeParams,
        pcm: Option<PcmSpec>,
        infiltration: Infiltration,
    ) -> Result<Self, ThermalError> {
        envelope.validate()?;
        if let Some(p) = &pcm {
            p.validate()?;
        }
        if !(infiltration.ach >= 0.0 && infiltration.volume > 0.0) {
            return Err(ThermalError::Config("infiltration needs ach >= 0 and volume > 0".into()));
        }
        Ok(Self { envelope, pcm, infiltration })
    }

    /// Envelope node capacitance at `t_envelope`, J/K.
    #[inline]
    pub fn envelope_capacity(&self, t_envelope: f64) -> f64 {
        let base = self.envelope.c_envelope;
        match &self.pcm {
            Some(p) => base + p.heat_capacity(t_envelope),
            None => base,
        }
    }

    #[inline]
    fn derivatives(&self, te: f64, ti: f64, t_out: f64, q_hvac: f64) -> (f64, f64) {
        let e = &self.envelope;
        let flow_in = (ti - te) / e.r_in;
        let d_te = (flow_in + (t_out - te) / e.r_out) / self.envelope_capacity(te);
        let q_inf = self.infiltration.conductance() * (t_out - ti);
        let d_ti = ((t_out - ti) / e.r_dw - flow_in + q_hvac + q_inf) / e.air_capacity;
        (d_te, d_ti)
    }

    #[inline]
    fn rk4(&self, s: ThermalState, ramp: &OutdoorRamp, f0: f64, f1: f64, h: f64, q: f64) -> ThermalState {
        let fm = 0.5 * (f0 + f1);
        let (t0, tm, t1) = (ramp.at(f0), ramp.at(fm), ramp.at(f1));
        let (a1, b1) = self.derivatives(s.t_envelope, s.t_indoor, t0, q);
        let (a2, b2) =
            self.derivatives(s.t_envelope + 0.5 * h * a1, s.t_indoor + 0.5 * h * b1, tm, q);
        let (a3, b3) =
            self.derivatives(s.t_envelope + 0.5 * h * a2, s.t_indoor + 0.5 * h * b2, tm, q);
        let (a4, b4) = self.derivatives(s.t_envelope + h * a3, s.t_indoor + h * b3, t1, q);
        ThermalState {
            t_envelope: s.t_envelope + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            t_indoor: s.t_indoor + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        }
    }

    /// Integrates both nodes over `dt` seconds with a constant HVAC input
    /// `q_hvac` (W), using `substeps` fixed RK4 steps.
    pub fn step(
        &self,
        state: ThermalState,
        t_out: OutdoorRamp,
        q_hvac: f64,
        dt: f64,
        substeps: usize,
    ) -> Result<ThermalState, ThermalError> {
        if !(dt > 0.0) || substeps == 0 {
            return Err(ThermalError::Config(format!(
                "step needs dt > 0 and substeps >= 1, got dt={dt}, substeps={substeps}"
            )));
        }
        let h = dt / substeps as f64;
        let mut s = state;
        for i in 0..substeps {
            let f0 = i as f64 / substeps as f64;
            let f1 = (i + 1) as f64 / substeps as f64;
            s = self.rk4(s, &t_out, f0, f1, h, q_hvac);
            check(&s, i)?;
        }
        Ok(s)
    }

    /// Air-node quasi-steady envelope temperature: the T_e at which the
    /// indoor air would be in balance at `t_indoor` with the HVAC off.
    pub fn quasi_steady_envelope(&self, t_indoor: f64, t_out: f64) -> f64 {
        let e = &self.envelope;
        let g_out = 1.0 / e.r_dw + self.infiltration.conductance();
        t_indoor - e.r_in * g_out * (t_out - t_indoor)
    }

    /// Steady state of both nodes for constant `t_out` and HVAC input.
    pub fn steady_state(&self, t_out: f64, q_hvac: f64) -> ThermalState {
        let e = &self.envelope;
        let g_in = 1.0 / e.r_in;
        let g_out = 1.0 / e.r_out;
        let g_air = 1.0 / e.r_dw + self.infiltration.conductance();
        // Envelope: g_in (ti - te) + g_out (to - te) = 0
        // Air:      g_air (to - ti) + g_in (te - ti) + q = 0
        let te_per_ti = g_in / (g_in + g_out);
        let te_const = g_out * t_out / (g_in + g_out);
        let ti = (g_air * t_out + g_in * te_const + q_hvac) / (g_air + g_in - g_in * te_per_ti);
        ThermalState { t_envelope: te_per_ti * ti + te_const, t_indoor: ti }
    }
}

fn check(s: &ThermalState, step: usize) -> Result<(), ThermalError> {
    if !s.is_finite() {
        return Err(ThermalError::Integration {
            step,
            detail: format!("non-finite state {s:?}"),
        });
    }
    if !s.in_sanity_band() {
        return Err(ThermalError::Integration {
            step,
            detail: format!("state {s:?} left the sanity band {SANITY_BAND:?}"),
        });
    }
    Ok(())
}

/// Built-in limit thermostat of the HVAC unit: while running in a mode the
/// unit throttles so that the indoor air does not pass the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvacLimits {
    /// Heating stops once the indoor air reaches this temperature, °C.
    pub heat_cutoff: f64,
    /// Cooling stops once the indoor air reaches this temperature, °C.
    pub cool_cutoff: f64,
}

impl Default for HvacLimits {
    fn default() -> Self {
        Self { heat_cutoff: 23.9, cool_cutoff: 20.1 }
    }
}

/// Result of driving the plant through one decision slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub state: ThermalState,
    /// Share of the slot the unit ran at full output, in [0, 1].
    pub on_fraction: f64,
    pub min_indoor: f64,
    pub max_indoor: f64,
}

/// Thermal model, HVAC unit and slot timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub model: ThermalModel,
    pub hvac: HvacSpec,
    pub limits: HvacLimits,
    /// Slot length, s.
    pub slot_seconds: f64,
    /// RK4 steps per slot.
    pub substeps: usize,
}

impl Plant {
    pub fn new(
        model: ThermalModel,
        hvac: HvacSpec,
        limits: HvacLimits,
        slot_seconds: f64,
        substeps: usize,
    ) -> Result<Self, ThermalError> {
        hvac.validate()?;
        if !(slot_seconds > 0.0) || substeps == 0 {
            return Err(ThermalError::Config("slot length and substeps must be positive".into()));
        }
        if !(limits.cool_cutoff < limits.heat_cutoff) {
            return Err(ThermalError::Config("cooling cutoff must lie below heating cutoff".into()));
        }
        Ok(Self { model, hvac, limits, slot_seconds, substeps })
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_seconds / 3600.0
    }

    /// Electrical energy for a slot at the given on-fraction, kWh.
    pub fn hvac_energy_kwh(&self, on_fraction: f64) -> f64 {
        self.hvac.rating_kw * on_fraction * self.slot_hours()
    }

    /// Drives one slot with `action` held constant. Within each RK4 step the
    /// unit runs at full output unless that would carry the indoor air past
    /// its cutoff; in that case the output is throttled (linearly
    /// interpolated between off and full) to land on the cutoff.
    pub fn advance(
        &self,
        state: ThermalState,
        t_out: OutdoorRamp,
        action: HvacAction,
    ) -> Result<SlotOutcome, ThermalError> {
        let q_full = hvac_thermal_power(action, &self.hvac)?;
        let n = self.substeps;
        let h = self.slot_seconds / n as f64;
        let mut s = state;
        let mut on = 0.0;
        let mut min_t = s.t_indoor;
        let mut max_t = s.t_indoor;
        for i in 0..n {
            let f0 = i as f64 / n as f64;
            let f1 = (i + 1) as f64 / n as f64;
            let next = match action {
                HvacAction::Off => self.model.rk4(s, &t_out, f0, f1, h, 0.0),
                HvacAction::Heat | HvacAction::Cool => {
                    let full = self.model.rk4(s, &t_out, f0, f1, h, q_full);
                    let cutoff = match action {
                        HvacAction::Heat => self.limits.heat_cutoff,
                        _ => self.limits.cool_cutoff,
                    };
                    // Signed overshoot past the cutoff, positive when crossing.
                    let past = |t: f64| action.sign() * (t - cutoff);
                    if past(full.t_indoor) <= 0.0 {
                        on += 1.0;
                        full
                    } else {
                        let idle = self.model.rk4(s, &t_out, f0, f1, h, 0.0);
                        if past(idle.t_indoor) >= 0.0 {
                            idle
                        } else {
                            let share = (cutoff - idle.t_indoor) / (full.t_indoor - idle.t_indoor);
                            let share = share.clamp(0.0, 1.0);
                            on += share;
                            self.model.rk4(s, &t_out, f0, f1, h, share * q_full)
                        }
                    }
                }
            };
            check(&next, i)?;
            s = next;
            min_t = min_t.min(s.t_indoor);
            max_t = max_t.max(s.t_indoor);
        }
        Ok(SlotOutcome { state: s, on_fraction: on / n as f64, min_indoor: min_t, max_indoor: max_t })
    }

    /// Indoor temperature the air settles to with the unit idle, given the
    /// envelope temperature. The air node relaxes within a couple of
    /// minutes, so this is what a thermostat reads shortly after the unit
    /// pauses; the optimizer and the controllers use it as their state.
    pub fn settled_indoor(&self, t_envelope: f64, t_out: f64) -> f64 {
        let e = &self.model.envelope;
        let g_in = 1.0 / e.r_in;
        let g_out = 1.0 / e.r_dw + self.model.infiltration.conductance();
        (g_in * t_envelope + g_out * t_out) / (g_in + g_out)
    }

    /// Reading of a plant state at outdoor temperature `t_out`.
    pub fn reading(&self, state: &ThermalState, t_out: f64) -> f64 {
        self.settled_indoor(state.t_envelope, t_out)
    }

    /// The rest state whose settled indoor temperature is `t_settled`.
    pub fn reconstruct(&self, t_settled: f64, t_out: f64) -> ThermalState {
        ThermalState {
            t_envelope: self.model.quasi_steady_envelope(t_settled, t_out),
            t_indoor: t_settled,
        }
    }

    /// Transition of the settled indoor temperature over one slot, with the
    /// on-fraction of the unit. Exact for plants starting at rest.
    pub fn indoor_transition(
        &self,
        t_settled: f64,
        t_out: OutdoorRamp,
        action: HvacAction,
    ) -> Result<(f64, f64), ThermalError> {
        let state = self.reconstruct(t_settled, t_out.start);
        let out = self.advance(state, t_out, action)?;
        Ok((self.reading(&out.state, t_out.end), out.on_fraction))
    }
}
