//! Envelope construction and the lumped parameters derived from it.

use serde::{Deserialize, Serialize};

use super::ThermalError;

/// Density of indoor air, kg/m³.
pub const AIR_DENSITY: f64 = 1.2;
/// Specific heat of indoor air, J/(kg·K).
pub const AIR_SPECIFIC_HEAT: f64 = 1005.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialLayer {
    /// m
    pub thickness: f64,
    /// W/(m·K)
    pub conductivity: f64,
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
}

impl MaterialLayer {
    pub fn new(
        thickness: f64,
        conductivity: f64,
        density: f64,
        specific_heat: f64,
    ) -> Result<Self, ThermalError> {
        let layer = Self { thickness, conductivity, density, specific_heat };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        for (name, v) in [
            ("thickness", self.thickness),
            ("conductivity", self.conductivity),
            ("density", self.density),
            ("specific_heat", self.specific_heat),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ThermalError::Config(format!(
                    "material layer {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Area-specific resistance d/λ, m²·K/W.
    pub fn unit_resistance(&self) -> f64 {
        self.thickness / self.conductivity
    }

    /// Area-specific heat capacity ρ·c·d, J/(m²·K).
    pub fn unit_capacity(&self) -> f64 {
        self.density * self.specific_heat * self.thickness
    }

    /// Resistance of this layer over `area`, K/W.
    pub fn resistance(&self, area: f64) -> f64 {
        self.thickness / (self.conductivity * area)
    }
}

/// The lightweight construction used for roof, walls and floor, outside in:
/// rendered fibro-cement, timber stud wall with batts, plasterboard.
pub fn lightweight_layers() -> Vec<MaterialLayer> {
    vec![
        MaterialLayer { thickness: 0.005, conductivity: 0.25, density: 1150.0, specific_heat: 840.0 },
        MaterialLayer { thickness: 0.09, conductivity: 0.15, density: 650.0, specific_heat: 1200.0 },
        MaterialLayer { thickness: 0.01, conductivity: 0.25, density: 950.0, specific_heat: 840.0 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FenestrationElement {
    /// W/(m²·K)
    pub u_value: f64,
    /// m²
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingGeometry {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub fenestration: Vec<FenestrationElement>,
}

impl Default for BuildingGeometry {
    /// 8 m × 6 m × 2.7 m single zone with single-glazed windows and a
    /// wooden door.
    fn default() -> Self {
        Self {
            length: 8.0,
            width: 6.0,
            height: 2.7,
            fenestration: vec![
                FenestrationElement { u_value: 7.01, area: 7.8 },
                FenestrationElement { u_value: 2.61, area: 2.1 },
            ],
        }
    }
}

impl BuildingGeometry {
    pub fn validate(&self) -> Result<(), ThermalError> {
        for (name, v) in [("length", self.length), ("width", self.width), ("height", self.height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ThermalError::Config(format!(
                    "building {name} must be strictly positive, got {v}"
                )));
            }
        }
        for (i, f) in self.fenestration.iter().enumerate() {
            if !(f.u_value > 0.0 && f.area > 0.0) {
                return Err(ThermalError::Config(format!(
                    "fenestration element {i} needs positive U-value and area"
                )));
            }
        }
        if self.fenestration_area() >= self.gross_wall_area() {
            return Err(ThermalError::Config(format!(
                "fenestration area {} exceeds wall area {}",
                self.fenestration_area(),
                self.gross_wall_area()
            )));
        }
        Ok(())
    }

    pub fn floor_area(&self) -> f64 {
        self.length * self.width
    }

    pub fn roof_area(&self) -> f64 {
        self.floor_area()
    }

    pub fn gross_wall_area(&self) -> f64 {
        2.0 * (self.length + self.width) * self.height
    }

    pub fn fenestration_area(&self) -> f64 {
        self.fenestration.iter().map(|f| f.area).sum()
    }

    pub fn net_wall_area(&self) -> f64 {
        self.gross_wall_area() - self.fenestration_area()
    }

    /// Roof + walls + floor, fenestration included.
    pub fn gross_envelope_area(&self) -> f64 {
        self.roof_area() + self.gross_wall_area() + self.floor_area()
    }

    /// Opaque area of roof, walls and floor.
    pub fn opaque_area(&self) -> f64 {
        self.gross_envelope_area() - self.fenestration_area()
    }

    pub fn volume(&self) -> f64 {
        self.floor_area() * self.height
    }

    /// Σ U·A over doors and windows, W/K.
    pub fn fenestration_conductance(&self) -> f64 {
        self.fenestration.iter().map(|f| f.u_value * f.area).sum()
    }
}

/// Lumped parameters of the 2R2C network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    /// Envelope node to indoor air, K/W.
    pub r_in: f64,
    /// Outdoor air to envelope node, K/W.
    pub r_out: f64,
    /// Doors and windows, K/W.
    pub r_dw: f64,
    /// Envelope heat capacity without PCM, J/K.
    pub c_envelope: f64,
    /// Indoor air heat capacity, J/K.
    pub air_capacity: f64,
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<(), ThermalError> {
        for (name, v) in [
            ("r_in", self.r_in),
            ("r_out", self.r_out),
            ("r_dw", self.r_dw),
            ("c_envelope", self.c_envelope),
            ("air_capacity", self.air_capacity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ThermalError::Config(format!(
                    "envelope parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Total opaque resistance r_in + r_out.
    pub fn opaque_resistance(&self) -> f64 {
        self.r_in + self.r_out
    }
}

/// Derives the lumped parameters from the geometry and the layer stack used
/// for every opaque element. `accessibility` is the share of the opaque
/// resistance that sits between the envelope node and the indoor air.
pub fn compute_envelope_params(
    geom: &BuildingGeometry,
    layers: &[MaterialLayer],
    accessibility: f64,
) -> Result<EnvelopeParams, ThermalError> {
    if !(accessibility > 0.0 && accessibility < 1.0) {
        return Err(ThermalError::Config(format!(
            "accessibility factor must lie in (0, 1), got {accessibility}"
        )));
    }
    if layers.is_empty() {
        return Err(ThermalError::Config("envelope needs at least one layer".into()));
    }
    for layer in layers {
        layer.validate()?;
    }
    geom.validate()?;

    let elements = [geom.roof_area(), geom.net_wall_area(), geom.floor_area()];
    let mut conductance = 0.0;
    let mut capacity = 0.0;
    for area in elements {
        if area <= 0.0 {
            return Err(ThermalError::Config("opaque element with zero area".into()));
        }
        let r_element: f64 = layers.iter().map(|l| l.resistance(area)).sum();
        conductance += 1.0 / r_element;
        capacity += layers.iter().map(|l| l.unit_capacity() * area).sum::<f64>();
    }
    let r_total = 1.0 / conductance;
    let fen = geom.fenestration_conductance();
    if fen <= 0.0 {
        return Err(ThermalError::Config("fenestration conductance must be positive".into()));
    }
    let params = EnvelopeParams {
        r_in: accessibility * r_total,
        r_out: (1.0 - accessibility) * r_total,
        r_dw: 1.0 / fen,
        c_envelope: capacity,
        air_capacity: AIR_DENSITY * AIR_SPECIFIC_HEAT * geom.volume(),
    };
    params.validate()?;
    Ok(params)
}

/// Air-change infiltration between outdoor and indoor air.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Infiltration {
    /// Air changes per hour.
    pub ach: f64,
    /// Conditioned volume, m³.
    pub volume: f64,
}

impl Infiltration {
    /// Conductance equivalent of the air exchange, W/K.
    #[inline]
    pub fn conductance(&self) -> f64 {
        self.ach * self.volume * AIR_DENSITY * AIR_SPECIFIC_HEAT / 3600.0
    }
}

/// Heat carried into the zone by infiltration, W.
pub fn infiltration_gain(t_out: f64, t_in: f64, ach: f64, volume: f64) -> f64 {
    Infiltration { ach, volume }.conductance() * (t_out - t_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_layer_element_resistance() {
        let l = MaterialLayer::new(0.1, 0.25, 1000.0, 1000.0).unwrap();
        assert_relative_eq!(l.resistance(10.0), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn fenestration_resistance_from_table() {
        let p = compute_envelope_params(&BuildingGeometry::default(), &lightweight_layers(), 0.5)
            .unwrap();
        let want = 1.0 / (7.01 * 7.8 + 2.61 * 2.1);
        assert_relative_eq!(p.r_dw, want, epsilon = 1e-12);
        assert_relative_eq!(p.r_dw, 0.01665, max_relative = 2e-3);
    }

    #[test]
    fn symmetric_split_and_total_resistance() {
        let g = BuildingGeometry::default();
        let p = compute_envelope_params(&g, &lightweight_layers(), 0.5).unwrap();
        assert_relative_eq!(p.r_in, p.r_out, epsilon = 1e-15);
        // Same construction everywhere: parallel combination is Σ(d/λ) / A_opaque.
        let unit: f64 = lightweight_layers().iter().map(|l| l.unit_resistance()).sum();
        assert_relative_eq!(p.opaque_resistance(), unit / g.opaque_area(), max_relative = 1e-12);
        let p2 = compute_envelope_params(&g, &lightweight_layers(), 0.2).unwrap();
        assert_relative_eq!(p2.r_in / p2.opaque_resistance(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn capacities() {
        let g = BuildingGeometry::default();
        let p = compute_envelope_params(&g, &lightweight_layers(), 0.5).unwrap();
        let unit: f64 = lightweight_layers().iter().map(|l| l.unit_capacity()).sum();
        assert_relative_eq!(p.c_envelope, unit * g.opaque_area(), max_relative = 1e-12);
        assert_relative_eq!(p.air_capacity, 1.2 * 1005.0 * 129.6, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_configuration() {
        let g = BuildingGeometry::default();
        assert!(compute_envelope_params(&g, &lightweight_layers(), 0.0).is_err());
        assert!(compute_envelope_params(&g, &lightweight_layers(), 1.0).is_err());
        let mut layers = lightweight_layers();
        layers[1].conductivity = 0.0;
        assert!(compute_envelope_params(&g, &layers, 0.5).is_err());
        let mut g0 = g.clone();
        g0.length = 0.0;
        assert!(compute_envelope_params(&g0, &lightweight_layers(), 0.5).is_err());
        let mut g1 = g;
        g1.fenestration.push(FenestrationElement { u_value: 1.0, area: 100.0 });
        assert!(g1.validate().is_err());
    }

    #[test]
    fn infiltration_cases() {
        assert_eq!(infiltration_gain(20.0, 20.0, 0.5, 129.6), 0.0);
        assert_eq!(infiltration_gain(30.0, 20.0, 0.0, 129.6), 0.0);
        // 0.5 · 129.6 · 1206 · 10 / 3600
        assert_relative_eq!(infiltration_gain(30.0, 20.0, 0.5, 129.6), 217.08, epsilon = 1e-9);
        assert!(infiltration_gain(10.0, 20.0, 0.5, 129.6) < 0.0);
    }

    #[test]
    fn pcm_mass_over_gross_envelope() {
        let g = BuildingGeometry::default();
        let pcm = super::super::PcmSpec::honeycomb(21.0, 2806.0);
        let m = pcm.mass_for_area(g.gross_envelope_area());
        assert!((m - 2806.0).abs() / 2806.0 < 0.01, "{m}");
    }
}
