//! JSON scenario configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crack::{ModeTwoVariant, MAX_DEPTH_RATIO};
use crate::elements::{Boundary, Material, Section, SectionShape, Structure};
use crate::signal::{DetectOptions, Picker, ToneBurst};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaterialConfig {
    Aluminum,
    Steel,
    Custom {
        youngs_modulus: f64,
        poisson_ratio: f64,
        density: f64,
    },
}

impl MaterialConfig {
    pub fn resolve(&self) -> Result<Material> {
        match *self {
            MaterialConfig::Aluminum => Ok(Material::aluminum()),
            MaterialConfig::Steel => Ok(Material::steel()),
            MaterialConfig::Custom {
                youngs_modulus,
                poisson_ratio,
                density,
            } => Material::new(youngs_modulus, poisson_ratio, density),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub length: f64,
    pub section: SectionShape,
    /// Overrides the section's default shear factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PimConfig {
    pub tau: f64,
    #[serde(default = "default_squarings")]
    pub squarings: u32,
}

fn default_squarings() -> u32 {
    20
}

impl Default for PimConfig {
    fn default() -> Self {
        Self {
            tau: 5e-7,
            squarings: default_squarings(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackConfig {
    pub position: f64,
    pub depth_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub picker: Picker,
}

fn default_threshold() -> f64 {
    0.1
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            picker: Picker::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtStudyConfig {
    pub dt_list: Vec<f64>,
    /// Also run Newmark (average acceleration) at every step size.
    #[serde(default)]
    pub newmark: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Crack positions (m) run one at a time, each at `depth_ratio`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub crack_positions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_ratio: Option<f64>,
    /// Circular-section diameters (m) for a rod diameter sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diameters: Vec<f64>,
}

/// A complete scenario. All quantities are SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub structure: Structure,
    pub material: MaterialConfig,
    pub geometry: Geometry,
    pub n_el: usize,
    #[serde(default)]
    pub bc: Boundary,
    #[serde(default)]
    pub burst: ToneBurst,
    #[serde(default)]
    pub pim: PimConfig,
    /// Simulated window (s); defaults to `1.25 L / c₀ + 2 T_b`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cracks: Vec<CrackConfig>,
    #[serde(default)]
    pub fii_variant: ModeTwoVariant,
    /// Sensor x coordinates (m); defaults to the right end.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_study: Option<DtStudyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::config(
                format!("line {}, column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn material(&self) -> Result<Material> {
        self.material
            .resolve()
            .map_err(|e| Error::config("material", e.to_string()))
    }

    pub fn section(&self) -> Result<Section> {
        self.section_with(self.geometry.section)
    }

    pub fn section_with(&self, shape: SectionShape) -> Result<Section> {
        let s = Section::from_shape(shape).map_err(|e| Error::config("geometry.section", e.to_string()))?;
        match self.geometry.shear_factor {
            Some(k) => s
                .with_shear_factor(k)
                .map_err(|e| Error::config("geometry.shear_factor", e.to_string())),
            None => Ok(s),
        }
    }

    pub fn element_length(&self) -> f64 {
        self.geometry.length / self.n_el as f64
    }

    /// Sensor positions, defaulting to the right end.
    pub fn sensor_positions(&self) -> Vec<f64> {
        if self.sensors.is_empty() {
            vec![self.geometry.length]
        } else {
            self.sensors.clone()
        }
    }

    pub fn t_end(&self) -> Result<f64> {
        match self.t_end {
            Some(t) => Ok(t),
            None => {
                let c0 = self.material()?.bar_velocity();
                Ok(1.25 * self.geometry.length / c0 + 2.0 * self.burst.duration())
            }
        }
    }

    pub fn detect_options(&self) -> DetectOptions {
        DetectOptions::for_burst(&self.burst).with_threshold(self.detect.threshold)
    }

    /// Checks every field, reporting the first violation with its path.
    pub fn validate(&self) -> Result<()> {
        let material = self.material()?;
        positive("geometry.length", self.geometry.length)?;
        match self.geometry.section {
            SectionShape::Circular { diameter } => positive("geometry.section.circular.diameter", diameter)?,
            SectionShape::Rectangular { width, height } => {
                positive("geometry.section.rectangular.width", width)?;
                positive("geometry.section.rectangular.height", height)?;
            }
        }
        if let Some(k) = self.geometry.shear_factor {
            positive("geometry.shear_factor", k)?;
        }
        if self.n_el == 0 {
            return Err(Error::config("n_el", "at least one element is required"));
        }
        positive("burst.center_frequency", self.burst.center_frequency)?;
        if self.burst.cycles == 0 {
            return Err(Error::config("burst.cycles", "must be at least 1"));
        }
        if !self.burst.amplitude.is_finite() {
            return Err(Error::config("burst.amplitude", "must be finite"));
        }
        positive("pim.tau", self.pim.tau)?;
        if !(1..=40).contains(&self.pim.squarings) {
            return Err(Error::config("pim.squarings", "must be in [1, 40]"));
        }
        if let Some(t) = self.t_end {
            positive("t_end", t)?;
        }
        self.t_end()?;

        let le = self.element_length();
        let check_crack = |path: String, x: f64, r: f64| -> Result<()> {
            if !(x > 0.0 && x < self.geometry.length) {
                return Err(Error::config(
                    format!("{path}.position"),
                    format!("{x} m is outside the open interval (0, {})", self.geometry.length),
                ));
            }
            let b = (x / le).round();
            if (b * le - x).abs() > 1e-9 * self.geometry.length {
                return Err(Error::config(
                    format!("{path}.position"),
                    format!("{x} m is not on an element boundary (element length {le} m)"),
                ));
            }
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::config(
                    format!("{path}.depth_ratio"),
                    format!("must lie in (0, 1), got {r}"),
                ));
            }
            if r > MAX_DEPTH_RATIO {
                return Err(Error::config(
                    format!("{path}.depth_ratio"),
                    format!("exceeds the supported maximum {MAX_DEPTH_RATIO}"),
                ));
            }
            Ok(())
        };
        let needs_rect = !self.cracks.is_empty()
            || self.sweep.as_ref().is_some_and(|s| !s.crack_positions.is_empty());
        if needs_rect && !matches!(self.geometry.section, SectionShape::Rectangular { .. }) {
            return Err(Error::config(
                "geometry.section",
                "cracked scenarios need a rectangular section",
            ));
        }
        for (i, c) in self.cracks.iter().enumerate() {
            check_crack(format!("cracks[{i}]"), c.position, c.depth_ratio)?;
            if self.cracks[..i]
                .iter()
                .any(|o| ((o.position - c.position) / le).abs() < 0.5)
            {
                return Err(Error::config(
                    format!("cracks[{i}].position"),
                    format!("duplicate crack location {} m", c.position),
                ));
            }
        }
        if let ModeTwoVariant::Tada { coeffs } = &self.fii_variant {
            if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::config("fii_variant.tada.coeffs", "need finite coefficients"));
            }
        }
        for (i, &x) in self.sensors.iter().enumerate() {
            if !(0.0..=self.geometry.length).contains(&x) {
                return Err(Error::config(
                    format!("sensors[{i}]"),
                    format!("{x} m lies outside the structure"),
                ));
            }
        }
        for (i, &t) in self.snapshots.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config(format!("snapshots[{i}]"), "must be non-negative"));
            }
        }
        if !(self.detect.threshold > 0.0 && self.detect.threshold < 1.0) {
            return Err(Error::config("detect.threshold", "must lie in (0, 1)"));
        }
        if let Some(study) = &self.dt_study {
            if study.dt_list.is_empty() {
                return Err(Error::config("dt_study.dt_list", "must not be empty"));
            }
            for (i, &dt) in study.dt_list.iter().enumerate() {
                positive(&format!("dt_study.dt_list[{i}]"), dt)?;
            }
        }
        if let Some(sweep) = &self.sweep {
            let r = sweep.depth_ratio.unwrap_or(0.2);
            for (i, &x) in sweep.crack_positions.iter().enumerate() {
                check_crack(format!("sweep.crack_positions[{i}]"), x, r)?;
            }
            for (i, &d) in sweep.diameters.iter().enumerate() {
                positive(&format!("sweep.diameters[{i}]"), d)?;
            }
        }
        if material.poisson_ratio.is_nan() {
            return Err(Error::config("material.poisson_ratio", "must be a number"));
        }
        Ok(())
    }
}
