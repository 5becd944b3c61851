//! Scenario configuration: a JSON document describing the solid block, the
//! beam, the interface, loads, analysis switches and output location.
//!
//! Every validation failure is reported as [`Error::Config`] carrying the
//! dotted path of the offending key, e.g. `solid.material.poisson_ratio`.

use crate::beam::{BeamLoads, BeamSection};
use crate::error::{Error, Result};
use crate::linalg::DENSE_LIMIT;
use crate::solid::{SolidLoads, SolidMaterial};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub solid: SolidConfig,
    pub beam: BeamConfig,
    pub interface: InterfaceConfig,
    #[serde(default)]
    pub loads: LoadsConfig,
    /// `L` of the solid and beam norms; defaults to the beam length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristic_length: Option<f64>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidConfig {
    pub dimensions: [f64; 3],
    pub divisions: [usize; 3],
    /// Lower corner of the block.
    #[serde(default)]
    pub origin: [f64; 3],
    pub material: MaterialConfig,
}

/// Either `young_modulus` + `poisson_ratio` or `lambda` + `mu`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub young_modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub length: f64,
    pub elements: usize,
    pub section: SectionConfig,
    /// Clamp-to-tip direction; defaults to the inward normal of Σ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_direction: Option<[f64; 3]>,
    /// Clamp point; defaults to `x_G − length · axis_direction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_origin: Option<[f64; 3]>,
}

/// Moduli plus either a solid rectangle (`width`, `height`) or explicit
/// section properties.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub young_modulus: f64,
    pub shear_modulus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_area_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_area_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torsion_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceConfig {
    /// One of `-x`, `+x`, `-y`, `+y`, `-z`, `+z`.
    pub face_set: String,
    /// Keep only faces whose centre lies inside this box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadsConfig {
    pub solid: SolidLoads,
    pub beam: BeamLoads,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub solve: bool,
    pub stability: bool,
    pub export: bool,
    pub refinement_levels: usize,
    /// Compute element blocks in parallel; they are still summed in element
    /// order, so the results match the serial path exactly.
    pub parallel: bool,
    /// Largest system handled by dense factorizations and eigen-decompositions.
    pub dense_limit: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            solve: true,
            stability: true,
            export: false,
            refinement_levels: 1,
            parallel: false,
            dense_limit: DENSE_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "beamlink-out".into(),
        }
    }
}

pub(crate) fn config_error(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(key, format!("must be positive, got {v}")))
    }
}

fn finite(key: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(config_error(key, "must be finite"))
    }
}

const FACE_SETS: [&str; 6] = ["-x", "+x", "-y", "+y", "-z", "+z"];

impl MaterialConfig {
    pub fn to_material(&self) -> Result<SolidMaterial> {
        let k = "solid.material";
        match (self.young_modulus, self.poisson_ratio, self.lambda, self.mu) {
            (Some(e), Some(nu), None, None) => {
                SolidMaterial::from_young_poisson(e, nu).map_err(|err| match err {
                    Error::InvalidArgument { name, reason } => {
                        config_error(format!("{k}.{name}"), reason)
                    }
                    other => other,
                })
            }
            (None, None, Some(lambda), Some(mu)) => {
                SolidMaterial::new(lambda, mu).map_err(|err| match err {
                    Error::InvalidArgument { name, reason } => {
                        config_error(format!("{k}.{name}"), reason)
                    }
                    other => other,
                })
            }
            (Some(_), None, _, _) => Err(config_error(
                format!("{k}.poisson_ratio"),
                "missing (required with young_modulus)",
            )),
            (None, Some(_), _, _) => Err(config_error(
                format!("{k}.young_modulus"),
                "missing (required with poisson_ratio)",
            )),
            (None, None, Some(_), None) => Err(config_error(
                format!("{k}.mu"),
                "missing (required with lambda)",
            )),
            (None, None, None, Some(_)) => Err(config_error(
                format!("{k}.lambda"),
                "missing (required with mu)",
            )),
            (None, None, None, None) => Err(config_error(
                k,
                "give young_modulus + poisson_ratio or lambda + mu",
            )),
            _ => Err(config_error(
                k,
                "give either young_modulus + poisson_ratio or lambda + mu, not both",
            )),
        }
    }
}

impl SectionConfig {
    pub fn to_section(&self) -> Result<BeamSection> {
        let k = "beam.section";
        positive(&format!("{k}.young_modulus"), self.young_modulus)?;
        positive(&format!("{k}.shear_modulus"), self.shear_modulus)?;
        let explicit = [
            ("area", self.area),
            ("shear_area_1", self.shear_area_1),
            ("shear_area_2", self.shear_area_2),
            ("inertia_1", self.inertia_1),
            ("inertia_2", self.inertia_2),
            ("torsion_constant", self.torsion_constant),
        ];
        match (self.width, self.height) {
            (Some(w), Some(h)) => {
                if let Some((name, _)) = explicit.iter().find(|(_, v)| v.is_some()) {
                    return Err(config_error(
                        format!("{k}.{name}"),
                        "not allowed together with width/height",
                    ));
                }
                positive(&format!("{k}.width"), w)?;
                positive(&format!("{k}.height"), h)?;
                Ok(BeamSection::rectangle(
                    self.young_modulus,
                    self.shear_modulus,
                    w,
                    h,
                ))
            }
            (Some(_), None) => Err(config_error(
                format!("{k}.height"),
                "missing (required with width)",
            )),
            (None, Some(_)) => Err(config_error(
                format!("{k}.width"),
                "missing (required with height)",
            )),
            (None, None) => {
                let mut vals = [0.0; 6];
                for (i, (name, v)) in explicit.iter().enumerate() {
                    let v = v.ok_or_else(|| {
                        config_error(format!("{k}.{name}"), "missing (or give width and height)")
                    })?;
                    positive(&format!("{k}.{name}"), v)?;
                    vals[i] = v;
                }
                Ok(BeamSection {
                    e: self.young_modulus,
                    g: self.shear_modulus,
                    area: vals[0],
                    a1: vals[1],
                    a2: vals[2],
                    i1: vals[3],
                    i2: vals[4],
                    it: vals[5],
                })
            }
        }
    }
}

impl ScenarioConfig {
    /// Value checks that need no geometry.
    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.solid.dimensions.iter().enumerate() {
            positive(&format!("solid.dimensions[{i}]"), *d)?;
        }
        for (i, d) in self.solid.divisions.iter().enumerate() {
            if *d == 0 {
                return Err(config_error(
                    format!("solid.divisions[{i}]"),
                    "must be at least 1",
                ));
            }
        }
        finite("solid.origin", &self.solid.origin)?;
        self.solid.material.to_material()?;

        positive("beam.length", self.beam.length)?;
        if self.beam.elements == 0 {
            return Err(config_error("beam.elements", "must be at least 1"));
        }
        self.beam.section.to_section()?;
        if let Some(d) = self.beam.axis_direction {
            finite("beam.axis_direction", &d)?;
            if d.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                return Err(config_error(
                    "beam.axis_direction",
                    "must be a nonzero vector",
                ));
            }
        }
        if let Some(o) = self.beam.axis_origin {
            finite("beam.axis_origin", &o)?;
        }

        if !FACE_SETS.contains(&self.interface.face_set.as_str()) {
            return Err(config_error(
                "interface.face_set",
                format!(
                    "unknown face set `{}`, expected one of {FACE_SETS:?}",
                    self.interface.face_set
                ),
            ));
        }
        if let Some(r) = &self.interface.region {
            finite("interface.region.min", &r.min)?;
            finite("interface.region.max", &r.max)?;
        }

        finite("loads.solid.body_force", &self.loads.solid.body_force)?;
        for (i, t) in self.loads.solid.tractions.iter().enumerate() {
            let key = format!("loads.solid.tractions[{i}]");
            if !FACE_SETS.contains(&t.face_set.as_str()) {
                return Err(config_error(
                    format!("{key}.face_set"),
                    format!("unknown face set `{}`", t.face_set),
                ));
            }
            if t.face_set == self.interface.face_set {
                return Err(config_error(
                    format!("{key}.face_set"),
                    "tractions may not act on the coupled interface",
                ));
            }
            finite(&format!("{key}.traction"), &t.traction)?;
        }
        let b = &self.loads.beam;
        finite("loads.beam.distributed_force", &b.distributed_force)?;
        finite("loads.beam.distributed_moment", &b.distributed_moment)?;
        finite("loads.beam.tip_force", &b.tip_force)?;
        finite("loads.beam.tip_moment", &b.tip_moment)?;

        if let Some(l) = self.characteristic_length {
            positive("characteristic_length", l)?;
        }
        if self.analysis.refinement_levels == 0 {
            return Err(config_error(
                "analysis.refinement_levels",
                "must be at least 1",
            ));
        }
        if self.output.directory.is_empty() {
            return Err(config_error("output.directory", "must not be empty"));
        }
        Ok(())
    }

    /// Fill in defaults that depend on other keys.
    pub fn apply_defaults(&mut self) {
        if self.characteristic_length.is_none() {
            self.characteristic_length = Some(self.beam.length);
        }
    }

    pub fn length_scale(&self) -> f64 {
        self.characteristic_length.unwrap_or(self.beam.length)
    }

    /// Canonical pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse, validate and complete a configuration document.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." {
            String::from("<root>")
        } else {
            path
        };
        config_error(key, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    cfg.apply_defaults();
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error("<file>", format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
