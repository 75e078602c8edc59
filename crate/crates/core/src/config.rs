//! JSON run configuration shared by every pipeline stage.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk_transform::PeakSearchConfig;
use crate::global_matrix::SweepConfig;
use crate::materials::{Laminate, Layer, Material, MaterialRecord};
use crate::outlier_filter::FilterConfig;
use crate::wavefield::{jittered_positions, uniform_positions, ExcitationSpec, SynthesisOptions};

/// A material given inline or by the name of a built-in record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Builtin { builtin: String },
    Record(MaterialRecord),
}

impl MaterialSpec {
    pub fn resolve(&self) -> Result<MaterialRecord> {
        match self {
            MaterialSpec::Record(r) => Ok(r.clone()),
            MaterialSpec::Builtin { builtin } => builtin_material(builtin),
        }
    }
}

/// Built-in records by name.
pub fn builtin_material(name: &str) -> Result<MaterialRecord> {
    [
        MaterialRecord::steel_1_4310(),
        MaterialRecord::steel_1_4310_din(),
        MaterialRecord::cfrp_8552_as4_johnston(),
        MaterialRecord::cfrp_8552_as4_horberg(),
    ]
    .into_iter()
    .find(|r| r.name == name)
    .ok_or_else(|| Error::Config(format!("unknown built-in material `{name}`")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub material: String,
    /// Defaults to the material's ply thickness.
    #[serde(default)]
    pub t_mm: Option<f64>,
    #[serde(default)]
    pub theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub f_min: f64,
    pub f_max: f64,
    pub df: f64,
    /// Additional frequencies merged into the grid, Hz.
    pub extra: Vec<f64>,
    pub solver: SweepConfig,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            f_min: 5e3,
            f_max: 1e6,
            df: 5e3,
            extra: Vec::new(),
            solver: SweepConfig::default(),
        }
    }
}

impl SweepSettings {
    /// `f_min, f_min + df, ..` up to `f_max`, merged with `extra`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.f_min > 0.0 && self.f_max >= self.f_min && self.df > 0.0) {
            return Err(Error::Config(format!(
                "sweep grid needs 0 < f_min <= f_max and df > 0, got {} / {} / {}",
                self.f_min, self.f_max, self.df
            )));
        }
        if let Some(f) = self.extra.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::Config(format!(
                "extra sweep frequency {f} is not positive"
            )));
        }
        let n = ((self.f_max - self.f_min) / self.df * (1.0 + 1e-12)).floor() as usize;
        let mut g: Vec<f64> = (0..=n)
            .map(|i| self.f_min + i as f64 * self.df)
            .chain(self.extra.iter().copied())
            .collect();
        g.sort_by(f64::total_cmp);
        g.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSpec {
    /// m
    pub length_m: f64,
    /// m
    pub spacing_m: f64,
    /// Random displacement of inner positions, fraction of the spacing.
    pub jitter_rel: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            length_m: 0.32,
            spacing_m: 0.5e-3,
            jitter_rel: 0.0,
        }
    }
}

impl PathSpec {
    pub fn positions(&self, seed: u64) -> Result<Vec<f64>> {
        if !(self.length_m > 0.0 && self.spacing_m > 0.0 && self.spacing_m <= self.length_m) {
            return Err(Error::Config(format!(
                "path needs 0 < spacing <= length, got {} / {}",
                self.spacing_m, self.length_m
            )));
        }
        if !(0.0..0.5).contains(&self.jitter_rel) {
            return Err(Error::Config("path jitter must lie in [0, 0.5)".into()));
        }
        let n = (self.length_m / self.spacing_m).round() as usize + 1;
        Ok(if self.jitter_rel > 0.0 {
            jittered_positions(self.length_m, n, self.jitter_rel, seed)
        } else {
            uniform_positions(self.length_m, n)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSettings {
    /// Wavenumber grid step is `1 / (zero_pad * L)`.
    pub zero_pad: f64,
    /// Highest evaluated wavenumber, 1/m; defaults to the spatial Nyquist
    /// limit of the scan.
    pub nu_max: Option<f64>,
    pub peaks: PeakSearchConfig,
}

impl Default for TransformSettings {
    fn default() -> Self {
        Self {
            zero_pad: 4.0,
            nu_max: None,
            peaks: PeakSearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub materials: BTreeMap<String, MaterialSpec>,
    pub layup: Vec<LayerSpec>,
    /// Mirror the layup about its last layer's top face.
    #[serde(default)]
    pub symmetric: bool,
    /// Propagation direction from the laminate 1-axis, degrees.
    #[serde(default)]
    pub direction_deg: f64,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub excitation: ExcitationSpec,
    #[serde(default)]
    pub path: PathSpec,
    #[serde(default)]
    pub synthesis: SynthesisOptions,
    #[serde(default)]
    pub transform: TransformSettings,
    #[serde(default)]
    pub filter: FilterConfig,
    /// Seeds tone phases, noise and position jitter.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The fiber-metal laminate `[St/0_4/St/0_2]_S` along the fibers.
    pub fn fml() -> Self {
        let ply = |material: &str| LayerSpec {
            material: material.into(),
            t_mm: None,
            theta_deg: 0.0,
        };
        let layup = [
            "steel", "cfrp", "cfrp", "cfrp", "cfrp", "steel", "cfrp", "cfrp",
        ]
        .map(ply)
        .to_vec();
        Self {
            materials: BTreeMap::from([
                (
                    "steel".into(),
                    MaterialSpec::Builtin {
                        builtin: "steel_1.4310".into(),
                    },
                ),
                (
                    "cfrp".into(),
                    MaterialSpec::Builtin {
                        builtin: "8552-AS4_johnston".into(),
                    },
                ),
            ]),
            layup,
            symmetric: true,
            direction_deg: 0.0,
            // The lowest comb tone lies below the 5 kHz grid.
            sweep: SweepSettings {
                extra: vec![250.0],
                ..Default::default()
            },
            excitation: ExcitationSpec::comb_250hz(),
            path: PathSpec::default(),
            synthesis: SynthesisOptions::default(),
            transform: TransformSettings::default(),
            filter: FilterConfig::default(),
            seed: 0,
        }
    }

    /// A single 2.04 mm steel plate.
    pub fn steel() -> Self {
        Self {
            materials: BTreeMap::from([(
                "steel".into(),
                MaterialSpec::Builtin {
                    builtin: "steel_1.4310".into(),
                },
            )]),
            layup: vec![LayerSpec {
                material: "steel".into(),
                t_mm: Some(2.04),
                theta_deg: 0.0,
            }],
            symmetric: false,
            ..Self::fml()
        }
    }

    pub fn laminate(&self) -> Result<Laminate> {
        if self.layup.is_empty() {
            return Err(Error::Config("layup is empty".into()));
        }
        let names: Vec<&String> = self.materials.keys().collect();
        let materials = self
            .materials
            .values()
            .map(|m| Material::new(m.resolve()?))
            .collect::<Result<Vec<_>>>()?;
        let mut layers = self
            .layup
            .iter()
            .map(|l| {
                let idx = names
                    .iter()
                    .position(|n| **n == l.material)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "layup references unknown material `{}`",
                            l.material
                        ))
                    })?;
                Ok(Layer {
                    material: idx,
                    thickness_mm: l.t_mm.unwrap_or(materials[idx].record.t_ply_mm),
                    theta_deg: l.theta_deg,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if self.symmetric {
            let mirror: Vec<Layer> = layers.iter().rev().copied().collect();
            layers.extend(mirror);
        }
        let lam = Laminate::new(materials, layers)?;
        Ok(if self.direction_deg != 0.0 {
            lam.rotated(self.direction_deg)
        } else {
            lam
        })
    }

    /// Excitation with the run seed applied.
    pub fn excitation(&self) -> ExcitationSpec {
        ExcitationSpec {
            seed: self.seed,
            ..self.excitation.clone()
        }
    }

    pub fn positions(&self) -> Result<Vec<f64>> {
        self.path.positions(self.seed.wrapping_add(1))
    }

    pub fn synthesis(&self) -> SynthesisOptions {
        SynthesisOptions {
            path_length: self.path.length_m,
            ..self.synthesis.clone()
        }
    }

    /// Filter settings with geometry taken from the path and laminate.
    pub fn filter_config(&self, thickness_mm: f64, min_spacing: f64) -> FilterConfig {
        FilterConfig {
            path_length: self.path.length_m,
            min_spacing,
            thickness_mm,
            ..self.filter.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fml_config_builds_the_default_laminate() {
        let cfg = RunConfig::fml();
        assert_eq!(cfg.sweep.grid().unwrap()[..2], [250.0, 5e3]);
        let lam = cfg.laminate().unwrap();
        let reference = crate::materials::default_fml();
        assert_eq!(lam.len(), reference.len());
        for i in 0..lam.len() {
            assert_eq!(lam.material_of(i).record, reference.material_of(i).record);
            assert_eq!(
                lam.layers()[i].thickness_mm,
                reference.layers()[i].thickness_mm
            );
        }
        assert!((lam.total_thickness_mm() - 2.04).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig::fml();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"materials": {"al": {"name": "al", "e1": 70, "e2": 70, "e3": 70,
                 "g12": 26.9, "g13": 26.9, "g23": 26.9, "nu12": 0.3, "nu13": 0.3, "nu23": 0.3,
                 "density": 2700, "t_ply_mm": 1.0}},
                "layup": [{"material": "al"}]}"#,
        )
        .unwrap();
        let lam = cfg.laminate().unwrap();
        assert_eq!(lam.len(), 1);
        assert_eq!(cfg.excitation, ExcitationSpec::comb_250hz());
        assert_eq!(cfg.positions().unwrap().len(), 641);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(RunConfig::from_json("{"), Err(Error::Json(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"materials": {}, "layup": [], "bogus": 1}"#),
            Err(Error::Json(_))
        ));
        let mut cfg = RunConfig::steel();
        cfg.layup[0].material = "unobtainium".into();
        assert!(matches!(cfg.laminate(), Err(Error::Config(_))));
        assert!(builtin_material("steel_1.4310").is_ok());
    }

    #[test]
    fn sweep_grid() {
        let g = SweepSettings::default().grid().unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[199], 1e6);
        let g = SweepSettings {
            extra: vec![1e6, 7.5e3, 100.0],
            ..Default::default()
        }
        .grid()
        .unwrap();
        assert_eq!(g.len(), 202);
        assert_eq!(&g[..3], &[100.0, 5e3, 7.5e3]);
    }
}
