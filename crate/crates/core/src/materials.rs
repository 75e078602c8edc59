//! Elastic materials, stiffness tensors in contracted (Voigt) notation and
//! laminate stacks.
//!
//! Stiffness values are stored in GPa, ply thicknesses in mm. Conversion to
//! SI happens where the wave mechanics consumes them.
//!
//! Voigt index order is `11, 22, 33, 23, 13, 12`. Axis 1 is the in-plane
//! propagation / fiber direction, axis 3 is the laminate thickness direction.

use nalgebra::{Matrix3, Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-9;

/// Material symmetry class of a stiffness tensor, in laminate axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Isotropic,
    /// Transversely isotropic about axis 1 (fiber direction).
    TransverselyIsotropic,
    Orthotropic,
    /// Symmetric about the 1-2 plane only; produced by off-axis rotation.
    Monoclinic,
}

/// Maps a pair of tensor indices (0-based) to its Voigt index.
#[inline]
pub fn voigt(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) | (2, 1) => 3,
        (0, 2) | (2, 0) => 4,
        (0, 1) | (1, 0) => 5,
        _ => panic!("tensor index out of range: ({i}, {j})"),
    }
}

/// 6x6 stiffness matrix in GPa together with its symmetry tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticityTensor {
    c: Matrix6<f64>,
    symmetry: Symmetry,
}

impl ElasticityTensor {
    /// Validates symmetry, positive definiteness and the relations implied by
    /// the symmetry tag.
    pub fn new(c: Matrix6<f64>, symmetry: Symmetry) -> Result<Self> {
        let scale = c.amax();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(
                "stiffness matrix is zero or not finite".into(),
            ));
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                if (c[(i, j)] - c[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                    return Err(Error::Domain(format!(
                        "stiffness matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let min_eig = SymmetricEigen::new(c).eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(Error::Domain(format!(
                "stiffness matrix is not positive definite (min eigenvalue {min_eig:e})"
            )));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= SYMMETRY_RTOL * scale;
        let ok = match symmetry {
            Symmetry::Isotropic => {
                close(c[(0, 0)], c[(1, 1)])
                    && close(c[(0, 0)], c[(2, 2)])
                    && close(c[(0, 1)], c[(0, 2)])
                    && close(c[(0, 1)], c[(1, 2)])
                    && close(c[(3, 3)], 0.5 * (c[(0, 0)] - c[(0, 1)]))
                    && close(c[(4, 4)], c[(3, 3)])
                    && close(c[(5, 5)], c[(3, 3)])
            }
            Symmetry::TransverselyIsotropic => {
                close(c[(1, 1)], c[(2, 2)])
                    && close(c[(4, 4)], c[(5, 5)])
                    && close(c[(0, 1)], c[(0, 2)])
                    && close(c[(3, 3)], 0.5 * (c[(1, 1)] - c[(1, 2)]))
            }
            Symmetry::Orthotropic | Symmetry::Monoclinic => true,
        };
        if !ok {
            return Err(Error::Domain(format!(
                "stiffness matrix does not satisfy the {symmetry:?} relations"
            )));
        }
        Ok(Self { c, symmetry })
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.c
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Contracted component `c[i][j]` with 1-based indices, GPa.
    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.c[(i - 1, j - 1)]
    }

    /// Full fourth-order component `C_ijkl` (0-based indices), GPa.
    #[inline]
    pub fn cijkl(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[(voigt(i, j), voigt(k, l))]
    }

    /// Returns a copy with every component multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            c: self.c * factor,
            symmetry: self.symmetry,
        }
    }

    /// Re-extracts engineering constants from the compliance `C^-1`.
    pub fn engineering_constants(&self) -> Result<EngineeringConstants> {
        let s = self
            .c
            .try_inverse()
            .ok_or_else(|| Error::SingularCompliance("stiffness is not invertible".into()))?;
        let e1 = 1.0 / s[(0, 0)];
        let e2 = 1.0 / s[(1, 1)];
        Ok(EngineeringConstants {
            e1,
            e2,
            e3: 1.0 / s[(2, 2)],
            g23: 1.0 / s[(3, 3)],
            g13: 1.0 / s[(4, 4)],
            g12: 1.0 / s[(5, 5)],
            nu12: -s[(0, 1)] * e1,
            nu13: -s[(0, 2)] * e1,
            nu23: -s[(1, 2)] * e2,
        })
    }
}

/// Isotropic Hooke's law from Young's modulus (GPa) and Poisson ratio.
pub fn stiffness_from_isotropic(e: f64, nu: f64) -> Result<ElasticityTensor> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::Domain(format!(
            "Young's modulus must be positive, got {e}"
        )));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::Domain(format!(
            "Poisson ratio must lie in [0, 0.5), got {nu}"
        )));
    }
    let denom = (1.0 + nu) * (1.0 - 2.0 * nu);
    let c11 = e * (1.0 - nu) / denom;
    let c12 = e * nu / denom;
    let c44 = e / (2.0 * (1.0 + nu));
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = if i == j { c11 } else { c12 };
        }
        c[(i + 3, i + 3)] = c44;
    }
    ElasticityTensor::new(c, Symmetry::Isotropic)
}

/// Engineering constants of an orthotropic solid (moduli in GPa).
///
/// `nu12` is the major Poisson ratio: strain in 2 from stress in 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineeringConstants {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
    pub nu12: f64,
    pub nu13: f64,
    pub nu23: f64,
}

impl EngineeringConstants {
    pub fn isotropic(e: f64, nu: f64) -> Self {
        let g = e / (2.0 * (1.0 + nu));
        Self {
            e1: e,
            e2: e,
            e3: e,
            g12: g,
            g13: g,
            g23: g,
            nu12: nu,
            nu13: nu,
            nu23: nu,
        }
    }

    fn compliance(&self) -> Matrix6<f64> {
        let mut s = Matrix6::zeros();
        s[(0, 0)] = 1.0 / self.e1;
        s[(1, 1)] = 1.0 / self.e2;
        s[(2, 2)] = 1.0 / self.e3;
        s[(0, 1)] = -self.nu12 / self.e1;
        s[(0, 2)] = -self.nu13 / self.e1;
        s[(1, 2)] = -self.nu23 / self.e2;
        s[(1, 0)] = s[(0, 1)];
        s[(2, 0)] = s[(0, 2)];
        s[(2, 1)] = s[(1, 2)];
        s[(3, 3)] = 1.0 / self.g23;
        s[(4, 4)] = 1.0 / self.g13;
        s[(5, 5)] = 1.0 / self.g12;
        s
    }

    fn symmetry_pattern(&self) -> Symmetry {
        let eq = |a: f64, b: f64| (a - b).abs() <= SYMMETRY_RTOL * a.abs().max(b.abs());
        let transverse = eq(self.e2, self.e3)
            && eq(self.g12, self.g13)
            && eq(self.nu12, self.nu13)
            && eq(self.g23, self.e2 / (2.0 * (1.0 + self.nu23)));
        if transverse && eq(self.e1, self.e2) && eq(self.nu12, self.nu23) && eq(self.g12, self.g23)
        {
            Symmetry::Isotropic
        } else if transverse {
            Symmetry::TransverselyIsotropic
        } else {
            Symmetry::Orthotropic
        }
    }
}

/// Whether a material is a metal foil or a fiber ply; used for the metal
/// volume fraction of a laminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialClass {
    Metal,
    FiberComposite,
    #[default]
    Other,
}

/// Named material: engineering constants, density and cured ply thickness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRecord {
    pub name: String,
    #[serde(flatten)]
    pub constants: EngineeringConstants,
    /// kg/m^3
    pub density: f64,
    /// Cured ply thickness, mm.
    pub t_ply_mm: f64,
    #[serde(default)]
    pub class: MaterialClass,
}

impl MaterialRecord {
    pub fn isotropic(name: &str, e: f64, nu: f64, density: f64, t_ply_mm: f64) -> Self {
        Self {
            name: name.to_string(),
            constants: EngineeringConstants::isotropic(e, nu),
            density,
            t_ply_mm,
            class: MaterialClass::Other,
        }
    }

    /// Stainless steel 1.4310 foil, modulus from tensile pretests (191 GPa).
    pub fn steel_1_4310() -> Self {
        Self {
            class: MaterialClass::Metal,
            ..Self::isotropic("steel_1.4310", 191.0, 0.3, 7900.0, 0.12)
        }
    }

    /// Stainless steel 1.4310 foil with the DIN EN 10151 modulus (179 GPa).
    pub fn steel_1_4310_din() -> Self {
        Self {
            class: MaterialClass::Metal,
            ..Self::isotropic("steel_1.4310_din", 179.0, 0.3, 7900.0, 0.12)
        }
    }

    /// Hexply 8552-AS4 constants after Johnston (1997).
    pub fn cfrp_8552_as4_johnston() -> Self {
        Self {
            name: "8552-AS4_johnston".into(),
            constants: EngineeringConstants {
                e1: 122.0,
                e2: 9.9,
                e3: 9.9,
                g12: 5.2,
                g13: 5.2,
                g23: 3.4,
                nu12: 0.27,
                nu13: 0.27,
                nu23: 0.47,
            },
            density: 1580.0,
            t_ply_mm: 0.13,
            class: MaterialClass::FiberComposite,
        }
    }

    /// Hexply 8552-AS4 constants after Hörberg (2019).
    pub fn cfrp_8552_as4_horberg() -> Self {
        Self {
            name: "8552-AS4_horberg".into(),
            constants: EngineeringConstants {
                e1: 135.0,
                e2: 9.5,
                e3: 9.5,
                g12: 4.9,
                g13: 4.9,
                g23: 3.3,
                nu12: 0.3,
                nu13: 0.3,
                nu23: 0.45,
            },
            density: 1580.0,
            t_ply_mm: 0.13,
            class: MaterialClass::FiberComposite,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.constants;
        let moduli = [k.e1, k.e2, k.e3, k.g12, k.g13, k.g23];
        if moduli.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::Domain(format!(
                "material `{}`: all moduli must be positive",
                self.name
            )));
        }
        for (label, nu) in [("nu12", k.nu12), ("nu13", k.nu13), ("nu23", k.nu23)] {
            if !(0.0..0.5).contains(&nu) {
                return Err(Error::Domain(format!(
                    "material `{}`: {label} = {nu} outside [0, 0.5)",
                    self.name
                )));
            }
        }
        if !(self.density > 0.0) {
            return Err(Error::Domain(format!(
                "material `{}`: density must be positive",
                self.name
            )));
        }
        if !(self.t_ply_mm > 0.0) {
            return Err(Error::Domain(format!(
                "material `{}`: ply thickness must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// Inverts the orthotropic compliance assembled from engineering constants.
pub fn stiffness_from_engineering(rec: &MaterialRecord) -> Result<ElasticityTensor> {
    rec.validate()?;
    let s = rec.constants.compliance();
    let eig = SymmetricEigen::new(s).eigenvalues;
    if eig.min() <= 0.0 {
        return Err(Error::SingularCompliance(format!(
            "material `{}` violates thermodynamic admissibility (min compliance eigenvalue {:e})",
            rec.name,
            eig.min()
        )));
    }
    let c = s.try_inverse().ok_or_else(|| {
        Error::SingularCompliance(format!(
            "material `{}`: compliance not invertible",
            rec.name
        ))
    })?;
    // Inversion leaves round-off asymmetry; the exact result is symmetric.
    let c = 0.5 * (c + c.transpose());
    ElasticityTensor::new(c, rec.constants.symmetry_pattern())
}

fn bond_matrix(a: &Matrix3<f64>) -> Matrix6<f64> {
    // Stress transformation for Voigt order 11, 22, 33, 23, 13, 12.
    let pairs = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    let mut m = Matrix6::zeros();
    for (row, &(i, j)) in pairs.iter().enumerate() {
        for (col, &(k, l)) in pairs.iter().enumerate() {
            m[(row, col)] = if col < 3 {
                a[(i, k)] * a[(j, l)]
            } else {
                a[(i, k)] * a[(j, l)] + a[(i, l)] * a[(j, k)]
            };
        }
    }
    m
}

/// Rotates a tensor about the thickness axis by `theta_deg`, so that the
/// material 1-axis ends up at `theta_deg` from the laminate 1-axis.
pub fn rotate_in_plane(t: &ElasticityTensor, theta_deg: f64) -> ElasticityTensor {
    let theta = theta_deg.to_radians();
    let (s, c) = theta.sin_cos();
    let a = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let m = bond_matrix(&a);
    let mut rotated = m * t.c * m.transpose();
    rotated = 0.5 * (rotated + rotated.transpose());

    let quarter_turns = theta_deg / 90.0;
    let on_axis = (quarter_turns - quarter_turns.round()).abs() < 1e-12;
    let symmetry = match t.symmetry {
        Symmetry::Isotropic => Symmetry::Isotropic,
        _ if on_axis && (quarter_turns.round() as i64).rem_euclid(2) == 0 => t.symmetry,
        Symmetry::Monoclinic => Symmetry::Monoclinic,
        _ if on_axis => Symmetry::Orthotropic,
        _ => Symmetry::Monoclinic,
    };
    ElasticityTensor {
        c: rotated,
        symmetry,
    }
}

/// A material resolved to its stiffness tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub record: MaterialRecord,
    pub stiffness: ElasticityTensor,
}

impl Material {
    pub fn new(record: MaterialRecord) -> Result<Self> {
        let stiffness = stiffness_from_engineering(&record)?;
        Ok(Self { record, stiffness })
    }

    pub fn density(&self) -> f64 {
        self.record.density
    }
}

/// One ply of a laminate. `material` indexes [`Laminate::materials`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub material: usize,
    pub thickness_mm: f64,
    pub theta_deg: f64,
}

/// Ordered stack of layers, bottom (index 0) to top.
#[derive(Debug, Clone, PartialEq)]
pub struct Laminate {
    materials: Vec<Material>,
    layers: Vec<Layer>,
}

impl Laminate {
    pub fn new(materials: Vec<Material>, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidLaminate(
                "laminate needs at least one layer".into(),
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.material >= materials.len() {
                return Err(Error::InvalidLaminate(format!(
                    "layer {i} references unknown material {}",
                    layer.material
                )));
            }
            if !(layer.thickness_mm > 0.0 && layer.thickness_mm.is_finite()) {
                return Err(Error::InvalidLaminate(format!(
                    "layer {i} has non-positive thickness {}",
                    layer.thickness_mm
                )));
            }
        }
        Ok(Self { materials, layers })
    }

    /// Single homogeneous plate of thickness `thickness_mm`.
    pub fn single(record: MaterialRecord, thickness_mm: f64) -> Result<Self> {
        let material = Material::new(record)?;
        Self::new(
            vec![material],
            vec![Layer {
                material: 0,
                thickness_mm,
                theta_deg: 0.0,
            }],
        )
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn material_of(&self, layer: usize) -> &Material {
        &self.materials[self.layers[layer].material]
    }

    /// Stiffness of a layer in laminate axes.
    pub fn layer_stiffness(&self, layer: usize) -> ElasticityTensor {
        let l = &self.layers[layer];
        let t = &self.materials[l.material].stiffness;
        if l.theta_deg == 0.0 {
            t.clone()
        } else {
            rotate_in_plane(t, l.theta_deg)
        }
    }

    pub fn total_thickness_mm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_mm).sum()
    }

    pub fn total_thickness_m(&self) -> f64 {
        self.total_thickness_mm() * 1e-3
    }

    pub fn metal_volume_fraction(&self) -> f64 {
        let metal: f64 = self
            .layers
            .iter()
            .filter(|l| self.materials[l.material].record.class == MaterialClass::Metal)
            .map(|l| l.thickness_mm)
            .sum();
        metal / self.total_thickness_mm()
    }

    /// Whether the layer sequence is mirror symmetric about the midplane.
    pub fn is_symmetric(&self) -> bool {
        let n = self.layers.len();
        (0..n / 2).all(|i| {
            let (a, b) = (&self.layers[i], &self.layers[n - 1 - i]);
            a.material == b.material
                && (a.thickness_mm - b.thickness_mm).abs() <= 1e-12 * a.thickness_mm
                && (a.theta_deg - b.theta_deg).abs() <= 1e-12
        })
    }

    /// Same stack with every layer cut into two equal sublayers.
    pub fn split_layers(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .flat_map(|l| {
                let half = Layer {
                    thickness_mm: 0.5 * l.thickness_mm,
                    ..*l
                };
                [half, half]
            })
            .collect();
        Self {
            materials: self.materials.clone(),
            layers,
        }
    }

    /// Same stack seen from a propagation direction at `direction_deg` from
    /// the laminate 1-axis.
    pub fn rotated(&self, direction_deg: f64) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                theta_deg: l.theta_deg - direction_deg,
                ..*l
            })
            .collect();
        Self {
            materials: self.materials.clone(),
            layers,
        }
    }
}

/// Builds the symmetric fiber-metal laminate `[St/0_4/St/0_2]_S`.
pub fn build_fml_layup(steel: MaterialRecord, cfrp: MaterialRecord) -> Result<Laminate> {
    let t_steel = steel.t_ply_mm;
    let t_cfrp = cfrp.t_ply_mm;
    let materials = vec![Material::new(steel)?, Material::new(cfrp)?];
    let half: Vec<(usize, f64)> = [
        (0, t_steel),
        (1, t_cfrp),
        (1, t_cfrp),
        (1, t_cfrp),
        (1, t_cfrp),
        (0, t_steel),
        (1, t_cfrp),
        (1, t_cfrp),
    ]
    .to_vec();
    let layers = half
        .iter()
        .chain(half.iter().rev())
        .map(|&(material, thickness_mm)| Layer {
            material,
            thickness_mm,
            theta_deg: 0.0,
        })
        .collect();
    Laminate::new(materials, layers)
}

/// The default laminate: steel from pretests, CFRP constants after Johnston.
pub fn default_fml() -> Laminate {
    build_fml_layup(
        MaterialRecord::steel_1_4310(),
        MaterialRecord::cfrp_8552_as4_johnston(),
    )
    .expect("built-in material records are valid")
}
