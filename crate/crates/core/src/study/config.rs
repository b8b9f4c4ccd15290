use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::Approach;
use crate::mesh::{generate_voxel_sphere, load_gmsh_ascii, split_hex_to_tet, ElementKind, Mesh, MeshDump, SphereModel};
use crate::quadrature::Problem;
use crate::reference::SensorLayout;

use super::fixtures::FixtureTerm;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Tangential,
    Radial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshSource {
    /// Voxel sphere of the configured model; tetrahedra come from splitting each box.
    Sphere {
        h: f64,
        #[serde(default = "default_element")]
        element: ElementKind,
    },
    /// Gmsh ASCII tetrahedral mesh in mm. Without a conductivity map, region tags
    /// 1..=4 take the model's layer conductivities.
    Gmsh {
        path: PathBuf,
        #[serde(default)]
        conductivities: Option<BTreeMap<String, f64>>,
    },
    /// JSON mesh dump as written by `mesh gen`.
    Dump { path: PathBuf },
}

fn default_element() -> ElementKind {
    ElementKind::Hex
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    #[serde(default = "default_electrodes")]
    pub electrodes: usize,
    #[serde(default = "default_coils")]
    pub coils: usize,
    /// Coil distance from the sphere center in mm.
    #[serde(default = "default_coil_radius")]
    pub coil_radius_mm: f64,
    /// JSON layout file overriding the generated points.
    #[serde(default)]
    pub layout: Option<PathBuf>,
}

fn default_electrodes() -> usize {
    200
}
fn default_coils() -> usize {
    256
}
fn default_coil_radius() -> f64 {
    110.0
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            electrodes: default_electrodes(),
            coils: default_coils(),
            coil_radius_mm: default_coil_radius(),
            layout: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default = "default_integration_element")]
    pub element: ElementKind,
    #[serde(default = "default_terms")]
    pub terms: Vec<FixtureTerm>,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
}

fn default_integration_element() -> ElementKind {
    ElementKind::Tet
}
fn default_terms() -> Vec<FixtureTerm> {
    FixtureTerm::ALL.to_vec()
}
fn default_orders() -> Vec<usize> {
    (1..=20).collect()
}
fn default_ratios() -> Vec<f64> {
    vec![1.0 / 6.0, 0.25, 0.33, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0]
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            element: default_integration_element(),
            terms: default_terms(),
            orders: default_orders(),
            ratios: default_ratios(),
        }
    }
}

/// Ten logarithmically spaced eccentricities from 0.8803 to 0.99.
pub fn default_eccentricities() -> Vec<f64> {
    let (a, b) = (0.8803f64.ln(), 0.99f64.ln());
    (0..10).map(|i| (a + (b - a) * i as f64 / 9.0).exp()).collect()
}

fn default_mesh() -> MeshSource {
    MeshSource::Sphere {
        h: 4.0,
        element: ElementKind::Hex,
    }
}
fn default_problem() -> Problem {
    Problem::Eeg
}
fn default_n_extensions() -> usize {
    2
}
fn default_extensions() -> Vec<usize> {
    vec![0, 1, 2, 3]
}
fn default_dipoles() -> usize {
    20
}
fn default_tol() -> f64 {
    1e-8
}
fn default_repeats() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Seeds every random choice. Required.
    pub seed: u64,
    #[serde(default = "default_mesh")]
    pub mesh: MeshSource,
    /// Layered sphere used for the builtin mesh and the reference solutions.
    #[serde(default)]
    pub model: SphereModel,
    #[serde(default = "default_problem")]
    pub problem: Problem,
    #[serde(default)]
    pub approach: Approach,
    #[serde(default = "default_n_extensions")]
    pub n_extensions: usize,
    /// Extension counts compared by the extension study.
    #[serde(default = "default_extensions")]
    pub extensions: Vec<usize>,
    #[serde(default = "default_eccentricities")]
    pub eccentricities: Vec<f64>,
    #[serde(default = "default_dipoles")]
    pub dipoles_per_eccentricity: usize,
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub integration: IntegrationConfig,
    /// Timing study repetitions.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

impl StudyConfig {
    /// Defaults everywhere except the seed.
    pub fn with_seed(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(e) = self.eccentricities.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Config(format!("eccentricity {e} is not in (0, 1)")));
        }
        if self.eccentricities.is_empty() || self.dipoles_per_eccentricity == 0 {
            return Err(Error::Config("no dipoles requested".into()));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(Error::Config(format!("solver tolerance {} is not in (0, 1)", self.solver_tol)));
        }
        if let MeshSource::Sphere { h, .. } = self.mesh {
            if !(h > 0.0) {
                return Err(Error::Config(format!("voxel size {h} must be positive")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        let ic = &self.integration;
        if ic.orders.is_empty() || ic.ratios.is_empty() || ic.terms.is_empty() {
            return Err(Error::Config("integration study needs orders, ratios and terms".into()));
        }
        if let Some(r) = ic.ratios.iter().find(|&&r| !(r > 0.0)) {
            return Err(Error::Config(format!("ratio {r} must be positive")));
        }
        if let Some(&o) = ic.orders.iter().find(|&&o| o > crate::quadrature::MAX_ORDER) {
            return Err(Error::OrderTooHigh(o));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match &self.mesh {
            MeshSource::Sphere { h, element } => {
                let m = generate_voxel_sphere(&self.model, *h)?;
                match element {
                    ElementKind::Hex => Ok(m),
                    ElementKind::Tet => split_hex_to_tet(&m),
                }
            }
            MeshSource::Gmsh { path, conductivities } => {
                let map = match conductivities {
                    Some(m) => m
                        .iter()
                        .map(|(k, &s)| {
                            let tag = k
                                .trim()
                                .parse()
                                .map_err(|_| Error::Config(format!("region tag {k:?} is not an integer")))?;
                            Ok((tag, Matrix3::identity() * s))
                        })
                        .collect::<Result<_>>()?,
                    None => (0..4)
                        .map(|i| (i as i32 + 1, Matrix3::identity() * self.model.layer_conductivities[i]))
                        .collect(),
                };
                load_gmsh_ascii(path, &map)
            }
            MeshSource::Dump { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let dump: MeshDump = serde_json::from_str(&text)?;
                Mesh::from_dump(dump)
            }
        }
    }

    pub fn layout(&self) -> Result<SensorLayout> {
        match &self.sensors.layout {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                SensorLayout::from_json(&text)
            }
            None => SensorLayout::for_sphere(
                &self.model,
                self.sensors.electrodes,
                self.sensors.coils,
                self.sensors.coil_radius_mm * 1e-3,
            ),
        }
    }
}
