//! On-disk datasets: `mesh.json`, `snapshots.json` and `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::material::{BenchmarkMaterial, MaterialName};
use super::{Geometry, LoadingProgram, NoiseModel};
use crate::error::{Error, Result};
use crate::kinematics::{snapshots_from_json, snapshots_to_json, Mesh, Snapshot};

pub const MESH_FILE: &str = "mesh.json";
pub const SNAPSHOTS_FILE: &str = "snapshots.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Provenance of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub material: Option<MaterialName>,
    /// Ground-truth coefficients in the library basis, when known.
    pub theta_true: Option<Vec<f64>>,
    /// True when the ground-truth energy is not exactly representable.
    pub closed_form: bool,
    pub geometry: Geometry,
    pub program: LoadingProgram,
    pub noise: NoiseModel,
}

impl Manifest {
    pub fn new(material: Option<&BenchmarkMaterial>, geometry: Geometry, program: LoadingProgram, noise: NoiseModel) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            material: material.map(|m| m.name),
            theta_true: material.map(|m| m.theta_true.to_vec()),
            closed_form: material.is_some_and(|m| m.closed_form),
            geometry,
            program,
            noise,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::Config(format!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub mesh: Mesh,
    pub snapshots: Vec<Snapshot>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MESH_FILE), self.mesh.to_json()?)?;
        fs::write(dir.join(SNAPSHOTS_FILE), snapshots_to_json(&self.snapshots)?)?;
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }

    /// Reads mesh and snapshots; the manifest is optional.
    pub fn read(dir: &Path) -> Result<(Mesh, Vec<Snapshot>, Option<Manifest>)> {
        let mesh = Mesh::from_json(&fs::read_to_string(dir.join(MESH_FILE))?)?;
        let snapshots = snapshots_from_json(&fs::read_to_string(dir.join(SNAPSHOTS_FILE))?)?;
        for s in &snapshots {
            s.validate(&mesh)?;
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = if manifest_path.exists() {
            Some(Manifest::read(&manifest_path)?)
        } else {
            None
        };
        Ok((mesh, snapshots, manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::generate;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let geometry = Geometry {
            target_nodes: 150,
            ..Default::default()
        };
        let noise = NoiseModel {
            sigma_u: 1e-4,
            rng_seed: 5,
            ..Default::default()
        };
        let program = LoadingProgram::quasi_static(vec![0.05, 0.1]);
        let ds = generate(&geometry, MaterialName::NeoHookean, &program, &noise).unwrap();
        ds.write(dir.path()).unwrap();
        let (mesh, snaps, manifest) = Dataset::read(dir.path()).unwrap();
        assert_eq!(mesh.nodes(), ds.mesh.nodes());
        assert_eq!(snaps, ds.snapshots);
        assert_eq!(manifest.unwrap(), ds.manifest);
    }
}
