//! Synthetic data generation: plate geometry, benchmark materials,
//! quasi-static and explicit-dynamic solvers, noise and smoothing.

pub mod banded;
pub mod dataset;
pub mod dynamics;
pub mod geometry;
pub mod material;
pub mod noise;
pub mod statics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Mesh, Snapshot};

pub use dataset::{Dataset, Manifest};
pub use dynamics::{compute_accelerations, solve_dynamic};
pub use geometry::{build_graded_plate, build_quarter_plate, build_rectangle, DEFAULT_GRADING};
pub use material::{BenchmarkMaterial, MaterialName};
pub use noise::{add_noise, denoise};
pub use statics::solve_quasistatic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadMode {
    QuasiStatic,
    Dynamic,
}

/// Boundary loading and sampling schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadingProgram {
    pub mode: LoadMode,
    /// Load parameter at each quasi-static step.
    pub phi_steps: Vec<f64>,
    /// Boundary displacement rate for dynamics.
    pub phi_rate: f64,
    pub dt: f64,
    pub total_steps: usize,
    pub n_snapshots: usize,
    pub density: f64,
}

impl Default for LoadingProgram {
    fn default() -> Self {
        Self::quasi_static((1..=5).map(|l| 0.1 * l as f64).collect())
    }
}

impl LoadingProgram {
    /// One snapshot per listed load parameter.
    pub fn quasi_static(phi_steps: Vec<f64>) -> Self {
        let n = phi_steps.len();
        Self {
            mode: LoadMode::QuasiStatic,
            phi_steps,
            phi_rate: 0.1,
            dt: 2e-4,
            total_steps: n,
            n_snapshots: n,
            density: 1.0,
        }
    }

    /// Constant-rate dynamic loading with the default schedule.
    pub fn dynamic() -> Self {
        Self {
            mode: LoadMode::Dynamic,
            total_steps: 50_000,
            n_snapshots: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self.mode {
            LoadMode::QuasiStatic => {
                if self.phi_steps.is_empty() {
                    return bad("quasi-static program needs at least one load step".into());
                }
                if self.phi_steps.iter().any(|p| !p.is_finite()) {
                    return bad("load steps must be finite".into());
                }
            }
            LoadMode::Dynamic => {
                if !(self.dt > 0.0 && self.density > 0.0 && self.phi_rate.is_finite()) {
                    return bad("dynamic program needs positive dt and density".into());
                }
                if self.n_snapshots == 0 || self.total_steps < 2 * self.n_snapshots {
                    return bad(format!(
                        "{} steps cannot hold {} snapshots with neighbours",
                        self.total_steps, self.n_snapshots
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Measurement noise and optional smoothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub sigma_u: f64,
    pub denoise: bool,
    pub rng_seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_u: 0.0,
            denoise: false,
            rng_seed: 0,
        }
    }
}

/// Plate dimensions and mesh resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub side: f64,
    pub hole_radius: f64,
    pub target_nodes: usize,
    /// Radial grading exponent toward the hole.
    pub grading: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            side: 1.0,
            hole_radius: 0.25,
            target_nodes: 1441,
            grading: DEFAULT_GRADING,
        }
    }
}

impl Geometry {
    pub fn build(&self) -> Result<Mesh> {
        build_graded_plate(self.side, self.hole_radius, self.target_nodes, self.grading)
    }
}

/// Noiseless snapshots for a material under a loading program.
pub fn simulate(mesh: &Mesh, material: &BenchmarkMaterial, program: &LoadingProgram) -> Result<Vec<Snapshot>> {
    program.validate()?;
    match program.mode {
        LoadMode::QuasiStatic => solve_quasistatic(mesh, material, program),
        LoadMode::Dynamic => solve_dynamic(mesh, material, program),
    }
}

/// Applies the noise model (and smoothing, if requested) to clean snapshots.
pub fn measure(mesh: &Mesh, clean: &[Snapshot], noise: &NoiseModel) -> Result<Vec<Snapshot>> {
    let noisy = add_noise(clean, noise)?;
    if noise.denoise && noise.sigma_u > 0.0 {
        denoise(&noisy, mesh)
    } else {
        Ok(noisy)
    }
}

/// Full synthetic experiment: mesh, simulation, noise, manifest.
pub fn generate(
    geometry: &Geometry,
    material: MaterialName,
    program: &LoadingProgram,
    noise: &NoiseModel,
) -> Result<Dataset> {
    let mesh = geometry.build()?;
    let mat = BenchmarkMaterial::new(material);
    let clean = simulate(&mesh, &mat, program)?;
    let snapshots = measure(&mesh, &clean, noise)?;
    let manifest = Manifest::new(Some(&mat), geometry.clone(), program.clone(), noise.clone());
    Ok(Dataset {
        mesh,
        snapshots,
        manifest,
    })
}
