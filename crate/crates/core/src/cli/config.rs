//! Run configuration: one JSON document with every default baked in.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblySpec, SubsampleSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, N_FEATURES};
use crate::forward::{Geometry, LoadMode, LoadingProgram, MaterialName, NoiseModel};
use crate::sampler::{ChainConfig, HyperParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub sigma_u: f64,
    pub denoise: bool,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            sigma_u: 1e-4,
            denoise: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainLengths {
    pub n_burn: usize,
    pub n_g: usize,
    pub n_chains: usize,
}

impl Default for ChainLengths {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            n_burn: c.n_burn,
            n_g: c.n_g,
            n_chains: c.n_chains,
        }
    }
}

/// Everything a pipeline stage needs. Random streams for noise,
/// subsampling and chains are all derived from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialName,
    /// Existing dataset directory used by `discover` instead of generating.
    pub dataset: Option<PathBuf>,
    pub geometry: Geometry,
    pub program: LoadingProgram,
    pub noise: NoiseSettings,
    /// 1-based feature indices excluded from the library.
    pub suppress: Vec<usize>,
    pub n_free: usize,
    pub lambda_r: f64,
    pub hyper: HyperParams,
    pub chains: ChainLengths,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            material: MaterialName::NeoHookean,
            dataset: None,
            geometry: Geometry::default(),
            program: LoadingProgram::default(),
            noise: NoiseSettings::default(),
            suppress: Vec::new(),
            n_free: 100,
            lambda_r: 10.0,
            hyper: HyperParams::default(),
            chains: ChainLengths::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Independent seed for the named stream of a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

const NOISE_STREAM: u64 = 1;
const SUBSAMPLE_STREAM: u64 = 2;
const CHAIN_STREAM: u64 = 3;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.program.validate()?;
        self.hyper.validate()?;
        self.chain_config().validate()?;
        if !(self.noise.sigma_u.is_finite() && self.noise.sigma_u >= 0.0) {
            return Err(Error::Config(format!("noise level must be nonnegative, got {}", self.noise.sigma_u)));
        }
        if !(self.lambda_r.is_finite() && self.lambda_r >= 0.0) {
            return Err(Error::Config(format!("lambda_r must be nonnegative, got {}", self.lambda_r)));
        }
        if self.n_free == 0 {
            return Err(Error::Config("n_free must be positive".into()));
        }
        self.library()?;
        Ok(())
    }

    pub fn with_dynamic(mut self) -> Self {
        self.program = LoadingProgram::dynamic();
        self
    }

    pub fn is_dynamic(&self) -> bool {
        self.program.mode == LoadMode::Dynamic
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            sigma_u: self.noise.sigma_u,
            denoise: self.noise.denoise,
            rng_seed: derive_seed(self.seed, NOISE_STREAM),
        }
    }

    pub fn assembly_spec(&self) -> AssemblySpec {
        AssemblySpec {
            subsample: SubsampleSpec {
                n_free: Some(self.n_free),
                rng_seed: derive_seed(self.seed, SUBSAMPLE_STREAM),
            },
            lambda_r: self.lambda_r,
            density: self.program.density,
        }
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_burn: self.chains.n_burn,
            n_g: self.chains.n_g,
            n_chains: self.chains.n_chains,
            rng_seed: derive_seed(self.seed, CHAIN_STREAM),
        }
    }

    pub fn library(&self) -> Result<FeatureLibrary> {
        FeatureLibrary::default().with_suppressed(&self.suppress)
    }

    /// Parses a comma-separated list of 1-based feature indices.
    pub fn parse_suppress(list: &str) -> Result<Vec<usize>> {
        let out = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .ok()
                    .filter(|i| (1..=N_FEATURES).contains(i))
                    .ok_or_else(|| Error::Config(format!("'{s}' is not a feature index in 1..={N_FEATURES}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(out)
    }
}
