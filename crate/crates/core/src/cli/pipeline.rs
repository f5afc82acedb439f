//! Pipeline stages. Each stage can run in memory or through files so any
//! step can be rerun on its own.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::analysis::{all_envelopes, average_activity, emit_report, sigma2_study_svg, summarize, ActivityReport, EnergyEnvelope, Report, Summary};
use crate::assembly::{assemble, LinearSystem};
use crate::error::{Error, Result};
use crate::features::FeatureLibrary;
use crate::forward::{generate, measure, simulate, BenchmarkMaterial, Dataset, Manifest};
use crate::kinematics::{Mesh, Snapshot};
use crate::sampler::{run_chains, PosteriorSamples};

pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const ACTIVITY_FILE: &str = "activity.json";
pub const RUN_FILE: &str = "run.json";

/// Synthetic dataset for the configured material, loading and noise.
pub fn generate_dataset(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    generate(&cfg.geometry, cfg.material, &cfg.program, &cfg.noise_model())
}

/// Output of the discovery stage.
#[derive(Clone, Debug)]
pub struct Discovery {
    pub system: LinearSystem,
    pub samples: PosteriorSamples,
    pub activity: ActivityReport,
}

/// Assembles the system and samples the posterior.
pub fn discover(cfg: &RunConfig, mesh: &Mesh, snapshots: &[Snapshot]) -> Result<Discovery> {
    cfg.validate()?;
    let library = cfg.library()?;
    let system = assemble(mesh, snapshots, &library, &cfg.assembly_spec())?;
    let candidates = library.suppression_mask().iter().map(|s| !s).collect();
    let samples = run_chains(&system, candidates, cfg.hyper, &cfg.chain_config())?;
    let activity = average_activity(&samples)?;
    log::info!(
        "sampled {} states; most frequent mode {:?}",
        samples.len(),
        activity.modes.first().map(|m| &m.active)
    );
    Ok(Discovery {
        system,
        samples,
        activity,
    })
}

/// Ground-truth material named by a manifest.
pub fn truth_of(manifest: Option<&Manifest>) -> Option<BenchmarkMaterial> {
    manifest.and_then(|m| m.material).map(BenchmarkMaterial::new)
}

/// Envelopes on all paths plus the written report.
pub fn analyze(samples: &PosteriorSamples, manifest: Option<&Manifest>, out: &Path) -> Result<(Report, Vec<EnergyEnvelope>)> {
    let library = FeatureLibrary::default();
    let truth = truth_of(manifest);
    let activity = average_activity(samples)?;
    let envelopes = all_envelopes(samples, &library, truth.as_ref())?;
    let report = emit_report(samples, &activity, &envelopes, &library.labels(), manifest, out)?;
    Ok((report, envelopes))
}

/// Provenance written next to the posterior.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub dataset: Option<PathBuf>,
    pub n_rows: usize,
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<Dataset> {
    let ds = generate_dataset(cfg)?;
    ds.write(&cfg.out)?;
    log::info!("wrote {} snapshots to {}", ds.snapshots.len(), cfg.out.display());
    Ok(ds)
}

/// Discovery on a dataset directory (or a freshly generated dataset when
/// none is given); writes posterior, activity and run record to `cfg.out`.
pub fn cmd_discover(cfg: &RunConfig, data: Option<&Path>) -> Result<Discovery> {
    let data = data.map(Path::to_path_buf).or_else(|| cfg.dataset.clone());
    let (mesh, snapshots) = match &data {
        Some(dir) => {
            let (mesh, snaps, _) = Dataset::read(dir)?;
            (mesh, snaps)
        }
        None => {
            let ds = generate_dataset(cfg)?;
            (ds.mesh, ds.snapshots)
        }
    };
    let d = discover(cfg, &mesh, &snapshots)?;
    std::fs::create_dir_all(&cfg.out)?;
    d.samples.write_csv(&cfg.out.join(POSTERIOR_FILE))?;
    std::fs::write(cfg.out.join(ACTIVITY_FILE), serde_json::to_string_pretty(&d.activity)?)?;
    let record = RunRecord {
        config: cfg.clone(),
        dataset: data,
        n_rows: d.system.n_rows(),
    };
    std::fs::write(cfg.out.join(RUN_FILE), serde_json::to_string_pretty(&record)?)?;
    Ok(d)
}

/// Reads a posterior directory and writes the report to `out`. The
/// manifest comes from `data` or from the dataset recorded at discovery.
pub fn cmd_analyze(posterior: &Path, data: Option<&Path>, out: &Path) -> Result<Report> {
    let samples = PosteriorSamples::read_csv(&posterior.join(POSTERIOR_FILE))?;
    let recorded = std::fs::read_to_string(posterior.join(RUN_FILE))
        .ok()
        .and_then(|t| serde_json::from_str::<RunRecord>(&t).ok())
        .and_then(|r| r.dataset);
    let data = data.map(Path::to_path_buf).or(recorded);
    let manifest = match &data {
        Some(dir) if dir.join(crate::forward::dataset::MANIFEST_FILE).exists() => Some(Manifest::read(&dir.join(crate::forward::dataset::MANIFEST_FILE))?),
        _ => None,
    };
    if manifest.is_none() {
        log::warn!("no dataset manifest found; report has no ground-truth overlays");
    }
    analyze(&samples, manifest.as_ref(), out).map(|(r, _)| r)
}

/// One case of the noise study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Case {
    pub label: String,
    pub sigma_u: f64,
    pub denoised: bool,
    pub summary: Summary,
    pub samples: Vec<f64>,
}

/// Posterior `σ²` for noiseless, denoised and raw data at two noise levels,
/// sharing one clean simulation and the same seeds.
pub fn sigma2_study(cfg: &RunConfig) -> Result<Vec<Sigma2Case>> {
    cfg.validate()?;
    let mesh = cfg.geometry.build()?;
    let clean = simulate(&mesh, &BenchmarkMaterial::new(cfg.material), &cfg.program)?;
    let cases = [
        ("noiseless", 0.0, false),
        ("1e-4 denoised", 1e-4, true),
        ("1e-3 denoised", 1e-3, true),
        ("1e-4 raw", 1e-4, false),
        ("1e-3 raw", 1e-3, false),
    ];
    cases
        .iter()
        .map(|&(label, sigma_u, denoised)| {
            let mut c = cfg.clone();
            c.noise.sigma_u = sigma_u;
            c.noise.denoise = denoised;
            let snaps = measure(&mesh, &clean, &c.noise_model())?;
            let d = discover(&c, &mesh, &snaps)?;
            let samples: Vec<f64> = d.samples.states().iter().map(|s| s.sigma2).collect();
            log::info!("{label}: posterior mean sigma2 {:e}", samples.iter().sum::<f64>() / samples.len() as f64);
            Ok(Sigma2Case {
                label: label.into(),
                sigma_u,
                denoised,
                summary: summarize(&samples)?,
                samples,
            })
        })
        .collect()
}

pub fn write_sigma2_study(cases: &[Sigma2Case], out: &Path) -> Result<()> {
    let mut csv = String::from("case,sigma_u,denoised,mean,p2_5,p97_5\n");
    for c in cases {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.label, c.sigma_u, c.denoised, c.summary.mean, c.summary.p2_5, c.summary.p97_5
        ));
    }
    let svg = sigma2_study_svg(&cases.iter().map(|c| (c.label.clone(), c.samples.clone())).collect::<Vec<_>>())?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("sigma2_study.csv"), csv)?;
    std::fs::write(out.join("sigma2_study.json"), serde_json::to_string_pretty(cases)?)?;
    std::fs::write(out.join("sigma2_study.svg"), svg)?;
    Ok(())
}

/// Ordering required of the study: noiseless < 1e-4 denoised < 1e-3
/// denoised, and denoised < raw at each level.
pub fn sigma2_ordering_holds(cases: &[Sigma2Case]) -> Result<bool> {
    let mean = |sigma: f64, denoised: bool| {
        cases
            .iter()
            .find(|c| c.sigma_u == sigma && (sigma == 0.0 || c.denoised == denoised))
            .map(|c| c.summary.mean)
            .ok_or_else(|| Error::Config(format!("study lacks the case sigma_u = {sigma}, denoised = {denoised}")))
    };
    let (m0, d4, d3, r4, r3) = (mean(0.0, false)?, mean(1e-4, true)?, mean(1e-3, true)?, mean(1e-4, false)?, mean(1e-3, false)?);
    Ok(m0 < d4 && d4 < d3 && d4 < r4 && d3 < r3)
}
