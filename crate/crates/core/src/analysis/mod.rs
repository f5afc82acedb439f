//! Posterior summaries: feature activity, mode tables and energy envelopes
//! along canonical homogeneous deformation paths.

pub mod report;
mod svg;

pub use report::{emit_report, sigma2_study_svg, Report, REPORT_VERSION};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, N_FEATURES};
use crate::forward::BenchmarkMaterial;
use crate::kinematics::plane_strain;
use crate::sampler::{ChainState, PosteriorSamples};

/// Homogeneous in-plane deformation modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    #[serde(rename = "UT")]
    UniaxialTension,
    #[serde(rename = "UC")]
    UniaxialCompression,
    #[serde(rename = "BT")]
    BiaxialTension,
    #[serde(rename = "BC")]
    BiaxialCompression,
    #[serde(rename = "SS")]
    SimpleShear,
    #[serde(rename = "PS")]
    PureShear,
}

impl PathKind {
    pub const ALL: [PathKind; 6] = [
        PathKind::UniaxialTension,
        PathKind::UniaxialCompression,
        PathKind::BiaxialTension,
        PathKind::BiaxialCompression,
        PathKind::SimpleShear,
        PathKind::PureShear,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            PathKind::UniaxialTension => "UT",
            PathKind::UniaxialCompression => "UC",
            PathKind::BiaxialTension => "BT",
            PathKind::BiaxialCompression => "BC",
            PathKind::SimpleShear => "SS",
            PathKind::PureShear => "PS",
        }
    }

    /// In-plane `[F₁₁, F₁₂, F₂₁, F₂₂]`; identity at `γ = 0`.
    pub fn deformation(&self, gamma: f64) -> [f64; 4] {
        let s = 1.0 + gamma;
        match self {
            PathKind::UniaxialTension => [s, 0.0, 0.0, 1.0],
            PathKind::UniaxialCompression => [1.0 / s, 0.0, 0.0, 1.0],
            PathKind::BiaxialTension => [s, 0.0, 0.0, s],
            PathKind::BiaxialCompression => [1.0 / s, 0.0, 0.0, 1.0 / s],
            PathKind::SimpleShear => [1.0, gamma, 0.0, 1.0],
            PathKind::PureShear => [s, 0.0, 0.0, 1.0 / s],
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for PathKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PathKind::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown deformation path '{s}'")))
    }
}

/// A path sampled on a grid of `γ ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationPath {
    pub kind: PathKind,
    pub gamma_grid: Vec<f64>,
}

impl DeformationPath {
    pub const DEFAULT_POINTS: usize = 101;

    pub fn new(kind: PathKind) -> Self {
        Self::with_points(kind, Self::DEFAULT_POINTS)
    }

    pub fn with_points(kind: PathKind, n: usize) -> Self {
        let gamma_grid = (0..n).map(|i| i as f64 / (n.max(2) - 1) as f64).collect();
        Self { kind, gamma_grid }
    }

    fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::Config(format!("{} path grid must be non-empty within [0, 1]", self.kind)));
        }
        Ok(())
    }
}

/// A distinct activation pattern and its posterior weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Active features, 1-based.
    pub active: Vec<usize>,
    pub count: usize,
    pub frequency: f64,
    pub theta_mean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityReport {
    pub z_avg: Vec<f64>,
    /// Sorted by decreasing frequency, ties by active set.
    pub modes: Vec<Mode>,
}

impl ActivityReport {
    /// Summed activity over the given 1-based features.
    pub fn combined(&self, features: &[usize]) -> f64 {
        features.iter().map(|&i| self.z_avg[i - 1]).sum()
    }
}

pub fn average_activity(samples: &PosteriorSamples) -> Result<ActivityReport> {
    let states = samples.states();
    if states.is_empty() {
        return Err(Error::Shape("no posterior states".into()));
    }
    let n_f = samples.n_features();
    let n = states.len() as f64;
    let mut counts = vec![0usize; n_f];
    let mut groups: HashMap<&[bool], (usize, Vec<f64>)> = HashMap::new();
    for s in states {
        for (c, &z) in counts.iter_mut().zip(&s.z) {
            *c += z as usize;
        }
        let entry = groups.entry(&s.z).or_insert_with(|| (0, vec![0.0; n_f]));
        entry.0 += 1;
        for (acc, t) in entry.1.iter_mut().zip(&s.theta) {
            *acc += t;
        }
    }
    let mut modes: Vec<Mode> = groups
        .into_iter()
        .map(|(z, (count, sum))| Mode {
            active: z.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i + 1).collect(),
            count,
            frequency: count as f64 / n,
            theta_mean: sum.into_iter().map(|v| v / count as f64).collect(),
        })
        .collect();
    modes.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.active.cmp(&b.active)));
    Ok(ActivityReport {
        z_avg: counts.into_iter().map(|c| c as f64 / n).collect(),
        modes,
    })
}

/// Mean `θ` over the states selected by `keep`, with the number kept.
pub fn conditional_mean(samples: &PosteriorSamples, keep: impl Fn(&ChainState) -> bool) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; samples.n_features()];
    let mut count = 0;
    for s in samples.states().iter().filter(|s| keep(s)) {
        count += 1;
        for (acc, t) in sum.iter_mut().zip(&s.theta) {
            *acc += t;
        }
    }
    (sum.into_iter().map(|v| v / count.max(1) as f64).collect(), count)
}

/// Empirical quantile with linear interpolation between order statistics
/// (`q` in [0, 1], input sorted ascending).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and central 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub p2_5: f64,
    pub p97_5: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("cannot summarize an empty or NaN sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        p2_5: quantile_sorted(&sorted, 0.025),
        p97_5: quantile_sorted(&sorted, 0.975),
    })
}

/// Energy statistics along one path, offset so every curve starts at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEnvelope {
    pub kind: PathKind,
    pub gamma: Vec<f64>,
    pub mean: Vec<f64>,
    pub p2_5: Vec<f64>,
    pub p97_5: Vec<f64>,
    pub truth: Option<Vec<f64>>,
}

impl EnergyEnvelope {
    /// Fraction of grid points with the true curve inside the band.
    pub fn containment(&self) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        let inside = truth
            .iter()
            .zip(self.p2_5.iter().zip(&self.p97_5))
            .filter(|(t, (lo, hi))| *lo <= *t && *t <= *hi)
            .count();
        Some(inside as f64 / truth.len() as f64)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.p97_5.iter().zip(&self.p2_5).map(|(h, l)| h - l).collect()
    }

    pub fn mean_width(&self) -> f64 {
        let w = self.widths();
        w.iter().sum::<f64>() / w.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,mean,p2_5,p97_5,true\n");
        for i in 0..self.gamma.len() {
            let truth = self.truth.as_ref().map(|t| t[i].to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.gamma[i], self.mean[i], self.p2_5[i], self.p97_5[i], truth
            ));
        }
        out
    }
}

/// Features at the in-plane deformation `f2`.
fn features_at(library: &FeatureLibrary, f2: [f64; 4]) -> Result<[f64; N_FEATURES]> {
    library.evaluate_at(&plane_strain(f2[0], f2[1], f2[2], f2[3]))
}

/// `W(F(γ)) − W(I)` for every state along the path, plus the ground truth.
pub fn energy_envelope(
    samples: &PosteriorSamples,
    library: &FeatureLibrary,
    path: &DeformationPath,
    truth: Option<&BenchmarkMaterial>,
) -> Result<EnergyEnvelope> {
    path.validate()?;
    let states = samples.states();
    if states.is_empty() {
        return Err(Error::Shape("no posterior states".into()));
    }
    if samples.n_features() != N_FEATURES {
        return Err(Error::Shape(format!("samples carry {} features, library has {N_FEATURES}", samples.n_features())));
    }
    let reference = features_at(library, [1.0, 0.0, 0.0, 1.0])?;
    let true_reference = truth.map(|m| m.energy([1.0, 0.0, 0.0, 1.0])).transpose()?;
    let n = path.gamma_grid.len();
    let mut env = EnergyEnvelope {
        kind: path.kind,
        gamma: path.gamma_grid.clone(),
        mean: Vec::with_capacity(n),
        p2_5: Vec::with_capacity(n),
        p97_5: Vec::with_capacity(n),
        truth: truth.map(|_| Vec::with_capacity(n)),
    };
    let mut energies = vec![0.0; states.len()];
    for &gamma in &path.gamma_grid {
        let f2 = path.kind.deformation(gamma);
        let q = features_at(library, f2)?;
        let dq: Vec<f64> = q.iter().zip(&reference).map(|(a, b)| a - b).collect();
        for (w, s) in energies.iter_mut().zip(states) {
            *w = dq.iter().zip(&s.theta).map(|(d, t)| d * t).sum();
        }
        let summary = summarize(&energies)?;
        env.mean.push(summary.mean);
        env.p2_5.push(summary.p2_5);
        env.p97_5.push(summary.p97_5);
        if let (Some(m), Some(t), Some(w0)) = (truth, env.truth.as_mut(), true_reference) {
            t.push(m.energy(f2)? - w0);
        }
    }
    Ok(env)
}

/// Envelopes on all six paths with the default grid.
pub fn all_envelopes(
    samples: &PosteriorSamples,
    library: &FeatureLibrary,
    truth: Option<&BenchmarkMaterial>,
) -> Result<Vec<EnergyEnvelope>> {
    PathKind::ALL
        .iter()
        .map(|&k| energy_envelope(samples, library, &DeformationPath::new(k), truth))
        .collect()
}
