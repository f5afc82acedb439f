//! Report artifacts: JSON summary, per-path CSV curves and SVG figures.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::svg::{fmt_tick, padded_range, Frame, Svg};
use super::{quantile_sorted, summarize, ActivityReport, EnergyEnvelope, Mode, PathKind, Summary};
use crate::error::{Error, Result};
use crate::forward::Manifest;
use crate::sampler::PosteriorSamples;

pub const REPORT_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
/// Modes listed in the JSON summary.
const MAX_MODES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub path: PathKind,
    pub containment: Option<f64>,
    pub mean_width: f64,
    pub final_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub n_states: usize,
    pub n_chains: usize,
    pub labels: Vec<String>,
    pub z_avg: Vec<f64>,
    pub modes: Vec<Mode>,
    pub n_modes: usize,
    pub theta: Vec<Summary>,
    pub sigma2: Summary,
    pub envelopes: Vec<EnvelopeSummary>,
    pub manifest: Option<Manifest>,
}

impl Report {
    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(REPORT_FILE))?)?)
    }
}

pub fn envelope_file(kind: PathKind) -> String {
    format!("envelope_{}.csv", kind.code())
}

/// Writes `report.json`, `envelope_<path>.csv`, `coefficients.svg`,
/// `activity.svg` and `envelopes.svg` into `out`. Inputs are validated
/// before any file is created.
pub fn emit_report(
    samples: &PosteriorSamples,
    activity: &ActivityReport,
    envelopes: &[EnergyEnvelope],
    labels: &[String],
    manifest: Option<&Manifest>,
    out: &Path,
) -> Result<Report> {
    if samples.is_empty() {
        return Err(Error::Shape("no posterior states to report".into()));
    }
    let n_f = samples.n_features();
    if activity.z_avg.len() != n_f || labels.len() != n_f {
        return Err(Error::Shape(format!("activity/labels do not match {n_f} features")));
    }
    if envelopes.is_empty() {
        return Err(Error::Shape("no energy envelopes to report".into()));
    }
    let theta = (0..n_f)
        .map(|k| summarize(&samples.states().iter().map(|s| s.theta[k]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let sigma2 = summarize(&samples.states().iter().map(|s| s.sigma2).collect::<Vec<_>>())?;
    let theta_true = manifest.and_then(|m| m.theta_true.clone());
    let report = Report {
        schema_version: REPORT_VERSION,
        n_states: samples.len(),
        n_chains: samples.n_chains(),
        labels: labels.to_vec(),
        z_avg: activity.z_avg.clone(),
        modes: activity.modes.iter().take(MAX_MODES).cloned().collect(),
        n_modes: activity.modes.len(),
        theta,
        sigma2,
        envelopes: envelopes
            .iter()
            .map(|e| EnvelopeSummary {
                path: e.kind,
                containment: e.containment(),
                mean_width: e.mean_width(),
                final_width: *e.widths().last().expect("non-empty grid"),
            })
            .collect(),
        manifest: manifest.cloned(),
    };
    let json = serde_json::to_string_pretty(&report)?;
    let coefficients = coefficient_svg(samples, theta_true.as_deref());
    let bars = activity_svg(&activity.z_avg);
    let grid = envelope_svg(envelopes);

    std::fs::create_dir_all(out)?;
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let p = out.join(name);
        std::fs::write(&p, text)?;
        Ok(p)
    };
    write(REPORT_FILE, &json)?;
    for e in envelopes {
        write(&envelope_file(e.kind), &e.to_csv())?;
    }
    write("coefficients.svg", &coefficients)?;
    write("activity.svg", &bars)?;
    write("envelopes.svg", &grid)?;
    Ok(report)
}

/// Silverman's rule of thumb.
fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Violins of the slab part of each coefficient; the spike mass is a dot
/// at zero whose area scales with the inactive frequency.
fn coefficient_svg(samples: &PosteriorSamples, theta_true: Option<&[f64]>) -> String {
    let n_f = samples.n_features();
    let slot = 28.0;
    let mut svg = Svg::new(80.0 + slot * n_f as f64 + 20.0, 340.0);
    let (_, ymax) = padded_range(
        samples
            .states()
            .iter()
            .flat_map(|s| s.theta.iter().copied())
            .chain(theta_true.unwrap_or(&[]).iter().copied())
            .chain([0.0]),
    );
    let frame = Frame {
        x0: 70.0,
        y0: 30.0,
        w: slot * n_f as f64,
        h: 260.0,
        xmin: 0.0,
        xmax: n_f as f64,
        ymin: 0.0,
        ymax,
    };
    svg.axes(&frame, "feature", "coefficient");
    let n = samples.len() as f64;
    for k in 0..n_f {
        let cx = frame.px(k as f64 + 0.5);
        if k % 5 == 0 || k + 1 == n_f {
            svg.text(cx, frame.y0 + frame.h + 14.0, "middle", &(k + 1).to_string());
        }
        let mut slab: Vec<f64> = samples.states().iter().filter(|s| s.z[k]).map(|s| s.theta[k]).collect();
        slab.sort_by(f64::total_cmp);
        let inactive = 1.0 - slab.len() as f64 / n;
        if inactive > 0.0 {
            svg.circle(cx, frame.py(0.0), 1.0 + 6.0 * inactive.sqrt(), "#888888");
        }
        if slab.len() >= 2 {
            let h = silverman_bandwidth(&slab);
            let (lo, hi) = (slab[0], slab[slab.len() - 1]);
            if h > 0.0 && hi > lo {
                let grid: Vec<f64> = (0..=40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect();
                let dens: Vec<f64> = grid
                    .iter()
                    .map(|&y| slab.iter().map(|&v| (-0.5 * ((y - v) / h).powi(2)).exp()).sum::<f64>())
                    .collect();
                let peak = dens.iter().cloned().fold(0.0, f64::max);
                let half = 0.45 * slot;
                let mut pts: Vec<(f64, f64)> = grid.iter().zip(&dens).map(|(&y, &d)| (cx + half * d / peak, frame.py(y))).collect();
                pts.extend(grid.iter().zip(&dens).rev().map(|(&y, &d)| (cx - half * d / peak, frame.py(y))));
                svg.polygon(&pts, "#4a7ab5");
            } else {
                svg.line(cx - 8.0, frame.py(lo), cx + 8.0, frame.py(lo), "#4a7ab5", 2.0);
            }
        } else if let Some(&v) = slab.first() {
            svg.line(cx - 8.0, frame.py(v), cx + 8.0, frame.py(v), "#4a7ab5", 2.0);
        }
        if let Some(t) = theta_true.and_then(|t| t.get(k)).filter(|t| **t > 0.0) {
            svg.line(cx - 10.0, frame.py(*t), cx + 10.0, frame.py(*t), "red", 2.0);
        }
    }
    svg.finish()
}

fn activity_svg(z_avg: &[f64]) -> String {
    let n_f = z_avg.len();
    let slot = 28.0;
    let mut svg = Svg::new(80.0 + slot * n_f as f64 + 20.0, 240.0);
    let frame = Frame {
        x0: 70.0,
        y0: 30.0,
        w: slot * n_f as f64,
        h: 160.0,
        xmin: 0.0,
        xmax: n_f as f64,
        ymin: 0.0,
        ymax: 1.0,
    };
    svg.axes(&frame, "feature", "average activity");
    for (k, &z) in z_avg.iter().enumerate() {
        let x = frame.px(k as f64 + 0.15);
        svg.rect(x, frame.py(z), 0.7 * slot, frame.py(0.0) - frame.py(z), "#4a7ab5");
        if k % 5 == 0 || k + 1 == n_f {
            svg.text(frame.px(k as f64 + 0.5), frame.y0 + frame.h + 14.0, "middle", &(k + 1).to_string());
        }
    }
    svg.finish()
}

/// 2×3 grid of envelope panels over `γ ∈ [0, 1]`.
fn envelope_svg(envelopes: &[EnergyEnvelope]) -> String {
    let (pw, ph) = (260.0, 180.0);
    let cols = 3;
    let rows = envelopes.len().div_ceil(cols);
    let mut svg = Svg::new(cols as f64 * (pw + 90.0) + 20.0, rows as f64 * (ph + 70.0) + 20.0);
    for (i, e) in envelopes.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        let truth = e.truth.as_deref().unwrap_or(&[]);
        let (ymin, ymax) = padded_range(e.p2_5.iter().chain(&e.p97_5).chain(truth).copied());
        let frame = Frame {
            x0: 80.0 + c as f64 * (pw + 90.0),
            y0: 30.0 + r as f64 * (ph + 70.0),
            w: pw,
            h: ph,
            xmin: 0.0,
            xmax: 1.0,
            ymin,
            ymax,
        };
        let mut band: Vec<(f64, f64)> = e.gamma.iter().zip(&e.p97_5).map(|(&g, &v)| (frame.px(g), frame.py(v))).collect();
        band.extend(e.gamma.iter().zip(&e.p2_5).rev().map(|(&g, &v)| (frame.px(g), frame.py(v))));
        svg.polygon(&band, "#cccccc");
        let curve = |ys: &[f64]| -> Vec<(f64, f64)> { e.gamma.iter().zip(ys).map(|(&g, &v)| (frame.px(g), frame.py(v))).collect() };
        svg.polyline(&curve(&e.mean), "black", 1.5);
        if !truth.is_empty() {
            svg.polyline(&curve(truth), "red", 1.5);
        }
        svg.axes(&frame, "γ", &format!("{} energy", e.kind));
    }
    svg.finish()
}

/// Box-style comparison of `σ²` samples across labelled cases.
pub fn sigma2_study_svg(cases: &[(String, Vec<f64>)]) -> Result<String> {
    let stats = cases.iter().map(|(_, v)| summarize(v)).collect::<Result<Vec<_>>>()?;
    let slot = 120.0;
    let mut svg = Svg::new(100.0 + slot * cases.len() as f64, 320.0);
    let (ymin, ymax) = padded_range(stats.iter().flat_map(|s| [s.p2_5, s.p97_5]));
    let frame = Frame {
        x0: 90.0,
        y0: 30.0,
        w: slot * cases.len() as f64,
        h: 220.0,
        xmin: 0.0,
        xmax: cases.len() as f64,
        ymin,
        ymax,
    };
    svg.axes(&frame, "case", "σ²");
    for (i, ((label, _), s)) in cases.iter().zip(&stats).enumerate() {
        let cx = frame.px(i as f64 + 0.5);
        svg.rect(cx - 20.0, frame.py(s.p97_5), 40.0, frame.py(s.p2_5) - frame.py(s.p97_5), "#9db8d9");
        svg.line(cx - 20.0, frame.py(s.mean), cx + 20.0, frame.py(s.mean), "black", 2.0);
        svg.text(cx, frame.y0 + frame.h + 40.0, "middle", label);
        svg.text(cx, frame.y0 + frame.h + 54.0, "middle", &fmt_tick(s.mean));
    }
    Ok(svg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{all_envelopes, average_activity};
    use crate::features::{FeatureLibrary, N_FEATURES};
    use crate::sampler::ChainState;

    fn samples() -> PosteriorSamples {
        let states = (0..40)
            .map(|i| {
                let mut theta = vec![0.0; N_FEATURES];
                let mut z = vec![false; N_FEATURES];
                theta[14] = 1.4 + 0.005 * i as f64;
                z[14] = true;
                if i % 2 == 0 {
                    theta[0] = 0.45 + 0.003 * i as f64;
                    z[0] = true;
                }
                ChainState {
                    theta,
                    z,
                    p0: 0.1,
                    nu_s: 1.0,
                    sigma2: 1e-3 * (1.0 + 0.01 * i as f64),
                }
            })
            .collect();
        PosteriorSamples::new(states, 2, 5).unwrap()
    }

    #[test]
    fn report_files_are_complete_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let s = samples();
        let lib = FeatureLibrary::default();
        let act = average_activity(&s).unwrap();
        let env = all_envelopes(&s, &lib, None).unwrap();
        let labels = lib.labels();
        let r = emit_report(&s, &act, &env, &labels, None, dir.path()).unwrap();
        assert_eq!(r.envelopes.len(), 6);
        let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
        let first: Vec<Vec<u8>> = ["report.json", "envelope_SS.csv", "envelopes.svg", "coefficients.svg"].map(read).to_vec();
        emit_report(&s, &act, &env, &labels, None, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = ["report.json", "envelope_SS.csv", "envelopes.svg", "coefficients.svg"].map(read).to_vec();
        assert_eq!(first, second);
        let svg = String::from_utf8(read("envelopes.svg")).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 6);
        assert_eq!(Report::read(dir.path()).unwrap(), r);
        let csv = String::from_utf8(read("envelope_UT.csv")).unwrap();
        assert_eq!(csv.lines().count(), 102);
        assert!(csv.starts_with("gamma,mean,p2_5,p97_5,true\n0,"));
    }

    #[test]
    fn mismatched_inputs_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        let s = samples();
        let act = average_activity(&s).unwrap();
        assert!(emit_report(&s, &act, &[], &FeatureLibrary::default().labels(), None, &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn sigma2_boxes() {
        let svg = sigma2_study_svg(&[("a".into(), vec![1.0, 2.0]), ("b".into(), vec![2.0, 3.0])]).unwrap();
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(sigma2_study_svg(&[("a".into(), vec![])]).is_err());
    }
}
