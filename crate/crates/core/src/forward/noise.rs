//! Synthetic measurement noise and the local regression smoother.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::NoiseModel;
use crate::error::{Error, Result};
use crate::kinematics::{Mesh, Snapshot};

/// Adds i.i.d. `N(0, σ_u²)` to every displacement component, visiting
/// snapshots, nodes and components in order. `σ_u = 0` returns the input.
pub fn add_noise(snapshots: &[Snapshot], noise: &NoiseModel) -> Result<Vec<Snapshot>> {
    if !(noise.sigma_u >= 0.0) || !noise.sigma_u.is_finite() {
        return Err(Error::Config(format!("noise level {} must be non-negative", noise.sigma_u)));
    }
    if noise.sigma_u == 0.0 {
        return Ok(snapshots.to_vec());
    }
    let normal = Normal::new(0.0, noise.sigma_u).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    Ok(snapshots
        .iter()
        .map(|s| {
            let mut s = s.clone();
            for u in s.displacements.iter_mut() {
                for c in u.iter_mut() {
                    *c += normal.sample(&mut rng);
                }
            }
            s
        })
        .collect())
}

/// How the smoothing bandwidth is chosen, as a multiple of each node's mean
/// incident edge length.
#[derive(Clone, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Per field, minimize generalized cross-validation over a geometric grid.
    Gcv { min: f64, max: f64, points: usize },
}

/// Local regression parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseSettings {
    pub bandwidth: Bandwidth,
}

impl Default for DenoiseSettings {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Gcv {
                min: 0.6,
                max: 3.0,
                points: 13,
            },
        }
    }
}

/// Gaussian weights are cut off beyond this many bandwidths.
const CUTOFF: f64 = 3.0;
/// Monomials of the local quadratic fit.
const TERMS: usize = 6;

/// One row of a linear smoother: `(node, weight)` pairs.
type HatRow = Vec<(usize, f64)>;

/// Gaussian-weighted local quadratic regression over the nodal positions.
///
/// The fitted value at a node is the constant term of a weighted least-squares
/// quadratic centred there, so the smoother reproduces quadratic fields exactly,
/// including next to edges. Every candidate bandwidth is a fixed sparse linear
/// map, built once per mesh; nodes carrying a prescribed DOF map to themselves.
pub struct Smoother {
    factors: Vec<f64>,
    hats: Vec<Vec<HatRow>>,
    boundary: Vec<bool>,
}

impl Smoother {
    pub fn new(mesh: &Mesh, settings: &DenoiseSettings) -> Result<Self> {
        let factors = match settings.bandwidth {
            Bandwidth::Fixed(f) => vec![f],
            Bandwidth::Gcv { min, max, points } => {
                if points == 0 || !(min > 0.0) || !(min <= max) {
                    return Err(Error::Config("bandwidth grid needs points >= 1 and 0 < min <= max".into()));
                }
                let step = if points == 1 { 0.0 } else { (max / min).ln() / (points - 1) as f64 };
                (0..points).map(|k| min * (step * k as f64).exp()).collect()
            }
        };
        if factors.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::Config("smoothing bandwidth must be positive".into()));
        }
        let n = mesh.n_nodes();
        let x = mesh.nodes();
        let mut boundary = vec![false; n];
        for &d in &mesh.dofs().fixed {
            boundary[d / 2] = true;
        }
        let spacing = local_spacing(mesh);
        let widest = factors.iter().cloned().fold(0.0, f64::max);
        let mut hats = vec![Vec::with_capacity(n); factors.len()];
        for a in 0..n {
            if boundary[a] {
                for h in hats.iter_mut() {
                    h.push(vec![(a, 1.0)]);
                }
                continue;
            }
            let reach = CUTOFF * widest * spacing[a];
            let near: Vec<(usize, [f64; 2])> = (0..n)
                .filter_map(|b| {
                    let d = [x[b][0] - x[a][0], x[b][1] - x[a][1]];
                    (d[0].hypot(d[1]) <= reach).then_some((b, d))
                })
                .collect();
            for (k, &f) in factors.iter().enumerate() {
                hats[k].push(hat_row(&near, f * spacing[a])?);
            }
        }
        Ok(Self { factors, hats, boundary })
    }

    /// Smoothed field and the bandwidth factor used.
    pub fn smooth(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let apply = |k: usize| -> Vec<f64> {
            self.hats[k].iter().map(|row| row.iter().map(|&(b, w)| w * y[b]).sum()).collect()
        };
        if self.factors.len() == 1 {
            return (apply(0), self.factors[0]);
        }
        let free = self.boundary.iter().filter(|b| !**b).count() as f64;
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for k in 0..self.factors.len() {
            let s = apply(k);
            let (mut rss, mut trace) = (0.0, 0.0);
            for (a, row) in self.hats[k].iter().enumerate() {
                if self.boundary[a] {
                    continue;
                }
                rss += (s[a] - y[a]).powi(2);
                trace += row.iter().find(|e| e.0 == a).map_or(0.0, |e| e.1);
            }
            let gcv = free * rss / (free - trace).powi(2);
            if best.as_ref().map_or(true, |b| gcv < b.0) {
                best = Some((gcv, k, s));
            }
        }
        let (_, k, s) = best.expect("grid is non-empty");
        (s, self.factors[k])
    }

    /// Smooths each displacement component of a snapshot; nodes carrying a
    /// prescribed DOF keep their input values.
    pub fn apply(&self, snapshot: &Snapshot) -> Snapshot {
        let mut out = snapshot.clone();
        for c in 0..2 {
            let y: Vec<f64> = snapshot.displacements.iter().map(|u| u[c]).collect();
            let (s, _) = self.smooth(&y);
            for (a, v) in s.into_iter().enumerate() {
                if !self.boundary[a] {
                    out.displacements[a][c] = v;
                }
            }
        }
        out
    }
}

/// Mean length of the element edges incident to each node.
fn local_spacing(mesh: &Mesh) -> Vec<f64> {
    let x = mesh.nodes();
    let mut sum = vec![0.0; mesh.n_nodes()];
    let mut count = vec![0usize; mesh.n_nodes()];
    for tri in mesh.elements() {
        for k in 0..3 {
            let (p, q) = (tri[k], tri[(k + 1) % 3]);
            let len = (x[p][0] - x[q][0]).hypot(x[p][1] - x[q][1]);
            for v in [p, q] {
                sum[v] += len;
                count[v] += 1;
            }
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect()
}

/// Weights whose dot product with the data is the local fit's value at the
/// centre. `near` holds offsets from the centre.
fn hat_row(near: &[(usize, [f64; 2])], h: f64) -> Result<HatRow> {
    let monomials = |d: [f64; 2]| {
        let (u, v) = (d[0] / h, d[1] / h);
        [1.0, u, v, u * u, u * v, v * v]
    };
    let mut gram = nalgebra::SMatrix::<f64, TERMS, TERMS>::zeros();
    let mut terms = Vec::with_capacity(near.len());
    for &(b, d) in near {
        let r2 = (d[0] * d[0] + d[1] * d[1]) / (h * h);
        if r2 > CUTOFF * CUTOFF {
            continue;
        }
        let w = (-0.5 * r2).exp();
        let p = nalgebra::SVector::<f64, TERMS>::from(monomials(d));
        gram += w * p * p.transpose();
        terms.push((b, w, p));
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Numerical("local regression system is singular; use a larger smoothing bandwidth".into())
    })?;
    let mut e0 = nalgebra::SVector::<f64, TERMS>::zeros();
    e0[0] = 1.0;
    let g = chol.solve(&e0);
    Ok(terms.into_iter().map(|(b, w, p)| (b, w * g.dot(&p))).collect())
}

/// Denoises every snapshot with the default smoother settings.
pub fn denoise(snapshots: &[Snapshot], mesh: &Mesh) -> Result<Vec<Snapshot>> {
    denoise_with(snapshots, mesh, &DenoiseSettings::default())
}

pub fn denoise_with(snapshots: &[Snapshot], mesh: &Mesh, settings: &DenoiseSettings) -> Result<Vec<Snapshot>> {
    for s in snapshots {
        s.validate(mesh)?;
    }
    let smoother = Smoother::new(mesh, settings)?;
    Ok(snapshots.iter().map(|s| smoother.apply(s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::geometry::build_quarter_plate;

    fn rms(v: impl Iterator<Item = f64>) -> f64 {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
        (s / n as f64).sqrt()
    }

    #[test]
    fn zero_noise_is_identity_and_seed_is_deterministic() {
        let mesh = build_quarter_plate(1.0, 0.25, 200).unwrap();
        let snaps = vec![Snapshot::zeros(&mesh, 1)];
        let quiet = NoiseModel { sigma_u: 0.0, ..Default::default() };
        assert_eq!(add_noise(&snaps, &quiet).unwrap(), snaps);
        let loud = NoiseModel { sigma_u: 1e-3, rng_seed: 7, ..Default::default() };
        assert_eq!(add_noise(&snaps, &loud).unwrap(), add_noise(&snaps, &loud).unwrap());
        assert!(add_noise(&snaps, &NoiseModel { sigma_u: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn noise_sample_deviation() {
        let mesh = build_quarter_plate(1.0, 0.25, 1441).unwrap();
        let snaps: Vec<_> = (0..5).map(|t| Snapshot::zeros(&mesh, t)).collect();
        let noisy = add_noise(&snaps, &NoiseModel { sigma_u: 1e-3, rng_seed: 3, ..Default::default() }).unwrap();
        let sd = rms(noisy.iter().flat_map(|s| s.displacements.iter().flat_map(|u| *u)));
        assert!((sd - 1e-3).abs() < 0.05e-3, "sd {sd}");
    }

    fn rms_diff(a: &Snapshot, b: &Snapshot) -> f64 {
        rms(a.displacements.iter().zip(&b.displacements).flat_map(|(p, q)| [p[0] - q[0], p[1] - q[1]]))
    }

    #[test]
    fn quadratic_fields_are_reproduced() {
        let mesh = build_quarter_plate(1.0, 0.25, 400).unwrap();
        let smoother = Smoother::new(&mesh, &DenoiseSettings { bandwidth: Bandwidth::Fixed(1.5) }).unwrap();
        let y: Vec<f64> = mesh.nodes().iter().map(|p| 0.3 - p[0] + 2.0 * p[1] + p[0] * p[0] - 0.5 * p[0] * p[1] + 0.7 * p[1] * p[1]).collect();
        let (s, _) = smoother.smooth(&y);
        for (a, b) in s.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn invalid_bandwidths_are_rejected() {
        let mesh = build_quarter_plate(1.0, 0.25, 200).unwrap();
        for bandwidth in [Bandwidth::Fixed(0.0), Bandwidth::Gcv { min: 2.0, max: 1.0, points: 3 }, Bandwidth::Gcv { min: 1.0, max: 2.0, points: 0 }] {
            assert!(Smoother::new(&mesh, &DenoiseSettings { bandwidth }).is_err());
        }
        // too few neighbours for a quadratic fit
        assert!(Smoother::new(&mesh, &DenoiseSettings { bandwidth: Bandwidth::Fixed(0.05) }).is_err());
    }

    #[test]
    fn smoother_contract() {
        use crate::forward::{solve_quasistatic, BenchmarkMaterial, LoadingProgram, MaterialName};
        let mesh = build_quarter_plate(1.0, 0.25, 1441).unwrap();
        let smoother = Smoother::new(&mesh, &DenoiseSettings::default()).unwrap();

        let mat = BenchmarkMaterial::new(MaterialName::NeoHookean);
        let clean = solve_quasistatic(&mesh, &mat, &LoadingProgram::quasi_static(vec![0.3])).unwrap();
        let kept = smoother.apply(&clean[0]);
        let dev = rms_diff(&kept, &clean[0]);
        assert!(dev < 0.1 * 1e-4, "clean deviation {dev:e}");

        let zero = Snapshot::zeros(&mesh, 0);
        let noisy = add_noise(&[zero.clone()], &NoiseModel { sigma_u: 1e-4, rng_seed: 11, ..Default::default() })
            .unwrap()
            .remove(0);
        let out = smoother.apply(&noisy);
        assert!(rms_diff(&out, &zero) < 0.5 * rms_diff(&noisy, &zero));

        for &d in &mesh.dofs().fixed {
            let a = d / 2;
            assert_eq!(out.displacements[a], noisy.displacements[a]);
        }
    }
}
