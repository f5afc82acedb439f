//! Spike-and-slab Gibbs sampler over `{θ, z, p₀, ν_s, σ²}`.
//!
//! Every conditional works from the Gram quantities `AᵀA`, `Aᵀb`, `bᵀb`, so
//! a sweep costs a few small Cholesky factorizations regardless of the row
//! count. Marginal likelihoods are evaluated in log space only.

pub mod samples;
pub mod truncated;

pub use samples::PosteriorSamples;
pub use truncated::{sample_truncated_mvn, sample_truncated_mvn_from, DrawMethod};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::assembly::LinearSystem;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Hyperprior parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub a_nu: f64,
    pub b_nu: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub a_p: f64,
    pub b_p: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            a_nu: 0.5,
            b_nu: 0.5,
            a_sigma: 1.0,
            b_sigma: 1.0,
            a_p: 0.1,
            b_p: 5.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a_nu, self.b_nu, self.a_sigma, self.b_sigma, self.a_p, self.b_p];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("hyperparameters must be positive and finite: {self:?}")))
        }
    }
}

/// One Gibbs state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub z: Vec<bool>,
    pub p0: f64,
    pub nu_s: f64,
    pub sigma2: f64,
}

impl ChainState {
    pub fn n_active(&self) -> usize {
        self.z.iter().filter(|&&b| b).count()
    }

    pub fn active(&self) -> Vec<usize> {
        active_indices(&self.z)
    }

    /// Spike consistency and nonnegativity.
    pub fn is_coherent(&self) -> bool {
        self.theta.len() == self.z.len()
            && self
                .theta
                .iter()
                .zip(&self.z)
                .all(|(&t, &z)| t >= 0.0 && (z || t == 0.0))
    }
}

fn active_indices(z: &[bool]) -> Vec<usize> {
    z.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Chain lengths and master seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_burn: usize,
    pub n_g: usize,
    pub n_chains: usize,
    pub rng_seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_burn: 250,
            n_g: 750,
            n_chains: 4,
            rng_seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burn == 0 || self.n_g == 0 || self.n_chains == 0 {
            return Err(Error::Config(format!("chain lengths must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Random stream of chain `k`, derived from the master seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Sufficient statistics of `(A, b)` plus the candidate mask.
#[derive(Clone, Debug)]
pub struct GramSystem {
    pub ata: DMatrix<f64>,
    pub atb: DVector<f64>,
    pub btb: f64,
    pub n_rows: usize,
    /// Features eligible for activation; the rest stay in the spike.
    pub candidates: Vec<bool>,
}

impl GramSystem {
    pub fn new(a: &DMatrix<f64>, b: &DVector<f64>, candidates: Vec<bool>) -> Result<Self> {
        if a.nrows() != b.len() || a.ncols() != candidates.len() {
            return Err(Error::Shape(format!(
                "A is {}×{}, b has {} entries, mask has {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                candidates.len()
            )));
        }
        Ok(Self {
            ata: a.tr_mul(a),
            atb: a.tr_mul(b),
            btb: b.dot(b),
            n_rows: b.len(),
            candidates,
        })
    }

    pub fn from_system(system: &LinearSystem, candidates: Vec<bool>) -> Result<Self> {
        Self::new(&system.a, &system.b, candidates)
    }

    pub fn n_features(&self) -> usize {
        self.candidates.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.iter().filter(|&&c| c).count()
    }
}

/// Posterior quantities of one active set at fixed `ν_s`.
struct ActiveFactor {
    active: Vec<usize>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// `Σ A_rᵀb`
    mu: DVector<f64>,
    /// `μᵀ Σ⁻¹ μ`
    fit: f64,
    /// `½ ln det Σ`
    half_ln_det: f64,
}

/// The hierarchical model bound to one system.
#[derive(Clone, Debug)]
pub struct SpikeSlab {
    pub gram: GramSystem,
    pub hyper: HyperParams,
}

impl SpikeSlab {
    pub fn new(gram: GramSystem, hyper: HyperParams) -> Result<Self> {
        hyper.validate()?;
        if gram.n_candidates() == 0 {
            return Err(Error::Config("every feature is suppressed".into()));
        }
        Ok(Self { gram, hyper })
    }

    fn factor(&self, z: &[bool], nu_s: f64) -> Result<ActiveFactor> {
        let active = active_indices(z);
        let s = active.len();
        if s == 0 {
            return Ok(ActiveFactor {
                active,
                chol: None,
                mu: DVector::zeros(0),
                fit: 0.0,
                half_ln_det: 0.0,
            });
        }
        let ridge = nu_s.recip();
        let precision = DMatrix::from_fn(s, s, |i, j| {
            self.gram.ata[(active[i], active[j])] + if i == j { ridge } else { 0.0 }
        });
        let rhs = DVector::from_fn(s, |i, _| self.gram.atb[active[i]]);
        let chol = Cholesky::new(precision.clone()).ok_or_else(|| {
            let d = precision.diagonal();
            Error::Numerical(format!(
                "Cholesky of AᵀA + I/ν_s failed for active set {:?} (ν_s = {nu_s:e}, diagonal range {:e}..{:e})",
                active.iter().map(|i| i + 1).collect::<Vec<_>>(),
                d.min(),
                d.max()
            ))
        })?;
        let half_ln_det = -chol.l_dirty().diagonal().iter().take(s).map(|v| v.ln()).sum::<f64>();
        let mu = chol.solve(&rhs);
        let fit = rhs.dot(&mu);
        Ok(ActiveFactor {
            active,
            chol: Some(chol),
            mu,
            fit,
            half_ln_det,
        })
    }

    fn residual_energy(&self, factor: &ActiveFactor) -> f64 {
        0.5 * (self.gram.btb - factor.fit)
    }

    /// `ln p(b | z, ν_s)` with `θ` and `σ²` integrated out.
    pub fn log_marginal_likelihood(&self, z: &[bool], nu_s: f64) -> Result<f64> {
        let factor = self.factor(z, nu_s)?;
        Ok(self.log_marginal_from(&factor, nu_s))
    }

    fn log_marginal_from(&self, factor: &ActiveFactor, nu_s: f64) -> f64 {
        let h = &self.hyper;
        let n = self.gram.n_rows as f64;
        let shape = h.a_sigma + 0.5 * n;
        let s = factor.active.len() as f64;
        let scale = (h.b_sigma + self.residual_energy(factor)).max(h.b_sigma * 1e-12);
        ln_gamma(shape) - 0.5 * n * LN_2PI - 0.5 * s * nu_s.ln() + h.a_sigma * h.b_sigma.ln() - ln_gamma(h.a_sigma)
            + factor.half_ln_det
            - shape * scale.ln()
    }

    /// `σ² ~ IG(a_σ + N/2, b_σ + ½(bᵀb − μᵀΣ⁻¹μ))`.
    pub fn sample_sigma2<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<f64> {
        let factor = self.factor(&state.z, state.nu_s)?;
        self.sigma2_from(&factor, rng)
    }

    fn sigma2_from<R: Rng + ?Sized>(&self, factor: &ActiveFactor, rng: &mut R) -> Result<f64> {
        let h = &self.hyper;
        let shape = h.a_sigma + 0.5 * self.gram.n_rows as f64;
        let scale = (h.b_sigma + self.residual_energy(factor)).max(h.b_sigma * 1e-12);
        inverse_gamma(shape, scale, rng)
    }

    /// `θ_r ~ N₊(μ, σ²Σ)`, zero outside the active set.
    pub fn sample_theta<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<Vec<f64>> {
        let factor = self.factor(&state.z, state.nu_s)?;
        self.theta_from(&factor, state, rng)
    }

    fn theta_from<R: Rng + ?Sized>(&self, factor: &ActiveFactor, state: &ChainState, rng: &mut R) -> Result<Vec<f64>> {
        let mut theta = vec![0.0; self.gram.n_features()];
        let Some(chol) = &factor.chol else {
            return Ok(theta);
        };
        let covariance = chol.inverse() * state.sigma2;
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let start = DVector::from_iterator(factor.active.len(), factor.active.iter().map(|&i| state.theta[i]));
        let (draw, _) = sample_truncated_mvn_from(&factor.mu, &covariance, Some(&start), rng)?;
        for (k, &i) in factor.active.iter().enumerate() {
            theta[i] = draw[k];
        }
        Ok(theta)
    }

    /// `ν_s ~ IG(a_ν + s_z/2, b_ν + θ_rᵀθ_r/(2σ²))`.
    pub fn sample_nu_s<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<f64> {
        let h = &self.hyper;
        let norm2: f64 = state
            .theta
            .iter()
            .zip(&state.z)
            .filter(|(_, &z)| z)
            .map(|(t, _)| t * t)
            .sum();
        inverse_gamma(h.a_nu + 0.5 * state.n_active() as f64, h.b_nu + norm2 / (2.0 * state.sigma2), rng)
    }

    /// `p₀ ~ Beta(a_p + s_z, b_p + n_f − s_z)` over candidate features.
    pub fn sample_p0<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<f64> {
        let h = &self.hyper;
        let s = state.n_active() as f64;
        let n_f = self.gram.n_candidates() as f64;
        let beta = Beta::new(h.a_p + s, h.b_p + n_f - s)
            .map_err(|e| Error::Numerical(format!("p0 conditional: {e}")))?;
        Ok(beta.sample(rng))
    }

    /// Candidate indicators updated one at a time in a fresh random order.
    pub fn sample_z<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<Vec<bool>> {
        let mut z = state.z.clone();
        let mut order: Vec<usize> = (0..z.len()).filter(|&i| self.gram.candidates[i]).collect();
        order.shuffle(rng);
        let log_prior_odds = state.p0.ln() - (1.0 - state.p0).ln();
        let mut current = self.log_marginal_likelihood(&z, state.nu_s)?;
        for i in order {
            let was = z[i];
            z[i] = !was;
            let flipped = self.log_marginal_likelihood(&z, state.nu_s)?;
            let (on, off) = if was { (current, flipped) } else { (flipped, current) };
            // ξ = p₀ / (p₀ + e^Δ (1 − p₀)) with Δ = off − on
            let log_odds = log_prior_odds - (off - on);
            let xi = if log_odds.is_nan() {
                return Err(Error::Numerical(format!("activation odds of feature {} are undefined", i + 1)));
            } else {
                1.0 / (1.0 + (-log_odds).exp())
            };
            let draw = rng.random::<f64>() < xi;
            z[i] = draw;
            current = if draw { on } else { off };
        }
        Ok(z)
    }

    /// Initial state from the chain's own stream.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState {
        let n = self.gram.n_features();
        let mut theta = vec![0.0; n];
        let mut z = vec![false; n];
        let theta1 = rng.random_range(0.95..1.05);
        let sigma2 = rng.random_range(0.95..1.05);
        let nu_s = rng.random_range(0.95..1.05);
        let p0 = rng.random_range(0.095..0.105);
        let z1 = rng.random_bool(0.5);
        if self.gram.candidates[0] && z1 {
            z[0] = true;
            theta[0] = theta1;
        }
        ChainState {
            theta,
            z,
            p0,
            nu_s,
            sigma2,
        }
    }

    /// One sweep: `z`, then `σ²` and `θ` for the new active set, then
    /// `ν_s` and `p₀`.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        state.z = self.sample_z(state, rng)?;
        let factor = self.factor(&state.z, state.nu_s)?;
        state.sigma2 = self.sigma2_from(&factor, rng)?;
        state.theta = self.theta_from(&factor, state, rng)?;
        state.nu_s = self.sample_nu_s(state, rng)?;
        state.p0 = self.sample_p0(state, rng)?;
        Ok(())
    }

    /// A single chain; returns the post-burn-in states.
    pub fn run_chain(&self, config: &ChainConfig, chain: usize) -> Result<Vec<ChainState>> {
        let mut rng = chain_rng(config.rng_seed, chain);
        let mut state = self.initial_state(&mut rng);
        let mut kept = Vec::with_capacity(config.n_g);
        for sweep in 1..=config.n_burn + config.n_g {
            let before = state.clone();
            self.sweep(&mut state, &mut rng).map_err(|e| {
                let dump = serde_json::to_string(&before).unwrap_or_default();
                Error::Numerical(format!("chain {chain}, sweep {sweep}: {e}; state before sweep: {dump}"))
            })?;
            if sweep > config.n_burn {
                kept.push(state.clone());
            }
        }
        Ok(kept)
    }

    /// Independent chains in parallel, concatenated in chain order.
    pub fn run_chains(&self, config: &ChainConfig) -> Result<PosteriorSamples> {
        config.validate()?;
        let chains = (0..config.n_chains)
            .into_par_iter()
            .map(|k| self.run_chain(config, k))
            .collect::<Result<Vec<_>>>()?;
        PosteriorSamples::new(chains.into_iter().flatten().collect(), config.n_chains, config.n_burn)
    }
}

/// Full pipeline entry: Gram statistics, model, chains.
pub fn run_chains(system: &LinearSystem, candidates: Vec<bool>, hyper: HyperParams, config: &ChainConfig) -> Result<PosteriorSamples> {
    let model = SpikeSlab::new(GramSystem::from_system(system, candidates)?, hyper)?;
    model.run_chains(config)
}

/// `X ~ IG(shape, scale)` as `scale / Gamma(shape, 1)`.
pub fn inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
        return Err(Error::Numerical(format!("inverse gamma with shape {shape}, scale {scale}")));
    }
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::Numerical(format!("gamma distribution: {e}")))?;
    Ok(scale / g.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy(candidates: Vec<bool>) -> SpikeSlab {
        let a = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, 0.5, -0.3, 0.1, 0.9, -0.4, 0.4, 0.3, 0.1]);
        let b = DVector::from_vec(vec![0.7, 0.2, 0.5, -0.1, 0.3]);
        SpikeSlab::new(GramSystem::new(&a, &b, candidates).unwrap(), HyperParams::default()).unwrap()
    }

    fn state(z: Vec<bool>) -> ChainState {
        ChainState {
            theta: vec![0.0; z.len()],
            z,
            p0: 0.1,
            nu_s: 1.0,
            sigma2: 1.0,
        }
    }

    #[test]
    fn empty_active_set_limit() {
        let m = toy(vec![true, true]);
        let n = 5.0;
        let btb: f64 = [0.7f64, 0.2, 0.5, -0.1, 0.3].iter().map(|v| v * v).sum();
        let expect = ln_gamma(1.0 + n / 2.0) - n / 2.0 * LN_2PI - ln_gamma(1.0) - (1.0 + n / 2.0) * (1.0 + 0.5 * btb).ln();
        assert_relative_eq!(m.log_marginal_likelihood(&[false, false], 0.7).unwrap(), expect, epsilon = 1e-12);
        let mut rng = chain_rng(0, 0);
        assert_eq!(m.sample_theta(&state(vec![false, false]), &mut rng).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn certain_prior_activates_everything() {
        let m = toy(vec![true, true]);
        let mut s = state(vec![false, false]);
        s.p0 = 1.0;
        let mut rng = chain_rng(1, 0);
        for _ in 0..20 {
            assert_eq!(m.sample_z(&s, &mut rng).unwrap(), vec![true, true]);
        }
    }

    #[test]
    fn suppressed_features_never_activate() {
        let m = toy(vec![true, false]);
        let cfg = ChainConfig {
            n_burn: 10,
            n_g: 50,
            n_chains: 2,
            rng_seed: 3,
        };
        let samples = m.run_chains(&cfg).unwrap();
        assert_eq!(samples.len(), 100);
        assert!(samples.states().iter().all(|s| !s.z[1] && s.theta[1] == 0.0 && s.is_coherent()));
    }

    #[test]
    fn chains_are_reproducible() {
        let m = toy(vec![true, true]);
        let cfg = ChainConfig {
            n_burn: 20,
            n_g: 30,
            n_chains: 3,
            rng_seed: 42,
        };
        let a = m.run_chains(&cfg).unwrap();
        let b = m.run_chains(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.chain(0), a.chain(1));
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig { n_g: 0, ..Default::default() }.validate().is_err());
        assert!(HyperParams { b_p: 0.0, ..Default::default() }.validate().is_err());
        let a = DMatrix::zeros(3, 2);
        let b = DVector::zeros(4);
        assert!(GramSystem::new(&a, &b, vec![true, true]).is_err());
    }
}
