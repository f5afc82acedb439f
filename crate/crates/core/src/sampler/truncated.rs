//! Normal distributions restricted to the nonnegative orthant.
//!
//! Low-dimensional draws use exponential tilting with the minimax-optimal
//! shift, which is exact (accept/reject against a bound on the likelihood
//! ratio). When the dimension is large or acceptance stalls, a coordinate
//! Gibbs kernel inside the orthant takes over.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Largest dimension handled by the tilted sampler.
pub const TILTING_MAX_DIM: usize = 10;
/// Proposals before declaring acceptance stalled (rate < 1e-3).
pub const MAX_PROPOSALS: usize = 1000;
/// Coordinate sweeps per fallback draw.
pub const GIBBS_SWEEPS: usize = 20;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn ln_pdf(t: f64) -> f64 {
    -0.5 * t * t - LN_SQRT_2PI
}

/// `ln P(Z > t)` for standard normal `Z`.
pub fn ln_upper_tail(t: f64) -> f64 {
    if t < 5.0 {
        (0.5 * erfc(t / SQRT_2)).ln()
    } else {
        ln_pdf(t) + mills_ratio_cf(t).ln()
    }
}

/// Mills ratio `P(Z > t) / φ(t)` by continued fraction, valid for t ≥ 5.
fn mills_ratio_cf(t: f64) -> f64 {
    // backward evaluation of t + 1/(t + 2/(t + 3/(t + …)))
    let mut acc = t;
    for k in (1..=60).rev() {
        acc = t + k as f64 / acc;
    }
    1.0 / acc
}

/// Inverse Mills ratio `φ(t) / P(Z > t)`.
pub fn inverse_mills(t: f64) -> f64 {
    if t < 5.0 {
        (ln_pdf(t) - ln_upper_tail(t)).exp()
    } else {
        1.0 / mills_ratio_cf(t)
    }
}

/// Standard normal draw conditioned on `Z ≥ lower`.
pub fn sample_upper_tail<R: Rng + ?Sized>(lower: f64, rng: &mut R) -> f64 {
    if lower < 0.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= lower {
                return z;
            }
        }
    }
    // exponential proposal with the optimal rate
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = lower + exp.sample(rng);
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}

/// Draw from `N(mean, sd²)` conditioned on the value being ≥ 0.
pub fn sample_nonnegative_1d<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    (mean + sd * sample_upper_tail(-mean / sd, rng)).max(0.0)
}

/// Which method produced a draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrawMethod {
    Direct,
    Tilted,
    Gibbs,
}

/// Exact tilted sampler for `X ~ N(0, LLᵀ)`, `X ≥ lower`.
struct Tilting {
    /// Cholesky factor with unit diagonal (rows scaled by the diagonal).
    unit: DMatrix<f64>,
    lower: DVector<f64>,
    shift: DVector<f64>,
    psi_star: f64,
}

impl Tilting {
    fn new(chol: &DMatrix<f64>, lower: &DVector<f64>) -> Option<Self> {
        let d = lower.len();
        let diag = chol.diagonal();
        let mut unit = chol.clone();
        for k in 0..d {
            for j in 0..=k {
                unit[(k, j)] /= diag[k];
            }
        }
        let lower = lower.component_div(&diag);
        let mut t = Self {
            unit,
            lower,
            shift: DVector::zeros(d),
            psi_star: 0.0,
        };
        let (x, mu) = t.solve_saddle()?;
        t.shift = mu;
        t.psi_star = t.psi(&x);
        t.psi_star.is_finite().then_some(t)
    }

    fn offsets(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = self.lower.len();
        DVector::from_fn(d, |k, _| (0..k).map(|j| self.unit[(k, j)] * x[j]).sum())
    }

    /// Log likelihood ratio bound at point `x` for the current shift.
    fn psi(&self, x: &DVector<f64>) -> f64 {
        let c = self.offsets(x);
        (0..self.lower.len())
            .map(|k| {
                let mu = self.shift[k];
                0.5 * mu * mu - x[k] * mu + ln_upper_tail(self.lower[k] - c[k] - mu)
            })
            .sum()
    }

    /// Newton iteration on the stationarity conditions of ψ in (x, μ),
    /// with the last shift and last x pinned to zero.
    fn solve_saddle(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let d = self.lower.len();
        let m = d - 1;
        let residual = |y: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
            let mut x = DVector::zeros(d);
            let mut mu = DVector::zeros(d);
            for k in 0..m {
                x[k] = y[k];
                mu[k] = y[m + k];
            }
            let c = self.offsets(&x);
            let mut mills = vec![0.0; d];
            let mut slope = vec![0.0; d];
            for k in 0..d {
                let t = self.lower[k] - c[k] - mu[k];
                let r = inverse_mills(t);
                mills[k] = r;
                slope[k] = r * (r - t);
            }
            let mut g = DVector::zeros(2 * m);
            let mut jac = DMatrix::zeros(2 * m, 2 * m);
            for j in 0..m {
                // ∂ψ/∂x_j
                g[j] = -mu[j] + (j + 1..d).map(|k| mills[k] * self.unit[(k, j)]).sum::<f64>();
                jac[(j, m + j)] = -1.0;
                for k in j + 1..m {
                    jac[(j, m + k)] = -slope[k] * self.unit[(k, j)];
                }
                for i in 0..m {
                    jac[(j, i)] = -(i.max(j) + 1..d)
                        .map(|k| slope[k] * self.unit[(k, j)] * self.unit[(k, i)])
                        .sum::<f64>();
                }
                // ∂ψ/∂μ_j
                g[m + j] = mu[j] - x[j] + mills[j];
                jac[(m + j, m + j)] = 1.0 - slope[j];
                jac[(m + j, j)] = -1.0;
                for i in 0..j {
                    jac[(m + j, i)] = -slope[j] * self.unit[(j, i)];
                }
            }
            (g, jac)
        };
        let mut y = DVector::zeros(2 * m);
        let (mut g, mut jac) = residual(&y);
        for _ in 0..100 {
            let norm = g.norm();
            if norm < 1e-10 {
                let x = DVector::from_fn(d, |k, _| if k < m { y[k] } else { 0.0 });
                let mu = DVector::from_fn(d, |k, _| if k < m { y[m + k] } else { 0.0 });
                return Some((x, mu));
            }
            let step = jac.clone().lu().solve(&g)?;
            let mut alpha = 1.0;
            loop {
                let trial = &y - &step * alpha;
                let (gt, jt) = residual(&trial);
                if gt.iter().all(|v| v.is_finite()) && gt.norm() < norm {
                    y = trial;
                    g = gt;
                    jac = jt;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-8 {
                    return None;
                }
            }
        }
        None
    }

    /// One proposal and its log ratio against the bound.
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, f64) {
        let d = self.lower.len();
        let mut z = DVector::zeros(d);
        let mut log_weight = 0.0;
        for k in 0..d {
            let c: f64 = (0..k).map(|j| self.unit[(k, j)] * z[j]).sum();
            let mu = self.shift[k];
            let bound = self.lower[k] - c - mu;
            z[k] = mu + sample_upper_tail(bound, rng);
            log_weight += 0.5 * mu * mu - z[k] * mu + ln_upper_tail(bound);
        }
        (z, log_weight - self.psi_star)
    }

    fn sample<R: Rng + ?Sized>(&self, chol: &DMatrix<f64>, rng: &mut R) -> Option<DVector<f64>> {
        for _ in 0..MAX_PROPOSALS {
            let (z, log_ratio) = self.propose(rng);
            let e: f64 = Exp::new(1.0).expect("unit rate").sample(rng);
            if -e <= log_ratio {
                return Some(chol * z);
            }
        }
        None
    }
}

/// Coordinate Gibbs inside the orthant for the precision-form density.
fn gibbs_orthant<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    precision: &DMatrix<f64>,
    start: &DVector<f64>,
    sweeps: usize,
    rng: &mut R,
) -> DVector<f64> {
    let d = mean.len();
    let mut x = start.map(|v| v.max(0.0));
    for _ in 0..sweeps {
        for k in 0..d {
            let pkk = precision[(k, k)];
            let shift: f64 = (0..d)
                .filter(|&j| j != k)
                .map(|j| precision[(k, j)] * (x[j] - mean[j]))
                .sum();
            let cond_mean = mean[k] - shift / pkk;
            x[k] = sample_nonnegative_1d(cond_mean, pkk.recip().sqrt(), rng);
        }
    }
    x
}

/// Draw from `N(mean, covariance)` restricted to `x ≥ 0`.
///
/// `start` seeds the Gibbs fallback; the orthant projection of the mean is
/// used without it.
pub fn sample_truncated_mvn_from<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    covariance: &DMatrix<f64>,
    start: Option<&DVector<f64>>,
    rng: &mut R,
) -> Result<(DVector<f64>, DrawMethod)> {
    let d = mean.len();
    if covariance.nrows() != d || covariance.ncols() != d {
        return Err(Error::Shape(format!("mean has {d} entries, covariance is {}×{}", covariance.nrows(), covariance.ncols())));
    }
    if d == 0 {
        return Ok((DVector::zeros(0), DrawMethod::Direct));
    }
    let chol = covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("covariance of dimension {d} is not positive definite")))?
        .unpack();
    if d == 1 {
        let x = sample_nonnegative_1d(mean[0], chol[(0, 0)], rng);
        return Ok((DVector::from_element(1, x), DrawMethod::Direct));
    }
    if d <= TILTING_MAX_DIM {
        if let Some(t) = Tilting::new(&chol, &(-mean)) {
            if let Some(x) = t.sample(&chol, rng) {
                return Ok(((mean + x).map(|v| v.max(0.0)), DrawMethod::Tilted));
            }
        }
        log::debug!("tilted sampler stalled in dimension {d}; using coordinate Gibbs");
    }
    let precision = chol_inverse(&chol);
    let fallback = mean.map(|v| v.max(0.0));
    let x = gibbs_orthant(mean, &precision, start.unwrap_or(&fallback), GIBBS_SWEEPS, rng);
    Ok((x, DrawMethod::Gibbs))
}

/// Draw from `N(mean, covariance)` restricted to `x ≥ 0`.
pub fn sample_truncated_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, covariance: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    sample_truncated_mvn_from(mean, covariance, None, rng).map(|(x, _)| x)
}

fn chol_inverse(lower: &DMatrix<f64>) -> DMatrix<f64> {
    let d = lower.nrows();
    let inv_l = lower
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .expect("nonzero diagonal");
    inv_l.transpose() * inv_l
}

/// Mean of the half-normal distribution with unit scale.
pub fn half_normal_mean() -> f64 {
    (2.0 / PI).sqrt()
}
