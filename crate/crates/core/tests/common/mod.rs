//! Helpers shared by the integration tests.
#![allow(dead_code)]

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Standard normal CDF from the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// CDF of `N(mean, sd²)` restricted to `[0, ∞)`.
pub fn truncated_normal_cdf(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    let lo = normal_cdf(-mean / sd);
    move |x| {
        if x <= 0.0 {
            0.0
        } else {
            (normal_cdf((x - mean) / sd) - lo) / (1.0 - lo)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
