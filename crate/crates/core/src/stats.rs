//! Summary statistics shared by the harness and the acceptance checks.
//! Standard deviations use the population convention (divide by `n`).

use alloc::vec::Vec;

use crate::math;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    math::sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

/// Sample standard error of the mean (`n - 1` denominator).
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = mean(xs);
    math::sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) / n)
}

/// Standard error of a difference of two independent means.
pub fn pooled_standard_error(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb) = (standard_error(a), standard_error(b));
    math::sqrt(sa * sa + sb * sb)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|&v| math::ln(v)).collect();
    let ly: Vec<f64> = y.iter().map(|&v| math::ln(v)).collect();
    linear_fit(&lx, &ly).0
}

/// Divides by the mean of the first three values.
pub fn normalize_to_head(ys: &[f64]) -> Vec<f64> {
    let head = mean(&ys[..ys.len().min(3)]);
    ys.iter().map(|y| y / head).collect()
}
