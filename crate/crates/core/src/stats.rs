//! Order-fixed reductions. Every mean in the crate goes through the pairwise
//! tree below so that results depend only on the per-item values and their
//! index order, never on how work was scheduled.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Pairwise (cascade) sum with a fixed split point at `len / 2`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => xs.iter().fold(0.0, |a, &x| a + x),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => xs[0],
        n if n <= 8 => xs.iter().fold(Complex64::new(0.0, 0.0), |a, &x| a + x),
        n => pairwise_sum_complex(&xs[..n / 2]) + pairwise_sum_complex(&xs[n / 2..]),
    }
}

/// Sample mean and standard error of a real sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealStats {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl RealStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 {
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Complex sample mean with the standard error of `|Z − E Z|`, i.e.
/// `sqrt(Var Re + Var Im) / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexStats {
    pub mean: Complex64,
    pub std_err: f64,
    pub n: usize,
}

impl ComplexStats {
    pub fn from_samples(zs: &[Complex64]) -> Self {
        let n = zs.len();
        if n == 0 {
            return Self {
                mean: Complex64::new(f64::NAN, f64::NAN),
                std_err: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum_complex(zs) / n as f64;
        let dev: Vec<f64> = zs.iter().map(|z| (z - mean).norm_sqr()).collect();
        let var = if n > 1 {
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Median and an arbitrary quantile (nearest-rank) of a sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
