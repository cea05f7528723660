//! Empirical second-order statistics of sampled series.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, SddeError};

/// Number of batches used for every batch-means standard error.
pub const BATCHES: usize = 30;

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Mean of `xs` with a batch-means standard error over `BATCHES` contiguous batches.
pub fn batch_means(xs: &[f64]) -> Result<Estimate> {
    let n = xs.len();
    if n < BATCHES {
        return Err(SddeError::TooFewSamples {
            what: "batch means",
            needed: BATCHES,
            have: n,
        });
    }
    let b = n / BATCHES;
    let means: Vec<f64> = (0..BATCHES)
        .map(|i| xs[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let value = xs.iter().sum::<f64>() / n as f64;
    let bm = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(Estimate {
        value,
        se: (var / BATCHES as f64).sqrt(),
    })
}

fn pooled_mean(series: &[Vec<f64>]) -> f64 {
    let n: usize = series.iter().map(Vec::len).sum();
    series.iter().flatten().sum::<f64>() / n.max(1) as f64
}

/// Biased autocovariance `c(l) = (1/n) sum (x_i - m)(x_{i+l} - m)` at integer lags,
/// pooled over independent series with a common mean. Standard errors come from
/// batch means of the lag-product series.
pub fn estimate_autocovariance(series: &[Vec<f64>], lags: &[usize]) -> Result<Vec<Estimate>> {
    let shortest = series.iter().map(Vec::len).min().unwrap_or(0);
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if series.is_empty() || shortest <= max_lag + BATCHES {
        return Err(SddeError::TooFewSamples {
            what: "autocovariance",
            needed: max_lag + BATCHES + 1,
            have: shortest,
        });
    }
    let m = pooled_mean(series);
    let total: usize = series.iter().map(Vec::len).sum();
    lags.iter()
        .map(|&l| {
            let mut prods = Vec::with_capacity(total);
            for s in series {
                prods.extend(s.windows(l + 1).map(|w| (w[0] - m) * (w[l] - m)));
            }
            let est = batch_means(&prods)?;
            let scale = prods.len() as f64 / total as f64;
            Ok(Estimate {
                value: est.value * scale,
                se: est.se * scale,
            })
        })
        .collect()
}

/// Autocovariances `c(0..=max_lag)` of one series through a zero-padded FFT.
pub fn autocovariance_fft(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = xs.len();
    if n <= max_lag {
        return Err(SddeError::TooFewSamples {
            what: "autocovariance",
            needed: max_lag + 1,
            have: n,
        });
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = xs
        .iter()
        .map(|x| Complex64::new(x - m, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let norm = (size * n) as f64;
    Ok(buf[..=max_lag].iter().map(|z| z.re / norm).collect())
}

/// Blackman-Tukey spectral estimate with a Bartlett lag window of `max_lag` samples:
///
/// ```text
/// S(xi) = dt * [c(0) + 2 sum_{l=1}^{M} (1 - l/M) c(l) cos(xi l dt)]
/// ```
///
/// normalised so that `c(h) = int e^{i h xi} S(xi) dxi / (2 pi)`. Series are averaged
/// autocovariance-wise before smoothing.
pub fn periodogram(series: &[Vec<f64>], dt: f64, max_lag: usize, xis: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(SddeError::TooFewSamples {
            what: "periodogram",
            needed: 1,
            have: 0,
        });
    }
    if max_lag == 0 {
        return Err(SddeError::invalid(
            "max_lag",
            "bandwidth must be at least one lag",
        ));
    }
    let mut c = vec![0.0; max_lag + 1];
    let mut weight = 0.0;
    for s in series {
        let cs = autocovariance_fft(s, max_lag)?;
        let w = s.len() as f64;
        for (a, b) in c.iter_mut().zip(&cs) {
            *a += w * b;
        }
        weight += w;
    }
    for a in c.iter_mut() {
        *a /= weight;
    }
    let m = max_lag as f64;
    Ok(xis
        .iter()
        .map(|&xi| {
            let mut acc = c[0];
            for (l, cl) in c.iter().enumerate().skip(1) {
                acc += 2.0 * (1.0 - l as f64 / m) * cl * (xi * l as f64 * dt).cos();
            }
            dt * acc
        })
        .collect())
}
