//! Second-order moments of the stationary solution with constant-in-law `F`:
//!
//! ```text
//! Var X(0) = E[F(X)(0)^2] (sigma^2 + int x^2 nu(dx)) |r|^2
//! c(h)     = Var X(0) / |r|^2 * int_0^inf r(s) r(s + h) ds
//! S(xi)    = E[X(0)^2] / (|r|^2 |chi(i xi)|^2),   c(h) = int e^{i h xi} S(xi) dxi / (2 pi)
//! ```

use num_complex::Complex64;

use crate::delay_measure::DelayMeasure;
use crate::error::{Result, SddeError};
use crate::fundamental::FundamentalSolution;
use crate::levy::{LevyTriplet, MomentValue};
use crate::path::into_string;

use super::Estimate;

pub fn analytic_variance(fs: &FundamentalSolution, levy: &LevyTriplet, ef2: f64) -> Result<f64> {
    if !(ef2 >= 0.0) || !ef2.is_finite() {
        return Err(SddeError::invalid(
            "EF2",
            "must be a finite non-negative number",
        ));
    }
    let q = match levy.second_moment_rate() {
        MomentValue::Finite(q) => q,
        MomentValue::Infinite => {
            return Err(SddeError::InfiniteMoment {
                what: "second moment of the jump measure",
            })
        }
    };
    if ef2 == 0.0 {
        return Ok(0.0);
    }
    Ok(ef2 * q * fs.l2_norm_sq()?.value)
}

/// `c(lag)`; symmetric in `lag`.
pub fn analytic_covariance(fs: &FundamentalSolution, var0: f64, lag: f64) -> Result<f64> {
    let norm = fs.l2_norm_sq()?.value;
    if lag == 0.0 {
        return Ok(var0);
    }
    Ok(var0 * fs.conv_rr(lag.abs())?.value / norm)
}

pub fn analytic_spectral_density(
    fs: &FundamentalSolution,
    mu: &DelayMeasure,
    ex2: f64,
    xi: f64,
) -> Result<f64> {
    let chi = mu.char_function(Complex64::new(0.0, xi));
    if chi.norm() < 1e-12 * (1.0 + xi.abs()) {
        return Err(SddeError::SpectralSingularity { xi });
    }
    Ok(ex2 / (fs.l2_norm_sq()?.value * chi.norm_sqr()))
}

/// `int e^{i lag xi} S(xi) dxi / (2 pi)` by Simpson's rule on `[0, xi_max]` plus the
/// `C/xi^2` tail of `S` in closed form.
pub fn spectral_inverse(
    fs: &FundamentalSolution,
    mu: &DelayMeasure,
    ex2: f64,
    lag: f64,
    xi_max: f64,
    dxi: f64,
) -> Result<f64> {
    let mut n = (xi_max / dxi).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let d = xi_max / n as f64;
    let norm = fs.l2_norm_sq()?.value;
    let s = |xi: f64| -> Result<f64> {
        let chi = mu.char_function(Complex64::new(0.0, xi));
        if chi.norm() < 1e-12 * (1.0 + xi.abs()) {
            return Err(SddeError::SpectralSingularity { xi });
        }
        Ok(ex2 / (norm * chi.norm_sqr()) * (lag * xi).cos())
    };
    let mut acc = s(0.0)? + s(xi_max)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * s(i as f64 * d)?;
    }
    let body = acc * d / 3.0;
    let c = ex2 / norm;
    let tail = if lag == 0.0 {
        c / xi_max
    } else {
        -c * (lag * xi_max).sin() / (lag * xi_max * xi_max)
    };
    Ok((body + tail) / std::f64::consts::PI)
}

/// Where `E[F(X)(0)^2]` came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ef2Source {
    /// `F` constant, `EF2 = m^2`.
    Exact,
    Supplied,
    /// Plugged in from simulated `F` values.
    Empirical,
}

impl std::fmt::Display for Ef2Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ef2Source::Exact => "exact",
            Ef2Source::Supplied => "supplied",
            Ef2Source::Empirical => "empirical",
        })
    }
}

/// Analytic second-order description with optional empirical counterparts.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderReport {
    pub var0: f64,
    pub ef2: f64,
    pub ef2_source: Ef2Source,
    /// `mean_rate` of `L` when nonzero; the formulas then describe the recentred process.
    pub recentred_drift: Option<f64>,
    pub lags: Vec<f64>,
    pub covariance: Vec<f64>,
    pub empirical: Option<Vec<Estimate>>,
    pub xis: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub periodogram: Option<Vec<f64>>,
}

impl SecondOrderReport {
    pub fn new(
        fs: &FundamentalSolution,
        levy: &LevyTriplet,
        ef2: f64,
        ef2_source: Ef2Source,
        lags: &[f64],
        xis: &[f64],
    ) -> Result<Self> {
        let var0 = analytic_variance(fs, levy, ef2)?;
        let covariance = lags
            .iter()
            .map(|&l| analytic_covariance(fs, var0, l))
            .collect::<Result<Vec<_>>>()?;
        let spectrum = xis
            .iter()
            .map(|&x| analytic_spectral_density(fs, &fs.mu, var0, x))
            .collect::<Result<Vec<_>>>()?;
        let recentred_drift = match levy.mean_rate() {
            MomentValue::Finite(m) if m != 0.0 => Some(m),
            _ => None,
        };
        Ok(SecondOrderReport {
            var0,
            ef2,
            ef2_source,
            recentred_drift,
            lags: lags.to_vec(),
            covariance,
            empirical: None,
            xis: xis.to_vec(),
            spectrum,
            periodogram: None,
        })
    }

    /// CSV with columns `lag,analytic,empirical,se`.
    pub fn covariance_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lag", "analytic", "empirical", "se"])?;
        for (i, (l, c)) in self.lags.iter().zip(&self.covariance).enumerate() {
            let (e, se) = match &self.empirical {
                Some(v) => (v[i].value.to_string(), v[i].se.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([l.to_string(), c.to_string(), e, se])?;
        }
        into_string(w)
    }

    /// CSV with columns `xi,analytic,periodogram`.
    pub fn spectrum_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["xi", "analytic", "periodogram"])?;
        for (i, (x, s)) in self.xis.iter().zip(&self.spectrum).enumerate() {
            let p = match &self.periodogram {
                Some(v) => v[i].to_string(),
                None => String::new(),
            };
            w.write_record([x.to_string(), s.to_string(), p])?;
        }
        into_string(w)
    }
}
