//! Stationary solutions that are not unique in law:
//!
//! ```text
//! dX = -aX dt + sqrt(clamp((2/alpha) [X]_{t-alpha}^{t-alpha/2}, 1, 2)) dW
//! ```
//!
//! Started from a stationary OU segment with diffusion `sigma`, the realized QV over
//! the window is `sigma^2 alpha / 2`, so `F = sigma` and `X` stays an OU process with
//! variance `sigma^2 / (2a)`, for every `sigma` in `[1, sqrt 2]`.

use crate::delay_measure::DelayMeasure;
use crate::error::{Result, SddeError};
use crate::functional::DiffusionFunctional;
use crate::levy::LevyTriplet;
use crate::path::{into_string, require_steps};
use crate::rng::PathSeed;
use crate::solver::{solve_observed, stationary_ou_segment, SddeProblem};

use super::estimators::{Estimate, BATCHES};
use super::kb::replicate_map;

#[derive(Clone, Debug, PartialEq)]
pub struct NonUniqueOptions {
    pub sigmas: Vec<f64>,
    pub a: f64,
    /// Delay horizon; the QV window is `alpha / 2` long.
    pub alpha: f64,
    pub t_end: f64,
    pub h: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Spacing of the variance samples.
    pub spacing: f64,
}

impl Default for NonUniqueOptions {
    fn default() -> Self {
        NonUniqueOptions {
            sigmas: vec![1.0, 1.2, std::f64::consts::SQRT_2],
            a: 1.0,
            alpha: 20.0,
            t_end: 50.0,
            h: 1e-3,
            replicates: 100,
            seed: 0,
            spacing: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaRow {
    pub sigma: f64,
    /// `sigma^2 / (2a)`.
    pub target: f64,
    /// `max_t |F(X)(t) - sigma|` over `[0, T]` and all replicates.
    pub sup_f_dev: f64,
    /// `E X^2` of the centred process.
    pub variance: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonUniqueReport {
    pub rows: Vec<SigmaRow>,
    /// Variance of the last `sigma` over the first, with a batch-means error.
    pub ratio: Estimate,
    pub expected_ratio: f64,
}

impl NonUniqueReport {
    /// CSV with columns `sigma,target,variance,se,sup_f_dev`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sigma", "target", "variance", "se", "sup_f_dev"])?;
        for r in &self.rows {
            w.write_record([
                r.sigma.to_string(),
                r.target.to_string(),
                r.variance.value.to_string(),
                r.variance.se.to_string(),
                r.sup_f_dev.to_string(),
            ])?;
        }
        into_string(w)
    }
}

fn problem(o: &NonUniqueOptions, phi: crate::path::Segment) -> Result<SddeProblem> {
    SddeProblem::new(
        DelayMeasure::point(o.alpha, 0.0, -o.a)?,
        DiffusionFunctional::clamped_qv(o.alpha)?,
        LevyTriplet::wiener(1.0)?,
        phi,
        o.t_end,
        o.h,
    )
}

/// Batch means of squares, one per batch, over the concatenated replicate series.
fn batch_squares(series: &[Vec<f64>]) -> Vec<f64> {
    let sq: Vec<f64> = series.iter().flatten().map(|x| x * x).collect();
    let b = sq.len() / BATCHES;
    (0..BATCHES)
        .map(|i| sq[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect()
}

fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        value: m,
        se: (v / n).sqrt(),
    }
}

/// Runs every `sigma` on common random numbers: replicate `i` uses the same Gaussian
/// draws for its initial segment and its driving noise at every `sigma`.
pub fn nonuniqueness_demo(o: &NonUniqueOptions) -> Result<NonUniqueReport> {
    if o.sigmas.len() < 2 {
        return Err(SddeError::invalid(
            "sigmas",
            "need at least two diffusion levels",
        ));
    }
    for &s in &o.sigmas {
        if !(1.0..=std::f64::consts::SQRT_2 + 1e-12).contains(&s) {
            return Err(SddeError::invalid(
                "sigmas",
                format!("{s} is outside [1, sqrt 2]"),
            ));
        }
    }
    if o.replicates == 0 {
        return Err(SddeError::invalid(
            "replicates",
            "need at least one replicate",
        ));
    }
    let stride = require_steps("spacing", o.spacing, o.h)?;
    // validates grid and QV window before any work
    problem(o, crate::path::Segment::constant(o.alpha, o.h, 0.0)?)?;

    let mut rows = Vec::new();
    let mut squares = Vec::new();
    for &sigma in &o.sigmas {
        let per = replicate_map(o.replicates, |i| {
            let seed = PathSeed::new(o.seed, i as u64);
            let phi = stationary_ou_segment(o.a, sigma, o.alpha, o.h, seed)?;
            let p = problem(o, phi)?;
            let mut dev: f64 = 0.0;
            let mut xs = Vec::new();
            solve_observed(&p, seed, |info| {
                if let Some(f) = info.f_prev {
                    dev = dev.max((f - sigma).abs());
                }
                if info.k % stride == 0 {
                    xs.push(info.view.values[info.view.last_node()]);
                }
                Ok(())
            })?;
            Ok((dev, xs))
        })?;
        let sup_f_dev = per.iter().map(|r| r.0).fold(0.0, f64::max);
        let series: Vec<Vec<f64>> = per.into_iter().map(|r| r.1).collect();
        let total: usize = series.iter().map(Vec::len).sum();
        if total < BATCHES {
            return Err(SddeError::TooFewSamples {
                what: "non-uniqueness variance",
                needed: BATCHES,
                have: total,
            });
        }
        let bs = batch_squares(&series);
        rows.push(SigmaRow {
            sigma,
            target: sigma * sigma / (2.0 * o.a),
            sup_f_dev,
            variance: mean_se(&bs),
        });
        squares.push(bs);
    }
    let first = &squares[0];
    let last = &squares[squares.len() - 1];
    let ratios: Vec<f64> = last.iter().zip(first).map(|(l, f)| l / f).collect();
    let r = mean_se(&ratios);
    let s0 = o.sigmas[0];
    let s1 = o.sigmas[o.sigmas.len() - 1];
    let pooled = rows[rows.len() - 1].variance.value / rows[0].variance.value;
    Ok(NonUniqueReport {
        rows,
        ratio: Estimate {
            value: pooled,
            se: r.se,
        },
        expected_ratio: (s1 * s1) / (s0 * s0),
    })
}
