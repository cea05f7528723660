use rayon::prelude::*;

use crate::error::{Result, SddeError};
use crate::levy::check_assumptions;
use crate::path::{into_string, require_steps, Segment, NODE_EPS};
use crate::rng::PathSeed;
use crate::solver::{solve_observed, SddeProblem};

use super::estimators::{estimate_autocovariance, Estimate};

/// Runs `f` for every replicate index in parallel; results come back in index order
/// and the first failing index wins.
pub(crate) fn replicate_map<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = (0..n).into_par_iter().map(&f).collect();
    out.into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| SddeError::Replicate {
                replicate: i,
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KbOptions {
    /// Defaults to `20 / (-v0)` when `v0 < 0`, else `10 alpha`.
    pub burn_in: Option<f64>,
    /// Sampling window after burn-in.
    pub horizon: f64,
    /// Defaults to `alpha`.
    pub spacing: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Keep the segment at every n-th sample.
    pub segment_every: Option<usize>,
}

impl KbOptions {
    pub fn new(horizon: f64, replicates: usize, seed: u64) -> Self {
        KbOptions {
            burn_in: None,
            horizon,
            spacing: None,
            replicates,
            seed,
            segment_every: None,
        }
    }
}

/// Occupation samples of the segment process after burn-in.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    pub spacing: f64,
    pub burn_in: f64,
    /// `X(t_j)` per replicate, `t_j = burn_in + j * spacing`.
    pub series: Vec<Vec<f64>>,
    pub segments: Vec<Segment>,
    /// Pooled mean of `F(X)(t-)^2` over the sample times.
    pub ef2: f64,
    /// Set when the standing assumptions are not known to hold.
    pub warning: Option<String>,
}

impl EmpiricalMeasure {
    pub fn len(&self) -> usize {
        self.series.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pooled(&self) -> Vec<f64> {
        self.series.iter().flatten().copied().collect()
    }

    pub fn mean(&self) -> f64 {
        self.series.iter().flatten().sum::<f64>() / self.len().max(1) as f64
    }

    pub fn variance(&self) -> Result<Estimate> {
        Ok(estimate_autocovariance(&self.series, &[0])?[0])
    }

    /// Autocovariance at time lags, each a multiple of the spacing.
    pub fn autocovariance(&self, lags: &[f64]) -> Result<Vec<Estimate>> {
        let idx = lags
            .iter()
            .map(|&l| require_steps("lag", l, self.spacing))
            .collect::<Result<Vec<_>>>()?;
        estimate_autocovariance(&self.series, &idx)
    }

    /// Empirical `q`-quantile of the pooled samples.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut xs = self.pooled();
        xs.sort_by(f64::total_cmp);
        if xs.is_empty() {
            return f64::NAN;
        }
        let i = ((xs.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        xs[i]
    }

    /// CSV with columns `lo,hi,count,density` over `bins` equal bins.
    pub fn histogram_csv(&self, bins: usize) -> Result<String> {
        let xs = self.pooled();
        if xs.is_empty() || bins == 0 {
            return Err(SddeError::TooFewSamples {
                what: "histogram",
                needed: 1,
                have: xs.len(),
            });
        }
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
        let mut counts = vec![0usize; bins];
        for x in &xs {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lo", "hi", "count", "density"])?;
        for (i, c) in counts.iter().enumerate() {
            let a = lo + i as f64 * width;
            w.write_record([
                a.to_string(),
                (a + width).to_string(),
                c.to_string(),
                (*c as f64 / (xs.len() as f64 * width)).to_string(),
            ])?;
        }
        into_string(w)
    }
}

/// Time-averaged occupation measure of the solution started from `p.phi`.
pub fn krylov_bogoliubov(p: &SddeProblem, opts: &KbOptions) -> Result<EmpiricalMeasure> {
    let alpha = p.mu.alpha();
    let h = p.h;
    let report = check_assumptions(&p.mu, &p.levy, &p.f);
    let warning = if report.all_hold() {
        None
    } else {
        Some(format!(
            "stationarity assumptions not established: {}",
            report.failures().join("; ")
        ))
    };
    let burn_in = match opts.burn_in {
        Some(b) => b,
        None => match report.v0 {
            Some(v) if v.value() < 0.0 => 20.0 / -v.value(),
            _ => 10.0 * alpha,
        },
    };
    let spacing = opts.spacing.unwrap_or(alpha);
    let stride = require_steps("spacing", spacing, h)?;
    if stride == 0 {
        return Err(SddeError::invalid("spacing", "must be at least one step"));
    }
    if opts.replicates == 0 {
        return Err(SddeError::invalid(
            "replicates",
            "need at least one replicate",
        ));
    }
    let burn_steps = ((burn_in / h) - NODE_EPS).ceil().max(0.0) as usize;
    let burn_steps = burn_steps.div_ceil(stride) * stride;
    let burn_in = burn_steps as f64 * h;
    let count = (opts.horizon / spacing + NODE_EPS).floor() as usize;
    if count == 0 {
        return Err(SddeError::invalid(
            "horizon",
            "shorter than one sampling interval",
        ));
    }
    let total = burn_steps + count * stride;
    let run = p.with_horizon(total as f64 * h)?;

    let per = replicate_map(opts.replicates, |i| {
        let mut xs = Vec::with_capacity(count);
        let mut fsq = 0.0;
        let mut segs = Vec::new();
        solve_observed(&run, PathSeed::new(opts.seed, i as u64), |info| {
            if info.k <= burn_steps || (info.k - burn_steps) % stride != 0 {
                return Ok(());
            }
            let v = info.view.values[info.view.last_node()];
            if let Some(every) = opts.segment_every {
                if every > 0 && xs.len() % every == 0 {
                    segs.push(info.view.segment_ending(alpha)?);
                }
            }
            xs.push(v);
            let f = info.f_prev.unwrap_or(0.0);
            fsq += f * f;
            Ok(())
        })?;
        Ok((xs, fsq, segs))
    })?;
    let mut series = Vec::with_capacity(per.len());
    let mut segments = Vec::new();
    let mut fsq = 0.0;
    for (xs, f, s) in per {
        series.push(xs);
        fsq += f;
        segments.extend(s);
    }
    let n: usize = series.iter().map(Vec::len).sum();
    Ok(EmpiricalMeasure {
        spacing,
        burn_in,
        series,
        segments,
        ef2: fsq / n.max(1) as f64,
        warning,
    })
}
