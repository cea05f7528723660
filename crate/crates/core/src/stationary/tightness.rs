use crate::error::{Result, SddeError};
use crate::path::{into_string, require_steps, PathView, NODE_EPS};
use crate::rng::PathSeed;
use crate::solver::{solve_observed, SddeProblem};

use super::kb::replicate_map;

/// Exceedance frequencies `P(|X(t)| > K)` and `P(sup_{[t - alpha, t]} |X| > K)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TightnessTable {
    pub checkpoints: Vec<f64>,
    pub k_grid: Vec<f64>,
    /// `[checkpoint][K]`
    pub marginal: Vec<Vec<f64>>,
    pub segment: Vec<Vec<f64>>,
    pub replicates: usize,
    /// Replicates that blew up; they count as exceeding every `K` from then on.
    pub blow_ups: usize,
    /// Exceedance is non-increasing in `K` at every checkpoint.
    pub monotone_in_k: bool,
    /// Marginal exceedance at the largest `K` grows from the first to the last checkpoint
    /// by more than `3` standard errors plus `0.02`.
    pub growth: bool,
}

impl TightnessTable {
    fn se(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }

    /// `last - first` marginal exceedance at the largest `K`, with its standard error.
    pub fn growth_margin(&self) -> (f64, f64) {
        let j = self.k_grid.len() - 1;
        let first = self.marginal[0][j];
        let last = self.marginal[self.marginal.len() - 1][j];
        (last - first, self.se(first).hypot(self.se(last)))
    }

    /// CSV with columns `t,K,marginal,segment`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "K", "marginal", "segment"])?;
        for (i, t) in self.checkpoints.iter().enumerate() {
            for (j, k) in self.k_grid.iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    k.to_string(),
                    self.marginal[i][j].to_string(),
                    self.segment[i][j].to_string(),
                ])?;
            }
        }
        into_string(w)
    }
}

/// `sup |X|` over the last `n` steps of the view, jump left limits included.
fn window_sup(view: &PathView<'_>, n: usize) -> f64 {
    let k = view.last_node();
    let k0 = k.saturating_sub(n);
    let mut m = view.values[k0..=k]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let a = view.node_time(k0);
    let b = view.node_time(k);
    for j in view.jumps_in(a, b) {
        let after = view.value_at(j.time);
        m = m.max(after.abs()).max((after - j.size).abs());
    }
    m
}

pub fn tightness_diagnostic(
    p: &SddeProblem,
    checkpoints: &[f64],
    k_grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<TightnessTable> {
    if checkpoints.is_empty() || k_grid.is_empty() || replicates == 0 {
        return Err(SddeError::invalid(
            "tightness",
            "need checkpoints, thresholds and at least one replicate",
        ));
    }
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SddeError::invalid(
            "tightness",
            "checkpoints and K must increase",
        ));
    }
    let h = p.h;
    let steps = checkpoints
        .iter()
        .map(|&t| require_steps("checkpoint", t, h))
        .collect::<Result<Vec<_>>>()?;
    let seg_steps = require_steps("alpha", p.mu.alpha(), h)?;
    let run = p.with_horizon(*checkpoints.last().unwrap())?;
    let nc = checkpoints.len();

    // per replicate: (|X(t_c)|, segment sup) at every checkpoint reached, and a blow-up flag
    let per = replicate_map(replicates, |i| {
        let mut vals: Vec<(f64, f64)> = Vec::with_capacity(nc);
        let res = solve_observed(&run, PathSeed::new(seed, i as u64), |info| {
            if vals.len() < nc && info.k == steps[vals.len()] {
                let v = info.view.values[info.view.last_node()].abs();
                vals.push((v, window_sup(&info.view, seg_steps)));
            }
            Ok(())
        });
        match res {
            Ok(()) => Ok((vals, false)),
            Err(SddeError::BlowUp { .. }) => Ok((vals, true)),
            Err(e) => Err(e),
        }
    })?;

    let mut marginal = vec![vec![0.0; k_grid.len()]; nc];
    let mut segment = vec![vec![0.0; k_grid.len()]; nc];
    let mut blow_ups = 0;
    for (vals, blew) in &per {
        blow_ups += usize::from(*blew);
        for c in 0..nc {
            for (j, &k) in k_grid.iter().enumerate() {
                let (m, s) = match vals.get(c) {
                    Some(&(v, s)) => (v > k || !v.is_finite(), s > k || !s.is_finite()),
                    None => (true, true),
                };
                marginal[c][j] += f64::from(u8::from(m));
                segment[c][j] += f64::from(u8::from(s));
            }
        }
    }
    let n = replicates as f64;
    for row in marginal.iter_mut().chain(segment.iter_mut()) {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    let monotone_in_k = marginal
        .iter()
        .chain(&segment)
        .all(|row| row.windows(2).all(|w| w[1] <= w[0] + NODE_EPS));
    let mut table = TightnessTable {
        checkpoints: checkpoints.to_vec(),
        k_grid: k_grid.to_vec(),
        marginal,
        segment,
        replicates,
        blow_ups,
        monotone_in_k,
        growth: false,
    };
    let (d, se) = table.growth_margin();
    table.growth = d > 3.0 * se + 0.02;
    Ok(table)
}
