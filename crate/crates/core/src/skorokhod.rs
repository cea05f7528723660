//! Skorokhod distance between segments and the loss of the Feller property before
//! time `alpha`.
//!
//! ```text
//! d_S(phi, psi) = inf_lambda ( |phi o lambda - psi|_inf + |lambda - id|_inf )
//! ```
//!
//! The infimum is taken over piecewise-linear time changes whose breakpoints match
//! jumps of `psi` to jumps of `phi`; the result is an upper bound with a certificate.

use crate::error::{Result, SddeError};
use crate::path::{into_string, require_steps, PathView, Segment, NODE_EPS};
use crate::rng::PathSeed;
use crate::solver::{coupled_pair, SddeProblem};

/// Jumps considered per side for skip moves in the matching search.
const SKIP: usize = 3;
/// Above this many candidate pairs only the identity is tried.
const MAX_PAIRS: usize = 4096;

/// Increasing piecewise-linear homeomorphism of `[a, b]`; `knots` are `(s, lambda(s))`
/// including both endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeChange {
    pub knots: Vec<(f64, f64)>,
}

impl TimeChange {
    pub fn identity(a: f64, b: f64) -> Self {
        TimeChange {
            knots: vec![(a, a), (b, b)],
        }
    }

    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(SddeError::invalid("time change", "needs both endpoints"));
        }
        let (a, la) = knots[0];
        let (b, lb) = knots[knots.len() - 1];
        if a != la || b != lb {
            return Err(SddeError::invalid("time change", "endpoints must be fixed"));
        }
        if knots
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1))
        {
            return Err(SddeError::invalid(
                "time change",
                "must be strictly increasing",
            ));
        }
        Ok(TimeChange { knots })
    }

    pub fn apply(&self, s: f64) -> f64 {
        interp(&self.knots, s, false)
    }

    pub fn inverse(&self, t: f64) -> f64 {
        interp(&self.knots, t, true)
    }

    /// `|lambda - id|_inf`, attained at a knot.
    pub fn displacement(&self) -> f64 {
        self.knots
            .iter()
            .fold(0.0, |m, (s, t)| m.max((t - s).abs()))
    }
}

fn interp(knots: &[(f64, f64)], x: f64, inverse: bool) -> f64 {
    let key = |k: &(f64, f64)| if inverse { k.1 } else { k.0 };
    let val = |k: &(f64, f64)| if inverse { k.0 } else { k.1 };
    let i = knots.partition_point(|k| key(k) <= x);
    if i == 0 {
        return val(&knots[0]);
    }
    if i == knots.len() {
        return val(&knots[knots.len() - 1]);
    }
    let (k0, k1) = (&knots[i - 1], &knots[i]);
    let w = (x - key(k0)) / (key(k1) - key(k0));
    val(k0) + w * (val(k1) - val(k0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkorokhodBound {
    /// `|phi o lambda - psi|_inf + |lambda - id|_inf` for the certificate.
    pub upper: f64,
    pub certificate: TimeChange,
    /// `|phi - psi|_inf`.
    pub trivial: f64,
    pub lower: f64,
}

fn left_limit(view: &PathView<'_>, t: f64) -> f64 {
    view.left_limit_at(t)
}

/// `sup |phi(lambda(s)) - psi(s)|` for `s` in `[s0, s1]` with `lambda` linear there,
/// right values from `s0` on and left limits up to `s1`.
fn piece_sup(
    phi: &PathView<'_>,
    psi: &PathView<'_>,
    (s0, t0): (f64, f64),
    (s1, t1): (f64, f64),
    last: bool,
) -> f64 {
    let lam = |s: f64| t0 + (s - s0) / (s1 - s0) * (t1 - t0);
    let lam_inv = |t: f64| s0 + (t - t0) / (t1 - t0) * (s1 - s0);
    let mut pts: Vec<f64> = Vec::new();
    let inside = |x: f64, a: f64, b: f64| x > a && x < b;
    for k in 0..psi.values.len() {
        let s = psi.node_time(k);
        if inside(s, s0, s1) {
            pts.push(s);
        }
    }
    for j in psi.jumps {
        if inside(j.time, s0, s1) {
            pts.push(j.time);
        }
    }
    for k in 0..phi.values.len() {
        let t = phi.node_time(k);
        if inside(t, t0, t1) {
            pts.push(lam_inv(t));
        }
    }
    for j in phi.jumps {
        if inside(j.time, t0, t1) {
            pts.push(lam_inv(j.time));
        }
    }
    let mut m = (phi.value_at(t0) - psi.value_at(s0)).abs();
    m = m.max((left_limit(phi, t1) - left_limit(psi, s1)).abs());
    if last {
        m = m.max((phi.value_at(t1) - psi.value_at(s1)).abs());
    }
    for s in pts {
        let t = lam(s);
        m = m.max((phi.value_at(t) - psi.value_at(s)).abs());
        m = m.max((left_limit(phi, t) - left_limit(psi, s)).abs());
    }
    m
}

/// Exact `|phi o lambda - psi|_inf + |lambda - id|_inf` for a piecewise-linear `lambda`.
pub fn evaluate_time_change(phi: &Segment, psi: &Segment, lambda: &TimeChange) -> Result<f64> {
    check_pair(phi, psi)?;
    let (pv, qv) = (phi.view(), psi.view());
    let k = &lambda.knots;
    let mut m: f64 = 0.0;
    for i in 0..k.len() - 1 {
        m = m.max(piece_sup(&pv, &qv, k[i], k[i + 1], i + 2 == k.len()));
    }
    Ok(m + lambda.displacement())
}

fn check_pair(phi: &Segment, psi: &Segment) -> Result<()> {
    psi.check_span(phi.alpha())?;
    if (phi.h - psi.h).abs() > NODE_EPS * phi.h {
        return Err(SddeError::invalid(
            "segments",
            "segments use different grids",
        ));
    }
    Ok(())
}

/// Jump-displacement lower bound: `lambda` fixes the endpoints, and a jump of `psi`
/// at `q` of size `d` is either carried to a jump of `phi` at `p` (cost `|p - q|`
/// plus half the size mismatch) or left unmatched (cost `|d|/2`); symmetrically
/// for the jumps of `phi`.
pub fn skorokhod_lower_bound(phi: &Segment, psi: &Segment) -> Result<f64> {
    check_pair(phi, psi)?;
    let a = -phi.alpha();
    let mut lb = (phi.value_at(a) - psi.value_at(a))
        .abs()
        .max((phi.value_at(0.0) - psi.value_at(0.0)).abs());
    for (x, y) in [(phi, psi), (psi, phi)] {
        for q in &y.jumps {
            let mut best = q.size.abs() / 2.0;
            for p in &x.jumps {
                best = best.min((p.time - q.time).abs() + (p.size - q.size).abs() / 2.0);
            }
            lb = lb.max(best);
        }
    }
    Ok(lb)
}

/// Certified upper bound on `d_S(phi, psi)`, the trivial sup-norm bound and a lower bound.
pub fn skorokhod_distance(phi: &Segment, psi: &Segment) -> Result<SkorokhodBound> {
    check_pair(phi, psi)?;
    let a = -phi.alpha();
    let b = 0.0;
    let (pv, qv) = (phi.view(), psi.view());
    let trivial = phi
        .values
        .iter()
        .zip(&psi.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        .max(evaluate_time_change(phi, psi, &TimeChange::identity(a, b))?);
    let lower = skorokhod_lower_bound(phi, psi)?;

    // breakpoints (psi time, phi time); jumps at the right endpoint match only each other
    let pj: Vec<f64> = phi
        .jumps
        .iter()
        .map(|j| j.time)
        .filter(|&t| t < b)
        .collect();
    let qj: Vec<f64> = psi
        .jumps
        .iter()
        .map(|j| j.time)
        .filter(|&t| t < b)
        .collect();
    let mut best = (trivial, TimeChange::identity(a, b));
    if !pj.is_empty() && !qj.is_empty() && pj.len() * qj.len() <= MAX_PAIRS {
        let mut ds: Vec<f64> = pj
            .iter()
            .flat_map(|p| qj.iter().map(move |q| (p - q).abs()))
            .filter(|&d| d < best.0)
            .collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        for d in ds {
            if d >= best.0 {
                break;
            }
            if let Some((sup, knots)) = bottleneck(&pv, &qv, &pj, &qj, d, (a, b)) {
                let lambda = TimeChange::new(knots)?;
                let v = sup + lambda.displacement();
                if v < best.0 {
                    best = (v, lambda);
                }
            }
        }
    }
    let upper = evaluate_time_change(phi, psi, &best.1)?;
    Ok(SkorokhodBound {
        upper,
        certificate: best.1,
        trivial,
        lower,
    })
}

/// Matching of jumps with displacement `<= d` minimizing the largest piece sup-norm.
fn bottleneck(
    phi: &PathView<'_>,
    psi: &PathView<'_>,
    pj: &[f64],
    qj: &[f64],
    d: f64,
    (a, b): (f64, f64),
) -> Option<(f64, Vec<(f64, f64)>)> {
    // state 0 = start, state (i, j) + 1 = psi jump j matched to phi jump i
    let (m, k) = (pj.len(), qj.len());
    let idx = |i: usize, j: usize| 1 + i * k + j;
    let n = 1 + m * k;
    let point = |s: usize| -> (f64, f64) {
        if s == 0 {
            (a, a)
        } else {
            let (i, j) = ((s - 1) / k, (s - 1) % k);
            (qj[j], pj[i])
        }
    };
    let ok = |i: usize, j: usize| (pj[i] - qj[j]).abs() <= d;
    let mut cost = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    cost[0] = 0.0;
    let mut best_end = (f64::INFINITY, usize::MAX);
    for s in 0..n {
        if !cost[s].is_finite() {
            continue;
        }
        let (i0, j0) = if s == 0 {
            (0, 0)
        } else {
            ((s - 1) / k + 1, (s - 1) % k + 1)
        };
        let from = point(s);
        for i in i0..(i0 + SKIP).min(m) {
            for j in j0..(j0 + SKIP).min(k) {
                if !ok(i, j) {
                    continue;
                }
                let to = point(idx(i, j));
                let c = cost[s].max(piece_sup(phi, psi, from, to, false));
                if c < cost[idx(i, j)] {
                    cost[idx(i, j)] = c;
                    prev[idx(i, j)] = s;
                }
            }
        }
        let c = cost[s].max(piece_sup(phi, psi, from, (b, b), true));
        if c < best_end.0 {
            best_end = (c, s);
        }
    }
    if best_end.1 == usize::MAX {
        return None;
    }
    let mut knots = vec![(b, b)];
    let mut s = best_end.1;
    while s != 0 {
        knots.push(point(s));
        s = prev[s];
    }
    knots.push((a, a));
    knots.reverse();
    Some((best_end.0, knots))
}

/// `f(psi) = |psi(-alpha)| ∧ 1`.
pub fn feller_test_functional(seg: &Segment) -> f64 {
    seg.first().abs().min(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FellerReport {
    pub n: usize,
    pub beta: f64,
    pub alpha: f64,
    /// Bounds on `d_S(phi_n, phi_inf)`.
    pub initial_upper: f64,
    pub initial_lower: f64,
    /// `|f(X^n_t) - f(X^inf_t)|` at `t = alpha - beta`.
    pub gap_before: f64,
    /// Same at `t = alpha`.
    pub gap_at_alpha: f64,
    /// Largest gap over grid times in `[alpha, T]`.
    pub gap_after: f64,
    /// `sup |X^n - X^inf|` over the segments at `t = alpha`.
    pub segment_distance_at_alpha: f64,
}

impl FellerReport {
    /// CSV with columns `n,d_s_upper,d_s_lower,gap_before,gap_at_alpha,gap_after`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "d_s_upper",
            "d_s_lower",
            "gap_before",
            "gap_at_alpha",
            "gap_after",
        ])?;
        w.write_record([
            self.n.to_string(),
            self.initial_upper.to_string(),
            self.initial_lower.to_string(),
            self.gap_before.to_string(),
            self.gap_at_alpha.to_string(),
            self.gap_after.to_string(),
        ])?;
        into_string(w)
    }
}

/// Solves from `phi_n = 1_[-beta(1 - 1/n), 0]` and `phi_inf = 1_[-beta, 0]` on shared
/// noise and compares `f` on their segments. `template` supplies `mu`, `F`, `L`, `h`
/// and `T >= alpha`; its initial segment is ignored.
pub fn feller_counterexample(
    beta: f64,
    n: usize,
    template: &SddeProblem,
    seed: impl Into<PathSeed>,
) -> Result<FellerReport> {
    let alpha = template.mu.alpha();
    let h = template.h;
    if !(beta > 0.0 && beta < alpha) {
        return Err(SddeError::invalid(
            "beta",
            format!("need 0 < beta < alpha = {alpha}"),
        ));
    }
    if n < 2 {
        return Err(SddeError::invalid("n", "need n >= 2"));
    }
    if template.t_end < alpha * (1.0 - NODE_EPS) {
        return Err(SddeError::invalid("T", "horizon must reach alpha"));
    }
    let before = alpha - beta;
    require_steps("alpha - beta", before, h)?;
    let phi_n = Segment::indicator(alpha, h, -beta * (1.0 - 1.0 / n as f64))?;
    let phi_inf = Segment::indicator(alpha, h, -beta)?;
    let d = skorokhod_distance(&phi_n, &phi_inf)?;
    let (xn, xi) = coupled_pair(template, &phi_n, &phi_inf, seed)?;
    let gap = |t: f64| -> Result<f64> {
        let a = feller_test_functional(&xn.segment_at(t, alpha)?);
        let b = feller_test_functional(&xi.segment_at(t, alpha)?);
        Ok((a - b).abs())
    };
    let na = require_steps("alpha", alpha, h)?;
    let mut gap_after: f64 = 0.0;
    for k in 2 * na..xn.len() {
        gap_after = gap_after
            .max((xn.values[k - na].abs().min(1.0) - xi.values[k - na].abs().min(1.0)).abs());
    }
    let sa = xn.segment_at(alpha, alpha)?;
    let sb = xi.segment_at(alpha, alpha)?;
    let segment_distance_at_alpha = sa
        .values
        .iter()
        .zip(&sb.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(FellerReport {
        n,
        beta,
        alpha,
        initial_upper: d.upper,
        initial_lower: d.lower,
        gap_before: gap(before)?,
        gap_at_alpha: gap(alpha)?,
        gap_after,
        segment_distance_at_alpha,
    })
}
