//! Fundamental solution `r` of `x'(t) = int x(t+s) mu(ds)` with `r(0) = 1`,
//! `r = 0` on negative times, and the deterministic solution `x(t, phi)`.
//!
//! `r` is integrated with Heun's method. The right side jumps whenever an atom of
//! `mu` crosses the discontinuity of `r` at zero, so the predictor uses the
//! right-continuous drift and the corrector its left limit. On the density part
//! the node sitting on the jump takes the value `1/2` (both adjacent cells
//! integrated exactly).

use crate::delay_measure::{v0, Abscissa, DelayMeasure, DriftStencil};
use crate::error::{Result, SddeError};
use crate::path::{into_string, require_steps, GridPath, Segment, NODE_EPS};

/// Values beyond this are treated as overflow of an unstable equation.
const OVERFLOW: f64 = 1e150;
/// Samples below this are excluded from the decay fit.
const FIT_FLOOR: f64 = 1e-14;
/// Time points used by the representation-formula self-check.
const SELF_CHECK_POINTS: usize = 256;

/// Envelope `|r(t)| <= c e^{-beta t}` on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub beta: f64,
}

/// A quadrature value with a bound on the truncated tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub tail_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalSolution {
    pub mu: DelayMeasure,
    pub h: f64,
    pub t_end: f64,
    pub r: Vec<f64>,
    pub rdot: Vec<f64>,
    pub decay: DecayFit,
    /// First time at which `r` overflowed; samples stop there.
    pub overflow_at: Option<f64>,
}

/// Horizon long enough for the tail of `r` to be negligible.
pub fn default_horizon(mu: &DelayMeasure, abscissa: Abscissa) -> f64 {
    let base = 10.0 * mu.alpha();
    let v = abscissa.value();
    if v < 0.0 {
        base.max(40.0 / -v)
    } else {
        base
    }
}

/// `compute_r` on the default horizon.
pub fn compute_r_default(mu: &DelayMeasure, h: f64) -> Result<FundamentalSolution> {
    let a = v0(mu, 1e-8)?;
    let t = default_horizon(mu, a);
    let n = (t / mu.alpha()).ceil();
    compute_r(mu, n * mu.alpha(), h)
}

/// Value of `r` at node offset `tau` (in steps) as seen from a drift evaluation.
/// `side` selects the convention at `tau = 0`.
#[derive(Clone, Copy, PartialEq)]
enum AtZero {
    Right,
    Left,
}

fn drift_r(st: &DriftStencil, r: &[f64], k: usize, next: Option<f64>, side: AtZero) -> f64 {
    let val = |idx: usize| -> f64 {
        if idx == r.len() {
            next.expect("predicted value")
        } else {
            r[idx]
        }
    };
    let mut acc = 0.0;
    for e in &st.atoms {
        let pos = k as f64 - e.offset as f64 - e.frac;
        if pos < 0.0 {
            continue;
        }
        let v = if e.frac == 0.0 {
            let idx = k - e.offset;
            if idx == 0 && side == AtZero::Left {
                0.0
            } else {
                val(idx)
            }
        } else {
            let hi = k - e.offset;
            val(hi) * (1.0 - e.frac) + val(hi - 1) * e.frac
        };
        acc += e.weight * v;
    }
    for &(j, w) in &st.density {
        if j > k {
            continue;
        }
        let idx = k - j;
        let v = if idx == 0 {
            if j == 0 {
                0.0
            } else if j == st.steps {
                1.0
            } else {
                0.5
            }
        } else {
            val(idx)
        };
        acc += w * v;
    }
    acc
}

/// Integrates `r` on `[0, t_end]` with step `h`.
pub fn compute_r(mu: &DelayMeasure, t_end: f64, h: f64) -> Result<FundamentalSolution> {
    let alpha = mu.alpha();
    if !(h > 0.0) || h > alpha / 8.0 * (1.0 + NODE_EPS) {
        return Err(SddeError::invalid(
            "h",
            format!("need 0 < h <= alpha/8 = {}", alpha / 8.0),
        ));
    }
    if !(t_end >= alpha * (1.0 - NODE_EPS)) {
        return Err(SddeError::invalid(
            "T",
            format!("need T >= alpha = {alpha}"),
        ));
    }
    let st = mu.stencil(h)?;
    let n = require_steps("T", t_end, h)?;
    let mut r = Vec::with_capacity(n + 1);
    let mut rdot = Vec::with_capacity(n + 1);
    r.push(1.0);
    let mut overflow_at = None;
    for k in 0..n {
        let d = drift_r(&st, &r, k, None, AtZero::Right);
        rdot.push(d);
        let pred = r[k] + h * d;
        let d1 = drift_r(&st, &r, k + 1, Some(pred), AtZero::Left);
        let next = r[k] + 0.5 * h * (d + d1);
        if !next.is_finite() || next.abs() > OVERFLOW {
            overflow_at = Some((k + 1) as f64 * h);
            break;
        }
        r.push(next);
    }
    let last = r.len() - 1;
    rdot.push(drift_r(&st, &r, last, None, AtZero::Right));
    let decay = fit_decay(&r, h);
    Ok(FundamentalSolution {
        mu: mu.clone(),
        h,
        t_end: last as f64 * h,
        r,
        rdot,
        decay,
        overflow_at,
    })
}

fn regress(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn fit_decay(r: &[f64], h: f64) -> DecayFit {
    let n = r.len() - 1;
    let pts = |from: usize, to: usize| -> Vec<(f64, f64)> {
        (from..=to)
            .filter(|&k| r[k].abs() >= FIT_FLOOR)
            .map(|k| (k as f64 * h, r[k].abs().ln()))
            .collect()
    };
    let mut p = pts(n / 2, n);
    if p.len() < 8 {
        // r fell below the floor early: fit on the back half of what is left
        let last = (0..=n)
            .rev()
            .find(|&k| r[k].abs() >= FIT_FLOOR)
            .unwrap_or(0);
        p = pts(last / 2, last);
    }
    let beta = regress(&p).map(|s| -s).unwrap_or(0.0);
    let c = r
        .iter()
        .enumerate()
        .map(|(k, v)| v.abs() * (beta * k as f64 * h).exp())
        .fold(0.0, f64::max);
    DecayFit { c, beta }
}

impl FundamentalSolution {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `r(t)` by linear interpolation; zero for `t < 0`.
    pub fn r_at(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(0.0);
        }
        let x = t / self.h;
        let n = self.r.len() - 1;
        if x > n as f64 * (1.0 + NODE_EPS) + NODE_EPS {
            return Err(SddeError::OutOfSpan {
                t,
                start: 0.0,
                end: self.t_end,
            });
        }
        let k = (x.floor() as usize).min(n);
        let f = x - k as f64;
        if k == n || f <= NODE_EPS {
            Ok(self.r[k])
        } else {
            Ok(self.r[k] * (1.0 - f) + self.r[k + 1] * f)
        }
    }

    fn require_decay(&self) -> Result<f64> {
        let b = self.decay.beta;
        if !(b > 0.0) || self.overflow_at.is_some() {
            return Err(SddeError::Divergence {
                reason: format!("fitted decay rate beta = {b} is not positive"),
            });
        }
        Ok(b)
    }

    fn trapezoid(&self, f: impl Fn(usize) -> f64, upto: usize) -> f64 {
        if upto == 0 {
            return 0.0;
        }
        let mut acc = 0.5 * (f(0) + f(upto));
        for k in 1..upto {
            acc += f(k);
        }
        acc * self.h
    }

    /// `int_0^inf r^2`.
    pub fn l2_norm_sq(&self) -> Result<Integral> {
        let beta = self.require_decay()?;
        let n = self.r.len() - 1;
        let c = self.decay.c;
        Ok(Integral {
            value: self.trapezoid(|k| self.r[k] * self.r[k], n),
            tail_bound: c * c * (-2.0 * beta * self.t_end).exp() / (2.0 * beta),
        })
    }

    /// `int_0^inf r(s) r(s + lag) ds` for `lag >= 0`.
    pub fn conv_rr(&self, lag: f64) -> Result<Integral> {
        let beta = self.require_decay()?;
        if !(lag >= 0.0) || lag >= self.t_end {
            return Err(SddeError::invalid(
                "lag",
                format!("need 0 <= lag < T = {}", self.t_end),
            ));
        }
        let n = self.r.len() - 1;
        let x = lag / self.h;
        let m = x.floor() as usize;
        let f = x - m as f64;
        let upto = n - m - usize::from(f > NODE_EPS);
        let shifted = |k: usize| {
            if f <= NODE_EPS {
                self.r[k + m]
            } else {
                self.r[k + m] * (1.0 - f) + self.r[k + m + 1] * f
            }
        };
        let value = self.trapezoid(|k| self.r[k] * shifted(k), upto);
        let c = self.decay.c;
        let t = upto as f64 * self.h;
        Ok(Integral {
            value,
            tail_bound: c * c * (-beta * (2.0 * t + lag)).exp() / (2.0 * beta),
        })
    }

    /// `int_0^inf rdot^2`.
    pub fn l2_norm_sq_dot(&self) -> Result<Integral> {
        let beta = self.require_decay()?;
        let n = self.rdot.len() - 1;
        let cd = self
            .rdot
            .iter()
            .enumerate()
            .map(|(k, v)| v.abs() * (beta * k as f64 * self.h).exp())
            .fold(0.0, f64::max);
        Ok(Integral {
            value: self.trapezoid(|k| self.rdot[k] * self.rdot[k], n),
            tail_bound: cd * cd * (-2.0 * beta * self.t_end).exp() / (2.0 * beta),
        })
    }

    /// CSV with columns `t,r,rdot`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "r", "rdot"])?;
        for (k, (r, d)) in self.r.iter().zip(&self.rdot).enumerate() {
            w.write_record([
                (k as f64 * self.h).to_string(),
                r.to_string(),
                d.to_string(),
            ])?;
        }
        into_string(w)
    }
}

/// Tolerance for the agreement of the two evaluations of `x(t, phi)`.
pub fn self_check_tolerance(mu: &DelayMeasure, phi: &Segment, t_end: f64, r_max: f64) -> f64 {
    let tv = mu.total_variation();
    let s = phi.sup_norm();
    phi.h * s * r_max.max(1.0) * tv * (1.0 + tv * t_end) + 1e-12 * s
}

/// `x(t, phi)` on `[-alpha, t_end]` (the initial segment glued in front), by forward
/// integration and checked against the representation through `r`.
pub fn deterministic_solution(
    mu: &DelayMeasure,
    phi: &Segment,
    t_end: f64,
    h: f64,
) -> Result<GridPath> {
    phi.check_span(mu.alpha())?;
    if (phi.h - h).abs() > NODE_EPS * h {
        return Err(SddeError::invalid(
            "h",
            "initial segment must use the solver step",
        ));
    }
    let t_fs = t_end.max(mu.alpha());
    let fs = compute_r(mu, t_fs, h)?;
    if let Some(t) = fs.overflow_at {
        return Err(SddeError::BlowUp { t });
    }
    let direct = integrate_direct(mu, phi, t_end, h)?;
    let n0 = phi.steps();
    let nt = direct.len() - 1 - n0;
    let r_max = fs.r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = self_check_tolerance(mu, phi, t_end, r_max);
    let stride = nt.div_ceil(SELF_CHECK_POINTS).max(1);
    let mut worst: f64 = 0.0;
    let mut k = 0;
    while k <= nt {
        let rep = represent(mu, phi, &fs, k)?;
        worst = worst.max((rep - direct.values[n0 + k]).abs());
        k += stride;
    }
    if worst > 10.0 * tol {
        return Err(SddeError::SelfCheck {
            what: "x(t, phi): forward integration vs representation",
            diff: worst,
            allowed: 10.0 * tol,
        });
    }
    Ok(direct)
}

pub(crate) fn integrate_direct(
    mu: &DelayMeasure,
    phi: &Segment,
    t_end: f64,
    h: f64,
) -> Result<GridPath> {
    let st = mu.stencil(h)?;
    let n0 = phi.steps();
    let nt = require_steps("T", t_end, h)?;
    let mut x = Vec::with_capacity(n0 + nt + 1);
    x.extend_from_slice(&phi.values);
    // left limits at the initial nodes, for the corrector
    let view = phi.view();
    let xl: Vec<f64> = (0..=n0)
        .map(|j| view.left_limit_at(view.node_time(j)))
        .collect();
    for g in n0..n0 + nt {
        let d = st.apply_at(&x, g);
        let pred = x[g] + h * d;
        let d1 = st.apply_with(|off| {
            let idx = g + 1 - off;
            if idx == g + 1 {
                pred
            } else if idx <= n0 {
                xl[idx]
            } else {
                x[idx]
            }
        });
        let next = x[g] + 0.5 * h * (d + d1);
        if !next.is_finite() {
            return Err(SddeError::BlowUp {
                t: (g + 1 - n0) as f64 * h,
            });
        }
        x.push(next);
    }
    GridPath::new(-phi.alpha(), h, x, phi.jumps.clone())
}

/// `r` at index `idx` inside a trapezoid sum whose argument decreases along the
/// sum; the jump at zero gets 0 at the first node, 1 at the last, else 1/2.
fn r_in_sum(fs: &FundamentalSolution, idx: isize, first: bool, last: bool) -> f64 {
    if idx < 0 {
        0.0
    } else if idx == 0 {
        match (first, last) {
            (true, _) => 0.0,
            (false, true) => 1.0,
            _ => 0.5,
        }
    } else {
        fs.r[idx as usize]
    }
}

/// `int_{-m h}^0 r(t_k - m h - v) phi(v) dv` by the trapezoid rule on the grid.
fn inner(fs: &FundamentalSolution, phi: &Segment, k: usize, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n0 = phi.steps();
    let mut acc = 0.0;
    // v = -m h + j h, r argument index k - j
    for j in 0..=m {
        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
        let idx = k as isize - j as isize;
        let r = r_in_sum(fs, idx, j == 0, j == m);
        acc += w * r * phi.values[n0 - m + j];
    }
    acc * fs.h
}

/// `x(t_k, phi)` through `phi(0) r(t) + int int_s^0 r(t + s - u) phi(u) du mu(ds)`.
fn represent(mu: &DelayMeasure, phi: &Segment, fs: &FundamentalSolution, k: usize) -> Result<f64> {
    let h = fs.h;
    let mut acc = phi.last() * fs.r[k];
    for a in mu.atoms() {
        if a.weight == 0.0 {
            continue;
        }
        let pos = -a.location / h;
        let m = (pos + NODE_EPS).floor();
        let f = pos - m;
        let m = m as usize;
        let v = if f <= NODE_EPS || m >= phi.steps() {
            inner(fs, phi, k, m.min(phi.steps()))
        } else {
            inner(fs, phi, k, m) * (1.0 - f) + inner(fs, phi, k, m + 1) * f
        };
        acc += a.weight * v;
    }
    if mu.density().is_some() {
        let n0 = phi.steps();
        for m in 0..=n0 {
            let w = if m == 0 || m == n0 { 0.5 * h } else { h };
            acc += w * mu.density_at(-(m as f64) * h) * inner(fs, phi, k, m);
        }
    }
    Ok(acc)
}
