//! Càdlàg paths on a uniform grid.
//!
//! A path is stored as node values `X(t_k)` plus explicit jump marks. Between two
//! nodes the continuous part is linear, jumps are added at their exact times:
//!
//! ```text
//! X(s) = X(t_k) + (s - t_k)/h * (X(t_{k+1}) - X(t_k) - J_k) + sum_{t_k < tau <= s} dX(tau)
//! ```
//!
//! where `J_k` is the total jump mass in `(t_k, t_{k+1}]`. A jump that falls exactly
//! on a node belongs to the step that ends there, so node values are right-continuous.

use crate::error::{Result, SddeError};
use crate::rng::PathSeed;

/// Relative slack used when deciding whether a time sits on a grid node.
pub(crate) const NODE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// Number of grid steps covering `len`, if `len` is an integer multiple of `h`.
pub fn steps_in(len: f64, h: f64) -> Option<usize> {
    if !(h > 0.0) || !(len >= 0.0) || !len.is_finite() {
        return None;
    }
    let n = (len / h).round();
    if (n * h - len).abs() <= NODE_EPS * h.max(len) {
        Some(n as usize)
    } else {
        None
    }
}

pub(crate) fn require_steps(name: &'static str, len: f64, h: f64) -> Result<usize> {
    steps_in(len, h).ok_or_else(|| {
        SddeError::invalid(
            name,
            format!("{len} is not an integer multiple of the step {h}"),
        )
    })
}

/// Borrowed window onto a grid path, optionally ending at an off-grid `tip`.
///
/// The tip carries the left limit `X(tau-)` at a time strictly after the last
/// node; it is how the solver exposes the pre-jump state inside a step.
#[derive(Clone, Copy, Debug)]
pub struct PathView<'a> {
    pub t0: f64,
    pub h: f64,
    pub values: &'a [f64],
    pub jumps: &'a [Jump],
    /// `qv_prefix[k]` = realized quadratic variation accumulated over steps `0..k`.
    pub qv_prefix: Option<&'a [f64]>,
    pub tip: Option<(f64, f64)>,
}

impl<'a> PathView<'a> {
    pub fn new(t0: f64, h: f64, values: &'a [f64], jumps: &'a [Jump]) -> Self {
        PathView {
            t0,
            h,
            values,
            jumps,
            qv_prefix: None,
            tip: None,
        }
    }

    #[inline]
    pub fn node_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    #[inline]
    pub fn last_node(&self) -> usize {
        self.values.len() - 1
    }

    pub fn end_time(&self) -> f64 {
        match self.tip {
            Some((t, _)) => t,
            None => self.node_time(self.last_node()),
        }
    }

    /// Jumps with time in `(a, b]`.
    pub fn jumps_in(&self, a: f64, b: f64) -> &'a [Jump] {
        let lo = self.jumps.partition_point(|j| j.time <= a);
        let hi = self.jumps.partition_point(|j| j.time <= b);
        if hi <= lo {
            &self.jumps[0..0]
        } else {
            &self.jumps[lo..hi]
        }
    }

    fn jump_mass(&self, a: f64, b: f64) -> f64 {
        self.jumps_in(a, b).iter().map(|j| j.size).sum()
    }

    /// Left limit at the end of the view, `X(t-)`.
    pub fn left_limit_at_end(&self) -> f64 {
        match self.tip {
            Some((_, v)) => v,
            None => {
                let k = self.last_node();
                let t = self.node_time(k);
                let at_t: f64 = self
                    .jumps_in(t - NODE_EPS * self.h, t)
                    .iter()
                    .filter(|j| (j.time - t).abs() <= NODE_EPS * self.h)
                    .map(|j| j.size)
                    .sum();
                self.values[k] - at_t
            }
        }
    }

    /// Grid cell containing `s`: node index `k` and fractional offset in `[0, 1)`.
    /// A time within `NODE_EPS` of a node snaps onto it.
    #[inline]
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let x = (s - self.t0) / self.h;
        let r = x.round();
        if (x - r).abs() <= NODE_EPS {
            let k = (r.max(0.0) as usize).min(self.last_node());
            return (k, 0.0);
        }
        let k = x.floor().max(0.0) as usize;
        let k = k.min(self.last_node());
        (k, (x - k as f64).clamp(0.0, 1.0))
    }

    /// Linear interpolation between the knots (nodes and tip), ignoring jump marks.
    /// This is the evaluation rule for delayed point values in drift and functionals.
    pub fn interp(&self, s: f64) -> f64 {
        let last = self.last_node();
        if let Some((tt, tv)) = self.tip {
            let tl = self.node_time(last);
            if s >= tl {
                if s >= tt {
                    return tv;
                }
                let w = (s - tl) / (tt - tl);
                return self.values[last] * (1.0 - w) + tv * w;
            }
        }
        let (k, f) = self.locate(s);
        if f == 0.0 || k == last {
            self.values[k]
        } else {
            self.values[k] * (1.0 - f) + self.values[k + 1] * f
        }
    }

    /// Right-continuous value of the càdlàg path at `s` (jump marks honoured).
    pub fn value_at(&self, s: f64) -> f64 {
        let last = self.last_node();
        let tl = self.node_time(last);
        if let Some((tt, tv)) = self.tip {
            if s >= tl {
                if s >= tt {
                    return tv;
                }
                let inner = self.jump_mass(tl, tt);
                let w = (s - tl) / (tt - tl);
                return self.values[last]
                    + w * (tv - self.values[last] - inner)
                    + self.jump_mass(tl, s);
            }
        }
        let (k, f) = self.locate(s);
        if f == 0.0 || k == last {
            return self.values[k];
        }
        let a = self.node_time(k);
        let b = self.node_time(k + 1);
        let inner = self.jump_mass(a, b);
        self.values[k] + f * (self.values[k + 1] - self.values[k] - inner) + self.jump_mass(a, s)
    }

    /// `X(s-)`.
    pub fn left_limit_at(&self, s: f64) -> f64 {
        let near = self
            .jumps
            .iter()
            .filter(|j| (j.time - s).abs() <= NODE_EPS * self.h);
        let (mut at, mut snap) = (0.0, s);
        for j in near {
            at += j.size;
            snap = snap.max(j.time);
        }
        self.value_at(snap) - at
    }

    /// Realized quadratic variation over the grid steps whose endpoints lie in `[a, b]`:
    /// squared continuous increments plus squared jump marks.
    pub fn realized_qv(&self, a: f64, b: f64) -> f64 {
        let x0 = (a - self.t0) / self.h;
        let x1 = (b - self.t0) / self.h;
        let i0 = (x0 - NODE_EPS).ceil().max(0.0) as usize;
        let i1 = ((x1 + NODE_EPS).floor().max(0.0) as usize).min(self.last_node());
        if i1 <= i0 {
            return 0.0;
        }
        if let Some(p) = self.qv_prefix {
            return p[i1] - p[i0];
        }
        let mut qv = 0.0;
        for k in i0..i1 {
            qv += self.step_qv(k);
        }
        qv
    }

    /// The segment `u -> X(t + u)` on `[-alpha, 0]` with `t` the last node.
    pub fn segment_ending(&self, alpha: f64) -> Result<Segment> {
        let n = require_steps("alpha", alpha, self.h)?;
        let k = self.last_node();
        if k < n {
            return Err(SddeError::InsufficientHistory {
                needed: self.node_time(k) - alpha,
                start: self.t0,
            });
        }
        let tk = self.node_time(k);
        let ta = self.node_time(k - n);
        let jumps = self
            .jumps_in(ta + NODE_EPS * self.h, tk + NODE_EPS * self.h)
            .iter()
            .map(|j| Jump {
                time: j.time - tk,
                size: j.size,
            })
            .collect();
        Ok(Segment {
            h: self.h,
            values: self.values[k - n..=k].to_vec(),
            jumps,
        })
    }

    /// QV contribution of the step `k -> k+1`.
    pub fn step_qv(&self, k: usize) -> f64 {
        let a = self.node_time(k);
        let b = self.node_time(k + 1);
        let js = self.jumps_in(a, b);
        let mass: f64 = js.iter().map(|j| j.size).sum();
        let cont = self.values[k + 1] - self.values[k] - mass;
        cont * cont + js.iter().map(|j| j.size * j.size).sum::<f64>()
    }
}

/// A càdlàg path sampled on the uniform grid `t0 + k*h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub t0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub jumps: Vec<Jump>,
    /// Seed of the noise realization that produced the path, if any.
    pub seed: Option<PathSeed>,
}

impl GridPath {
    pub fn new(t0: f64, h: f64, values: Vec<f64>, jumps: Vec<Jump>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(SddeError::invalid("h", "step must be positive"));
        }
        if values.is_empty() {
            return Err(SddeError::invalid("values", "path needs at least one node"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SddeError::NonFinite {
                what: "path values",
            });
        }
        let end = t0 + (values.len() - 1) as f64 * h;
        if jumps.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(SddeError::invalid(
                "jumps",
                "jump marks must be time ordered",
            ));
        }
        if let Some(j) = jumps
            .iter()
            .find(|j| j.time <= t0 - NODE_EPS * h || j.time > end + NODE_EPS * h)
        {
            return Err(SddeError::OutOfSpan {
                t: j.time,
                start: t0,
                end,
            });
        }
        Ok(GridPath {
            t0,
            h,
            values,
            jumps,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn view(&self) -> PathView<'_> {
        PathView::new(self.t0, self.h, &self.values, &self.jumps)
    }

    /// Node index of grid time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.h;
        let r = x.round();
        if (x - r).abs() > NODE_EPS * x.abs().max(1.0) || r < 0.0 || r as usize >= self.values.len()
        {
            return Err(SddeError::OutOfSpan {
                t,
                start: self.t0,
                end: self.t_end(),
            });
        }
        Ok(r as usize)
    }

    /// View of the path restricted to `[t0, t]` for a grid time `t`.
    pub fn view_until(&self, t: f64) -> Result<PathView<'_>> {
        let k = self.index_of(t)?;
        let end = self.time(k);
        let nj = self
            .jumps
            .partition_point(|j| j.time <= end + NODE_EPS * self.h);
        Ok(PathView::new(
            self.t0,
            self.h,
            &self.values[..=k],
            &self.jumps[..nj],
        ))
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        if t < self.t0 - NODE_EPS * self.h || t > self.t_end() + NODE_EPS * self.h {
            return Err(SddeError::OutOfSpan {
                t,
                start: self.t0,
                end: self.t_end(),
            });
        }
        Ok(self.view().value_at(t))
    }

    /// The segment `u -> X(t + u)`, `u` in `[-alpha, 0]`, with jump marks preserved.
    pub fn segment_at(&self, t: f64, alpha: f64) -> Result<Segment> {
        let n = require_steps("alpha", alpha, self.h)?;
        let k = self.index_of(t)?;
        if k < n {
            return Err(SddeError::OutOfSpan {
                t: t - alpha,
                start: self.t0,
                end: self.t_end(),
            });
        }
        let tk = self.time(k);
        let ta = self.time(k - n);
        let jumps = self
            .view()
            .jumps_in(ta + NODE_EPS * self.h, tk + NODE_EPS * self.h)
            .iter()
            .map(|j| Jump {
                time: j.time - tk,
                size: j.size,
            })
            .collect();
        Ok(Segment {
            h: self.h,
            values: self.values[k - n..=k].to_vec(),
            jumps,
        })
    }

    /// The same path with its time axis moved by `s`.
    pub fn shifted(&self, s: f64) -> GridPath {
        GridPath {
            t0: self.t0 + s,
            h: self.h,
            values: self.values.clone(),
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    time: j.time + s,
                    size: j.size,
                })
                .collect(),
            seed: self.seed,
        }
    }

    /// `sup |X - Y|` over common nodes; both paths must share the grid.
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        if self.values.len() != other.values.len()
            || (self.h - other.h).abs() > NODE_EPS * self.h
            || (self.t0 - other.t0).abs() > NODE_EPS * self.h
        {
            return Err(SddeError::SpanMismatch {
                expected: self.t_end() - self.t0,
                found: other.t_end() - other.t0,
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV with columns `t,X,jump`; `jump` is 1 when a jump mark falls in the step
    /// ending at that node.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "X", "jump"])?;
        let view = self.view();
        for (k, v) in self.values.iter().enumerate() {
            let t = self.time(k);
            let flag = k > 0 && !view.jumps_in(t - self.h, t).is_empty();
            w.write_record([t.to_string(), v.to_string(), (flag as u8).to_string()])?;
        }
        into_string(w)
    }
}

pub(crate) fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| SddeError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| SddeError::Io(e.to_string()))
}

/// A path window on `[-alpha, 0]`: the state of the segment process.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub h: f64,
    pub values: Vec<f64>,
    /// Jump marks with relative times in `(-alpha, 0]`.
    pub jumps: Vec<Jump>,
}

impl Segment {
    pub fn from_values(h: f64, values: Vec<f64>) -> Result<Self> {
        Self::with_jumps(h, values, Vec::new())
    }

    pub fn with_jumps(h: f64, values: Vec<f64>, mut jumps: Vec<Jump>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(SddeError::invalid("h", "step must be positive"));
        }
        if values.len() < 2 {
            return Err(SddeError::invalid(
                "values",
                "segment needs at least two nodes",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SddeError::NonFinite {
                what: "segment values",
            });
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        let alpha = (values.len() - 1) as f64 * h;
        if let Some(j) = jumps
            .iter()
            .find(|j| j.time <= -alpha + NODE_EPS * h || j.time > NODE_EPS * h)
        {
            return Err(SddeError::OutOfSpan {
                t: j.time,
                start: -alpha,
                end: 0.0,
            });
        }
        Ok(Segment { h, values, jumps })
    }

    pub fn constant(alpha: f64, h: f64, value: f64) -> Result<Self> {
        let n = require_steps("alpha", alpha, h)?;
        Self::from_values(h, vec![value; n + 1])
    }

    /// Continuous segment sampled from `f` at the nodes.
    pub fn from_fn(alpha: f64, h: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = require_steps("alpha", alpha, h)?;
        let values = (0..=n).map(|k| f(-alpha + k as f64 * h)).collect();
        Self::from_values(h, values)
    }

    /// The indicator `1_[start, 0]`, carrying a unit jump mark at `start`.
    pub fn indicator(alpha: f64, h: f64, start: f64) -> Result<Self> {
        let n = require_steps("alpha", alpha, h)?;
        if start > 0.0 {
            return Err(SddeError::invalid("start", "indicator start must be <= 0"));
        }
        let values: Vec<f64> = (0..=n)
            .map(|k| {
                let t = -alpha + k as f64 * h;
                if t >= start - NODE_EPS * h {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let jumps = if start > -alpha + NODE_EPS * h {
            vec![Jump {
                time: start,
                size: 1.0,
            }]
        } else {
            Vec::new()
        };
        Self::with_jumps(h, values, jumps)
    }

    pub fn alpha(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn view(&self) -> PathView<'_> {
        PathView::new(-self.alpha(), self.h, &self.values, &self.jumps)
    }

    pub fn value_at(&self, u: f64) -> f64 {
        self.view().value_at(u)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("segment is non-empty")
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_span(&self, alpha: f64) -> Result<()> {
        if (self.alpha() - alpha).abs() > NODE_EPS * alpha.max(self.h) {
            return Err(SddeError::SpanMismatch {
                expected: alpha,
                found: self.alpha(),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Segment {
        Segment {
            h: self.h,
            values: self.values.iter().map(|v| v * c).collect(),
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    time: j.time,
                    size: j.size * c,
                })
                .collect(),
        }
    }

    /// As a grid path starting at `-alpha`.
    pub fn to_path(&self) -> GridPath {
        GridPath {
            t0: -self.alpha(),
            h: self.h,
            values: self.values.clone(),
            jumps: self.jumps.clone(),
            seed: None,
        }
    }
}
