use crate::delay_measure::DriftStencil;
use crate::error::{Result, SddeError};
use crate::functional::DiffusionFunctional;
use crate::levy::NoiseSource;
use crate::path::{GridPath, Jump, PathView, NODE_EPS};

use super::{DriftScheme, SddeProblem};

/// What an observer sees at a grid node `t_k = k h`, `k >= 0`.
#[derive(Clone, Copy, Debug)]
pub struct NodeInfo<'a> {
    pub k: usize,
    pub t: f64,
    /// Window ending at `t_k`, reaching back at least `alpha`.
    pub view: PathView<'a>,
    /// `F(X)(t_{k-1}-)`, the coefficient used on the step that ended at `t_k`.
    pub f_prev: Option<f64>,
}

enum Drift {
    Euler(DriftStencil),
    /// `mu = -a delta_0` with deterministic continuous noise: exact flow between jumps.
    Decay(f64),
}

impl Drift {
    /// Extra history the drift needs behind the current node.
    fn reach(&self) -> usize {
        match self {
            Drift::Euler(st) => st
                .atoms
                .iter()
                .map(|e| e.offset + 1)
                .chain(st.density.iter().map(|d| d.0))
                .max()
                .unwrap_or(0),
            Drift::Decay(_) => 0,
        }
    }
}

/// `(1 - e^{-a d}) / (a d)`, the mean of `e^{-a s}` over `[0, d]`.
fn flow_weight(a: f64, d: f64) -> f64 {
    let x = a * d;
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

pub(crate) struct Engine<'p> {
    p: &'p SddeProblem,
    drift: Drift,
    record: bool,
    keep: usize,
    /// Global node index of `values[0]`; node `g` sits at `-alpha + g h`.
    base: usize,
    values: Vec<f64>,
    qv: Vec<f64>,
    jumps: Vec<Jump>,
}

impl<'p> Engine<'p> {
    pub(crate) fn new(p: &'p SddeProblem, record: bool) -> Result<Self> {
        p.validate()?;
        let h = p.h;
        let drift = match (p.scheme, p.mu.as_instantaneous()) {
            (DriftScheme::Auto, Some(a)) if p.levy.sigma2 == 0.0 => Drift::Decay(a),
            _ => Drift::Euler(p.mu.stencil(h)?),
        };
        let f_reach = (p.f.horizon() / h - NODE_EPS).ceil().max(0.0) as usize;
        let keep = drift.reach().max(f_reach) + 2;
        let view = p.phi.view();
        let n0 = p.phi.steps();
        let mut qv = Vec::with_capacity(n0 + 1);
        qv.push(0.0);
        for k in 0..n0 {
            let last = qv[k];
            qv.push(last + view.step_qv(k));
        }
        let cap = if record {
            n0 + p.steps() + 1
        } else {
            4 * keep + 4096
        };
        let mut values = Vec::with_capacity(cap);
        values.extend_from_slice(&p.phi.values);
        Ok(Engine {
            p,
            drift,
            record,
            keep,
            base: 0,
            values,
            qv,
            jumps: p.phi.jumps.clone(),
        })
    }

    fn t0(&self) -> f64 {
        -self.p.phi.alpha() + self.base as f64 * self.p.h
    }

    fn view_to(&self, i: usize) -> PathView<'_> {
        PathView {
            t0: self.t0(),
            h: self.p.h,
            values: &self.values[..=i],
            jumps: &self.jumps,
            qv_prefix: Some(&self.qv[..=i]),
            tip: None,
        }
    }

    fn eval_f(f: &DiffusionFunctional, view: &PathView<'_>) -> Result<f64> {
        if let crate::functional::FunctionalKind::Constant(m) = f.kind() {
            return Ok(*m);
        }
        f.evaluate_view(view)
    }

    fn compact(&mut self) {
        let len = self.values.len();
        if self.record || len < 2 * self.keep + 4096 {
            return;
        }
        let drop = len - self.keep;
        self.values.drain(..drop);
        self.qv.drain(..drop);
        self.base += drop;
        let cut = self.t0() - NODE_EPS * self.p.h;
        let first = self.jumps.partition_point(|j| j.time < cut);
        self.jumps.drain(..first);
    }

    /// Runs to `T`; returns the path when recording.
    pub(crate) fn run<N: NoiseSource>(
        mut self,
        noise: &mut N,
        mut observe: impl FnMut(&NodeInfo<'_>) -> Result<()>,
    ) -> Result<Option<GridPath>> {
        let p = self.p;
        let h = p.h;
        let n0 = p.phi.steps();
        let nt = p.steps();
        let mut fresh: Vec<Jump> = Vec::new();
        let mut marks: Vec<Jump> = Vec::new();
        {
            let i = n0 - self.base;
            observe(&NodeInfo {
                k: 0,
                t: 0.0,
                view: self.view_to(i),
                f_prev: None,
            })?;
        }
        for k in 0..nt {
            let g = n0 + k;
            let i = g - self.base;
            let tk = k as f64 * h;
            let t1 = (k + 1) as f64 * h;
            let xk = self.values[i];
            let fk = Self::eval_f(&p.f, &self.view_to(i))?;
            let drift_inc = match &self.drift {
                Drift::Euler(st) => st.apply_at(&self.values, i) * h,
                Drift::Decay(_) => 0.0,
            };
            fresh.clear();
            let dl = noise.step(&mut fresh);
            let cont = drift_inc + fk * dl;
            marks.clear();
            for jump in &fresh {
                let tau = jump.time.clamp(tk, t1);
                let frac = (tau - tk) / h;
                let xm = match &self.drift {
                    Drift::Euler(_) => xk + frac * cont + marks.iter().map(|m| m.size).sum::<f64>(),
                    Drift::Decay(a) => {
                        let d = tau - tk;
                        xk * (-a * d).exp()
                            + frac * fk * dl * flow_weight(*a, d)
                            + marks
                                .iter()
                                .map(|m| m.size * (-a * (tau - m.time)).exp())
                                .sum::<f64>()
                    }
                };
                if !xm.is_finite() {
                    return Err(SddeError::BlowUp { t: tau });
                }
                let fj = if p.f.is_constant() {
                    Self::eval_f(&p.f, &self.view_to(i))?
                } else {
                    // the in-step marks are already in `jumps`, so the tip view sees them
                    let mut view = self.view_to(i);
                    view.tip = Some((tau.max(tk + NODE_EPS * h * 2.0), xm));
                    Self::eval_f(&p.f, &view)?
                };
                let mark = Jump {
                    time: tau,
                    size: fj * jump.size,
                };
                marks.push(mark);
                self.jumps.push(mark);
            }
            let next = match &self.drift {
                Drift::Euler(_) => xk + cont + marks.iter().map(|m| m.size).sum::<f64>(),
                Drift::Decay(a) => {
                    xk * (-a * h).exp()
                        + fk * dl * flow_weight(*a, h)
                        + marks
                            .iter()
                            .map(|m| m.size * (-a * (t1 - m.time)).exp())
                            .sum::<f64>()
                }
            };
            if !next.is_finite() {
                return Err(SddeError::BlowUp { t: t1 });
            }
            let jsum: f64 = marks.iter().map(|m| m.size).sum();
            let jsq: f64 = marks.iter().map(|m| m.size * m.size).sum();
            let c = next - xk - jsum;
            let q = self.qv[i] + c * c + jsq;
            self.values.push(next);
            self.qv.push(q);
            observe(&NodeInfo {
                k: k + 1,
                t: t1,
                view: self.view_to(i + 1),
                f_prev: Some(fk),
            })?;
            self.compact();
        }
        if !self.record {
            return Ok(None);
        }
        let alpha = p.phi.alpha();
        GridPath::new(-alpha, h, self.values, self.jumps).map(Some)
    }
}
