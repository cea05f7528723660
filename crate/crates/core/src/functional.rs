//! Diffusion functionals `F(X)(t-)`, evaluated on the path strictly before `t`
//! plus the left limit at `t`.

use crate::error::{Result, SddeError};
use crate::path::{require_steps, GridPath, PathView, NODE_EPS};

/// Scalar Lipschitz maps with known constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerMap {
    /// `offset + slope * x`
    Affine { offset: f64, slope: f64 },
    /// `x` clamped to `[lo, hi]`
    Clamp { lo: f64, hi: f64 },
    /// `sqrt` of `x` clamped to `[lo, hi]`, `lo > 0`
    SqrtClamp { lo: f64, hi: f64 },
    /// `offset + scale * tanh(rate * x)`
    TanhScaled { offset: f64, scale: f64, rate: f64 },
}

impl InnerMap {
    pub fn identity() -> Self {
        InnerMap::Affine {
            offset: 0.0,
            slope: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            InnerMap::Affine { offset, slope } => offset.is_finite() && slope.is_finite(),
            InnerMap::Clamp { lo, hi } | InnerMap::SqrtClamp { lo, hi } => {
                if !(lo <= hi) {
                    return Err(SddeError::invalid("F.f", "clamp needs lo <= hi"));
                }
                lo.is_finite() && hi.is_finite()
            }
            InnerMap::TanhScaled {
                offset,
                scale,
                rate,
            } => offset.is_finite() && scale.is_finite() && rate.is_finite(),
        };
        if !finite {
            return Err(SddeError::NonFinite { what: "inner map" });
        }
        if let InnerMap::SqrtClamp { lo, .. } = *self {
            if !(lo > 0.0) {
                return Err(SddeError::invalid("F.f", "sqrt-clamp needs lo > 0"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            InnerMap::Affine { offset, slope } => offset + slope * x,
            InnerMap::Clamp { lo, hi } => x.clamp(lo, hi),
            InnerMap::SqrtClamp { lo, hi } => x.clamp(lo, hi).sqrt(),
            InnerMap::TanhScaled {
                offset,
                scale,
                rate,
            } => offset + scale * (rate * x).tanh(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            InnerMap::Affine { slope, .. } => slope.abs(),
            InnerMap::Clamp { lo, hi } => {
                if lo < hi {
                    1.0
                } else {
                    0.0
                }
            }
            InnerMap::SqrtClamp { lo, hi } => {
                if lo < hi {
                    0.5 / lo.sqrt()
                } else {
                    0.0
                }
            }
            InnerMap::TanhScaled { scale, rate, .. } => (scale * rate).abs(),
        }
    }

    /// `sup |f|`, if finite.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            InnerMap::Affine { offset, slope } => (slope == 0.0).then_some(offset.abs()),
            InnerMap::Clamp { lo, hi } => Some(lo.abs().max(hi.abs())),
            InnerMap::SqrtClamp { hi, .. } => Some(hi.sqrt()),
            InnerMap::TanhScaled { offset, scale, .. } => Some(offset.abs() + scale.abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FunctionalKind {
    Constant(f64),
    /// `f(X(t-))`
    NoDelay(InnerMap),
    /// `f(sum_i c_i X(t - lag_i))`
    PointDelay {
        f: InnerMap,
        lags: Vec<f64>,
        coeffs: Vec<f64>,
    },
    /// `f(int_{-alpha}^0 c(s) X(t + s) ds)`, `c` sampled uniformly on `[-alpha, 0]`.
    Distributed {
        f: InnerMap,
        alpha: f64,
        kernel: Vec<f64>,
    },
    /// `sup_{[t - alpha, t)} X`
    RunningSup {
        alpha: f64,
    },
    /// `sqrt(max(1, min((2/alpha) <X>_{t-alpha}^{t-alpha/2}, 2)))` with realized QV.
    ClampedQV {
        alpha: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionFunctional {
    kind: FunctionalKind,
    lipschitz: Option<f64>,
    sup_bound: Option<f64>,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SddeError::invalid(
            name,
            format!("must be positive, got {v}"),
        ))
    }
}

impl DiffusionFunctional {
    pub fn new(kind: FunctionalKind) -> Result<Self> {
        let (lipschitz, sup_bound) = match &kind {
            FunctionalKind::Constant(m) => {
                if !m.is_finite() {
                    return Err(SddeError::NonFinite { what: "F.m" });
                }
                (Some(0.0), Some(m.abs()))
            }
            FunctionalKind::NoDelay(f) => {
                f.validate()?;
                (Some(f.lipschitz()), f.bound())
            }
            FunctionalKind::PointDelay { f, lags, coeffs } => {
                f.validate()?;
                if lags.is_empty() || lags.len() != coeffs.len() {
                    return Err(SddeError::invalid(
                        "F.lags",
                        "need one coefficient per lag and at least one lag",
                    ));
                }
                if lags.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
                    return Err(SddeError::invalid("F.lags", "lags must be finite and >= 0"));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(SddeError::NonFinite { what: "F.coeffs" });
                }
                let l1: f64 = coeffs.iter().map(|c| c.abs()).sum();
                (Some(f.lipschitz() * l1), f.bound())
            }
            FunctionalKind::Distributed { f, alpha, kernel } => {
                f.validate()?;
                positive("F.alpha", *alpha)?;
                if kernel.len() < 2 {
                    return Err(SddeError::invalid("F.kernel", "needs at least two samples"));
                }
                if kernel.iter().any(|c| !c.is_finite()) {
                    return Err(SddeError::NonFinite { what: "F.kernel" });
                }
                let cmax = kernel.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                (Some(f.lipschitz() * alpha * cmax), f.bound())
            }
            FunctionalKind::RunningSup { alpha } => {
                positive("F.alpha", *alpha)?;
                (Some(1.0), None)
            }
            FunctionalKind::ClampedQV { alpha } => {
                positive("F.alpha", *alpha)?;
                (None, Some(std::f64::consts::SQRT_2))
            }
        };
        Ok(DiffusionFunctional {
            kind,
            lipschitz,
            sup_bound,
        })
    }

    pub fn constant(m: f64) -> Result<Self> {
        Self::new(FunctionalKind::Constant(m))
    }

    pub fn no_delay(f: InnerMap) -> Result<Self> {
        Self::new(FunctionalKind::NoDelay(f))
    }

    pub fn point_delay(f: InnerMap, lags: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(FunctionalKind::PointDelay { f, lags, coeffs })
    }

    pub fn distributed(f: InnerMap, alpha: f64, kernel: Vec<f64>) -> Result<Self> {
        Self::new(FunctionalKind::Distributed { f, alpha, kernel })
    }

    pub fn running_sup(alpha: f64) -> Result<Self> {
        Self::new(FunctionalKind::RunningSup { alpha })
    }

    pub fn clamped_qv(alpha: f64) -> Result<Self> {
        Self::new(FunctionalKind::ClampedQV { alpha })
    }

    pub fn kind(&self) -> &FunctionalKind {
        &self.kind
    }

    /// Functional Lipschitz constant in the sup norm; `None` if there is none.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    /// True when the functional is known to be unbounded.
    pub fn is_unbounded(&self) -> bool {
        self.sup_bound.is_none()
    }

    /// Length of history needed before `t`.
    pub fn horizon(&self) -> f64 {
        match &self.kind {
            FunctionalKind::Constant(_) | FunctionalKind::NoDelay(_) => 0.0,
            FunctionalKind::PointDelay { lags, .. } => lags.iter().fold(0.0, |m, l| m.max(*l)),
            FunctionalKind::Distributed { alpha, .. }
            | FunctionalKind::RunningSup { alpha }
            | FunctionalKind::ClampedQV { alpha } => *alpha,
        }
    }

    /// Whether evaluation reads anything besides a constant.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, FunctionalKind::Constant(_))
    }

    pub fn uses_qv(&self) -> bool {
        matches!(self.kind, FunctionalKind::ClampedQV { .. })
    }

    /// Checks that a grid of step `h` resolves the functional.
    pub fn check_grid(&self, h: f64) -> Result<()> {
        match &self.kind {
            FunctionalKind::ClampedQV { alpha } if h > alpha / 4.0 * (1.0 + NODE_EPS) => {
                Err(SddeError::invalid(
                    "h",
                    format!("QV window alpha/2 = {} needs h <= alpha/4", alpha / 2.0),
                ))
            }
            FunctionalKind::Distributed { alpha, .. } => {
                require_steps("F.alpha", *alpha, h).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// `F(X)(t-)` at a grid time `t` of `path`.
    pub fn evaluate(&self, path: &GridPath, t: f64) -> Result<f64> {
        let view = path.view_until(t)?;
        self.evaluate_view(&view)
    }

    /// `F(X)(t-)` with `t` the end of the view (its tip, if any).
    pub fn evaluate_view(&self, view: &PathView<'_>) -> Result<f64> {
        let t = view.end_time();
        let need = t - self.horizon();
        if view.t0 > need + NODE_EPS * view.h.max(need.abs()) {
            return Err(SddeError::InsufficientHistory {
                needed: need,
                start: view.t0,
            });
        }
        let v = match &self.kind {
            FunctionalKind::Constant(m) => *m,
            FunctionalKind::NoDelay(f) => f.apply(view.left_limit_at_end()),
            FunctionalKind::PointDelay { f, lags, coeffs } => {
                let mut acc = 0.0;
                for (l, c) in lags.iter().zip(coeffs) {
                    let x = if *l == 0.0 {
                        view.left_limit_at_end()
                    } else {
                        view.interp(t - l)
                    };
                    acc += c * x;
                }
                f.apply(acc)
            }
            FunctionalKind::Distributed { f, alpha, kernel } => {
                f.apply(distributed_integral(view, *alpha, kernel)?)
            }
            FunctionalKind::RunningSup { alpha } => running_sup(view, t - alpha),
            FunctionalKind::ClampedQV { alpha } => {
                self.check_grid(view.h)?;
                let qv = view.realized_qv(t - alpha, t - alpha / 2.0);
                (2.0 / alpha * qv).clamp(1.0, 2.0).sqrt()
            }
        };
        if !v.is_finite() {
            return Err(SddeError::NonFinite {
                what: "functional value",
            });
        }
        Ok(v)
    }
}

fn kernel_at(kernel: &[f64], alpha: f64, s: f64) -> f64 {
    let n = kernel.len() - 1;
    let x = ((s + alpha) / alpha * n as f64).clamp(0.0, n as f64);
    let k = (x.floor() as usize).min(n - 1);
    let f = x - k as f64;
    kernel[k] * (1.0 - f) + kernel[k + 1] * f
}

fn distributed_integral(view: &PathView<'_>, alpha: f64, kernel: &[f64]) -> Result<f64> {
    let h = view.h;
    let n = require_steps("F.alpha", alpha, h)?;
    let t = view.end_time();
    let mut acc = 0.0;
    for j in 0..=n {
        let s = -(j as f64) * h;
        let x = if j == 0 {
            view.left_limit_at_end()
        } else {
            view.interp(t + s)
        };
        let w = if j == 0 || j == n { 0.5 * h } else { h };
        acc += w * kernel_at(kernel, alpha, s) * x;
    }
    Ok(acc)
}

fn running_sup(view: &PathView<'_>, from: f64) -> f64 {
    let t = view.end_time();
    let mut m = view.value_at(from).max(view.left_limit_at_end());
    let (k0, f0) = view.locate(from);
    let start = if f0 == 0.0 { k0 } else { k0 + 1 };
    for k in start..view.values.len() {
        if view.node_time(k) >= t - NODE_EPS * view.h {
            break;
        }
        m = m.max(view.values[k]);
    }
    for j in view.jumps_in(from, t) {
        if j.time < t - NODE_EPS * view.h {
            let after = view.value_at(j.time);
            m = m.max(after).max(after - j.size);
        }
    }
    m
}
