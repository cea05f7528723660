//! Strong solutions of
//!
//! ```text
//! dX(t) = (int X(t+s) mu(ds)) dt + F(X)(t-) dL(t),   X = phi on [-alpha, 0]
//! ```
//!
//! by explicit Euler steps with left-point `F`, jumps applied at their exact times.

mod engine;
mod voc;

pub use engine::NodeInfo;
pub use voc::solve_voc;

use rand_distr::{Distribution, StandardNormal};

use crate::delay_measure::DelayMeasure;
use crate::error::{Result, SddeError};
use crate::functional::DiffusionFunctional;
use crate::levy::{LevyIncrements, LevyTriplet, NoiseSource};
use crate::path::{require_steps, GridPath, Segment, NODE_EPS};
use crate::rng::PathSeed;

use engine::Engine;

/// Treatment of the drift between grid nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DriftScheme {
    /// Exact decay `e^{-a dt}` when `mu = -a delta_0`, Euler otherwise.
    #[default]
    Auto,
    /// Explicit Euler always.
    Euler,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SddeProblem {
    pub mu: DelayMeasure,
    pub f: DiffusionFunctional,
    pub levy: LevyTriplet,
    pub phi: Segment,
    pub t_end: f64,
    pub h: f64,
    pub scheme: DriftScheme,
}

impl SddeProblem {
    pub fn new(
        mu: DelayMeasure,
        f: DiffusionFunctional,
        levy: LevyTriplet,
        phi: Segment,
        t_end: f64,
        h: f64,
    ) -> Result<Self> {
        let p = SddeProblem {
            mu,
            f,
            levy,
            phi,
            t_end,
            h,
            scheme: DriftScheme::Auto,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.mu.alpha();
        let h = self.h;
        if !(h > 0.0) || h > alpha / 8.0 * (1.0 + NODE_EPS) {
            return Err(SddeError::invalid(
                "h",
                format!("need 0 < h <= alpha/8 = {}", alpha / 8.0),
            ));
        }
        require_steps("alpha", alpha, h)?;
        if !(self.t_end > 0.0) {
            return Err(SddeError::invalid("T", "horizon must be positive"));
        }
        require_steps("T", self.t_end, h)?;
        self.phi.check_span(alpha)?;
        if (self.phi.h - h).abs() > NODE_EPS * h {
            return Err(SddeError::invalid(
                "phi",
                "initial segment must use the solver step",
            ));
        }
        if self.f.horizon() > alpha * (1.0 + NODE_EPS) {
            return Err(SddeError::InsufficientHistory {
                needed: -self.f.horizon(),
                start: -alpha,
            });
        }
        self.f.check_grid(h)
    }

    pub fn with_scheme(mut self, scheme: DriftScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_horizon(&self, t_end: f64) -> Result<Self> {
        let mut p = self.clone();
        p.t_end = t_end;
        p.validate()?;
        Ok(p)
    }

    pub fn with_initial(&self, phi: Segment) -> Result<Self> {
        let mut p = self.clone();
        p.phi = phi;
        p.validate()?;
        Ok(p)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.h).round() as usize
    }
}

/// Path on `[-alpha, T]` driven by the noise of `seed`.
pub fn solve_euler(p: &SddeProblem, seed: impl Into<PathSeed>) -> Result<GridPath> {
    let seed = seed.into();
    let mut noise = p.levy.stream(p.h, seed)?;
    let mut path = Engine::new(p, true)?
        .run(&mut noise, |_| Ok(()))?
        .expect("recording engine returns a path");
    path.seed = Some(seed);
    Ok(path)
}

/// Path on `[-alpha, T]` driven by a stored noise realization.
pub fn solve_with_noise(p: &SddeProblem, noise: &LevyIncrements) -> Result<GridPath> {
    check_noise(p, noise)?;
    let mut src = noise.replay();
    Ok(Engine::new(p, true)?
        .run(&mut src, |_| Ok(()))?
        .expect("recording engine returns a path"))
}

pub(crate) fn check_noise(p: &SddeProblem, noise: &LevyIncrements) -> Result<()> {
    if (noise.h - p.h).abs() > NODE_EPS * p.h {
        return Err(SddeError::invalid(
            "noise",
            "noise step differs from the problem step",
        ));
    }
    if noise.dl.len() < p.steps() {
        return Err(SddeError::SpanMismatch {
            expected: p.t_end,
            found: noise.t_end(),
        });
    }
    Ok(())
}

/// Runs without storing the path; `observe` sees every node from `t = 0` on with
/// a window of at least `alpha` behind it.
pub fn solve_observed(
    p: &SddeProblem,
    seed: impl Into<PathSeed>,
    observe: impl FnMut(&NodeInfo<'_>) -> Result<()>,
) -> Result<()> {
    let mut noise = p.levy.stream(p.h, seed.into())?;
    Engine::new(p, false)?.run(&mut noise, observe)?;
    Ok(())
}

/// Streaming run on an arbitrary noise source.
pub fn solve_observed_with<N: NoiseSource>(
    p: &SddeProblem,
    noise: &mut N,
    observe: impl FnMut(&NodeInfo<'_>) -> Result<()>,
) -> Result<()> {
    Engine::new(p, false)?.run(noise, observe)?;
    Ok(())
}

/// Two solutions from `phi1`, `phi2` driven by the same noise.
pub fn coupled_pair(
    p: &SddeProblem,
    phi1: &Segment,
    phi2: &Segment,
    seed: impl Into<PathSeed>,
) -> Result<(GridPath, GridPath)> {
    let seed = seed.into();
    let a = solve_euler(&p.with_initial(phi1.clone())?, seed)?;
    let b = solve_euler(&p.with_initial(phi2.clone())?, seed)?;
    Ok((a, b))
}

/// The segment `u -> X(t + u)` on `[-alpha, 0]`.
pub fn segment_at(path: &GridPath, t: f64, alpha: f64) -> Result<Segment> {
    path.segment_at(t, alpha)
}

/// A stationary Ornstein-Uhlenbeck segment for `dX = -aX dt + sigma dW`:
/// `X(-alpha) ~ N(0, sigma^2/(2a))`, then exact Gaussian transitions.
pub fn stationary_ou_segment(
    a: f64,
    sigma: f64,
    alpha: f64,
    h: f64,
    seed: impl Into<PathSeed>,
) -> Result<Segment> {
    if !(a > 0.0) {
        return Err(SddeError::invalid("a", "mean reversion must be positive"));
    }
    let n = require_steps("alpha", alpha, h)?;
    let mut rng = seed.into().initial();
    let var = sigma * sigma / (2.0 * a);
    let decay = (-a * h).exp();
    let sd = (var * (1.0 - decay * decay)).sqrt();
    let z0: f64 = StandardNormal.sample(&mut rng);
    let mut x = var.sqrt() * z0;
    let mut values = Vec::with_capacity(n + 1);
    values.push(x);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        x = decay * x + sd * z;
        values.push(x);
    }
    Segment::from_values(h, values)
}

#[cfg(test)]
mod tests;
