//! Driving Lévy processes with a Brownian part and finite-activity jumps.
//!
//! The triplet `(b, sigma2, nu)` uses the truncation `x * 1_[-1,1]`, so
//!
//! ```text
//! L(t) = (b - lambda E[J 1_{|J|<=1}]) t + sigma W(t) + sum_{tau <= t} J_tau
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::delay_measure::{v0, Abscissa, DelayMeasure};
use crate::error::{Result, SddeError};
use crate::functional::DiffusionFunctional;
use crate::path::{require_steps, Jump};
use crate::rng::PathSeed;

/// Log-heavy sizes are capped here so a single draw stays finite.
pub const LOG_HEAVY_CAP: f64 = 1e300;

/// A moment that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentValue {
    Finite(f64),
    Infinite,
}

impl MomentValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            MomentValue::Finite(v) => Some(v),
            MomentValue::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, MomentValue::Finite(_))
    }

    fn map(self, f: impl FnOnce(f64) -> f64) -> MomentValue {
        match self {
            MomentValue::Finite(v) => MomentValue::Finite(f(v)),
            MomentValue::Infinite => MomentValue::Infinite,
        }
    }
}

impl std::fmt::Display for MomentValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MomentValue::Finite(v) => write!(f, "{v}"),
            MomentValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Jump size distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpFamily {
    Constant {
        size: f64,
    },
    Exponential {
        mean: f64,
    },
    /// `+Exp(mean_pos)` with probability `p_pos`, else `-Exp(mean_neg)`.
    TwoSidedExponential {
        mean_pos: f64,
        mean_neg: f64,
        p_pos: f64,
    },
    Pareto {
        x_min: f64,
        tail_index: f64,
    },
    /// Density proportional to `1 / (x log^2 x)` on `(e, inf)`.
    LogHeavy,
}

impl JumpFamily {
    pub fn name(&self) -> &'static str {
        match self {
            JumpFamily::Constant { .. } => "constant",
            JumpFamily::Exponential { .. } => "exponential",
            JumpFamily::TwoSidedExponential { .. } => "two-sided-exponential",
            JumpFamily::Pareto { .. } => "pareto",
            JumpFamily::LogHeavy => "log-heavy",
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SddeError::invalid(
                    name,
                    format!("must be positive, got {v}"),
                ))
            }
        };
        match *self {
            JumpFamily::Constant { size } => {
                if !size.is_finite() {
                    return Err(SddeError::NonFinite { what: "jump size" });
                }
                Ok(())
            }
            JumpFamily::Exponential { mean } => pos("jump.mean", mean),
            JumpFamily::TwoSidedExponential {
                mean_pos,
                mean_neg,
                p_pos,
            } => {
                pos("jump.mean_pos", mean_pos)?;
                pos("jump.mean_neg", mean_neg)?;
                if !(0.0..=1.0).contains(&p_pos) {
                    return Err(SddeError::invalid("jump.p_pos", "must lie in [0, 1]"));
                }
                Ok(())
            }
            JumpFamily::Pareto { x_min, tail_index } => {
                pos("jump.x_min", x_min)?;
                pos("jump.tail_index", tail_index)
            }
            JumpFamily::LogHeavy => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            JumpFamily::Constant { size } => size,
            JumpFamily::Exponential { mean } => mean * rng.sample::<f64, _>(Exp1),
            JumpFamily::TwoSidedExponential {
                mean_pos,
                mean_neg,
                p_pos,
            } => {
                let up = rng.random::<f64>() < p_pos;
                let e: f64 = rng.sample(Exp1);
                if up {
                    mean_pos * e
                } else {
                    -mean_neg * e
                }
            }
            JumpFamily::Pareto { x_min, tail_index } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                x_min * u.powf(-1.0 / tail_index)
            }
            JumpFamily::LogHeavy => {
                // log J = 1/U has tail P(log J > y) = 1/y on (1, inf)
                let u: f64 = 1.0 - rng.random::<f64>();
                (1.0 / u).exp().min(LOG_HEAVY_CAP)
            }
        }
    }

    /// `E[J^2]`.
    pub fn second_moment(&self) -> MomentValue {
        match *self {
            JumpFamily::Constant { size } => MomentValue::Finite(size * size),
            JumpFamily::Exponential { mean } => MomentValue::Finite(2.0 * mean * mean),
            JumpFamily::TwoSidedExponential {
                mean_pos,
                mean_neg,
                p_pos,
            } => MomentValue::Finite(
                2.0 * (p_pos * mean_pos * mean_pos + (1.0 - p_pos) * mean_neg * mean_neg),
            ),
            JumpFamily::Pareto { x_min, tail_index } => {
                if tail_index > 2.0 {
                    MomentValue::Finite(tail_index * x_min * x_min / (tail_index - 2.0))
                } else {
                    MomentValue::Infinite
                }
            }
            JumpFamily::LogHeavy => MomentValue::Infinite,
        }
    }

    /// Whether `E[log|J| 1_{|J|>1}]` is finite.
    pub fn log_moment_finite(&self) -> bool {
        !matches!(self, JumpFamily::LogHeavy)
    }

    /// `E[J 1_{|J|>1}]`.
    pub fn large_jump_mean(&self) -> MomentValue {
        let exp_tail = |m: f64| (1.0 + m) * (-1.0 / m).exp();
        match *self {
            JumpFamily::Constant { size } => {
                MomentValue::Finite(if size.abs() > 1.0 { size } else { 0.0 })
            }
            JumpFamily::Exponential { mean } => MomentValue::Finite(exp_tail(mean)),
            JumpFamily::TwoSidedExponential {
                mean_pos,
                mean_neg,
                p_pos,
            } => {
                MomentValue::Finite(p_pos * exp_tail(mean_pos) - (1.0 - p_pos) * exp_tail(mean_neg))
            }
            JumpFamily::Pareto {
                x_min,
                tail_index: k,
            } => {
                if k <= 1.0 {
                    MomentValue::Infinite
                } else if x_min >= 1.0 {
                    MomentValue::Finite(k * x_min / (k - 1.0))
                } else {
                    MomentValue::Finite(k * x_min.powf(k) / (k - 1.0))
                }
            }
            JumpFamily::LogHeavy => MomentValue::Infinite,
        }
    }

    /// `E[J 1_{|J|<=1}]`, always finite.
    pub fn small_jump_mean(&self) -> f64 {
        let exp_body = |m: f64| m - (m + 1.0) * (-1.0 / m).exp();
        match *self {
            JumpFamily::Constant { size } => {
                if size.abs() <= 1.0 {
                    size
                } else {
                    0.0
                }
            }
            JumpFamily::Exponential { mean } => exp_body(mean),
            JumpFamily::TwoSidedExponential {
                mean_pos,
                mean_neg,
                p_pos,
            } => p_pos * exp_body(mean_pos) - (1.0 - p_pos) * exp_body(mean_neg),
            JumpFamily::Pareto {
                x_min,
                tail_index: k,
            } => {
                if x_min >= 1.0 {
                    0.0
                } else if (k - 1.0).abs() < 1e-12 {
                    k * x_min * (1.0 / x_min).ln()
                } else {
                    k * x_min.powf(k) * (x_min.powf(1.0 - k) - 1.0) / (k - 1.0)
                }
            }
            JumpFamily::LogHeavy => 0.0,
        }
    }
}

/// Compound-Poisson part: intensity and size law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpSpec {
    pub lambda: f64,
    pub family: JumpFamily,
    pub second_moment: MomentValue,
    pub log_moment_finite: bool,
}

impl JumpSpec {
    pub fn new(lambda: f64, family: JumpFamily) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SddeError::invalid(
                "jump.lambda",
                "intensity must be positive",
            ));
        }
        family.validate()?;
        Ok(JumpSpec {
            lambda,
            family,
            second_moment: family.second_moment(),
            log_moment_finite: family.log_moment_finite(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevyTriplet {
    pub b: f64,
    pub sigma2: f64,
    pub jump: Option<JumpSpec>,
}

impl LevyTriplet {
    pub fn new(b: f64, sigma2: f64, jump: Option<JumpSpec>) -> Result<Self> {
        if !b.is_finite() {
            return Err(SddeError::NonFinite { what: "levy.b" });
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(SddeError::invalid("levy.sigma2", "must be nonnegative"));
        }
        Ok(LevyTriplet { b, sigma2, jump })
    }

    /// Brownian motion with variance rate `sigma2`.
    pub fn wiener(sigma2: f64) -> Result<Self> {
        Self::new(0.0, sigma2, None)
    }

    /// Compound Poisson process without drift or Brownian part; `b` is set to
    /// `lambda E[J 1_{|J|<=1}]` so that `L` is the bare jump sum.
    pub fn pure_jump(jump: JumpSpec) -> Self {
        LevyTriplet {
            b: jump.lambda * jump.family.small_jump_mean(),
            sigma2: 0.0,
            jump: Some(jump),
        }
    }

    /// Deterministic drift of `L` between jumps.
    pub fn continuous_drift(&self) -> f64 {
        match &self.jump {
            Some(j) => self.b - j.lambda * j.family.small_jump_mean(),
            None => self.b,
        }
    }

    /// `E L(1) = b + lambda E[J 1_{|J|>1}]`.
    pub fn mean_rate(&self) -> MomentValue {
        match &self.jump {
            Some(j) => j.family.large_jump_mean().map(|m| self.b + j.lambda * m),
            None => MomentValue::Finite(self.b),
        }
    }

    /// `sigma2 + lambda E[J^2]`, the variance rate of the martingale part.
    pub fn second_moment_rate(&self) -> MomentValue {
        match &self.jump {
            Some(j) => j.second_moment.map(|m| self.sigma2 + j.lambda * m),
            None => MomentValue::Finite(self.sigma2),
        }
    }

    pub fn log_moment_finite(&self) -> bool {
        self.jump.is_none_or(|j| j.log_moment_finite)
    }

    /// Streaming sampler for one path.
    pub fn stream(&self, h: f64, seed: PathSeed) -> Result<NoiseStream> {
        NoiseStream::new(self, h, seed)
    }

    /// Increments on `[0, t_end]` with step `h`, jumps at exact times.
    pub fn sample_path(&self, t_end: f64, h: f64, seed: PathSeed) -> Result<LevyIncrements> {
        let n = require_steps("T", t_end, h)?;
        let mut s = self.stream(h, seed)?;
        let mut dl = Vec::with_capacity(n);
        let mut jumps = Vec::new();
        for _ in 0..n {
            dl.push(s.step(&mut jumps));
        }
        Ok(LevyIncrements { h, dl, jumps })
    }
}

/// Source of per-step driving increments.
pub trait NoiseSource {
    /// Continuous increment of the next step; jumps inside the step are appended.
    fn step(&mut self, jumps: &mut Vec<Jump>) -> f64;
}

/// Lazily sampled noise; reproduces [`LevyTriplet::sample_path`] step by step.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    h: f64,
    drift: f64,
    sd: f64,
    gauss: ChaCha8Rng,
    jump_rng: ChaCha8Rng,
    jump: Option<JumpSpec>,
    next_jump: f64,
    k: u64,
}

impl NoiseStream {
    pub fn new(levy: &LevyTriplet, h: f64, seed: PathSeed) -> Result<Self> {
        if !(h > 0.0) {
            return Err(SddeError::invalid("h", "step must be positive"));
        }
        let mut jump_rng = seed.jumps();
        let next_jump = match &levy.jump {
            Some(j) => jump_rng.sample::<f64, _>(Exp1) / j.lambda,
            None => f64::INFINITY,
        };
        Ok(NoiseStream {
            h,
            drift: levy.continuous_drift() * h,
            sd: (levy.sigma2 * h).sqrt(),
            gauss: seed.gaussian(),
            jump_rng,
            jump: levy.jump,
            next_jump,
            k: 0,
        })
    }
}

impl NoiseSource for NoiseStream {
    fn step(&mut self, jumps: &mut Vec<Jump>) -> f64 {
        self.k += 1;
        let t1 = self.k as f64 * self.h;
        if let Some(spec) = &self.jump {
            while self.next_jump <= t1 {
                let size = spec.family.sample(&mut self.jump_rng);
                jumps.push(Jump {
                    time: self.next_jump,
                    size,
                });
                self.next_jump += self.jump_rng.sample::<f64, _>(Exp1) / spec.lambda;
            }
        }
        if self.sd > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.gauss);
            self.drift + self.sd * z
        } else {
            self.drift
        }
    }
}

/// A sampled noise realization: continuous increments per step plus exact jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyIncrements {
    pub h: f64,
    pub dl: Vec<f64>,
    pub jumps: Vec<Jump>,
}

impl LevyIncrements {
    pub fn t_end(&self) -> f64 {
        self.dl.len() as f64 * self.h
    }

    /// The same realization on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<LevyIncrements> {
        if factor == 0 || !self.dl.len().is_multiple_of(factor) {
            return Err(SddeError::invalid(
                "factor",
                format!("{factor} does not divide {} steps", self.dl.len()),
            ));
        }
        Ok(LevyIncrements {
            h: self.h * factor as f64,
            dl: self.dl.chunks(factor).map(|c| c.iter().sum()).collect(),
            jumps: self.jumps.clone(),
        })
    }

    /// `L(t_k)` at every node, jumps included.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dl.len() + 1);
        let mut acc = 0.0;
        let mut j = 0;
        out.push(0.0);
        for (k, d) in self.dl.iter().enumerate() {
            acc += d;
            let t1 = (k + 1) as f64 * self.h;
            while j < self.jumps.len() && self.jumps[j].time <= t1 {
                acc += self.jumps[j].size;
                j += 1;
            }
            out.push(acc);
        }
        out
    }

    pub fn replay(&self) -> Replay<'_> {
        Replay {
            inc: self,
            k: 0,
            j: 0,
        }
    }
}

/// [`NoiseSource`] over stored increments.
#[derive(Clone, Debug)]
pub struct Replay<'a> {
    inc: &'a LevyIncrements,
    k: usize,
    j: usize,
}

impl NoiseSource for Replay<'_> {
    fn step(&mut self, jumps: &mut Vec<Jump>) -> f64 {
        let d = self.inc.dl.get(self.k).copied().unwrap_or(0.0);
        self.k += 1;
        let t1 = self.k as f64 * self.inc.h;
        while self.j < self.inc.jumps.len() && self.inc.jumps[self.j].time <= t1 {
            jumps.push(self.inc.jumps[self.j]);
            self.j += 1;
        }
        d
    }
}

/// A yes/no answer that may be undecidable numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Unknown => "unknown",
        })
    }
}

/// Runtime check of the standing assumptions for stationary solutions.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// `v0(mu) < 0`.
    pub stable: Verdict,
    pub v0: Option<Abscissa>,
    pub log_moment_finite: Verdict,
    pub f_bounded: Verdict,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.stable == Verdict::Yes
            && self.log_moment_finite == Verdict::Yes
            && self.f_bounded == Verdict::Yes
    }

    /// Names of the conditions that are not known to hold.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.stable != Verdict::Yes {
            out.push(format!("v0(mu) < 0: {}", self.stable));
        }
        if self.log_moment_finite != Verdict::Yes {
            out.push(format!(
                "log moment of large jumps finite: {}",
                self.log_moment_finite
            ));
        }
        if self.f_bounded != Verdict::Yes {
            out.push(format!("F bounded: {}", self.f_bounded));
        }
        out
    }
}

pub fn check_assumptions(
    mu: &DelayMeasure,
    levy: &LevyTriplet,
    f: &DiffusionFunctional,
) -> AssumptionReport {
    let (stable, v) = match v0(mu, 1e-6) {
        Ok(a) => (Verdict::from_bool(a.is_stable()), Some(a)),
        Err(_) => (Verdict::Unknown, None),
    };
    let f_bounded = match f.sup_bound() {
        Some(_) => Verdict::Yes,
        None if f.is_unbounded() => Verdict::No,
        None => Verdict::Unknown,
    };
    AssumptionReport {
        stable,
        v0: v,
        log_moment_finite: Verdict::from_bool(levy.log_moment_finite()),
        f_bounded,
    }
}
