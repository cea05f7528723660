//! Small-value law of `dX = -aX dt + F(X)(t-) dL` with compound Poisson `L` of rate
//! `lambda` and jumps `>= J`, `F >= sigma0`: below `J sigma0` the stationary density is
//! `C x^{(lambda - a)/a}`, so the CDF behaves like `x^{lambda/a}`.

use crate::error::{Result, SddeError};
use crate::functional::FunctionalKind;
use crate::levy::JumpFamily;
use crate::path::into_string;
use crate::solver::SddeProblem;

use super::EmpiricalMeasure;

/// Minimum number of samples below the smallest fitted point.
const MIN_COUNT: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerLawFit {
    pub window_hi: f64,
    /// Slope of `log F(x)` against `log x` on a geometric grid in `(0, window_hi]`.
    pub exponent: f64,
    /// Maximum-likelihood exponent of `(x / window_hi)^k` given `X <= window_hi`.
    pub mle: f64,
    pub mle_se: f64,
    pub in_window: usize,
    pub total: usize,
    /// `(x, F(x))` points used by the regression.
    pub points: Vec<(f64, f64)>,
}

impl PowerLawFit {
    /// CSV with one `key,value` row per summary field.
    pub fn to_csv(&self, expected: Option<f64>) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["key", "value"])?;
        let mut rows = vec![
            ("window_hi", self.window_hi),
            ("exponent", self.exponent),
            ("mle", self.mle),
            ("mle_se", self.mle_se),
            ("in_window", self.in_window as f64),
            ("total", self.total as f64),
        ];
        if let Some(e) = expected {
            rows.push(("expected", e));
            rows.push(("relative_error", (self.exponent - e).abs() / e));
        }
        for (k, v) in rows {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        into_string(w)
    }
}

/// `(lambda / a, J sigma0)`: the CDF exponent and the upper end of the power-law range.
pub fn power_law_setup(p: &SddeProblem) -> Result<(f64, f64)> {
    let a = match p.mu.as_instantaneous() {
        Some(a) if a > 0.0 => a,
        _ => {
            return Err(SddeError::invalid(
                "mu",
                "power law needs mu = -a delta_0 with a > 0",
            ))
        }
    };
    let jump = p
        .levy
        .jump
        .ok_or_else(|| SddeError::invalid("levy", "power law needs compound Poisson jumps"))?;
    if p.levy.sigma2 != 0.0 || p.levy.continuous_drift() != 0.0 {
        return Err(SddeError::invalid(
            "levy",
            "power law needs a pure jump driver",
        ));
    }
    let j_min = match jump.family {
        JumpFamily::Constant { size } if size > 0.0 => size,
        JumpFamily::Pareto { x_min, .. } => x_min,
        _ => {
            return Err(SddeError::invalid(
                "levy",
                "jumps must be bounded below by a positive J",
            ))
        }
    };
    let sigma0 = match p.f.kind() {
        FunctionalKind::Constant(m) if *m > 0.0 => *m,
        FunctionalKind::ClampedQV { .. } => 1.0,
        _ => {
            return Err(SddeError::invalid(
                "F",
                "needs a positive lower bound sigma0",
            ))
        }
    };
    Ok((jump.lambda / a, j_min * sigma0))
}

pub fn cp_power_law_fit(measure: &EmpiricalMeasure, window_hi: f64) -> Result<PowerLawFit> {
    if !(window_hi > 0.0) {
        return Err(SddeError::invalid("window_hi", "must be positive"));
    }
    let mut xs = measure.pooled();
    let total = xs.len();
    xs.retain(|&x| x > 0.0 && x <= window_hi);
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let count_le = |x: f64| xs.partition_point(|&v| v <= x);
    let mut points = Vec::new();
    let mut i = 0;
    loop {
        let x = window_hi * 2f64.powf(-(i as f64) / 4.0);
        let c = count_le(x);
        if c < MIN_COUNT {
            break;
        }
        points.push((x, c as f64 / total as f64));
        i += 1;
    }
    if points.len() < 3 {
        return Err(SddeError::TooFewSamples {
            what: "power-law window",
            needed: MIN_COUNT * 4,
            have: n,
        });
    }
    let m = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in &points {
        let dx = x.ln() - mx;
        sxy += dx * (y.ln() - my);
        sxx += dx * dx;
    }
    let logs: f64 = xs.iter().map(|x| (window_hi / x).ln()).sum();
    let mle = n as f64 / logs;
    Ok(PowerLawFit {
        window_hi,
        exponent: sxy / sxx,
        mle,
        mle_se: mle / (n as f64).sqrt(),
        in_window: n,
        total,
        points,
    })
}
