//! Building core types from the `mu`, `F`, `levy` and `phi` blocks.

use sdde::{
    DelayMeasure, DiffusionFunctional, DriftScheme, InnerMap, JumpFamily, JumpSpec, LevyTriplet,
    SddeProblem, Segment,
};

use crate::config::{parse_f64, Config};
use crate::CliError;

pub fn delay_measure(c: &Config) -> Result<DelayMeasure, CliError> {
    let alpha = c.req_f64("mu.alpha")?;
    let mut text = format!("alpha={alpha}\n");
    for a in c.all("mu.atom") {
        text.push_str(&format!("atom={a}\n"));
    }
    if let Some(f) = c.str("mu.density_file") {
        text.push_str(&format!("density_file={f}\n"));
    }
    DelayMeasure::parse_text(&text, None).map_err(|e| CliError::Config(format!("`mu`: {e}")))
}

fn inner_map(c: &Config) -> Result<InnerMap, CliError> {
    let map = c.str("F.map").unwrap_or("affine");
    Ok(match map {
        "affine" => InnerMap::Affine {
            offset: c.f64_or("F.offset", 0.0)?,
            slope: c.f64_or("F.slope", 1.0)?,
        },
        "clamp" => InnerMap::Clamp {
            lo: c.req_f64("F.lo")?,
            hi: c.req_f64("F.hi")?,
        },
        "sqrt_clamp" => InnerMap::SqrtClamp {
            lo: c.req_f64("F.lo")?,
            hi: c.req_f64("F.hi")?,
        },
        "tanh" => InnerMap::TanhScaled {
            offset: c.f64_or("F.offset", 0.0)?,
            scale: c.f64_or("F.scale", 1.0)?,
            rate: c.f64_or("F.rate", 1.0)?,
        },
        other => return Err(CliError::Config(format!("`F.map`: unknown map `{other}`"))),
    })
}

pub fn functional(c: &Config, alpha: f64) -> Result<DiffusionFunctional, CliError> {
    let kind = c.str("F.kind").unwrap_or("constant");
    let window = c.f64_or("F.alpha", alpha)?;
    let f = match kind {
        "constant" => DiffusionFunctional::constant(c.f64_or("F.value", 1.0)?),
        "no_delay" => DiffusionFunctional::no_delay(inner_map(c)?),
        "point_delay" => {
            let lags = c
                .list("F.lags")?
                .ok_or_else(|| CliError::Config("`F.lags`: required".into()))?;
            let coeffs = c.list_or("F.coeffs", &vec![1.0; lags.len()])?;
            DiffusionFunctional::point_delay(inner_map(c)?, lags, coeffs)
        }
        "distributed" => {
            let kernel = c
                .list("F.kernel")?
                .ok_or_else(|| CliError::Config("`F.kernel`: required".into()))?;
            DiffusionFunctional::distributed(inner_map(c)?, window, kernel)
        }
        "running_sup" => DiffusionFunctional::running_sup(window),
        "clamped_qv" => DiffusionFunctional::clamped_qv(window),
        other => {
            return Err(CliError::Config(format!(
                "`F.kind`: unknown kind `{other}`"
            )))
        }
    };
    f.map_err(|e| CliError::Config(format!("`F`: {e}")))
}

pub fn levy(c: &Config) -> Result<LevyTriplet, CliError> {
    let family = match c.str("levy.jump").unwrap_or("none") {
        "none" => None,
        "constant" => Some(JumpFamily::Constant {
            size: c.req_f64("levy.size")?,
        }),
        "exponential" => Some(JumpFamily::Exponential {
            mean: c.req_f64("levy.mean")?,
        }),
        "two_sided_exponential" => Some(JumpFamily::TwoSidedExponential {
            mean_pos: c.req_f64("levy.mean_pos")?,
            mean_neg: c.req_f64("levy.mean_neg")?,
            p_pos: c.req_f64("levy.p_pos")?,
        }),
        "pareto" => Some(JumpFamily::Pareto {
            x_min: c.req_f64("levy.x_min")?,
            tail_index: c.req_f64("levy.tail_index")?,
        }),
        "log_heavy" => Some(JumpFamily::LogHeavy),
        other => {
            return Err(CliError::Config(format!(
                "`levy.jump`: unknown family `{other}`"
            )))
        }
    };
    let jump = match family {
        Some(f) => Some(
            JumpSpec::new(c.req_f64("levy.lambda")?, f)
                .map_err(|e| CliError::Config(format!("`levy`: {e}")))?,
        ),
        None => None,
    };
    let sigma2 = c.f64_or("levy.sigma2", if jump.is_some() { 0.0 } else { 1.0 })?;
    // without an explicit drift, the small jumps are compensated away
    let b = match (c.f64("levy.b")?, jump) {
        (Some(b), _) => b,
        (None, Some(j)) => j.lambda * j.family.small_jump_mean(),
        (None, None) => 0.0,
    };
    LevyTriplet::new(b, sigma2, jump).map_err(|e| CliError::Config(format!("`levy`: {e}")))
}

pub fn initial(c: &Config, alpha: f64, h: f64) -> Result<Segment, CliError> {
    let seg = match c.str("phi.kind").unwrap_or("constant") {
        "constant" => Segment::constant(alpha, h, c.f64_or("phi.value", 0.0)?),
        "indicator" => {
            let height = c.f64_or("phi.value", 1.0)?;
            Segment::indicator(alpha, h, c.req_f64("phi.start")?).map(|s| s.scaled(height))
        }
        "file" => {
            let path = c
                .str("phi.file")
                .ok_or_else(|| CliError::Config("`phi.file`: required".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("`phi.file`: cannot read {path}: {e}")))?;
            let values = text
                .split(['\n', ','])
                .map(str::trim)
                .filter(|s| !s.is_empty() && !s.starts_with('#'))
                .map(|s| parse_f64("phi.file", s))
                .collect::<Result<Vec<_>, _>>()?;
            Segment::from_values(h, values)
        }
        other => {
            return Err(CliError::Config(format!(
                "`phi.kind`: unknown kind `{other}`"
            )))
        }
    };
    seg.map_err(|e| CliError::Config(format!("`phi`: {e}")))
}

/// The full problem block, validated.
pub fn problem(c: &Config) -> Result<SddeProblem, CliError> {
    let mu = delay_measure(c)?;
    let alpha = mu.alpha();
    let h = c.req_f64("h")?;
    let f = functional(c, alpha)?;
    let levy = levy(c)?;
    let phi = initial(c, alpha, h)?;
    let t_end = c.req_f64("T")?;
    let scheme = match c.str("scheme").unwrap_or("auto") {
        "auto" => DriftScheme::Auto,
        "euler" => DriftScheme::Euler,
        other => {
            return Err(CliError::Config(format!(
                "`scheme`: unknown scheme `{other}`"
            )))
        }
    };
    SddeProblem::new(mu, f, levy, phi, t_end, h)
        .map(|p| p.with_scheme(scheme))
        .map_err(|e| CliError::Config(format!("problem: {e}")))
}
