//! `key=value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, keys are dotted (`levy.sigma2`).
//! Lists are comma separated. Only `mu.atom` may repeat. Keys outside [`KEYS`] are
//! rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed (u64)"),
    ("out", "output directory"),
    ("T", "horizon"),
    ("h", "step size"),
    ("scheme", "auto | euler"),
    ("mu.alpha", "delay horizon"),
    ("mu.atom", "<location>,<weight>; repeatable"),
    ("mu.density_file", "CSV of s,b(s) on [-alpha, 0]"),
    (
        "F.kind",
        "constant | no_delay | point_delay | distributed | running_sup | clamped_qv",
    ),
    ("F.value", "constant value"),
    ("F.map", "affine | clamp | sqrt_clamp | tanh"),
    ("F.offset", "inner map offset"),
    ("F.slope", "affine slope"),
    ("F.lo", "clamp lower bound"),
    ("F.hi", "clamp upper bound"),
    ("F.scale", "tanh scale"),
    ("F.rate", "tanh rate"),
    ("F.lags", "point-delay lags (list)"),
    ("F.coeffs", "point-delay coefficients (list)"),
    (
        "F.alpha",
        "window of distributed, running_sup and clamped_qv; defaults to mu.alpha",
    ),
    (
        "F.kernel",
        "distributed kernel samples on [-F.alpha, 0] (list)",
    ),
    (
        "levy.b",
        "drift; defaults to the value making L a pure jump process",
    ),
    (
        "levy.sigma2",
        "Gaussian variance rate; defaults to 1 without jumps, else 0",
    ),
    ("levy.lambda", "jump intensity"),
    (
        "levy.jump",
        "none | constant | exponential | two_sided_exponential | pareto | log_heavy",
    ),
    ("levy.size", "constant jump size"),
    ("levy.mean", "exponential mean"),
    (
        "levy.mean_pos",
        "two-sided exponential mean of positive jumps",
    ),
    (
        "levy.mean_neg",
        "two-sided exponential mean of negative jumps",
    ),
    (
        "levy.p_pos",
        "two-sided exponential probability of a positive jump",
    ),
    ("levy.x_min", "Pareto scale"),
    ("levy.tail_index", "Pareto tail index"),
    ("phi.kind", "constant | indicator | file"),
    ("phi.value", "constant value, or height of the indicator"),
    ("phi.start", "indicator start in [-alpha, 0]"),
    ("phi.file", "one value per grid node of [-alpha, 0]"),
    ("stability.tol", "abscissa tolerance"),
    ("stability.depth", "search depth below zero"),
    (
        "fundamental.horizon",
        "horizon for r; default from the abscissa",
    ),
    ("simulate.replicates", "number of paths"),
    (
        "verify.levels",
        "number of step sizes in the refinement study",
    ),
    ("verify.fine_h", "finest step of the refinement study"),
    (
        "verify.replicates",
        "coupled pairs for the contraction study",
    ),
    (
        "verify.phi2",
        "constant second initial segment; default -phi",
    ),
    ("stationary.burn_in", "burn-in time"),
    ("stationary.horizon", "sampling window after burn-in"),
    ("stationary.spacing", "sample spacing"),
    ("stationary.replicates", "independent runs"),
    ("stationary.bins", "histogram bins"),
    ("tightness.checkpoints", "increasing times (list)"),
    ("tightness.k", "increasing thresholds (list)"),
    ("tightness.replicates", "runs per checkpoint table"),
    ("covariance.lags", "time lags (list)"),
    (
        "covariance.ef2",
        "E F(X)^2 to use instead of the empirical value",
    ),
    ("spectrum.xi", "frequencies (list)"),
    ("spectrum.max_lag", "Bartlett window half-width in time"),
    ("powerlaw.window", "upper end of the fitted range"),
    ("nonunique.sigmas", "diffusion levels in [1, sqrt 2] (list)"),
    ("nonunique.a", "mean reversion"),
    ("nonunique.alpha", "delay horizon"),
    ("nonunique.T", "horizon"),
    ("nonunique.h", "step size"),
    ("nonunique.replicates", "runs per level"),
    ("nonunique.spacing", "sample spacing"),
    ("feller.beta", "indicator length, 0 < beta < alpha"),
    ("feller.n", "approximation index"),
];

const REPEATABLE: &[&str] = &["mu.atom"];

/// Keys naming files, resolved against the config directory.
const FILE_KEYS: &[&str] = &["mu.density_file", "phi.file"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Vec<String>>,
}

fn config_error(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {msg}"))
}

impl Config {
    /// Parses `text`; relative file paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key=value, got `{line}`", i + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(name, _)| *name == k) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key `{k}`",
                    i + 1
                )));
            }
            let mut v = v.to_string();
            if FILE_KEYS.contains(&k) {
                let p = PathBuf::from(&v);
                if let (true, Some(b)) = (p.is_relative(), base) {
                    v = b.join(p).to_string_lossy().into_owned();
                }
            }
            let slot = entries.entry(k.to_string()).or_default();
            if !slot.is_empty() && !REPEATABLE.contains(&k) {
                return Err(CliError::Config(format!(
                    "line {}: `{k}` given twice",
                    i + 1
                )));
            }
            slot.push(v);
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), vec![value.into()]);
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|v| v[0].as_str())
    }

    pub fn all(&self, key: &str) -> &[String] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.str(key).map(|s| parse_f64(key, s)).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64(key)?.ok_or_else(|| config_error(key, "required"))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.str(key) {
            Some(s) => s.parse().map_err(|_| {
                config_error(key, format!("expected a non-negative integer, got `{s}`"))
            }),
            None => Ok(default),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.str(key) {
            Some(s) => s
                .parse()
                .map_err(|_| config_error(key, format!("expected a u64, got `{s}`"))),
            None => Ok(default),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.str(key)
            .map(|s| s.split(',').map(|x| parse_f64(key, x)).collect())
            .transpose()
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        Ok(self.list(key)?.unwrap_or_else(|| default.to_vec()))
    }

    /// Canonical text: sorted keys, one assignment per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, vs) in &self.entries {
            for v in vs {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }
}

pub fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(config_error(key, format!("`{s}` is not finite"))),
        Err(_) if s == "sqrt2" => Ok(std::f64::consts::SQRT_2),
        Err(_) => Err(config_error(key, format!("cannot parse `{s}` as a number"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let c = Config::parse(
            "# x\nmu.alpha = 1 # tail\nmu.atom=0,-1\nmu.atom=-1,0.5\n",
            None,
        )
        .unwrap();
        assert_eq!(c.req_f64("mu.alpha").unwrap(), 1.0);
        assert_eq!(c.all("mu.atom").len(), 2);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = Config::parse("levy.sigma = 1", None).unwrap_err();
        assert!(e.to_string().contains("unknown key `levy.sigma`"));
        assert!(Config::parse("h=1\nh=2", None).is_err());
        assert!(Config::parse("h", None).is_err());
    }

    #[test]
    fn typed_getters_name_the_field() {
        let c = Config::parse("h=abc\nseed=-1\nF.lags=0,x", None).unwrap();
        assert!(c.f64("h").unwrap_err().to_string().contains("`h`"));
        assert!(c.u64_or("seed", 0).is_err());
        assert!(c.list("F.lags").is_err());
        assert_eq!(parse_f64("x", "sqrt2").unwrap(), std::f64::consts::SQRT_2);
    }

    #[test]
    fn text_round_trip() {
        let c = Config::parse("mu.atom=0,-1\nh=0.01\nmu.alpha=1\n", None).unwrap();
        assert_eq!(Config::parse(&c.to_text(), None).unwrap(), c);
    }

    #[test]
    fn file_keys_are_resolved() {
        let c = Config::parse("phi.file=init.txt", Some(Path::new("/data"))).unwrap();
        assert_eq!(c.str("phi.file"), Some("/data/init.txt"));
    }
}
