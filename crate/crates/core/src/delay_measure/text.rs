//! Plain-text form of a delay measure:
//!
//! ```text
//! alpha=1.0
//! atom=-1.0,-1.5
//! atom=0,-0.2
//! density_file=kernel.csv
//! ```
//!
//! The density file holds two columns `s,b(s)` covering `[-alpha, 0]`; it is
//! resampled onto a uniform grid with at least 64 nodes.

use std::path::{Path, PathBuf};

use super::{Atom, DelayMeasure, MIN_DENSITY_NODES};
use crate::error::{Result, SddeError};

impl DelayMeasure {
    /// Parses the `key=value` form; `density_file` is resolved against `base`.
    pub fn parse_text(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut alpha = None;
        let mut atoms = Vec::new();
        let mut density_file = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SddeError::Parse(format!("line {}: expected key=value", lineno + 1))
            })?;
            match key.trim() {
                "alpha" => alpha = Some(parse_f64(value, "alpha")?),
                "atom" => atoms.push(parse_atom(value)?),
                "density_file" => density_file = Some(value.trim().to_string()),
                other => {
                    return Err(SddeError::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        let alpha = alpha.ok_or_else(|| SddeError::Parse("missing `alpha`".into()))?;
        let density = match density_file {
            Some(f) => {
                let p = resolve(base, &f);
                Some(read_density_csv(&p, alpha)?)
            }
            None => None,
        };
        DelayMeasure::new(alpha, atoms, density)
    }

    /// Inverse of [`DelayMeasure::parse_text`]; the density, if any, must be written
    /// separately with [`DelayMeasure::density_csv`] under `density_file`.
    pub fn to_text(&self, density_file: Option<&str>) -> String {
        let mut out = format!("alpha={}\n", self.alpha);
        for a in &self.atoms {
            out.push_str(&format!("atom={},{}\n", a.location, a.weight));
        }
        if let (Some(_), Some(f)) = (&self.density, density_file) {
            out.push_str(&format!("density_file={f}\n"));
        }
        out
    }

    /// Two-column CSV `s,b` of the density grid.
    pub fn density_csv(&self) -> Result<Option<String>> {
        let Some(d) = &self.density else {
            return Ok(None);
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s", "b"])?;
        let dd = self.density_step();
        for (j, b) in d.iter().enumerate() {
            w.write_record([(-self.alpha + j as f64 * dd).to_string(), b.to_string()])?;
        }
        crate::path::into_string(w).map(Some)
    }
}

pub(crate) fn resolve(base: Option<&Path>, file: &str) -> PathBuf {
    let p = PathBuf::from(file);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| SddeError::Parse(format!("`{what}`: cannot parse `{}` as a number", s.trim())))
}

fn parse_atom(s: &str) -> Result<Atom> {
    let (u, w) = s
        .split_once(',')
        .ok_or_else(|| SddeError::Parse(format!("atom `{s}`: expected <location>,<weight>")))?;
    Ok(Atom {
        location: parse_f64(u, "atom location")?,
        weight: parse_f64(w, "atom weight")?,
    })
}

/// Reads `(s, value)` pairs and resamples them on a uniform grid of `[-alpha, 0]`.
pub(crate) fn read_density_csv(path: &Path, alpha: f64) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(SddeError::Parse(format!(
                "{}: row {} needs two columns",
                path.display(),
                i + 1
            )));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(s), Ok(b)) => pts.push((s, b)),
            // header row
            _ if i == 0 => continue,
            _ => {
                return Err(SddeError::Parse(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    resample(&pts, alpha)
}

pub(crate) fn resample(pts: &[(f64, f64)], alpha: f64) -> Result<Vec<f64>> {
    if pts.len() < 2 {
        return Err(SddeError::Parse("need at least two samples".into()));
    }
    if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(SddeError::Parse(
            "sample locations must be increasing".into(),
        ));
    }
    let (s0, s1) = (pts[0].0, pts[pts.len() - 1].0);
    let slack = 1e-9 * alpha;
    if s0 > -alpha + slack || s1 < -slack {
        return Err(SddeError::Parse(format!(
            "samples cover [{s0}, {s1}], need [-{alpha}, 0]"
        )));
    }
    let n = pts.len().max(MIN_DENSITY_NODES);
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for j in 0..n {
        let s = -alpha + alpha * j as f64 / (n - 1) as f64;
        while k + 2 < pts.len() && pts[k + 1].0 < s {
            k += 1;
        }
        let (a, b) = (pts[k], pts[k + 1]);
        let f = ((s - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
        out.push(a.1 * (1.0 - f) + b.1 * f);
    }
    Ok(out)
}
