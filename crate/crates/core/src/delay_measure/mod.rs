//! The signed delay measure `mu` on `[-alpha, 0]` driving the drift.

mod roots;
mod text;

pub use roots::{count_zeros, rightmost_roots, v0, Abscissa, Rect, RootOptions, RootSearch};

use num_complex::Complex64;

use crate::error::{Result, SddeError};
use crate::path::{require_steps, PathView, Segment, NODE_EPS};

/// Minimum number of nodes on the density grid.
pub const MIN_DENSITY_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Finite signed measure `sum_i w_i delta_{u_i} + b(s) ds` on `[-alpha, 0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayMeasure {
    alpha: f64,
    atoms: Vec<Atom>,
    /// Samples of `b` on a uniform grid over `[-alpha, 0]`, first node at `-alpha`.
    density: Option<Vec<f64>>,
}

impl DelayMeasure {
    pub fn new(alpha: f64, atoms: Vec<Atom>, density: Option<Vec<f64>>) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(SddeError::invalid(
                "alpha",
                "delay horizon must be positive and finite",
            ));
        }
        for a in &atoms {
            if !a.weight.is_finite() || !a.location.is_finite() {
                return Err(SddeError::NonFinite { what: "atom" });
            }
            if a.location < -alpha * (1.0 + NODE_EPS) || a.location > 0.0 {
                return Err(SddeError::invalid(
                    "atom",
                    format!("location {} outside [-{alpha}, 0]", a.location),
                ));
            }
        }
        if let Some(d) = &density {
            if d.len() < MIN_DENSITY_NODES {
                return Err(SddeError::invalid(
                    "density",
                    format!("needs at least {MIN_DENSITY_NODES} nodes, got {}", d.len()),
                ));
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(SddeError::NonFinite { what: "density" });
            }
        }
        let atoms = atoms
            .into_iter()
            .map(|a| Atom {
                location: a.location.max(-alpha),
                weight: a.weight,
            })
            .collect();
        Ok(DelayMeasure {
            alpha,
            atoms,
            density,
        })
    }

    /// The zero measure on `[-alpha, 0]`.
    pub fn zero(alpha: f64) -> Result<Self> {
        Self::new(alpha, Vec::new(), None)
    }

    /// `weight * delta_location`.
    pub fn point(alpha: f64, location: f64, weight: f64) -> Result<Self> {
        Self::new(alpha, vec![Atom { location, weight }], None)
    }

    /// Density sampled from `b` on `nodes` uniform nodes.
    pub fn from_density_fn(alpha: f64, nodes: usize, b: impl Fn(f64) -> f64) -> Result<Self> {
        let n = nodes.max(2);
        let d = (0..n)
            .map(|j| b(-alpha + alpha * j as f64 / (n - 1) as f64))
            .collect();
        Self::new(alpha, Vec::new(), Some(d))
    }

    pub fn with_atom(mut self, location: f64, weight: f64) -> Result<Self> {
        self.atoms.push(Atom { location, weight });
        Self::new(self.alpha, self.atoms, self.density)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&[f64]> {
        self.density.as_deref()
    }

    fn density_step(&self) -> f64 {
        match &self.density {
            Some(d) => self.alpha / (d.len() - 1) as f64,
            None => 0.0,
        }
    }

    /// `b(s)` by linear interpolation on the density grid (0 without density).
    pub fn density_at(&self, s: f64) -> f64 {
        let Some(d) = &self.density else {
            return 0.0;
        };
        let x = ((s + self.alpha) / self.density_step()).clamp(0.0, (d.len() - 1) as f64);
        let k = (x.floor() as usize).min(d.len() - 2);
        let f = x - k as f64;
        d[k] * (1.0 - f) + d[k + 1] * f
    }

    fn trapezoid_density<T>(&self, mut g: impl FnMut(f64, f64) -> T) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let mut acc = T::default();
        if let Some(d) = &self.density {
            let dd = self.density_step();
            let n = d.len();
            for (j, &b) in d.iter().enumerate() {
                let w = if j == 0 || j == n - 1 { 0.5 * dd } else { dd };
                acc = acc + g(-self.alpha + j as f64 * dd, b) * w;
            }
        }
        acc
    }

    /// `|mu|([-alpha, 0])`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum::<f64>()
            + self.trapezoid_density(|_, b| b.abs())
    }

    /// `int e^{x u} |mu|(du)`, the bound on `|int e^{z u} mu(du)|` on `Re z = x`.
    pub fn exp_moment(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight.abs() * (x * a.location).exp())
            .sum::<f64>()
            + self.trapezoid_density(|u, b| b.abs() * (x * u).exp())
    }

    /// `mu([-alpha, 0])`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>() + self.trapezoid_density(|_, b| b)
    }

    /// If the measure is `-a * delta_0` (possibly split into several atoms at zero),
    /// returns `a`.
    pub fn as_instantaneous(&self) -> Option<f64> {
        if self
            .density
            .as_ref()
            .is_some_and(|d| d.iter().any(|&b| b != 0.0))
        {
            return None;
        }
        if self
            .atoms
            .iter()
            .any(|a| a.weight != 0.0 && a.location != 0.0)
        {
            return None;
        }
        Some(-self.atoms.iter().map(|a| a.weight).sum::<f64>())
    }

    /// `c1*self + c2*other`; both measures must share `alpha` and, when both carry
    /// densities, the density grid.
    pub fn combine(&self, c1: f64, other: &DelayMeasure, c2: f64) -> Result<Self> {
        if (self.alpha - other.alpha).abs() > NODE_EPS * self.alpha {
            return Err(SddeError::SpanMismatch {
                expected: self.alpha,
                found: other.alpha,
            });
        }
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.location,
                weight: c1 * a.weight,
            })
            .collect();
        atoms.extend(other.atoms.iter().map(|a| Atom {
            location: a.location,
            weight: c2 * a.weight,
        }));
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(a), None) => Some(a.iter().map(|v| c1 * v).collect()),
            (None, Some(b)) => Some(b.iter().map(|v| c2 * v).collect()),
            (Some(a), Some(b)) => {
                if a.len() != b.len() {
                    return Err(SddeError::invalid("density", "density grids differ"));
                }
                Some(a.iter().zip(b).map(|(x, y)| c1 * x + c2 * y).collect())
            }
        };
        Self::new(self.alpha, atoms, density)
    }

    /// Drift weights for a solver grid with step `h`.
    pub fn stencil(&self, h: f64) -> Result<DriftStencil> {
        let n = require_steps("h", self.alpha, h)?;
        let mut atoms = Vec::new();
        for a in &self.atoms {
            if a.weight == 0.0 {
                continue;
            }
            let pos = -a.location / h;
            let m = (pos + NODE_EPS).floor();
            let frac = pos - m;
            let m = (m.max(0.0) as usize).min(n);
            if frac <= NODE_EPS || m == n {
                atoms.push(StencilEntry {
                    offset: m,
                    frac: 0.0,
                    weight: a.weight,
                });
            } else {
                atoms.push(StencilEntry {
                    offset: m,
                    frac,
                    weight: a.weight,
                });
            }
        }
        let density = if self.density.is_some() {
            (0..=n)
                .map(|j| {
                    let s = -(j as f64) * h;
                    let w = if j == 0 || j == n { 0.5 * h } else { h };
                    (j, w * self.density_at(s))
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(DriftStencil {
            h,
            steps: n,
            atoms,
            density,
        })
    }

    /// `int seg(s) mu(ds)`; atoms off the grid use linear interpolation between nodes,
    /// the density part uses the trapezoid rule on the segment grid.
    pub fn apply(&self, seg: &Segment) -> Result<f64> {
        seg.check_span(self.alpha)?;
        if seg.values.iter().any(|v| !v.is_finite()) {
            return Err(SddeError::NonFinite { what: "segment" });
        }
        let st = self.stencil(seg.h)?;
        Ok(st.apply_at(&seg.values, seg.steps()))
    }

    /// `chi(z) = z - int e^{z u} mu(du)`.
    pub fn char_function(&self, z: Complex64) -> Complex64 {
        let mut acc = z;
        for a in &self.atoms {
            acc -= a.weight * (z * a.location).exp();
        }
        acc - self.trapezoid_density(|s, b| (z * s).exp() * b)
    }

    /// `chi'(z) = 1 - int u e^{z u} mu(du)`.
    pub fn char_derivative(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for a in &self.atoms {
            acc -= a.weight * a.location * (z * a.location).exp();
        }
        acc - self.trapezoid_density(|s, b| (z * s).exp() * (b * s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilEntry {
    /// Steps back from the current node.
    pub offset: usize,
    /// Fraction of a step further back; the atom sits at `-(offset + frac) * h`.
    pub frac: f64,
    pub weight: f64,
}

/// `mu` compiled against a grid: `apply(mu, X_t) = sum weights * X(t - offset*h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftStencil {
    pub h: f64,
    pub steps: usize,
    pub atoms: Vec<StencilEntry>,
    /// `(offset, trapezoid weight * b)` for the density part.
    pub density: Vec<(usize, f64)>,
}

impl DriftStencil {
    /// Drift at node `k` of `values`; requires `k >= steps`.
    #[inline]
    pub fn apply_at(&self, values: &[f64], k: usize) -> f64 {
        self.apply_with(|off| values[k - off])
    }

    /// Drift with node values supplied by `value(offset)`.
    #[inline]
    pub fn apply_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for e in &self.atoms {
            let v = if e.frac == 0.0 {
                value(e.offset)
            } else {
                value(e.offset) * (1.0 - e.frac) + value(e.offset + 1) * e.frac
            };
            acc += e.weight * v;
        }
        for &(off, w) in &self.density {
            acc += w * value(off);
        }
        acc
    }

    /// Drift evaluated on a view ending at its last node.
    pub fn apply_view(&self, view: &PathView<'_>) -> f64 {
        self.apply_at(view.values, view.last_node())
    }
}
