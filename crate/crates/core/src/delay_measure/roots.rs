//! Zeros of the characteristic function and the stability abscissa `v0(mu)`.
//!
//! Zeros are counted with the argument principle on rectangles. Every zero `lambda`
//! with `Re lambda >= s` satisfies `|lambda| <= |mu| * max(1, e^{-alpha s})`, so the
//! rectangle `[s, |mu| + 1] x [-H(s), H(s)]` with that bound (plus a unit margin)
//! holds all of them. `v0` is found by bisection on `s`, then the zeros in the final
//! strip are isolated and polished with Newton's method.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::DelayMeasure;
use crate::error::{Result, SddeError};

/// Winding numbers further than this from an integer are treated as unstable.
const WINDING_TOL: f64 = 0.25;
const MAX_DEPTH: usize = 60;
const MAX_JITTER: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Abscissa {
    /// The rightmost real part of a zero.
    At(f64),
    /// No zero with real part at or above this bound.
    Below(f64),
}

impl Abscissa {
    /// Upper bound on `v0`; exact for `At`.
    pub fn value(&self) -> f64 {
        match *self {
            Abscissa::At(v) | Abscissa::Below(v) => v,
        }
    }

    pub fn is_stable(&self) -> bool {
        match *self {
            Abscissa::At(v) => v < 0.0,
            Abscissa::Below(v) => v <= 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootOptions {
    pub tol: f64,
    /// Search depth below zero; defaults to `10 / alpha`.
    pub depth: Option<f64>,
}

impl RootOptions {
    pub fn new(tol: f64) -> Self {
        RootOptions { tol, depth: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootSearch {
    pub abscissa: Abscissa,
    /// Zeros located in the rightmost strip, rightmost first.
    pub roots: Vec<Complex64>,
}

fn height(mu: &DelayMeasure, s: f64) -> f64 {
    mu.total_variation() * (-mu.alpha() * s).exp().max(1.0) + 1.0
}

/// Winding of `chi` around the boundary of `rect`, i.e. the number of zeros inside.
pub fn count_zeros(mu: &DelayMeasure, rect: Rect) -> Result<usize> {
    let (x0, x1) = rect.re;
    let (y0, y1) = rect.im;
    if !(x1 > x0) || !(y1 > y0) {
        return Err(SddeError::invalid("rect", "empty rectangle"));
    }
    let corners = [
        Complex64::new(x0, y0),
        Complex64::new(x1, y0),
        Complex64::new(x1, y1),
        Complex64::new(x0, y1),
    ];
    // phase of e^{z u} turns at most `alpha` radians per unit length
    let max_step = 0.5 / mu.alpha().max(1e-3);
    let scale = 1.0 + mu.exp_moment(x0).max(mu.exp_moment(x1));
    let mut total = 0.0;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let len = (b - a).norm();
        let n = ((len / max_step).ceil() as usize).clamp(8, 4_000_000);
        let mut za = a;
        let mut fa = mu.char_function(za);
        check_clear(fa, scale)?;
        for k in 1..=n {
            let zb = a + (b - a) * (k as f64 / n as f64);
            let fb = mu.char_function(zb);
            check_clear(fb, scale)?;
            total += arg_increment(mu, za, fa, zb, fb, scale, 0)?;
            za = zb;
            fa = fb;
        }
    }
    let w = total / TAU;
    let r = w.round();
    if (w - r).abs() > WINDING_TOL || r < 0.0 {
        return Err(SddeError::RootCountUnstable { attempts: 0 });
    }
    Ok(r as usize)
}

fn check_clear(f: Complex64, scale: f64) -> Result<()> {
    if !f.re.is_finite() || !f.im.is_finite() || f.norm() < 1e-13 * scale {
        return Err(SddeError::RootCountUnstable { attempts: 0 });
    }
    Ok(())
}

fn arg_increment(
    mu: &DelayMeasure,
    za: Complex64,
    fa: Complex64,
    zb: Complex64,
    fb: Complex64,
    scale: f64,
    depth: usize,
) -> Result<f64> {
    let d = (fb / fa).arg();
    if d.abs() <= PI / 4.0 {
        return Ok(d);
    }
    if depth >= MAX_DEPTH {
        return Err(SddeError::RootCountUnstable { attempts: 0 });
    }
    let zm = (za + zb) * 0.5;
    let fm = mu.char_function(zm);
    check_clear(fm, scale)?;
    Ok(arg_increment(mu, za, fa, zm, fm, scale, depth + 1)?
        + arg_increment(mu, zm, fm, zb, fb, scale, depth + 1)?)
}

/// Zeros with real part at least `s`, jittering `s` to the right when the contour
/// grazes a zero.
fn count_right_of(mu: &DelayMeasure, s: f64, jitter: f64) -> Result<(usize, f64)> {
    let right = mu.total_variation() + 1.0;
    for attempt in 0..MAX_JITTER {
        let s_try = s + jitter * attempt as f64 * 0.618_033_988_749_895;
        let h = height(mu, s_try);
        match count_zeros(
            mu,
            Rect {
                re: (s_try, right.max(s_try + 1.0)),
                im: (-h, h),
            },
        ) {
            Ok(n) => return Ok((n, s_try)),
            Err(SddeError::RootCountUnstable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SddeError::RootCountUnstable {
        attempts: MAX_JITTER,
    })
}

fn count_box(mu: &DelayMeasure, rect: Rect) -> Result<usize> {
    let dy = (rect.im.1 - rect.im.0) * 1e-7;
    for attempt in 0..MAX_JITTER {
        let j = dy * attempt as f64 * 0.754_877_666_246_692_8;
        match count_zeros(
            mu,
            Rect {
                re: rect.re,
                im: (rect.im.0 - j, rect.im.1 + j),
            },
        ) {
            Ok(n) => return Ok(n),
            Err(SddeError::RootCountUnstable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SddeError::RootCountUnstable {
        attempts: MAX_JITTER,
    })
}

fn newton(mu: &DelayMeasure, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..100 {
        let f = mu.char_function(z);
        let d = mu.char_derivative(z);
        if d.norm() == 0.0 {
            return None;
        }
        let step = f / d;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    let f = mu.char_function(z);
    (f.norm() < 1e-10 * (1.0 + z.norm())).then_some(z)
}

/// Stability abscissa `v0(mu) = sup { Re z : chi(z) = 0 }` to within `tol`.
pub fn v0(mu: &DelayMeasure, tol: f64) -> Result<Abscissa> {
    Ok(rightmost_roots(mu, &RootOptions::new(tol))?.abscissa)
}

/// Bisection on the half-plane count followed by isolation and Newton refinement
/// of the zeros in the rightmost strip.
pub fn rightmost_roots(mu: &DelayMeasure, opts: &RootOptions) -> Result<RootSearch> {
    if !(opts.tol > 0.0) {
        return Err(SddeError::invalid("tol", "must be positive"));
    }
    let depth = opts.depth.unwrap_or(10.0 / mu.alpha());
    let tol = opts.tol;
    let jitter = tol * 0.1;

    let (n_lo, mut lo) = count_right_of(mu, -depth, jitter)?;
    if n_lo == 0 {
        return Ok(RootSearch {
            abscissa: Abscissa::Below(-depth),
            roots: Vec::new(),
        });
    }
    // Re lambda <= |lambda| <= |mu| whenever Re lambda >= 0
    let mut hi = mu.total_variation() + 0.5;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (n, s) = count_right_of(mu, mid, jitter.min(0.25 * (hi - mid)))?;
        if n > 0 {
            lo = s;
        } else {
            hi = s.max(mid);
        }
    }

    // isolate the zeros with real part in [lo, hi)
    let w = (hi - lo).max(1e-9);
    let re = (lo - w, hi + w);
    let h = height(mu, re.0);
    let mut roots: Vec<Complex64> = Vec::new();
    let mut stack = vec![(-h, h)];
    let target_height = (4.0 * w).max(1e-6);
    let mut guard = 0;
    while let Some((y0, y1)) = stack.pop() {
        guard += 1;
        if guard > 10_000 {
            break;
        }
        let n = count_box(mu, Rect { re, im: (y0, y1) })?;
        if n == 0 {
            continue;
        }
        if y1 - y0 <= target_height || (n == 1 && y1 - y0 <= 1.0) {
            let guess = Complex64::new(0.5 * (re.0 + re.1), 0.5 * (y0 + y1));
            if let Some(z) = newton(mu, guess) {
                if !roots
                    .iter()
                    .any(|r| (r - z).norm() <= 1e-9 * (1.0 + z.norm()))
                {
                    roots.push(z);
                }
            }
            if n == 1 || y1 - y0 <= target_height {
                continue;
            }
        }
        // off-centre split keeps the cut away from the real axis
        let mid = y0 + (y1 - y0) * 0.502_713_4;
        stack.push((y0, mid));
        stack.push((mid, y1));
    }

    let best = roots
        .iter()
        .filter(|z| z.re >= lo - 2.0 * w && z.re <= hi + 2.0 * w)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let abscissa = if best.is_finite() {
        Abscissa::At(best)
    } else {
        Abscissa::At(0.5 * (lo + hi))
    };
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(RootSearch { abscissa, roots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn ode_root() {
        let mu = DelayMeasure::point(1.0, 0.0, -2.0).unwrap();
        let a = v0(&mu, 1e-8).unwrap();
        assert!((a.value() + 2.0).abs() < 1e-8, "{a:?}");
        assert!(a.is_stable());
    }

    #[test]
    fn boundary_point_delay() {
        let alpha = 1.0;
        let mu = DelayMeasure::point(alpha, -alpha, -FRAC_PI_2 / alpha).unwrap();
        let search = rightmost_roots(&mu, &RootOptions::new(1e-6)).unwrap();
        assert!(search.abscissa.value().abs() < 1e-6, "{search:?}");
        assert!(search
            .roots
            .iter()
            .any(|z| (z - Complex64::new(0.0, FRAC_PI_2)).norm() < 1e-8));
    }

    #[test]
    fn count_in_rectangle() {
        let mu = DelayMeasure::point(1.0, 0.0, -2.0).unwrap();
        let n = count_zeros(
            &mu,
            Rect {
                re: (-3.0, 0.0),
                im: (-1.0, 1.0),
            },
        )
        .unwrap();
        assert_eq!(n, 1);
        let n = count_zeros(
            &mu,
            Rect {
                re: (-1.0, 1.0),
                im: (-1.0, 1.0),
            },
        )
        .unwrap();
        assert_eq!(n, 0);
    }

    #[test]
    fn contour_through_root_is_unstable() {
        let mu = DelayMeasure::point(1.0, 0.0, -2.0).unwrap();
        let r = count_zeros(
            &mu,
            Rect {
                re: (-2.0, 1.0),
                im: (-1.0, 1.0),
            },
        );
        assert!(matches!(r, Err(SddeError::RootCountUnstable { .. })));
    }

    #[test]
    fn zero_weight_atom_is_invisible() {
        let mu = DelayMeasure::point(1.0, -1.0, -1.2).unwrap();
        let with = mu.clone().with_atom(-0.3, 0.0).unwrap();
        let a = v0(&mu, 1e-7).unwrap().value();
        let b = v0(&with, 1e-7).unwrap().value();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn unstable_positive_feedback() {
        let mu = DelayMeasure::point(1.0, -1.0, 0.5).unwrap();
        // real root of z = 0.5 e^{-z}: z ~ 0.3517
        let a = v0(&mu, 1e-8).unwrap();
        assert!((a.value() - 0.351_733_711_249_195_8).abs() < 1e-7, "{a:?}");
        assert!(!a.is_stable());
    }

    #[test]
    fn very_stable_reports_below() {
        let mu = DelayMeasure::point(1.0, 0.0, -50.0).unwrap();
        let a = v0(&mu, 1e-6).unwrap();
        assert_eq!(a, Abscissa::Below(-10.0));
    }
}
