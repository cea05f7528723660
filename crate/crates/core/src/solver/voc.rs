use crate::error::{Result, SddeError};
use crate::functional::FunctionalKind;
use crate::fundamental::{integrate_direct, FundamentalSolution};
use crate::levy::LevyIncrements;
use crate::path::{GridPath, Jump, PathView, NODE_EPS};

use super::{check_noise, SddeProblem};

/// `r` at `(m + frac) h`, linear between samples.
#[inline]
fn r_off(r: &[f64], m: usize, frac: f64) -> f64 {
    if frac <= 0.0 || m + 1 >= r.len() {
        r[m.min(r.len() - 1)]
    } else {
        r[m] * (1.0 - frac) + r[m + 1] * frac
    }
}

fn r_time(r: &[f64], h: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let x = t / h;
    let m = (x + NODE_EPS).floor();
    let frac = (x - m).max(0.0);
    r_off(r, m as usize, if frac <= NODE_EPS { 0.0 } else { frac })
}

/// The path given by `X(t) = x(t, phi) + int_0^t r(t - s) F(X)(s-) dL(s)`, computed
/// forward in time with left-point sums over grid increments and exact jump terms.
/// `F` is evaluated on the path being built.
pub fn solve_voc(
    p: &SddeProblem,
    noise: &LevyIncrements,
    fs: &FundamentalSolution,
) -> Result<GridPath> {
    p.validate()?;
    check_noise(p, noise)?;
    if fs.mu != p.mu {
        return Err(SddeError::invalid(
            "fs",
            "fundamental solution belongs to another delay measure",
        ));
    }
    if (fs.h - p.h).abs() > NODE_EPS * p.h {
        return Err(SddeError::invalid(
            "fs",
            "fundamental solution step differs from the problem step",
        ));
    }
    let h = p.h;
    let nt = p.steps();
    if fs.r.len() < nt + 2 {
        return Err(SddeError::SpanMismatch {
            expected: p.t_end,
            found: (fs.r.len().saturating_sub(1)) as f64 * h,
        });
    }
    let r = &fs.r[..];
    let det = integrate_direct(&p.mu, &p.phi, p.t_end, h)?;
    let n0 = p.phi.steps();
    let t0 = -p.phi.alpha();

    let mut values = Vec::with_capacity(n0 + nt + 1);
    values.extend_from_slice(&p.phi.values);
    let mut jumps: Vec<Jump> = p.phi.jumps.clone();
    let mut qv = Vec::with_capacity(n0 + nt + 1);
    qv.push(0.0);
    {
        let view = p.phi.view();
        for k in 0..n0 {
            let last = qv[k];
            qv.push(last + view.step_qv(k));
        }
    }
    let phi_jumps = jumps.len();
    // F_k dL_k per grid step
    let mut fdl: Vec<f64> = Vec::with_capacity(nt);
    let constant = match p.f.kind() {
        FunctionalKind::Constant(m) => Some(*m),
        _ => None,
    };
    let mut j_idx = 0;
    for n in 0..nt {
        let i = n0 + n;
        let tn = n as f64 * h;
        let t1 = (n + 1) as f64 * h;
        let view = PathView {
            t0,
            h,
            values: &values[..=i],
            jumps: &jumps,
            qv_prefix: Some(&qv[..=i]),
            tip: None,
        };
        let fk = match constant {
            Some(m) => m,
            None => p.f.evaluate_view(&view)?,
        };
        fdl.push(fk * noise.dl[n]);
        let mut step_marks = 0usize;
        while j_idx < noise.jumps.len() && noise.jumps[j_idx].time <= t1 {
            let jump = noise.jumps[j_idx];
            j_idx += 1;
            let tau = jump.time.clamp(tn, t1);
            let frac = (tau - tn) / h;
            let mut xm = det.view().interp(tau);
            for (k, v) in fdl[..n].iter().enumerate() {
                xm += r_off(r, n - k, frac) * v;
            }
            xm += r_off(r, 0, frac) * frac * fdl[n];
            for m in &jumps[phi_jumps..] {
                xm += r_time(r, h, tau - m.time) * m.size;
            }
            if !xm.is_finite() {
                return Err(SddeError::BlowUp { t: tau });
            }
            let fj = match constant {
                Some(m) => m,
                None => {
                    let mut v = PathView {
                        t0,
                        h,
                        values: &values[..=i],
                        jumps: &jumps,
                        qv_prefix: Some(&qv[..=i]),
                        tip: None,
                    };
                    v.tip = Some((tau.max(tn + 2.0 * NODE_EPS * h), xm));
                    p.f.evaluate_view(&v)?
                }
            };
            jumps.push(Jump {
                time: tau,
                size: fj * jump.size,
            });
            step_marks += 1;
        }
        let mut next = det.values[i + 1];
        for (k, v) in fdl.iter().enumerate() {
            next += r[n + 1 - k] * v;
        }
        for m in &jumps[phi_jumps..] {
            next += r_time(r, h, t1 - m.time) * m.size;
        }
        if !next.is_finite() {
            return Err(SddeError::BlowUp { t: t1 });
        }
        let new = &jumps[jumps.len() - step_marks..];
        let jsum: f64 = new.iter().map(|m| m.size).sum();
        let jsq: f64 = new.iter().map(|m| m.size * m.size).sum();
        let c = next - values[i] - jsum;
        qv.push(qv[i] + c * c + jsq);
        values.push(next);
    }
    GridPath::new(t0, h, values, jumps)
}
