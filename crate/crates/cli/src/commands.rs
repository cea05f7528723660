//! Subcommands. Each one validates its whole configuration before computing.

use rayon::prelude::*;
use sdde::delay_measure::{rightmost_roots, Abscissa, RootOptions};
use sdde::fundamental::{compute_r_default, FundamentalSolution};
use sdde::stationary::{periodogram, power_law_setup, Ef2Source, SecondOrderReport};
use sdde::{
    compute_r, coupled_pair, cp_power_law_fit, feller_counterexample, krylov_bogoliubov,
    nonuniqueness_demo, solve_euler, solve_voc, solve_with_noise, tightness_diagnostic,
    DriftScheme, EmpiricalMeasure, FunctionalKind, KbOptions, NonUniqueOptions, PathSeed,
    SddeError, SddeProblem,
};

use crate::config::Config;
use crate::problem::{delay_measure, initial, problem};
use crate::CliError;

/// CSV files to write and lines to print.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub stdout: Vec<String>,
}

impl Artifacts {
    fn file(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn say(&mut self, line: impl Into<String>) {
        self.stdout.push(line.into());
    }
}

/// Parameter errors are configuration errors wherever they surface.
fn num(e: SddeError) -> CliError {
    match &e {
        SddeError::InvalidParameter { .. }
        | SddeError::SpanMismatch { .. }
        | SddeError::InsufficientHistory { .. }
        | SddeError::Parse(_) => CliError::Config(e.to_string()),
        SddeError::Replicate { source, .. }
            if matches!(num((**source).clone()), CliError::Config(_)) =>
        {
            CliError::Config(e.to_string())
        }
        SddeError::Io(m) => CliError::Io(m.clone()),
        _ => CliError::Numerical(e.to_string()),
    }
}

fn cfg_err(e: SddeError) -> CliError {
    CliError::Config(e.to_string())
}

fn kv_csv(rows: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn steps(what: &str, t: f64, h: f64) -> Result<usize, CliError> {
    let x = t / h;
    let n = x.round();
    if !(n >= 0.0) || (x - n).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(CliError::Config(format!(
            "`{what}`: {t} is not a multiple of h = {h}"
        )));
    }
    Ok(n as usize)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn seed(c: &Config) -> Result<u64, CliError> {
    c.u64_or("seed", 0)
}

pub fn stability(c: &Config) -> Result<Artifacts, CliError> {
    let mu = delay_measure(c)?;
    let opts = RootOptions {
        tol: c.f64_or("stability.tol", 1e-8)?,
        depth: c.f64("stability.depth")?,
    };
    if !(opts.tol > 0.0) {
        return Err(CliError::Config("`stability.tol`: must be positive".into()));
    }
    let search = rightmost_roots(&mu, &opts).map_err(num)?;
    let mut a = Artifacts::default();
    let (kind, v) = match search.abscissa {
        Abscissa::At(v) => {
            a.say(format!("v0={v:?}"));
            ("at", v)
        }
        Abscissa::Below(v) => {
            a.say(format!("v0<{v:?}"));
            ("below", v)
        }
    };
    a.say(format!("stable={}", search.abscissa.is_stable()));
    let mut roots = String::from("re,im\n");
    for z in &search.roots {
        roots.push_str(&format!("{},{}\n", z.re, z.im));
        a.say(format!("root {} {:+}i", z.re, z.im));
    }
    a.file(
        "stability.csv",
        kv_csv(&[
            ("v0", v.to_string()),
            ("bound", kind.to_string()),
            ("stable", search.abscissa.is_stable().to_string()),
        ]),
    );
    a.file("roots.csv", roots);
    Ok(a)
}

fn norms_csv(fs: &FundamentalSolution) -> String {
    let mut out = String::from("quantity,value,tail_bound\n");
    for (name, r) in [
        ("l2_norm_sq", fs.l2_norm_sq()),
        ("l2_norm_sq_dot", fs.l2_norm_sq_dot()),
    ] {
        match r {
            Ok(i) => out.push_str(&format!("{name},{},{}\n", i.value, i.tail_bound)),
            Err(_) => out.push_str(&format!("{name},inf,\n")),
        }
    }
    out.push_str(&format!("decay_c,{},\n", fs.decay.c));
    out.push_str(&format!("decay_beta,{},\n", fs.decay.beta));
    if let Some(t) = fs.overflow_at {
        out.push_str(&format!("overflow_at,{t},\n"));
    }
    out
}

pub fn fundamental(c: &Config) -> Result<Artifacts, CliError> {
    let mu = delay_measure(c)?;
    let h = c.req_f64("h")?;
    let horizon = c.f64("fundamental.horizon")?;
    let fs = match horizon {
        Some(t) => compute_r(&mu, t, h),
        None => compute_r_default(&mu, h),
    }
    .map_err(num)?;
    let mut a = Artifacts::default();
    if let Ok(i) = fs.l2_norm_sq() {
        a.say(format!("|r|^2={}", i.value));
    }
    a.say(format!(
        "decay: |r(t)| <= {} exp(-{} t)",
        fs.decay.c, fs.decay.beta
    ));
    a.file("r.csv", fs.to_csv().map_err(num)?);
    a.file("norms.csv", norms_csv(&fs));
    Ok(a)
}

pub fn simulate(c: &Config) -> Result<Artifacts, CliError> {
    let p = problem(c)?;
    let reps = c.usize_or("simulate.replicates", 1)?;
    let master = seed(c)?;
    let paths = (0..reps)
        .into_par_iter()
        .map(|i| solve_euler(&p, PathSeed::new(master, i as u64))?.to_csv())
        .collect::<sdde::Result<Vec<_>>>()
        .map_err(num)?;
    let mut a = Artifacts::default();
    for (i, body) in paths.into_iter().enumerate() {
        a.file(&format!("path_{i}.csv"), body);
    }
    a.say(format!(
        "{reps} path(s) on [-{}, {}]",
        p.mu.alpha(),
        p.t_end
    ));
    Ok(a)
}

pub fn verify(c: &Config) -> Result<Artifacts, CliError> {
    let p = problem(c)?;
    let levels = c.usize_or("verify.levels", 3)?;
    if levels < 2 {
        return Err(CliError::Config("`verify.levels`: need at least 2".into()));
    }
    let coarsest = 1usize << (levels - 1);
    let fine = c.f64_or("verify.fine_h", p.h / coarsest as f64)?;
    let mut ladder = Vec::new();
    for l in 0..levels {
        let factor = coarsest >> l;
        let mut cl = c.clone();
        cl.set("h", (fine * factor as f64).to_string());
        let q = problem(&cl)?.with_scheme(DriftScheme::Euler);
        ladder.push((factor, q));
    }
    let reps = c.usize_or("verify.replicates", 50)?;
    let phi2 = match c.f64("verify.phi2")? {
        Some(v) => sdde::Segment::constant(p.mu.alpha(), p.h, v).map_err(cfg_err)?,
        None => initial(c, p.mu.alpha(), p.h)?.scaled(-1.0),
    };
    let alpha = p.mu.alpha();
    let n_alpha = steps("mu.alpha", alpha, p.h)?;
    let checkpoints: Vec<f64> = (0..)
        .map(|j| j as f64 * alpha)
        .take_while(|t| *t <= p.t_end + 1e-9 * alpha)
        .collect();
    let master = seed(c)?;

    let base = p
        .levy
        .sample_path(p.t_end, fine, PathSeed::from(master))
        .map_err(num)?;
    let mut table = String::from("h,sup_diff,ratio\n");
    let mut a = Artifacts::default();
    let mut prev: Option<f64> = None;
    for (factor, q) in &ladder {
        let noise = base.coarsen(*factor).map_err(num)?;
        let fs = compute_r(&q.mu, q.t_end + alpha, q.h).map_err(num)?;
        let e = solve_with_noise(q, &noise).map_err(num)?;
        let v = solve_voc(q, &noise, &fs).map_err(num)?;
        let n0 = q.phi.steps();
        let d = e.values[n0..]
            .iter()
            .zip(&v.values[n0..])
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let ratio = prev.map(|pd| pd / d);
        table.push_str(&format!(
            "{},{d},{}\n",
            q.h,
            ratio.map(|r| r.to_string()).unwrap_or_default()
        ));
        a.say(format!(
            "h={} sup|euler-voc|={d:.3e}{}",
            q.h,
            ratio.map(|r| format!(" ratio={r:.3}")).unwrap_or_default()
        ));
        prev = Some(d);
    }
    a.file("refinement.csv", table);

    let per = (0..reps)
        .into_par_iter()
        .map(|i| {
            let (x, y) = coupled_pair(&p, &p.phi, &phi2, PathSeed::new(master, i as u64 + 1))?;
            Ok(checkpoints
                .iter()
                .map(|&t| {
                    let k = n_alpha + (t / p.h).round() as usize;
                    x.values[k - n_alpha..=k]
                        .iter()
                        .zip(&y.values[k - n_alpha..=k])
                        .map(|(u, w)| (u - w).powi(2))
                        .fold(0.0, f64::max)
                })
                .collect::<Vec<f64>>())
        })
        .collect::<sdde::Result<Vec<_>>>()
        .map_err(num)?;
    let mut coupling = String::from("t,mean_sup_sq,se\n");
    for (j, t) in checkpoints.iter().enumerate() {
        let xs: Vec<f64> = per.iter().map(|r| r[j]).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        coupling.push_str(&format!("{t},{m},{}\n", (var / n).sqrt()));
    }
    a.file("coupling.csv", coupling);
    Ok(a)
}

fn kb_options(
    c: &Config,
    p: &SddeProblem,
    default_spacing: Option<f64>,
) -> Result<KbOptions, CliError> {
    let alpha = p.mu.alpha();
    Ok(KbOptions {
        burn_in: c.f64("stationary.burn_in")?,
        horizon: c.f64_or("stationary.horizon", 1000.0 * alpha)?,
        spacing: c.f64("stationary.spacing")?.or(default_spacing),
        replicates: c.usize_or("stationary.replicates", 1)?,
        seed: seed(c)?,
        segment_every: None,
    })
}

fn report_warning(a: &mut Artifacts, m: &EmpiricalMeasure) {
    if let Some(w) = &m.warning {
        eprintln!("warning: {w}");
        a.say(format!("warning: {w}"));
    }
}

pub fn stationary(c: &Config) -> Result<Artifacts, CliError> {
    let p = problem(c)?;
    let opts = kb_options(c, &p, None)?;
    let bins = c.usize_or("stationary.bins", 50)?;
    let h = p.h;
    let defaults: Vec<f64> = [8.0, 4.0, 2.0, 1.0]
        .iter()
        .map(|d| ((p.t_end / d / h).round() * h).max(h))
        .collect();
    let checkpoints = c.list_or("tightness.checkpoints", &defaults)?;
    let ks = c.list_or("tightness.k", &[1.0, 10.0, 100.0])?;
    let t_reps = c.usize_or("tightness.replicates", 200)?;
    for t in &checkpoints {
        steps("tightness.checkpoints", *t, h)?;
    }

    let m = krylov_bogoliubov(&p, &opts).map_err(num)?;
    let mut a = Artifacts::default();
    report_warning(&mut a, &m);
    let v = m.variance().map_err(num)?;
    a.say(format!(
        "mean={} variance={} (se {})",
        m.mean(),
        v.value,
        v.se
    ));
    a.file(
        "stationary.csv",
        kv_csv(&[
            ("burn_in", m.burn_in.to_string()),
            ("spacing", m.spacing.to_string()),
            ("samples", m.len().to_string()),
            ("mean", m.mean().to_string()),
            ("variance", v.value.to_string()),
            ("variance_se", v.se.to_string()),
            ("ef2", m.ef2.to_string()),
            ("q05", m.quantile(0.05).to_string()),
            ("q50", m.quantile(0.5).to_string()),
            ("q95", m.quantile(0.95).to_string()),
        ]),
    );
    a.file("histogram.csv", m.histogram_csv(bins).map_err(num)?);

    let seed = opts.seed.wrapping_add(1);
    let t = tightness_diagnostic(&p, &checkpoints, &ks, t_reps, seed).map_err(num)?;
    let (d, se) = t.growth_margin();
    a.say(format!(
        "tightness: growth={} (last-first {d:.4}, se {se:.4}), blow-ups {}",
        t.growth, t.blow_ups
    ));
    a.file("tightness.csv", t.to_csv().map_err(num)?);
    Ok(a)
}

/// Spacing dividing every lag: the gcd of their step counts and a target near `0.05`.
fn lag_spacing(lags: &[f64], h: f64, what: &str) -> Result<f64, CliError> {
    let target = ((0.05 / h).round() as usize).max(1);
    let mut g = target;
    for &l in lags {
        g = gcd(g, steps(what, l.abs(), h)?);
    }
    Ok(g.max(1) as f64 * h)
}

fn second_order(
    c: &Config,
    p: &SddeProblem,
    fs: &FundamentalSolution,
    m: &EmpiricalMeasure,
    lags: &[f64],
    xis: &[f64],
) -> Result<SecondOrderReport, CliError> {
    let (ef2, src) = match (c.f64("covariance.ef2")?, p.f.kind()) {
        (Some(v), _) => (v, Ef2Source::Supplied),
        (None, FunctionalKind::Constant(v)) => (v * v, Ef2Source::Exact),
        (None, _) => (m.ef2, Ef2Source::Empirical),
    };
    SecondOrderReport::new(fs, &p.levy, ef2, src, lags, xis).map_err(num)
}

pub fn covariance(c: &Config) -> Result<Artifacts, CliError> {
    let p = problem(c)?;
    let alpha = p.mu.alpha();
    let lags = c.list_or("covariance.lags", &[0.0, alpha / 2.0, alpha])?;
    let spacing = lag_spacing(&lags, p.h, "covariance.lags")?;
    let opts = kb_options(c, &p, Some(spacing))?;
    for l in &lags {
        steps("covariance.lags", *l, opts.spacing.unwrap_or(spacing))?;
    }
    let m = krylov_bogoliubov(&p, &opts).map_err(num)?;
    let mut a = Artifacts::default();
    report_warning(&mut a, &m);
    let fs = compute_r_default(&p.mu, p.h).map_err(num)?;
    let mut r = second_order(c, &p, &fs, &m, &lags, &[])?;
    let emp = m.autocovariance(&lags).map_err(num)?;
    for ((l, an), e) in lags.iter().zip(&r.covariance).zip(&emp) {
        a.say(format!(
            "c({l}) analytic={an} empirical={} se={}",
            e.value, e.se
        ));
    }
    if let Some(d) = r.recentred_drift {
        a.say(format!(
            "note: L has mean rate {d}; covariances are of the centred process"
        ));
    }
    a.say(format!("EF2={} ({})", r.ef2, r.ef2_source));
    r.empirical = Some(emp);
    a.file("covariance.csv", r.covariance_csv().map_err(num)?);
    Ok(a)
}

pub fn spectrum(c: &Config) -> Result<Artifacts, CliError> {
    let p = problem(c)?;
    let alpha = p.mu.alpha();
    let default_xis: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
    let xis = c.list_or("spectrum.xi", &default_xis)?;
    let spacing = lag_spacing(&[], p.h, "stationary.spacing")?;
    let opts = kb_options(c, &p, Some(spacing))?;
    let dt = opts.spacing.unwrap_or(spacing);
    let fs = compute_r_default(&p.mu, p.h).map_err(num)?;
    let lag_steps = match c.f64("spectrum.max_lag")? {
        Some(t) => steps("spectrum.max_lag", t, dt)?,
        // ten decay times of r
        None => ((10.0 * alpha).max(10.0 / fs.decay.beta.max(1e-3)) / dt).ceil() as usize,
    };
    let m = krylov_bogoliubov(&p, &opts).map_err(num)?;
    let mut a = Artifacts::default();
    report_warning(&mut a, &m);
    let mut r = second_order(c, &p, &fs, &m, &[], &xis)?;
    r.periodogram = Some(periodogram(&m.series, dt, lag_steps, &xis).map_err(num)?);
    a.say(format!(
        "S(0) analytic={}",
        r.spectrum.first().copied().unwrap_or(f64::NAN)
    ));
    a.file("spectrum.csv", r.spectrum_csv().map_err(num)?);
    Ok(a)
}

pub fn powerlaw(c: &Config) -> Result<Artifacts, CliError> {
    let p = problem(c)?;
    let (k, upper) = power_law_setup(&p).map_err(cfg_err)?;
    let window = c.f64_or("powerlaw.window", 0.9 * upper)?;
    let mut opts = kb_options(c, &p, Some(10.0 * p.h))?;
    if !c.has("stationary.horizon") {
        opts.horizon = 1e5;
    }
    let m = krylov_bogoliubov(&p, &opts).map_err(num)?;
    let fit = cp_power_law_fit(&m, window).map_err(num)?;
    let mut a = Artifacts::default();
    a.say(format!(
        "exponent={} expected={k} relative_error={} mle={} (se {})",
        fit.exponent,
        (fit.exponent - k).abs() / k,
        fit.mle,
        fit.mle_se
    ));
    a.file("powerlaw.csv", fit.to_csv(Some(k)).map_err(num)?);
    let mut cdf = String::from("x,cdf\n");
    for (x, f) in &fit.points {
        cdf.push_str(&format!("{x},{f}\n"));
    }
    a.file("cdf.csv", cdf);
    Ok(a)
}

pub fn nonunique(c: &Config) -> Result<Artifacts, CliError> {
    let d = NonUniqueOptions::default();
    let o = NonUniqueOptions {
        sigmas: c.list_or("nonunique.sigmas", &d.sigmas)?,
        a: c.f64_or("nonunique.a", d.a)?,
        alpha: c.f64_or("nonunique.alpha", d.alpha)?,
        t_end: c.f64_or("nonunique.T", d.t_end)?,
        h: c.f64_or("nonunique.h", d.h)?,
        replicates: c.usize_or("nonunique.replicates", d.replicates)?,
        seed: seed(c)?,
        spacing: c.f64_or("nonunique.spacing", d.spacing)?,
    };
    let r = nonuniqueness_demo(&o).map_err(num)?;
    let mut a = Artifacts::default();
    for row in &r.rows {
        a.say(format!(
            "sigma={} variance={} (se {}) target={} sup|F-sigma|={}",
            row.sigma, row.variance.value, row.variance.se, row.target, row.sup_f_dev
        ));
    }
    a.say(format!(
        "ratio={} (se {}) expected={}",
        r.ratio.value, r.ratio.se, r.expected_ratio
    ));
    a.file("nonunique.csv", r.to_csv().map_err(num)?);
    Ok(a)
}

pub fn feller_demo(c: &Config) -> Result<Artifacts, CliError> {
    let p = problem(c)?;
    let beta = c.f64_or("feller.beta", p.mu.alpha() / 2.0)?;
    let n = c.usize_or("feller.n", 100)?;
    let r = feller_counterexample(beta, n, &p, seed(c)?).map_err(num)?;
    let mut a = Artifacts::default();
    a.say(format!(
        "n={} d_S<={} gap(alpha-beta)={} gap(alpha)={} gap(after alpha)<={}",
        r.n, r.initial_upper, r.gap_before, r.gap_at_alpha, r.gap_after
    ));
    a.file("feller.csv", r.to_csv().map_err(num)?);
    Ok(a)
}
