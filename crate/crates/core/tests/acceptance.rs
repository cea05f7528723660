//! Acceptance suite. Each criterion prints one PASS/FAIL line; the run is repeated in a
//! one-thread and a four-thread pool and the outputs are compared byte for byte.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use sdde::delay_measure::v0;
use sdde::levy::check_assumptions;
use sdde::stationary::{power_law_setup, spectral_inverse};
use sdde::*;

struct Outcome {
    pass: bool,
    summary: String,
    /// Every number the criterion computed, printed exactly.
    output: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            summary: String::new(),
            output: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl AsRef<str>) {
        if !self.summary.is_empty() {
            self.summary.push_str("; ");
        }
        self.summary.push_str(what.as_ref());
        if !ok {
            self.summary.push_str(" [failed]");
        }
        self.pass &= ok;
    }

    fn record(&mut self, key: &str, v: f64) {
        writeln!(self.output, "{key}={v:?}").unwrap();
    }
}

type Criterion = fn() -> sdde::Result<Outcome>;

fn wiener() -> LevyTriplet {
    LevyTriplet::wiener(1.0).unwrap()
}

// criterion 1

/// `r` for `b delta_{-alpha}` by the method of steps.
fn method_of_steps(b: f64, alpha: f64, t: f64) -> f64 {
    let mut acc = 0.0;
    let mut fact = 1.0;
    let mut j = 0;
    while j as f64 * alpha <= t + 1e-12 {
        if j > 0 {
            fact *= j as f64;
        }
        acc += b.powi(j) * (t - j as f64 * alpha).powi(j) / fact;
        j += 1;
    }
    acc
}

fn fundamental_accuracy() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let h = 1e-3;
    let ou = compute_r(&DelayMeasure::point(1.0, 0.0, -1.0)?, 10.0, h)?;
    let e1 = (0..=10_000)
        .map(|k| (ou.r[k] - (-(k as f64) * h).exp()).abs())
        .fold(0.0, f64::max);
    let pd = compute_r(&DelayMeasure::point(1.0, -1.0, -1.0)?, 3.0, h)?;
    let e2 = (0..=3000)
        .map(|k| (pd.r[k] - method_of_steps(-1.0, 1.0, k as f64 * h)).abs())
        .fold(0.0, f64::max);
    o.record("ou_err", e1);
    o.record("delay_err", e2);
    o.check(e1 <= 1e-4, format!("OU max err {e1:.2e}"));
    o.check(e2 <= 1e-4, format!("point delay max err {e2:.2e}"));
    Ok(o)
}

// criterion 2

/// Zeros of `z - b e^{-z}` inside the rectangle, by the argument principle with
/// adaptive subdivision of each edge.
fn winding(b: f64, re: (f64, f64), im: (f64, f64)) -> i64 {
    let chi = |z: Complex64| z - b * (-z).exp();
    fn edge(chi: &dyn Fn(Complex64) -> Complex64, a: Complex64, c: Complex64, depth: u32) -> f64 {
        let d = (chi(c) / chi(a)).arg();
        if d.abs() < 0.1 || depth == 0 {
            return d;
        }
        let m = 0.5 * (a + c);
        edge(chi, a, m, depth - 1) + edge(chi, m, c, depth - 1)
    }
    let corners = [
        Complex64::new(re.0, im.0),
        Complex64::new(re.1, im.0),
        Complex64::new(re.1, im.1),
        Complex64::new(re.0, im.1),
    ];
    let mut total = 0.0;
    for i in 0..4 {
        let (a, c) = (corners[i], corners[(i + 1) % 4]);
        for s in 0..200 {
            let p = a + (c - a) * (s as f64 / 200.0);
            let q = a + (c - a) * ((s + 1) as f64 / 200.0);
            total += edge(&chi, p, q, 40);
        }
    }
    (total / (2.0 * PI)).round() as i64
}

fn stability_abscissa() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0, 7.0] {
        let v = v0(&DelayMeasure::point(1.0, 0.0, -a)?, 1e-10)?.value();
        o.record("v0", v);
        worst = worst.max((v + a).abs());
    }
    o.check(worst <= 1e-8, format!("v0(-a delta_0) max err {worst:.1e}"));

    // library: bisection on the sign of v0 along b delta_{-1}
    let unstable = |b: f64| -> sdde::Result<bool> {
        Ok(!v0(&DelayMeasure::point(1.0, -1.0, b)?, 1e-7)?.is_stable())
    };
    let (mut lo, mut hi) = (-2.0, -1.0);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b_lib = 0.5 * (lo + hi);

    // oracle: dense scan counting zeros in the closed right half-plane box
    let step = 2e-4;
    let b_scan = (0..=5000)
        .map(|j| -1.0 - j as f64 * step)
        .find(|&b| {
            let r = b.abs() + 1.0;
            winding(b, (-1e-9, r), (-r, r)) > 0
        })
        .unwrap_or(f64::NAN);
    o.record("b_lib", b_lib);
    o.record("b_scan", b_scan);
    let e_lib = (b_lib + FRAC_PI_2).abs();
    let e_scan = (b_scan + FRAC_PI_2).abs();
    o.check(
        e_lib <= 1e-3 && e_scan <= 1e-3 && (b_lib - b_scan).abs() <= 1e-3,
        format!(
            "sign change at b={b_lib:.6} (scan {b_scan:.4}, -pi/2={:.6})",
            -FRAC_PI_2
        ),
    );
    Ok(o)
}

// criterion 3

fn refinement(build: impl Fn(f64) -> SddeProblem, t_end: f64, seed: u64) -> sdde::Result<Vec<f64>> {
    let fine = 2.5e-3;
    let base = build(fine)
        .levy
        .sample_path(t_end, fine, PathSeed::from(seed))?;
    let mut out = vec![];
    for factor in [4usize, 2, 1] {
        let h = fine * factor as f64;
        let p = build(h).with_scheme(DriftScheme::Euler);
        let noise = base.coarsen(factor)?;
        let fs = compute_r(&p.mu, t_end + 1.0, h)?;
        let e = solve_with_noise(&p, &noise)?;
        let v = solve_voc(&p, &noise, &fs)?;
        let n0 = p.phi.steps();
        let d = e.values[n0..]
            .iter()
            .zip(&v.values[n0..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push(d);
    }
    Ok(out)
}

fn voc_identity() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let ou = |h: f64| {
        SddeProblem::new(
            DelayMeasure::point(0.5, 0.0, -1.0).unwrap(),
            DiffusionFunctional::constant(1.0).unwrap(),
            wiener(),
            Segment::constant(0.5, h, 1.0).unwrap(),
            5.0,
            h,
        )
        .unwrap()
    };
    let jump_diffusion = |h: f64| {
        let mu = DelayMeasure::point(1.0, -1.0, -0.8)
            .unwrap()
            .with_atom(0.0, -0.5)
            .unwrap();
        let f = DiffusionFunctional::point_delay(
            InnerMap::TanhScaled {
                offset: 1.0,
                scale: 0.3,
                rate: 1.0,
            },
            vec![0.0, 0.5],
            vec![1.0, 0.5],
        )
        .unwrap();
        let levy = LevyTriplet::new(
            0.1,
            0.5,
            Some(JumpSpec::new(2.0, JumpFamily::Exponential { mean: 0.5 }).unwrap()),
        )
        .unwrap();
        let phi = Segment::from_fn(1.0, h, |s| (3.0 * s).cos()).unwrap();
        SddeProblem::new(mu, f, levy, phi, 5.0, h).unwrap()
    };
    for (name, errs) in [
        ("OU", refinement(ou, 5.0, 17)?),
        (
            "point-delay jump diffusion",
            refinement(jump_diffusion, 5.0, 17)?,
        ),
    ] {
        let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
        for e in &errs {
            o.record(name, *e);
        }
        o.check(
            ratios.iter().all(|r| (1.5..=3.0).contains(r)),
            format!("{name} ratios {:.2} {:.2}", ratios[0], ratios[1]),
        );
    }
    Ok(o)
}

// criterion 4

fn stationary_ou() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let h = 1e-3;
    let p = SddeProblem::new(
        DelayMeasure::point(0.5, 0.0, -1.0)?,
        DiffusionFunctional::constant(1.0)?,
        wiener(),
        Segment::constant(0.5, h, 0.0)?,
        1.0,
        h,
    )?;
    let opts = KbOptions {
        burn_in: Some(10.0),
        horizon: 1000.0,
        spacing: Some(0.01),
        replicates: 1,
        seed: 4,
        segment_every: None,
    };
    let m = krylov_bogoliubov(&p, &opts)?;
    let v = m.variance()?;
    o.record("var", v.value);
    o.record("var_se", v.se);
    o.check(
        v.covers(0.5, 3.0),
        format!("variance {:.4} +- {:.4} vs 0.5", v.value, v.se),
    );
    let lags = [0.0, 0.5, 1.0];
    let c = m.autocovariance(&lags)?;
    for (l, e) in lags.iter().zip(&c) {
        let target = 0.5 * (-l).exp();
        o.record("cov", e.value);
        o.record("cov_se", e.se);
        o.check(
            e.covers(target, 3.0),
            format!("c({l}) {:.4} +- {:.4} vs {target:.4}", e.value, e.se),
        );
    }
    Ok(o)
}

// criterion 5

fn covariance_beyond_ou() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let h = 1e-3;
    let mu = DelayMeasure::point(1.0, -1.0, -1.5)?;
    let fs = fundamental::compute_r_default(&mu, h)?;
    let levy = wiener();
    let var0 = analytic_variance(&fs, &levy, 1.0)?;
    let p = SddeProblem::new(
        mu.clone(),
        DiffusionFunctional::constant(1.0)?,
        levy,
        Segment::constant(1.0, h, 0.0)?,
        1.0,
        h,
    )?;
    let mut opts = KbOptions::new(20_000.0, 1, 5);
    opts.spacing = Some(0.05);
    let m = krylov_bogoliubov(&p, &opts)?;
    let lags = [0.0, 0.5, 1.0];
    let emp = m.autocovariance(&lags)?;
    for (l, e) in lags.iter().zip(&emp) {
        let c = analytic_covariance(&fs, var0, *l)?;
        o.record("analytic", c);
        o.record("empirical", e.value);
        o.record("se", e.se);
        o.check(
            e.covers(c, 3.0),
            format!("c({l}) {:.4} +- {:.4} vs {c:.4}", e.value, e.se),
        );
    }
    let mut worst: f64 = 0.0;
    for l in lags {
        let c = analytic_covariance(&fs, var0, l)?;
        let inv = spectral_inverse(&fs, &mu, var0, l, 1000.0, 1e-3)?;
        o.record("inverse", inv);
        worst = worst.max((inv - c).abs() / c.abs());
    }
    o.check(
        worst <= 0.02,
        format!("spectral duality rel err {:.2e}", worst),
    );
    Ok(o)
}

// criterion 6

fn power_law() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let h = 0.01;
    let spec = JumpSpec::new(2.0, JumpFamily::Constant { size: 1.0 })?;
    let p = SddeProblem::new(
        DelayMeasure::point(0.5, 0.0, -1.0)?,
        DiffusionFunctional::constant(1.0)?,
        LevyTriplet::pure_jump(spec),
        Segment::constant(0.5, h, 0.0)?,
        1.0,
        h,
    )?;
    let (k, upper) = power_law_setup(&p)?;
    let mut opts = KbOptions::new(100_000.0, 1, 6);
    opts.burn_in = Some(20.0);
    opts.spacing = Some(0.1);
    let m = krylov_bogoliubov(&p, &opts)?;
    let window = 0.9 * upper;
    let fit = cp_power_law_fit(&m, window)?;
    o.record("exponent", fit.exponent);
    o.record("mle", fit.mle);
    let rel = (fit.exponent - k).abs() / k;
    o.check(
        rel <= 0.05,
        format!(
            "exponent {:.4} vs {k} (rel {:.2}%, mle {:.4})",
            fit.exponent,
            100.0 * rel,
            fit.mle
        ),
    );
    Ok(o)
}

// criterion 7

fn non_uniqueness() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let r = nonuniqueness_demo(&NonUniqueOptions::default())?;
    for row in &r.rows {
        o.record("sup_f_dev", row.sup_f_dev);
        o.record("variance", row.variance.value);
        let rel = (row.variance.value - row.target).abs() / row.target;
        o.check(
            row.sup_f_dev <= 0.05 && rel <= 0.1,
            format!(
                "sigma {:.3}: sup|F-sigma| {:.4}, var {:.4} vs {:.4}",
                row.sigma, row.sup_f_dev, row.variance.value, row.target
            ),
        );
    }
    let ordered = r
        .rows
        .windows(2)
        .all(|w| w[0].variance.value < w[1].variance.value);
    o.check(ordered, "variances ordered");
    o.record("ratio", r.ratio.value);
    o.check(
        (r.ratio.value - 2.0).abs() <= 0.2,
        format!("ratio {:.4} +- {:.4}", r.ratio.value, r.ratio.se),
    );
    Ok(o)
}

// criterion 8

fn feller_failure() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let h = 1e-3;
    let template = SddeProblem::new(
        DelayMeasure::point(1.0, -1.0, -1.0)?,
        DiffusionFunctional::constant(1.0)?,
        wiener(),
        Segment::constant(1.0, h, 0.0)?,
        5.0,
        h,
    )?;
    let (beta, n) = (0.5, 100);
    let r = feller_counterexample(beta, n, &template, 8)?;
    o.record("upper", r.initial_upper);
    o.record("gap_before", r.gap_before);
    o.record("gap_at_alpha", r.gap_at_alpha);
    o.record("gap_after", r.gap_after);
    let bound = beta / n as f64;
    o.check(
        r.initial_upper <= bound * (1.0 + 1e-9),
        format!("d_S upper {:.6} vs {bound}", r.initial_upper),
    );
    o.check(
        r.gap_before == 1.0,
        format!("gap at alpha-beta {}", r.gap_before),
    );
    o.check(
        r.gap_at_alpha <= 0.1 && r.gap_after <= 0.1,
        format!(
            "gap at alpha {:.2e}, after {:.2e}",
            r.gap_at_alpha, r.gap_after
        ),
    );
    Ok(o)
}

// criterion 9

fn contraction() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let h = 1e-3;
    let alpha = 1.0;
    let f = DiffusionFunctional::point_delay(
        InnerMap::TanhScaled {
            offset: 1.0,
            scale: 0.05,
            rate: 1.0,
        },
        vec![alpha],
        vec![1.0],
    )?;
    let p = SddeProblem::new(
        DelayMeasure::point(alpha, 0.0, -1.0)?,
        f,
        wiener(),
        Segment::constant(alpha, h, 0.0)?,
        20.0,
        h,
    )?;
    let phi1 = Segment::constant(alpha, h, 1.0)?;
    let phi2 = Segment::constant(alpha, h, -1.0)?;
    let sup_sq = |a: &Segment, b: &Segment| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).powi(2))
            .fold(0.0, f64::max)
    };
    let initial = sup_sq(&phi1, &phi2);
    let reps = 200;
    let finals = (0..reps)
        .into_par_iter()
        .map(|i| {
            let (x, y) = coupled_pair(&p, &phi1, &phi2, PathSeed::new(9, i as u64))?;
            Ok(sup_sq(
                &x.segment_at(20.0, alpha)?,
                &y.segment_at(20.0, alpha)?,
            ))
        })
        .collect::<sdde::Result<Vec<f64>>>()?;
    let mean = finals.iter().sum::<f64>() / reps as f64;
    o.record("initial", initial);
    o.record("final", mean);
    o.check(
        mean <= 0.1 * initial,
        format!("mean sup-square difference {mean:.3e} at t=20 vs {initial} at t=0"),
    );
    Ok(o)
}

// criterion 10

/// `int_{|x| > 1} log|x| nu(dx)` up to `|x| = e^ymax`, in the variable `y = log|x|`.
fn log_moment_quadrature(fam: JumpFamily, ymax: f64) -> f64 {
    // density of Y = log|J| on |J| > 1
    let g: Box<dyn Fn(f64) -> f64> = match fam {
        JumpFamily::Constant { size } => {
            let y = size.abs().ln();
            return if y > 0.0 && y <= ymax { y } else { 0.0 };
        }
        JumpFamily::Exponential { mean } => Box::new(move |y: f64| {
            if y > 700.0 {
                0.0
            } else {
                (-y.exp() / mean).exp() / mean * y.exp()
            }
        }),
        JumpFamily::TwoSidedExponential {
            mean_pos,
            mean_neg,
            p_pos,
        } => Box::new(move |y: f64| {
            if y > 700.0 {
                return 0.0;
            }
            let x = y.exp();
            (p_pos * (-x / mean_pos).exp() / mean_pos
                + (1.0 - p_pos) * (-x / mean_neg).exp() / mean_neg)
                * x
        }),
        JumpFamily::Pareto { x_min, tail_index } => Box::new(move |y: f64| {
            let x = y.exp();
            if x < x_min {
                0.0
            } else {
                tail_index * x_min.powf(tail_index) * x.powf(-tail_index)
            }
        }),
        JumpFamily::LogHeavy => Box::new(|y: f64| if y > 1.0 { 1.0 / (y * y) } else { 0.0 }),
    };
    // composite Simpson on [0, ymax] in log-spaced pieces
    let mut acc = 0.0;
    let mut a = 0.0;
    while a < ymax {
        let b = (a * 1.5 + 0.5).min(ymax);
        let n = 2000;
        let d = (b - a) / n as f64;
        let mut s = a * g(a) + b * g(b);
        for i in 1..n {
            let y = a + i as f64 * d;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * y * g(y);
        }
        acc += s * d / 3.0;
        a = b;
    }
    acc
}

fn assumption_gate() -> sdde::Result<Outcome> {
    let mut o = Outcome::new();
    let families = [
        JumpFamily::Constant { size: 2.5 },
        JumpFamily::Exponential { mean: 1.5 },
        JumpFamily::TwoSidedExponential {
            mean_pos: 0.8,
            mean_neg: 2.0,
            p_pos: 0.4,
        },
        JumpFamily::Pareto {
            x_min: 0.5,
            tail_index: 0.5,
        },
        JumpFamily::LogHeavy,
    ];
    let mu = DelayMeasure::point(1.0, 0.0, -1.0)?;
    let f1 = DiffusionFunctional::constant(1.0)?;
    let mut agree = true;
    for fam in families {
        let i1 = log_moment_quadrature(fam, 50.0);
        let i2 = log_moment_quadrature(fam, 5000.0);
        let oracle = (i2 - i1).abs() < 1e-3;
        o.record(fam.name(), i2);
        let levy = LevyTriplet::pure_jump(JumpSpec::new(1.0, fam)?);
        let gate = check_assumptions(&mu, &levy, &f1).log_moment_finite == levy::Verdict::Yes;
        agree &= fam.log_moment_finite() == oracle && gate == oracle;
    }
    o.check(
        agree,
        "log-moment checker agrees with quadrature on five families",
    );

    let h = 0.01;
    let checkpoints = [5.0, 10.0, 20.0, 40.0];
    let ks = [1.0, 10.0, 100.0];
    let table = |fam: JumpFamily, seed: u64| -> sdde::Result<TightnessTable> {
        let p = SddeProblem::new(
            mu.clone(),
            f1.clone(),
            LevyTriplet::pure_jump(JumpSpec::new(1.0, fam)?),
            Segment::constant(1.0, h, 0.0)?,
            1.0,
            h,
        )?;
        tightness_diagnostic(&p, &checkpoints, &ks, 400, seed)
    };
    let heavy = table(JumpFamily::LogHeavy, 10)?;
    let light = table(JumpFamily::Constant { size: 1.0 }, 10)?;
    for t in [&heavy, &light] {
        for row in &t.marginal {
            for v in row {
                o.record("marginal", *v);
            }
        }
    }
    let (dh, seh) = heavy.growth_margin();
    let (dl, _) = light.growth_margin();
    o.check(
        heavy.growth,
        format!("log-heavy growth {dh:.3} (se {seh:.3})"),
    );
    o.check(!light.growth, format!("constant jump growth {dl:.3}"));
    Ok(o)
}

const CRITERIA: [(&str, Criterion); 10] = [
    ("fundamental solution accuracy", fundamental_accuracy),
    ("stability abscissa", stability_abscissa),
    ("variation of constants identity", voc_identity),
    ("stationary OU law", stationary_ou),
    ("covariance beyond OU", covariance_beyond_ou),
    ("power law near zero", power_law),
    ("non-uniqueness in law", non_uniqueness),
    ("Feller failure", feller_failure),
    ("contraction surrogate", contraction),
    ("assumption gate", assumption_gate),
];

fn run_all(threads: usize, print: bool) -> (Vec<String>, bool) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let mut outputs = Vec::new();
    let mut all = true;
    for (i, (name, f)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let (pass, summary, output) = match pool.install(f) {
            Ok(o) => (o.pass, o.summary, o.output),
            Err(e) => (false, format!("error: {e}"), format!("error: {e}")),
        };
        all &= pass;
        if print {
            println!(
                "criterion {:>2} {name}: {} ({summary}) [{:.1}s]",
                i + 1,
                if pass { "PASS" } else { "FAIL" },
                start.elapsed().as_secs_f64()
            );
        }
        outputs.push(output);
    }
    (outputs, all)
}

fn main() {
    let (one, mut all) = run_all(1, true);
    let (four, _) = run_all(4, false);
    let differ: Vec<usize> = (0..one.len())
        .filter(|&i| one[i] != four[i])
        .map(|i| i + 1)
        .collect();
    let det = differ.is_empty();
    println!(
        "criterion 11 determinism across thread counts: {} ({})",
        if det { "PASS" } else { "FAIL" },
        if det {
            "outputs of criteria 1-10 identical with 1 and 4 threads".to_string()
        } else {
            format!("criteria {differ:?} differ")
        }
    );
    all &= det;
    if !all {
        std::process::exit(1);
    }
}
