use super::*;
use crate::delay_measure::DelayMeasure;
use crate::functional::DiffusionFunctional;
use crate::fundamental::compute_r;
use crate::levy::{JumpFamily, JumpSpec, LevyTriplet};
use crate::path::Segment;
use crate::rng::PathSeed;
use crate::solver::{stationary_ou_segment, SddeProblem};

fn problem(mu: DelayMeasure, f: f64, levy: LevyTriplet, h: f64) -> SddeProblem {
    let alpha = mu.alpha();
    SddeProblem::new(
        mu,
        DiffusionFunctional::constant(f).unwrap(),
        levy,
        Segment::constant(alpha, h, 0.0).unwrap(),
        1.0,
        h,
    )
    .unwrap()
}

fn opts(burn_in: f64, horizon: f64, spacing: f64, replicates: usize) -> KbOptions {
    KbOptions {
        burn_in: Some(burn_in),
        horizon,
        spacing: Some(spacing),
        replicates,
        seed: 42,
        segment_every: None,
    }
}

#[test]
fn ou_marginal_variance() {
    let h = 0.01;
    let p = problem(
        DelayMeasure::point(0.5, 0.0, -1.0).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        h,
    );
    let m = krylov_bogoliubov(&p, &opts(10.0, 1500.0, 0.05, 2)).unwrap();
    assert!(m.warning.is_none());
    assert_eq!(m.len(), 2 * 30_000);
    // Euler OU with step h has stationary variance sigma^2 / (2a - a^2 h)
    let v = m.variance().unwrap();
    assert!(v.covers(1.0 / (2.0 - h), 3.0), "{v:?}");
    assert!(v.covers(0.5, 3.0), "{v:?}");
    let c = m.autocovariance(&[0.5, 1.0]).unwrap();
    assert!(c[0].covers(0.5 * (-0.5f64).exp(), 3.0), "{c:?}");
    assert!(c[1].covers(0.5 * (-1.0f64).exp(), 3.0), "{c:?}");
    assert!((m.ef2 - 1.0).abs() < 1e-12);
    assert!(m.autocovariance(&[0.033]).is_err());
}

#[test]
fn point_delay_variance_matches_analytic() {
    let h = 0.01;
    let mu = DelayMeasure::point(1.0, -1.0, -1.0).unwrap();
    let fs = compute_r(&mu, 60.0, h).unwrap();
    let var0 = analytic_variance(&fs, &LevyTriplet::wiener(1.0).unwrap(), 1.0).unwrap();
    let p = problem(mu, 1.0, LevyTriplet::wiener(1.0).unwrap(), h);
    let m = krylov_bogoliubov(&p, &opts(30.0, 3000.0, 0.1, 1)).unwrap();
    let v = m.variance().unwrap();
    // Euler bias is O(h); allow it on top of the statistical error
    assert!(
        (v.value - var0).abs() < 3.0 * v.se + 2.0 * h,
        "{v:?} vs {var0}"
    );
}

#[test]
fn unstable_measure_gets_warning() {
    let p = problem(
        DelayMeasure::point(0.5, 0.0, 0.3).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        0.05,
    );
    let m = krylov_bogoliubov(&p, &opts(1.0, 20.0, 0.5, 2)).unwrap();
    assert!(m.warning.as_deref().unwrap().contains("v0"));
}

#[test]
fn default_burn_in_from_abscissa() {
    let p = problem(
        DelayMeasure::point(0.5, 0.0, -2.0).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        0.05,
    );
    let mut o = KbOptions::new(5.0, 1, 0);
    o.spacing = Some(0.5);
    let m = krylov_bogoliubov(&p, &o).unwrap();
    assert!((m.burn_in - 10.0).abs() < 1e-9);
}

#[test]
fn segments_are_kept() {
    let p = problem(
        DelayMeasure::point(0.5, 0.0, -1.0).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        0.05,
    );
    let mut o = opts(1.0, 10.0, 0.5, 1);
    o.segment_every = Some(5);
    let m = krylov_bogoliubov(&p, &o).unwrap();
    assert_eq!(m.segments.len(), 4);
    assert_eq!(m.segments[0].last(), m.series[0][0]);
    assert!(m.histogram_csv(10).unwrap().lines().count() == 11);
}

#[test]
fn replicate_results_independent_of_thread_count() {
    let p = problem(
        DelayMeasure::point(1.0, -1.0, -1.0).unwrap(),
        0.5,
        LevyTriplet::new(
            0.0,
            1.0,
            Some(JumpSpec::new(1.0, JumpFamily::Exponential { mean: 1.0 }).unwrap()),
        )
        .unwrap(),
        0.02,
    );
    let o = opts(5.0, 50.0, 0.1, 6);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| krylov_bogoliubov(&p, &o).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn stable_ou_has_no_large_exceedances() {
    let p = problem(
        DelayMeasure::point(0.5, 0.0, -1.0).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        0.01,
    );
    let t = tightness_diagnostic(&p, &[2.0, 5.0, 10.0], &[1.0, 10.0], 300, 1).unwrap();
    assert!(t.monotone_in_k);
    assert!(!t.growth);
    for row in &t.marginal {
        assert!(row[1] < 1e-3);
    }
    assert!(t.to_csv().unwrap().lines().count() == 7);
}

#[test]
fn explosive_mean_grows() {
    let p = problem(
        DelayMeasure::point(0.5, 0.0, 0.5).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        0.01,
    );
    let t = tightness_diagnostic(&p, &[1.0, 5.0, 10.0], &[1.0, 10.0], 200, 2).unwrap();
    assert!(t.growth, "{t:?}");
}

#[test]
fn tightness_rejects_off_grid_checkpoints() {
    let p = problem(
        DelayMeasure::point(0.5, 0.0, -1.0).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        0.01,
    );
    assert!(tightness_diagnostic(&p, &[1.005], &[1.0], 2, 0).is_err());
    assert!(tightness_diagnostic(&p, &[2.0, 1.0], &[1.0], 2, 0).is_err());
}

#[test]
fn compound_poisson_power_law() {
    let h = 0.01;
    let spec = JumpSpec::new(2.0, JumpFamily::Constant { size: 1.0 }).unwrap();
    let p = problem(
        DelayMeasure::point(0.5, 0.0, -1.0).unwrap(),
        1.0,
        LevyTriplet::pure_jump(spec),
        h,
    );
    let (k, upper) = power_law_setup(&p).unwrap();
    assert_eq!((k, upper), (2.0, 1.0));
    let m = krylov_bogoliubov(&p, &opts(20.0, 20_000.0, 0.1, 1)).unwrap();
    let fit = cp_power_law_fit(&m, 0.9).unwrap();
    assert!((fit.exponent - 2.0).abs() < 0.1, "{fit:?}");
    assert!((fit.mle - 2.0).abs() < 0.1, "{fit:?}");
}

#[test]
fn power_law_setup_rejects_other_equations() {
    let p = problem(
        DelayMeasure::point(0.5, -0.5, -1.0).unwrap(),
        1.0,
        LevyTriplet::pure_jump(JumpSpec::new(1.0, JumpFamily::Constant { size: 1.0 }).unwrap()),
        0.01,
    );
    assert!(power_law_setup(&p).is_err());
    let q = problem(
        DelayMeasure::point(0.5, 0.0, -1.0).unwrap(),
        1.0,
        LevyTriplet::wiener(1.0).unwrap(),
        0.01,
    );
    assert!(power_law_setup(&q).is_err());
}

#[test]
fn clamped_qv_recovers_sigma_on_exact_ou() {
    let (alpha, h) = (4.0, 1e-3);
    let f = DiffusionFunctional::clamped_qv(alpha).unwrap();
    for (i, sigma) in [1.0, 1.2, 1.35].into_iter().enumerate() {
        let seg = stationary_ou_segment(1.0, sigma, alpha, h, PathSeed::new(6, i as u64)).unwrap();
        let v = f.evaluate(&seg.to_path(), 0.0).unwrap();
        // QV over alpha/2 has relative sd sqrt(4h/alpha); F moves by half of that
        let tol = 4.0 * sigma * 0.5 * (4.0 * h / alpha).sqrt();
        assert!((v - sigma).abs() < tol, "{sigma}: {v}");
    }
}

#[test]
fn nonuniqueness_small_run() {
    let o = NonUniqueOptions {
        alpha: 4.0,
        t_end: 10.0,
        h: 5e-3,
        replicates: 24,
        spacing: 0.5,
        ..NonUniqueOptions::default()
    };
    let r = nonuniqueness_demo(&o).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(r.rows[0].variance.value < r.rows[1].variance.value);
    assert!(r.rows[1].variance.value < r.rows[2].variance.value);
    assert!((r.ratio.value - 2.0).abs() < 0.2, "{r:?}");
    assert!((r.expected_ratio - 2.0).abs() < 1e-12);
    assert!(r.to_csv().unwrap().lines().count() == 4);
    let bad = NonUniqueOptions {
        sigmas: vec![1.0, 1.5],
        ..o
    };
    assert!(nonuniqueness_demo(&bad).is_err());
}
