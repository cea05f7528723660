use super::*;
use crate::functional::InnerMap;
use crate::fundamental::{compute_r, deterministic_solution};
use crate::levy::{JumpFamily, JumpSpec};
use crate::path::Jump;
use proptest::prelude::*;

fn ou(a: f64, sigma: f64, alpha: f64, t_end: f64, h: f64, x0: f64) -> SddeProblem {
    SddeProblem::new(
        DelayMeasure::point(alpha, 0.0, -a).unwrap(),
        DiffusionFunctional::constant(sigma).unwrap(),
        LevyTriplet::wiener(1.0).unwrap(),
        Segment::constant(alpha, h, x0).unwrap(),
        t_end,
        h,
    )
    .unwrap()
}

fn point_delay_jump(h: f64, t_end: f64) -> SddeProblem {
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
    SddeProblem::new(mu, f, levy, phi, t_end, h).unwrap()
}

#[test]
fn one_gaussian_step_is_explicit_euler() {
    let (a, sigma, h, x0) = (1.3, 0.7, 0.01, 2.0);
    let p = ou(a, sigma, 0.1, h, h, x0);
    let path = solve_euler(&p, 11).unwrap();
    let noise = p.levy.sample_path(h, h, PathSeed::from(11)).unwrap();
    let expect = x0 - a * x0 * h + sigma * noise.dl[0];
    assert!((path.values.last().unwrap() - expect).abs() < 1e-14);
}

#[test]
fn pure_jump_accumulates_jump_sizes() {
    let (alpha, h, t_end, x0) = (1.0, 0.01, 20.0, 0.5);
    let spec = JumpSpec::new(3.0, JumpFamily::Exponential { mean: 0.7 }).unwrap();
    let p = SddeProblem::new(
        DelayMeasure::point(alpha, 0.0, 0.0).unwrap(),
        DiffusionFunctional::constant(1.0).unwrap(),
        LevyTriplet::pure_jump(spec),
        Segment::constant(alpha, h, x0).unwrap(),
        t_end,
        h,
    )
    .unwrap();
    let noise = p.levy.sample_path(t_end, h, PathSeed::from(5)).unwrap();
    assert!(noise.jumps.len() > 20);
    let total: f64 = noise.jumps.iter().map(|j| j.size).sum();
    let path = solve_euler(&p, 5).unwrap();
    assert!((path.values.last().unwrap() - (x0 + total)).abs() < 1e-9);
    // marks sit at the sampled times
    let times: Vec<f64> = noise.jumps.iter().map(|j| j.time).collect();
    let marks: Vec<f64> = path.jumps.iter().map(|j| j.time).collect();
    assert_eq!(times, marks);
}

#[test]
fn exact_decay_between_jumps() {
    // mu = -a delta_0, sigma^2 = 0: X(t) = X(0) e^{-at} + sum e^{-a(t - tau)} J
    let (a, h, t_end, x0) = (0.8, 0.05, 10.0, 1.5);
    let spec = JumpSpec::new(1.5, JumpFamily::Constant { size: 1.0 }).unwrap();
    let p = SddeProblem::new(
        DelayMeasure::point(1.0, 0.0, -a).unwrap(),
        DiffusionFunctional::constant(1.0).unwrap(),
        LevyTriplet::pure_jump(spec),
        Segment::constant(1.0, h, x0).unwrap(),
        t_end,
        h,
    )
    .unwrap();
    let noise = p.levy.sample_path(t_end, h, PathSeed::from(2)).unwrap();
    let path = solve_euler(&p, 2).unwrap();
    let view = path.view();
    for k in (0..=200).step_by(7) {
        let t = k as f64 * h;
        let want = x0 * (-a * t).exp()
            + noise
                .jumps
                .iter()
                .filter(|j| j.time <= t)
                .map(|j| (-a * (t - j.time)).exp())
                .sum::<f64>();
        assert!((view.value_at(t) - want).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn zero_noise_reduces_to_deterministic_solution() {
    let mu = DelayMeasure::point(1.0, -1.0, -1.0).unwrap();
    let mut errs = vec![];
    for h in [0.01, 0.005, 0.0025] {
        let phi = Segment::from_fn(1.0, h, |s| 1.0 + s).unwrap();
        let p = SddeProblem::new(
            mu.clone(),
            DiffusionFunctional::constant(0.0).unwrap(),
            LevyTriplet::wiener(1.0).unwrap(),
            phi.clone(),
            5.0,
            h,
        )
        .unwrap();
        let x = solve_euler(&p, 1).unwrap();
        let d = deterministic_solution(&mu, &phi, 5.0, h).unwrap();
        errs.push(x.sup_distance(&d).unwrap());
    }
    assert!(errs[0] < 0.05);
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..2.3).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn voc_with_zero_noise_is_deterministic_path() {
    let h = 0.01;
    let mu = DelayMeasure::point(1.0, -1.0, -1.2).unwrap();
    let phi = Segment::from_fn(1.0, h, |s| s * s).unwrap();
    let p = SddeProblem::new(
        mu.clone(),
        DiffusionFunctional::constant(0.0).unwrap(),
        LevyTriplet::wiener(1.0).unwrap(),
        phi.clone(),
        4.0,
        h,
    )
    .unwrap();
    let fs = compute_r(&mu, 5.0, h).unwrap();
    let noise = p.levy.sample_path(4.0, h, PathSeed::from(3)).unwrap();
    let x = solve_voc(&p, &noise, &fs).unwrap();
    let d = deterministic_solution(&mu, &phi, 4.0, h).unwrap();
    assert!(x.sup_distance(&d).unwrap() < 1e-12);
}

fn refinement(build: impl Fn(f64) -> SddeProblem, t_end: f64) -> Vec<f64> {
    let fine = 2.5e-3;
    let p = build(fine);
    let base = p.levy.sample_path(t_end, fine, PathSeed::from(17)).unwrap();
    let mut out = vec![];
    for factor in [4usize, 2, 1] {
        let h = fine * factor as f64;
        let p = build(h).with_scheme(DriftScheme::Euler);
        let noise = base.coarsen(factor).unwrap();
        let fs = compute_r(&p.mu, t_end + 1.0, h).unwrap();
        let e = solve_with_noise(&p, &noise).unwrap();
        let v = solve_voc(&p, &noise, &fs).unwrap();
        let n0 = p.phi.steps();
        let d = e.values[n0..]
            .iter()
            .zip(&v.values[n0..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push(d);
    }
    out
}

#[test]
fn voc_refinement_ou() {
    let errs = refinement(|h| ou(1.0, 1.0, 0.5, 5.0, h, 1.0), 5.0);
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((1.5..=3.0).contains(&r), "{errs:?}");
    }
}

#[test]
fn voc_refinement_point_delay_jump_diffusion() {
    let errs = refinement(|h| point_delay_jump(h, 5.0), 5.0);
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((1.5..=3.0).contains(&r), "{errs:?}");
    }
}

#[test]
fn voc_rejects_foreign_fundamental_solution() {
    let p = ou(1.0, 1.0, 0.5, 1.0, 0.01, 0.0);
    let other = DelayMeasure::point(0.5, 0.0, -2.0).unwrap();
    let fs = compute_r(&other, 2.0, 0.01).unwrap();
    let noise = p.levy.sample_path(1.0, 0.01, PathSeed::from(1)).unwrap();
    assert!(solve_voc(&p, &noise, &fs).is_err());
    let fs = compute_r(&p.mu, 0.5, 0.01).unwrap();
    assert!(solve_voc(&p, &noise, &fs).is_err());
}

#[test]
fn coupled_pair_identical_segments() {
    let p = point_delay_jump(0.01, 3.0);
    let (a, b) = coupled_pair(&p, &p.phi, &p.phi, 4).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.jumps, b.jumps);
}

#[test]
fn coupled_pair_constant_f_difference_is_deterministic() {
    let h = 0.01;
    let mu = DelayMeasure::point(1.0, -1.0, -1.0).unwrap();
    let levy = LevyTriplet::new(
        0.0,
        1.0,
        Some(JumpSpec::new(1.0, JumpFamily::Constant { size: 1.0 }).unwrap()),
    )
    .unwrap();
    let phi1 = Segment::constant(1.0, h, 1.0).unwrap();
    let phi2 = Segment::constant(1.0, h, -1.0).unwrap();
    let p = SddeProblem::new(
        mu.clone(),
        DiffusionFunctional::constant(0.8).unwrap(),
        levy,
        phi1.clone(),
        6.0,
        h,
    )
    .unwrap();
    let (x, y) = coupled_pair(&p, &phi1, &phi2, 9).unwrap();
    // with F constant, X - Y solves the noiseless equation from phi1 - phi2
    let zero_noise = SddeProblem {
        f: DiffusionFunctional::constant(0.0).unwrap(),
        ..p.with_initial(Segment::constant(1.0, h, 2.0).unwrap())
            .unwrap()
    };
    let free = solve_euler(&zero_noise, 9).unwrap();
    for k in 0..x.len() {
        assert!((x.values[k] - y.values[k] - free.values[k]).abs() < 1e-9);
    }
}

#[test]
fn segment_at_examples() {
    let h = 0.1;
    let phi = Segment::from_fn(1.0, h, |s| s.sin()).unwrap();
    let path = phi.to_path();
    let seg = segment_at(&path, 0.0, 1.0).unwrap();
    assert_eq!(seg.values, phi.values);

    let c = GridPath::new(0.0, h, vec![2.0; 31], vec![]).unwrap();
    let seg = segment_at(&c, 2.0, 1.0).unwrap();
    assert!(seg.values.iter().all(|&v| v == 2.0));

    let mut vals = vec![0.0; 31];
    for v in vals.iter_mut().skip(16) {
        *v = 1.0;
    }
    let jumped = GridPath::new(
        0.0,
        h,
        vals,
        vec![Jump {
            time: 1.55,
            size: 1.0,
        }],
    )
    .unwrap();
    let seg = segment_at(&jumped, 2.0, 1.0).unwrap();
    assert_eq!(seg.jumps.len(), 1);
    assert!((seg.jumps[0].time + 0.45).abs() < 1e-12);
    assert!(segment_at(&jumped, 0.5, 1.0).is_err());
}

#[test]
fn jump_does_not_change_functional_at_its_own_time() {
    let h = 0.1;
    let f = DiffusionFunctional::running_sup(1.0).unwrap();
    let g = DiffusionFunctional::no_delay(InnerMap::identity()).unwrap();
    let mut vals: Vec<f64> = (0..=20).map(|k| (k as f64 * 0.3).sin()).collect();
    let plain = GridPath::new(-1.0, h, vals.clone(), vec![]).unwrap();
    for v in vals.iter_mut().skip(15) {
        *v += 5.0;
    }
    let t = 0.5;
    let jumped = GridPath::new(-1.0, h, vals, vec![Jump { time: t, size: 5.0 }]).unwrap();
    for fun in [&f, &g] {
        let a = fun.evaluate(&plain, t).unwrap();
        let b = fun.evaluate(&jumped, t).unwrap();
        assert!((a - b).abs() < 1e-12);
        let later = t + h;
        assert!(fun.evaluate(&jumped, later).unwrap() > fun.evaluate(&plain, later).unwrap());
    }
}

#[test]
fn jump_marks_use_pre_jump_state() {
    let p = point_delay_jump(0.01, 4.0);
    let noise = p.levy.sample_path(4.0, 0.01, PathSeed::from(8)).unwrap();
    let path = solve_with_noise(&p, &noise).unwrap();
    let new: Vec<_> = path.jumps.iter().filter(|j| j.time > 0.0).collect();
    assert_eq!(new.len(), noise.jumps.len());
    for (m, j) in new.iter().zip(&noise.jumps) {
        let mut view = path.view_until(0.01 * (m.time / 0.01).floor()).unwrap();
        let before = path.view().left_limit_at(m.time);
        view.tip = Some((m.time, before));
        let fv = p.f.evaluate_view(&view).unwrap();
        assert!((m.size - fv * j.size).abs() < 1e-9 * (1.0 + m.size.abs()));
    }
}

#[test]
fn one_step_moments_of_jump_diffusion_reduction() {
    // mu = b delta_0, NoDelay F, Wiener with drift: X(h) = x0 (1 + b h) + f(x0) dL
    let (b, h, x0) = (-0.7, 0.05, 1.2);
    let f = InnerMap::Affine {
        offset: 0.5,
        slope: 0.4,
    };
    let levy = LevyTriplet::new(0.3, 2.0, None).unwrap();
    let p = SddeProblem::new(
        DelayMeasure::point(1.0, 0.0, b).unwrap(),
        DiffusionFunctional::no_delay(f).unwrap(),
        levy,
        Segment::constant(1.0, h, x0).unwrap(),
        h,
        h,
    )
    .unwrap();
    let n = 20000;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            *solve_euler(&p, PathSeed::new(77, i))
                .unwrap()
                .values
                .last()
                .unwrap()
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let fx = f.apply(x0);
    let m_true = x0 * (1.0 + b * h) + fx * 0.3 * h;
    let v_true = fx * fx * 2.0 * h;
    assert!((mean - m_true).abs() < 3.0 * (v_true / n as f64).sqrt());
    // variance of a sample variance of Gaussians: 2 v^2 / (n - 1)
    assert!((var - v_true).abs() < 3.0 * v_true * (2.0 / (n - 1) as f64).sqrt());
}

#[test]
fn jump_in_fixed_cell_frequency() {
    let (lambda, h) = (2.0, 0.05);
    let spec = JumpSpec::new(lambda, JumpFamily::Constant { size: 1.0 }).unwrap();
    let p = SddeProblem::new(
        DelayMeasure::point(1.0, 0.0, -1.0).unwrap(),
        DiffusionFunctional::constant(1.0).unwrap(),
        LevyTriplet::pure_jump(spec),
        Segment::constant(1.0, h, 0.0).unwrap(),
        2.0,
        h,
    )
    .unwrap();
    let n = 4000;
    let (lo, hi) = (1.0, 1.0 + h);
    let hits = (0..n)
        .filter(|&i| {
            let path = solve_euler(&p, PathSeed::new(3, i)).unwrap();
            path.jumps.iter().any(|j| j.time > lo && j.time <= hi)
        })
        .count();
    let q = 1.0 - (-lambda * h).exp();
    let se = (q * (1.0 - q) / n as f64).sqrt();
    assert!((hits as f64 / n as f64 - q).abs() < 3.0 * se);
}

#[test]
fn problem_validation() {
    let h = 0.2;
    let mu = DelayMeasure::point(1.0, 0.0, -1.0).unwrap();
    let f = DiffusionFunctional::constant(1.0).unwrap();
    let levy = LevyTriplet::wiener(1.0).unwrap();
    let phi = Segment::constant(1.0, h, 0.0).unwrap();
    assert!(SddeProblem::new(mu.clone(), f.clone(), levy, phi, 1.0, h).is_err());
    let phi = Segment::constant(2.0, 0.1, 0.0).unwrap();
    assert!(SddeProblem::new(mu.clone(), f.clone(), levy, phi, 1.0, 0.1).is_err());
    let phi = Segment::constant(1.0, 0.1, 0.0).unwrap();
    assert!(SddeProblem::new(mu.clone(), f.clone(), levy, phi.clone(), 1.05, 0.1).is_err());
    let wide = DiffusionFunctional::running_sup(2.0).unwrap();
    assert!(SddeProblem::new(mu, wide, levy, phi, 1.0, 0.1).is_err());
}

#[test]
fn blow_up_reports_time() {
    let h = 0.01;
    let p = SddeProblem::new(
        DelayMeasure::point(1.0, 0.0, 800.0).unwrap(),
        DiffusionFunctional::constant(0.0).unwrap(),
        LevyTriplet::wiener(1.0).unwrap(),
        Segment::constant(1.0, h, 1.0).unwrap(),
        200.0,
        h,
    )
    .unwrap();
    match solve_euler(&p, 0) {
        Err(SddeError::BlowUp { t }) => assert!(t > 0.0 && t < 200.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn observed_run_matches_recorded_path() {
    let p = point_delay_jump(0.01, 30.0);
    let path = solve_euler(&p, 21).unwrap();
    let n0 = p.phi.steps();
    let mut seen = vec![];
    solve_observed(&p, 21, |info| {
        assert!(info.view.t0 <= info.t - 1.0 + 1e-9);
        seen.push(info.view.values[info.view.last_node()]);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, path.values[n0..].to_vec());
}

#[test]
fn stationary_ou_segment_variance() {
    let (a, sigma) = (1.0, 1.0);
    let n = 4000;
    let mut first = vec![];
    let mut last = vec![];
    for i in 0..n {
        let s = stationary_ou_segment(a, sigma, 1.0, 0.1, PathSeed::new(4, i)).unwrap();
        first.push(s.first());
        last.push(s.last());
    }
    let var = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    let v = sigma * sigma / (2.0 * a);
    let se = v * (2.0 / n as f64).sqrt();
    assert!((var(&first) - v).abs() < 3.0 * se);
    assert!((var(&last) - v).abs() < 3.0 * se);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn same_seed_same_path(seed in any::<u64>()) {
        let p = point_delay_jump(0.02, 2.0);
        let a = solve_euler(&p, seed).unwrap();
        let b = solve_euler(&p, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn running_sup_functional_solves(seed in 0u64..1000) {
        let h = 0.02;
        let p = SddeProblem::new(
            DelayMeasure::point(1.0, 0.0, -1.0).unwrap(),
            DiffusionFunctional::running_sup(1.0).unwrap(),
            LevyTriplet::new(
                0.0,
                0.1,
                Some(JumpSpec::new(1.0, JumpFamily::Constant { size: -0.2 }).unwrap()),
            )
            .unwrap(),
            Segment::constant(1.0, h, 0.5).unwrap(),
            2.0,
            h,
        ).unwrap();
        let path = solve_euler(&p, seed).unwrap();
        prop_assert!(path.values.iter().all(|v| v.is_finite()));
    }
}
