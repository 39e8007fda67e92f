use richfit_core::diffusion::{log_drift, simulate_paths, DiffusionParams, InitialLaw, SamplePaths};
use richfit_core::growth::{evaluate_modified, perturbation_integral, perturbation_value, Perturbation, RichardsParams};
use richfit_core::inference::*;
use richfit_core::numerics::rng_stream;
use richfit_core::optimize::{alo_maximize, sa_maximize, Method, OptBudget};

const SWITCH: f64 = 4.4755679955;
const TRUTH: [f64; 4] = [2.0, 0.5, 0.2, 0.01];

fn curve() -> RichardsParams {
    RichardsParams::new(2.0, 0.5, 0.2, 0.0, 2.0).unwrap()
}

fn modified(sigma: f64) -> DiffusionParams {
    DiffusionParams::new(curve(), sigma, Perturbation::power_form(1.0, SWITCH).unwrap()).unwrap()
}

fn grid(step: f64, end: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (0..=n).map(|j| j as f64 * step).collect()
}

/// 25 paths simulated on `0, 0.1, ..., 10` from 2 and kept at every other
/// time (51 observations per path).
fn dataset(params: &DiffusionParams, seed: u64) -> SamplePaths {
    simulate_paths(params, &InitialLaw::degenerate(2.0).unwrap(), &grid(0.1, 10.0), 25, seed)
        .unwrap()
        .subsample(2)
        .unwrap()
}

fn rel(est: f64, truth: f64) -> f64 {
    ((est - truth) / truth).abs()
}

fn quick_cfg(reps: usize) -> ProcedureConfig {
    ProcedureConfig {
        n_replications: reps,
        fpt: None,
        ..Default::default()
    }
}

#[test]
fn v_transform_small_cases() {
    let flat = SamplePaths::on_grid(vec![0.0, 0.5, 1.5], vec![vec![3.0; 3], vec![7.0; 3]]).unwrap();
    let vt = v_transform(&flat).unwrap();
    assert_eq!(vt.n(), 4);
    assert_eq!(vt.d(), 2);
    assert!(vt.v1.iter().all(|&v| v == 0.0));

    let e = std::f64::consts::E;
    let two = SamplePaths::on_grid(vec![0.0, 1.0], vec![vec![2.0, 2.0 * e]]).unwrap();
    let vt = v_transform(&two).unwrap();
    assert!((vt.v1[0] - 1.0).abs() < 1e-15);
    assert_eq!(vt.deltas, vec![1.0]);
}

#[test]
fn v_transform_inverts_on_ragged_paths() {
    let mut rng = rng_stream(11, 0);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for i in 0..6 {
        let len = 2 + i;
        let mut t = 0.0;
        let mut ts = Vec::new();
        let mut xs = Vec::new();
        for _ in 0..len {
            ts.push(t);
            xs.push(0.5 + 40.0 * rng.uniform());
            t += 0.05 + rng.uniform();
        }
        times.push(ts);
        values.push(xs);
    }
    let data = SamplePaths::new(times, values).unwrap();
    let vt = v_transform(&data).unwrap();
    assert_eq!(vt.n(), (2..8).map(|l| l - 1).sum::<usize>());
    assert!(vt.deltas.iter().all(|&d| d > 0.0));
    let back = vt.reconstruct().unwrap();
    for i in 0..data.n_paths() {
        let (t, x) = data.path(i);
        let (tb, xb) = back.path(i);
        for j in 0..t.len() {
            assert!((t[j] - tb[j]).abs() < 1e-12);
            assert!(rel(xb[j], x[j]) < 1e-12, "path {i} point {j}: {} vs {}", xb[j], x[j]);
        }
    }
}

#[test]
fn initial_estimates_small_cases() {
    let (mu, var) = initial_mles(&[2.0; 25]).unwrap();
    assert!((mu - 2f64.ln()).abs() < 1e-15 && var == 0.0);
    let (mu, var) = initial_mles(&[1.0, std::f64::consts::E.powi(2)]).unwrap();
    assert!((mu - 1.0).abs() < 1e-14 && (var - 1.0).abs() < 1e-14);
    assert_eq!(initial_mles(&[5.0]).unwrap(), (5f64.ln(), 0.0));
    assert!(initial_mles(&[]).is_err());
    assert!(initial_mles(&[1.0, -2.0]).is_err());
}

// Reference sums computed one increment at a time, with the drift taken from
// the ratio of the modified curve rather than from the diffusion module.
#[test]
fn likelihood_sums_match_a_direct_double_loop() {
    let params = modified(0.015);
    let mut rng = rng_stream(5, 1);
    let mut times = Vec::new();
    for i in 0..7 {
        let mut t = 0.0;
        let mut ts = vec![t];
        for _ in 0..(10 + 3 * i) {
            t += 0.02 + 0.7 * rng.uniform();
            ts.push(t);
        }
        times.push(ts);
    }
    let mut values = Vec::new();
    for ts in &times {
        values.push(ts.iter().map(|&t| evaluate_modified(&curve(), params.perturbation(), t).unwrap() * (1.0 + 0.05 * rng.normal()).abs()).collect());
    }
    let data = SamplePaths::new(times.clone(), values).unwrap();
    let vt = v_transform(&data).unwrap();
    let got = likelihood_terms(&vt, &params).unwrap();

    let s2 = params.sigma() * params.sigma();
    let (mut z1, mut phi, mut gamma) = (0.0, 0.0, 0.0);
    for i in 0..data.n_paths() {
        let (t, x) = data.path(i);
        for j in 0..t.len() - 1 {
            let delta = t[j + 1] - t[j];
            let v = (x[j + 1] / x[j]).ln() / delta.sqrt();
            let a = evaluate_modified(&curve(), params.perturbation(), t[j]).unwrap();
            let b = evaluate_modified(&curve(), params.perturbation(), t[j + 1]).unwrap();
            let m = (b / a).ln() - 0.5 * s2 * delta;
            z1 += v * v;
            phi += m * m / delta;
            gamma += v * m / delta.sqrt();
        }
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    assert!(close(got.z1, z1), "{} vs {z1}", got.z1);
    assert!(close(got.phi_term, phi), "{} vs {phi}", got.phi_term);
    assert!(close(got.gamma_term, gamma), "{} vs {gamma}", got.gamma_term);

    let n = vt.n() as f64;
    let expected = -0.5 * n * s2.ln() - (z1 + phi - 2.0 * gamma) / (2.0 * s2);
    assert!(close(log_likelihood_core(&vt, &params), expected));
}

#[test]
fn likelihood_of_single_observations_is_zero() {
    let data = SamplePaths::new(vec![vec![0.0], vec![0.0]], vec![vec![2.0], vec![3.0]]).unwrap();
    let vt = v_transform(&data).unwrap();
    assert_eq!(vt.n(), 0);
    assert_eq!(log_likelihood_core(&vt, &modified(0.01)), 0.0);
}

#[test]
fn true_noise_level_beats_double_noise() {
    let truth = modified(0.01);
    let doubled = modified(0.02);
    let wins = (0..100u64)
        .filter(|&seed| {
            let vt = v_transform(&dataset(&truth, 1000 + seed)).unwrap();
            log_likelihood_core(&vt, &truth) > log_likelihood_core(&vt, &doubled)
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn generating_parameters_beat_random_box_points() {
    let truth = modified(0.01);
    let mut wins = 0;
    let mut total = 0;
    for seed in 0..10u64 {
        let data = dataset(&truth, seed);
        let bounds = bound_parameters(&data, 0.5).unwrap();
        let vt = v_transform(&data.restrict(4.4).unwrap()).unwrap();
        let at_truth = log_likelihood_core(&vt, &truth);
        let mut rng = rng_stream(seed, 99);
        let (lo, hi) = {
            let b = bounds.search_box().unwrap();
            (b.lo().to_vec(), b.hi().to_vec())
        };
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|i| lo[i] + (hi[i] - lo[i]) * rng.uniform()).collect();
            let other = DiffusionParams::classical(RichardsParams::new(x[0], x[1], x[2], 0.0, 2.0).unwrap(), x[3]).unwrap();
            total += 1;
            if at_truth > log_likelihood_core(&vt, &other) {
                wins += 1;
            }
        }
    }
    assert!(wins * 100 >= 99 * total, "{wins}/{total}");
}

#[test]
fn boxes_contain_the_generating_parameters() {
    let truth = modified(0.01);
    let inside = (0..10u64)
        .filter(|&seed| {
            bound_parameters(&dataset(&truth, seed), 0.5)
                .map(|b| b.contains(TRUTH[0], TRUTH[1], TRUTH[2], TRUTH[3]))
                .unwrap_or(false)
        })
        .count();
    assert!(inside >= 9, "{inside}/10");
}

#[test]
fn box_from_noiseless_samples_contains_the_curve() {
    let g = grid(0.2, 10.0);
    let path: Vec<f64> = g.iter().map(|&t| evaluate_modified(&curve(), modified(0.01).perturbation(), t).unwrap()).collect();
    let data = SamplePaths::on_grid(g, vec![path; 3]).unwrap();
    let b = bound_parameters(&data, 0.5).unwrap();
    assert!(b.contains(2.0, 0.5, 0.2, 0.01), "{b:?}");
    assert!((b.provenance.t_inflection - curve().tangent_summary().t_inflection).abs() < 0.01);
}

#[test]
fn box_widths_on_the_reference_dataset() {
    let b = bound_parameters(&dataset(&modified(0.01), 0), 0.5).unwrap();
    let w = |(lo, hi): (f64, f64)| hi - lo;
    assert!((3.5..=5.8).contains(&w(b.q)), "{b:?}");
    assert!((0.55..=0.75).contains(&w(b.k)), "{b:?}");
    assert!((1.2..=2.2).contains(&w(b.eta)), "{b:?}");
    assert!(b.k.0 > 0.0 && b.k.1 < 1.0);
    assert_eq!(b.sigma, (1e-6, 0.1));
    let p = b.provenance;
    assert!(p.t1 < p.t_inflection && p.t_inflection < p.t2);
    assert!((p.k_star - 1.5 * p.x_inflection).abs() < 1e-12);
}

#[test]
fn fitting_rejects_a_window_without_enough_increments() {
    let data = dataset(&modified(0.01), 0);
    let b = bound_parameters(&data, 0.5).unwrap();
    // Two time points: 25 increments, but only one observation interval.
    let err = fit_mle(&data, 0.2, &b, Method::Sa, &OptBudget::default(), 1).unwrap_err();
    assert!(err.to_string().contains("increments"), "{err}");
    assert!(fit_mle(&data, 2.0, &b, Method::Sa, &OptBudget::default(), 1).is_ok());
}

#[test]
fn fitting_the_reference_dataset() {
    let data = dataset(&modified(0.01), 0);
    let b = bound_parameters(&data, 0.5).unwrap();
    let fit = fit_mle(&data, 4.4, &b, Method::Sa, &OptBudget::default(), 30).unwrap();
    let r = fit.params.richards();
    let est = [r.q(), r.k(), r.eta(), fit.params.sigma()];
    let errs: Vec<f64> = est.iter().zip(TRUTH).map(|(e, t)| rel(*e, t)).collect();
    assert!(errs[..3].iter().all(|&e| e < 0.02) && errs[3] < 0.05, "{est:?} {errs:?}");
    assert_eq!(fit.replicates.len(), 30);
    assert!(b.contains(est[0], est[1], est[2], est[3]));
    assert_eq!(fit.init_mle, (2f64.ln(), 0.0));

    // Refit data drawn from the fitted model.
    let refit_truth = fit.params.with_perturbation(Perturbation::power_form(1.0, r.switch_time(0.5).unwrap()).unwrap());
    let again = dataset(&refit_truth, 0);
    let b2 = bound_parameters(&again, 0.5).unwrap();
    let fit2 = fit_mle(&again, 4.4, &b2, Method::Sa, &OptBudget::default(), 30).unwrap();
    let r2 = fit2.params.richards();
    let est2 = [r2.q(), r2.k(), r2.eta(), fit2.params.sigma()];
    for i in 0..4 {
        let e2 = rel(est2[i], est[i]);
        assert!(e2 <= 2.0 * errs[i].max(0.005), "coordinate {i}: {e2} vs {}", errs[i]);
    }
}

#[test]
fn sa_reaches_at_least_alo_on_most_datasets() {
    let truth = modified(0.01);
    let budget = OptBudget::default();
    let mut sa_wins = 0;
    for seed in 0..10u64 {
        let data = dataset(&truth, seed);
        let b = bound_parameters(&data, 0.5).unwrap();
        let vt = v_transform(&data.restrict(4.4).unwrap()).unwrap();
        let f = |x: &[f64]| match RichardsParams::new(x[0], x[1], x[2], 0.0, 2.0).and_then(|r| DiffusionParams::classical(r, x[3])) {
            Ok(xi) => log_likelihood_core(&vt, &xi),
            Err(_) => f64::NEG_INFINITY,
        };
        let sb = b.search_box().unwrap();
        let sa = sa_maximize(f, &sb, &budget).unwrap();
        let alo = alo_maximize(f, &sb, &budget).unwrap();
        if sa.value >= alo.value {
            sa_wins += 1;
        }
    }
    assert!(sa_wins >= 6, "{sa_wins}/10");
}

#[test]
fn switch_estimators_agree_when_noise_vanishes() {
    let quiet = DiffusionParams::classical(curve(), 0.001).unwrap();
    let (det, none) = estimate_tstar(&quiet, 0.5, TStarMode::Deterministic, None).unwrap();
    assert!(none.is_none());
    assert!((det - SWITCH).abs() < 1e-9);
    let cfg = FptConfig {
        n_paths: 20_000,
        ..Default::default()
    };
    let (mean, summary) = estimate_tstar(&quiet, 0.5, TStarMode::Fpt, Some(&cfg)).unwrap();
    assert!((mean - det).abs() < 0.01, "{mean} vs {det}");
    assert_eq!(summary.unwrap().mean, mean);

    let observed = FptConfig {
        boundary: FptBoundary::Observed { x_inflection: 32.0 },
        ..cfg
    };
    let (m2, _) = estimate_tstar(&quiet, 0.5, TStarMode::Fpt, Some(&observed)).unwrap();
    assert!((m2 - mean).abs() < 1e-6);
}

fn c_error(sigma: f64, seed: u64) -> f64 {
    let data = dataset(&modified(sigma), seed);
    let classical = DiffusionParams::classical(curve(), sigma).unwrap();
    let c_hat = estimate_c(&data, &classical, SWITCH).unwrap();
    let truth = Perturbation::power_form(1.0, SWITCH).unwrap();
    let ts: Vec<f64> = data.times()[0].iter().copied().filter(|&t| t > SWITCH).collect();
    let reference: Vec<f64> = ts.iter().map(|&t| perturbation_value(&truth, &curve(), t)).collect();
    let estimate: Vec<f64> = ts.iter().map(|&t| perturbation_value(&c_hat, &curve(), t)).collect();
    rae(&reference, &estimate).unwrap()
}

#[test]
fn perturbation_estimate_worsens_with_noise() {
    for seed in 0..5u64 {
        let (lo, hi) = (c_error(0.01, seed), c_error(0.02, seed));
        assert!(hi >= lo, "seed {seed}: {hi} < {lo}");
    }
}

#[test]
fn perturbation_estimate_is_exact_on_noiseless_means() {
    // With the sample mean equal to the modified curve, m(t) is the
    // integral of C·kernel, so only interpolation error remains.
    let g = grid(0.05, 10.0);
    let c = Perturbation::power_form(1.0, SWITCH).unwrap();
    let path: Vec<f64> = g.iter().map(|&t| evaluate_modified(&curve(), &c, t).unwrap()).collect();
    let data = SamplePaths::on_grid(g.clone(), vec![path]).unwrap();
    let classical = DiffusionParams::classical(curve(), 0.01).unwrap();
    let c_hat = estimate_c(&data, &classical, SWITCH).unwrap();
    for &t in g.iter().filter(|&&t| t > SWITCH + 0.5 && t < 9.5) {
        let (want, got) = (perturbation_value(&c, &curve(), t), perturbation_value(&c_hat, &curve(), t));
        assert!((got - want).abs() < 1e-3 * want.max(1.0), "t={t}: {got} vs {want}");
    }
}

#[test]
fn perturbation_estimate_needs_points_after_the_switch() {
    let data = dataset(&modified(0.01), 0);
    let classical = DiffusionParams::classical(curve(), 0.01).unwrap();
    assert!(estimate_c(&data, &classical, 9.5).is_err());
    assert!(estimate_c(&data, &classical, 9.3).is_ok());
}

#[test]
fn relative_error_examples() {
    assert_eq!(rae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert!((rae(&[1.0, -2.0, 4.0], &[1.1, -2.2, 4.4]).unwrap() - 0.1).abs() < 1e-12);
    assert!((rae(&[3.32193], &[3.36223]).unwrap() - 0.01213).abs() < 5e-6);
    assert!(rae(&[0.0, 1.0], &[0.0, 1.0]).is_err());
    assert!(rae(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn candidate_sweep_picks_the_generating_fraction() {
    let data = dataset(&modified(0.01), 0);
    let out = run_procedure1(&data, &PChoice::Candidates(vec![0.3, 0.5, 0.7]), &quick_cfg(3)).unwrap();
    assert_eq!(out.candidates.len(), 3);
    assert_eq!(out.selected.p, 0.5, "{:?}", out.candidates);
    assert!(run_procedure1(&data, &PChoice::Candidates(vec![]), &quick_cfg(1)).is_err());
}

#[test]
fn procedure_report_is_consistent() {
    let data = dataset(&modified(0.01), 0);
    let rep = run_procedure1(&data, &PChoice::Known(0.5), &quick_cfg(5)).unwrap().selected;
    let r = rep.mle.richards();
    assert!(rep.bounds.contains(r.q(), r.k(), r.eta(), rep.mle.sigma()));
    assert!(rep.rae_mean >= 0.0 && rep.rae_mean < 0.01, "{}", rep.rae_mean);
    assert!((rep.t_star_det - r.switch_time(0.5).unwrap()).abs() < 1e-12);
    assert!(rep.warnings.is_empty());
    assert_eq!(rep.replication_trace.len(), 5);
    // Window end is the first grid time at which the mean reaches K*.
    let (g, m) = data.sample_mean().unwrap();
    let j = g.iter().position(|&t| t == rep.window_end).unwrap();
    assert!(m[j] >= rep.bounds.provenance.k_star && m[j - 1] < rep.bounds.provenance.k_star);
    // The reconstruction starts at the observed mean and multiplies the
    // classical curve by the accumulated perturbation.
    assert_eq!(rep.fitted_mean[0], (0.0, m[0]));
    let anchored = r.with_anchor(0.0, m[0]).unwrap();
    let last = *rep.fitted_mean.last().unwrap();
    let factor = perturbation_integral(&rep.c_hat, &anchored, 0.0, last.0).unwrap().exp();
    assert!(rel(last.1, anchored.evaluate(last.0).unwrap() * factor) < 1e-10);
    let _ = log_drift(&rep.modified_params(), 5.0, 6.0).unwrap();
}

#[test]
fn single_path_runs() {
    let data = simulate_paths(&modified(0.01), &InitialLaw::degenerate(2.0).unwrap(), &grid(0.2, 10.0), 1, 0).unwrap();
    let rep = run_procedure1(&data, &PChoice::Known(0.5), &quick_cfg(2)).unwrap().selected;
    assert_eq!(rep.init_mle.1, 0.0);
    assert!(rep.rae_mean.is_finite());
}
