use richfit_core::diffusion::{DiffusionParams, InitialLaw};
use richfit_core::fpt::*;
use richfit_core::growth::{Perturbation, RichardsParams};
use richfit_core::Error;

const SWITCH: f64 = 4.4755679955;

fn table4() -> RichardsParams {
    RichardsParams::new(2.0, 0.5, 0.2, 0.0, 2.0).unwrap()
}

fn modified(r: RichardsParams, sigma: f64) -> DiffusionParams {
    let t_star = r.switch_time(0.5).unwrap();
    DiffusionParams::new(r, sigma, Perturbation::power_form(1.0, t_star).unwrap()).unwrap()
}

fn boundary(r: &RichardsParams, p: f64) -> f64 {
    (1.0 + p) * r.tangent_summary().x_at_inflection
}

fn start(d: &DiffusionParams) -> InitialLaw {
    InitialLaw::degenerate(d.richards().x0()).unwrap()
}

fn mc(d: &DiffusionParams, b: f64, n: usize, dt: f64, seed: u64) -> FptDensity {
    fpt_monte_carlo(d, &start(d), b, d.richards().t0() + 12.0, n, dt, seed).unwrap()
}

fn ie(d: &DiffusionParams, b: f64) -> FptDensity {
    fpt_integral_equation(d, d.richards().x0(), b, d.richards().t0() + 12.0, 800).unwrap()
}

#[test]
fn near_deterministic_noise_concentrates_at_the_switch() {
    let d = modified(table4(), 1e-6);
    assert!((boundary(d.richards(), 0.5) - 48.0).abs() < 1e-9);
    let m = fpt_summary(&mc(&d, 48.0, 20_000, 0.01, 4)).unwrap();
    assert!((m.mean - SWITCH).abs() < 0.005, "{m:?}");
    let s = fpt_summary(&ie(&d, 48.0)).unwrap();
    assert!((s.mode - SWITCH).abs() < 0.01, "{s:?}");
    assert!((s.mean - SWITCH).abs() < 0.01, "{s:?}");
    assert!(s.std_dev < 1e-4);
}

#[test]
fn integral_equation_matches_monte_carlo_on_five_sets() {
    let sets = [
        (modified(table4(), 0.01), 0.5),
        (modified(table4(), 0.02), 0.5),
        (
            DiffusionParams::classical(RichardsParams::new(1.0, 0.6, 0.5, 0.0, 1.0).unwrap(), 0.03).unwrap(),
            0.3,
        ),
        (
            DiffusionParams::classical(RichardsParams::new(3.0, 0.4, 0.1, 1.0, 0.5).unwrap(), 0.015).unwrap(),
            0.2,
        ),
        // Crossing after the switch, where the perturbation steers the drift.
        (modified(table4(), 0.01), 0.9),
    ];
    for (i, (d, p)) in sets.iter().enumerate() {
        let b = boundary(d.richards(), *p);
        let m = mc(d, b, 100_000, 0.005, 10 + i as u64);
        let s = ie(d, b);
        let peak = s.peak();
        let dist = m.sup_distance(&s);
        assert!(dist < 0.05 * peak, "set {i}: sup {dist} vs peak {peak}");
        assert!((s.integral() - m.mass_captured).abs() < 0.01, "set {i}");
        assert!(s.integral() <= 1.0 + 1e-6);
        assert!(s.density.iter().all(|g| *g >= 0.0));
    }
}

#[test]
fn seeds_agree_and_reruns_are_identical() {
    let d = modified(table4(), 0.01);
    let b = boundary(d.richards(), 0.5);
    let a = mc(&d, b, 100_000, 0.01, 1);
    let again = mc(&d, b, 100_000, 0.01, 1);
    assert_eq!(a, again);
    let other = mc(&d, b, 100_000, 0.01, 2);
    let lo = a.grid[0].min(other.grid[0]);
    let hi = a.grid[a.grid.len() - 1].max(other.grid[other.grid.len() - 1]);
    let n = 4000;
    let h = (hi - lo) / n as f64;
    let l1: f64 = (0..=n).map(|i| (a.eval(lo + i as f64 * h) - other.eval(lo + i as f64 * h)).abs() * h).sum();
    assert!(l1 < 0.05, "L1 {l1}");
}

#[test]
fn halving_the_step_barely_moves_the_mean() {
    let d = modified(table4(), 0.01);
    let b = boundary(d.richards(), 0.5);
    let coarse = fpt_summary(&mc(&d, b, 100_000, 0.01, 3)).unwrap();
    let fine = fpt_summary(&mc(&d, b, 100_000, 0.005, 3)).unwrap();
    assert!((coarse.mean - fine.mean).abs() < 0.005, "{coarse:?} {fine:?}");
}

#[test]
fn mean_increases_with_the_boundary() {
    let d = modified(table4(), 0.02);
    let means: Vec<f64> = [0.3, 0.5, 0.7]
        .iter()
        .map(|&p| fpt_summary(&mc(&d, boundary(d.richards(), p), 20_000, 0.01, 8)).unwrap().mean)
        .collect();
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[test]
fn true_parameters_give_a_crossing_near_the_switch() {
    // With the generating parameters and the level (1 + p) x(t_I) the FPT
    // law is centred a few hundredths after the deterministic switch.
    let d = modified(table4(), 0.01);
    let s = fpt_summary(&mc(&d, 48.0, 100_000, 0.005, 21)).unwrap();
    assert!((s.mean - SWITCH).abs() < 0.02, "{s:?}");
    assert!((s.std_dev - 0.094).abs() < 0.02, "{s:?}");
    assert!(s.deciles[0] <= s.deciles[1] && s.deciles[1] <= s.deciles[2]);
    assert!((s.mass_captured - 1.0).abs() < 1e-12);
}

#[test]
fn unreachable_boundary_is_reported() {
    let d = modified(table4(), 0.01);
    let err = fpt_monte_carlo(&d, &start(&d), 1e4, 12.0, 2_000, 0.01, 1).unwrap_err();
    assert!(matches!(err, Error::BoundaryRarelyReached { mass } if mass < 0.5));
    assert!(fpt_integral_equation(&d, 2.0, 1e4, 12.0, 100).is_err());
    assert!(fpt_monte_carlo(&d, &start(&d), 1.5, 12.0, 100, 0.01, 1).is_err());
    assert!(fpt_monte_carlo(&d, &start(&d), 48.0, 12.0, 100, 0.0, 1).is_err());
}

#[test]
fn coarse_grids_fail_the_refinement_check() {
    let d = modified(table4(), 0.01);
    let err = fpt_integral_equation(&d, 2.0, 48.0, 12.0, 8).unwrap_err();
    assert!(matches!(err, Error::NonConvergent { .. }), "{err:?}");
}

fn triangle(scale: f64) -> FptDensity {
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
    let density = grid.iter().map(|t| scale * (1.0 - (t - 1.0f64).abs())).collect();
    FptDensity {
        grid,
        density,
        mass_captured: 1.0,
    }
}

#[test]
fn summary_of_a_symmetric_triangle() {
    let s = fpt_summary(&triangle(1.0)).unwrap();
    assert!((s.mean - 1.0).abs() < 1e-12);
    assert!((s.mode - 1.0).abs() < 1e-12);
    assert!((s.deciles[1] - 1.0).abs() < 1e-12);
    // Exact values for the triangle: sd 1/sqrt(6), first decile sqrt(0.2).
    assert!((s.std_dev - 6f64.sqrt().recip()).abs() < 1e-4);
    assert!((s.deciles[0] - 0.2f64.sqrt()).abs() < 1e-3);
    assert!((s.deciles[2] - (2.0 - 0.2f64.sqrt())).abs() < 1e-3);
}

#[test]
fn summary_ignores_the_scale_of_the_density() {
    let a = fpt_summary(&triangle(1.0)).unwrap();
    let b = fpt_summary(&triangle(7.5)).unwrap();
    assert!((a.mean - b.mean).abs() < 1e-12);
    assert!((a.mode - b.mode).abs() < 1e-12);
    assert!((a.std_dev - b.std_dev).abs() < 1e-12);
    for (x, y) in a.deciles.iter().zip(b.deciles) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn empty_density_is_rejected() {
    let mut t = triangle(1.0);
    t.density.iter_mut().for_each(|g| *g = 0.0);
    assert!(fpt_summary(&t).is_err());
}
