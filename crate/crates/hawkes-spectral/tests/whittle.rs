//! End-to-end checks of the Whittle likelihood and fitter.

use hawkes_spectral::process::{simulate_noisy, NoisyHawkesParams, SimulationConfig};
use hawkes_spectral::spectral::{periodogram, Periodogram, PeriodogramMethod};
use hawkes_spectral::whittle::{
    fit, loglik_gradient, spectral_loglik, spectral_loglik_reference, FitConfig, FrequencyPolicy,
    GradientMode, ModelSpec,
};
use hawkes_spectral::Error;

fn uni_pg(seed: u64, t: f64, m: usize) -> Periodogram {
    let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(t, seed)).unwrap();
    periodogram(&events, m, PeriodogramMethod::Auto).unwrap()
}

fn biv_pg(seed: u64, t: f64, m: usize) -> Periodogram {
    let truth = NoisyHawkesParams::new(
        vec![1.0, 0.8],
        vec![vec![0.4, 0.2], vec![0.3, 0.25]],
        vec![1.1, 1.4],
        0.5,
    )
    .unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(t, seed)).unwrap();
    periodogram(&events, m, PeriodogramMethod::Auto).unwrap()
}

/// Central difference of the likelihood along one full-layout coordinate.
fn fd_full(theta: &NoisyHawkesParams, pg: &Periodogram, coord: usize, h: f64) -> f64 {
    let d = theta.dim();
    let mut up = theta.clone();
    let mut down = theta.clone();
    let bump = |p: &mut NoisyHawkesParams, delta: f64| {
        if coord < d {
            p.mu[coord] += delta;
        } else if coord < d + d * d {
            let k = coord - d;
            p.alpha[k / d][k % d] += delta;
        } else if coord < d + d * d + d {
            p.beta[coord - d - d * d] += delta;
        } else {
            p.lambda0 += delta;
        }
    };
    bump(&mut up, h);
    bump(&mut down, -h);
    let spec = if d == 1 { ModelSpec::univariate_full() } else { ModelSpec::bivariate_full() };
    let lu = spectral_loglik(&spec, &up, pg).unwrap();
    let ld = spectral_loglik(&spec, &down, pg).unwrap();
    (lu - ld) / (2.0 * h)
}

#[test]
fn analytic_gradient_matches_finite_differences_univariate() {
    let pg = uni_pg(11, 200.0, 64);
    let theta = NoisyHawkesParams::univariate(0.9, 0.45, 1.2, 0.7).unwrap();
    let (_, grad) = loglik_gradient(&theta, &pg).unwrap();
    assert_eq!(grad.len(), 4);
    for (coord, &g) in grad.iter().enumerate() {
        let fd = fd_full(&theta, &pg, coord, 1e-5);
        assert!(
            (g - fd).abs() <= 1e-5 * g.abs().max(fd.abs()).max(1.0),
            "coordinate {coord}: analytic {g} vs fd {fd}"
        );
    }
}

#[test]
fn analytic_gradient_matches_finite_differences_bivariate() {
    let pg = biv_pg(13, 300.0, 64);
    let theta = NoisyHawkesParams::new(
        vec![0.9, 1.1],
        vec![vec![0.35, 0.15], vec![0.25, 0.3]],
        vec![0.9, 1.6],
        0.45,
    )
    .unwrap();
    let (_, grad) = loglik_gradient(&theta, &pg).unwrap();
    assert_eq!(grad.len(), 9);
    for (coord, &g) in grad.iter().enumerate() {
        let fd = fd_full(&theta, &pg, coord, 1e-5);
        assert!(
            (g - fd).abs() <= 1e-5 * g.abs().max(fd.abs()).max(1.0),
            "coordinate {coord}: analytic {g} vs fd {fd}"
        );
    }
}

#[test]
fn closed_forms_agree_with_matrix_reference() {
    let pg1 = uni_pg(17, 150.0, 48);
    let theta1 = NoisyHawkesParams::univariate(1.1, 0.4, 0.8, 0.9).unwrap();
    let spec1 = ModelSpec::univariate_full();
    let fast = spectral_loglik(&spec1, &theta1, &pg1).unwrap();
    let slow = spectral_loglik_reference(&theta1, &pg1).unwrap();
    assert!((fast - slow).abs() <= 1e-10 * fast.abs().max(1.0));

    let pg2 = biv_pg(19, 200.0, 48);
    let theta2 = NoisyHawkesParams::new(
        vec![1.0, 0.8],
        vec![vec![0.4, 0.2], vec![0.3, 0.25]],
        vec![1.1, 1.4],
        0.5,
    )
    .unwrap();
    let spec2 = ModelSpec::bivariate_full();
    let fast = spectral_loglik(&spec2, &theta2, &pg2).unwrap();
    let slow = spectral_loglik_reference(&theta2, &pg2).unwrap();
    assert!((fast - slow).abs() <= 1e-10 * fast.abs().max(1.0));
}

#[test]
fn fit_recovers_univariate_parameters_with_known_noise() {
    let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(3000.0, 42)).unwrap();
    let spec = ModelSpec::q_lambda0(0.6);
    let cfg = FitConfig { restarts: 3, seed: 5, ..FitConfig::default() };
    let fitted = fit(&spec, &events, &cfg).unwrap();
    assert_eq!(fitted.theta.lambda0, 0.6); // pinned exactly
    assert!(
        (fitted.theta.mu[0] - 1.0).abs() < 0.25,
        "mu = {}",
        fitted.theta.mu[0]
    );
    assert!(
        (fitted.theta.alpha[0][0] - 0.5).abs() < 0.15,
        "alpha = {}",
        fitted.theta.alpha[0][0]
    );
    assert!(
        (fitted.theta.beta[0] - 1.0).abs() < 0.5,
        "beta = {}",
        fitted.theta.beta[0]
    );
    assert!(fitted.n_events.unwrap() > 0);
    assert_eq!(fitted.m_used, fitted.n_events.unwrap());
    assert!(fitted.restarts.iter().any(|t| t.converged));
}

#[test]
fn finite_difference_mode_reaches_the_same_optimum() {
    let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(800.0, 23)).unwrap();
    let spec = ModelSpec::q_lambda0(0.6);
    let analytic = fit(
        &spec,
        &events,
        &FitConfig { restarts: 2, seed: 9, ..FitConfig::default() },
    )
    .unwrap();
    let fd = fit(
        &spec,
        &events,
        &FitConfig {
            restarts: 2,
            seed: 9,
            gradient: GradientMode::CentralDiff,
            ..FitConfig::default()
        },
    )
    .unwrap();
    assert!(
        (analytic.loglik - fd.loglik).abs() <= 1e-5 * analytic.loglik.abs(),
        "analytic {} vs finite-difference {}",
        analytic.loglik,
        fd.loglik
    );
    for k in 0..1 {
        assert!((analytic.theta.mu[k] - fd.theta.mu[k]).abs() < 5e-3);
    }
}

#[test]
fn identical_seeds_reproduce_fits_exactly() {
    let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(500.0, 7)).unwrap();
    let spec = ModelSpec::q_beta(1.0);
    let cfg = FitConfig { restarts: 3, seed: 77, ..FitConfig::default() };
    let a = fit(&spec, &events, &cfg).unwrap();
    let b = fit(&spec, &events, &cfg).unwrap();
    assert_eq!(a.theta, b.theta);
    assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
    assert_eq!(a.chosen_restart, b.chosen_restart);
}

#[test]
fn unconverged_restarts_surface_as_fit_failure() {
    let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(300.0, 3)).unwrap();
    let spec = ModelSpec::univariate_full();
    // Zero optimizer iterations cannot converge from a random start.
    let cfg = FitConfig { restarts: 2, seed: 1, max_iters: 0, ..FitConfig::default() };
    match fit(&spec, &events, &cfg) {
        Err(Error::FitFailed { restarts, traces }) => {
            assert_eq!(restarts, 2);
            assert_eq!(traces.len(), 2);
            assert!(traces.iter().all(|t| !t.converged));
        }
        other => panic!("expected FitFailed, got {other:?}"),
    }
}

#[test]
fn gradient_matches_finite_differences_at_random_points() {
    use rand::Rng;
    let pg1 = uni_pg(31, 200.0, 64);
    let pg2 = biv_pg(37, 300.0, 64);
    let mut rng = hawkes_spectral::rng::substream(2024, &[0x9d]);
    let r = |rng: &mut rand_chacha::ChaCha12Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();

    for draw in 0..20 {
        let (theta, pg) = if draw % 2 == 0 {
            let theta = NoisyHawkesParams::univariate(
                r(&mut rng, 0.3, 2.0),
                r(&mut rng, 0.05, 0.85),
                r(&mut rng, 0.4, 2.5),
                r(&mut rng, 0.1, 1.5),
            )
            .unwrap();
            (theta, &pg1)
        } else {
            let theta = NoisyHawkesParams::new(
                vec![r(&mut rng, 0.3, 2.0), r(&mut rng, 0.3, 2.0)],
                vec![
                    vec![r(&mut rng, 0.02, 0.38), r(&mut rng, 0.02, 0.38)],
                    vec![r(&mut rng, 0.02, 0.38), r(&mut rng, 0.02, 0.38)],
                ],
                vec![r(&mut rng, 0.5, 2.5), r(&mut rng, 0.5, 2.5)],
                r(&mut rng, 0.1, 1.5),
            )
            .unwrap();
            (theta, &pg2)
        };
        let (_, grad) = loglik_gradient(&theta, pg).unwrap();
        for (coord, &g) in grad.iter().enumerate() {
            let fd = fd_full(&theta, pg, coord, 1e-5);
            assert!(
                (g - fd).abs() <= 1e-5 * g.abs().max(fd.abs()).max(1.0),
                "draw {draw}, coordinate {coord}: analytic {g} vs fd {fd}"
            );
        }
    }
}

// Measuring the same events in rescaled time units (t -> c t) must rescale
// the fitted rates by 1/c and leave the dimensionless branching ratio
// alone: the likelihood only shifts by a constant under this change of
// units, so the optima correspond exactly.
#[test]
fn time_rescaling_maps_the_fit_onto_rescaled_parameters() {
    use hawkes_spectral::process::EventSeries;

    let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 1.6).unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(2000.0, 61)).unwrap();
    let c = 2.0;
    let scaled = EventSeries::new(
        (events.window.0 * c, events.window.1 * c),
        events
            .times
            .iter()
            .map(|ts| ts.iter().map(|&t| t * c).collect())
            .collect(),
    )
    .unwrap();

    let cfg = FitConfig { restarts: 3, seed: 8, ..FitConfig::default() };
    let base = fit(&ModelSpec::q_lambda0(1.6), &events, &cfg).unwrap();
    let resc = fit(&ModelSpec::q_lambda0(1.6 / c), &scaled, &cfg).unwrap();

    let close = |a: f64, b: f64, label: &str| {
        assert!((a - b).abs() <= 5e-3 * a.abs().max(b.abs()), "{label}: {a} vs {b}");
    };
    close(base.theta.mu[0] / c, resc.theta.mu[0], "mu / c");
    close(base.theta.alpha[0][0], resc.theta.alpha[0][0], "alpha");
    close(base.theta.beta[0] / c, resc.theta.beta[0], "beta / c");
}

#[test]
fn explicit_frequency_policy_controls_grid_size() {
    let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
    let events = simulate_noisy(&truth, &SimulationConfig::new(400.0, 29)).unwrap();
    let spec = ModelSpec::q_lambda0(0.6);
    let cfg = FitConfig {
        restarts: 2,
        seed: 4,
        m_policy: FrequencyPolicy::Explicit(256),
        ..FitConfig::default()
    };
    let fitted = fit(&spec, &events, &cfg).unwrap();
    assert_eq!(fitted.m_used, 256);
}
