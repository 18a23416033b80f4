//! Structural properties of the closed-form densities and the periodogram.

use hawkes_spectral::process::{simulate_hawkes, NoisyHawkesParams, SimulationConfig};
use hawkes_spectral::spectral::{
    periodogram, rect_taylor, spectral_density_exp_general, PeriodogramMethod, RectParams,
};
use proptest::prelude::*;

fn biv_params(lambda0: f64) -> NoisyHawkesParams {
    NoisyHawkesParams::new(
        vec![1.0, 0.7],
        vec![vec![0.4, 0.2], vec![0.3, 0.25]],
        vec![1.1, 1.7],
        lambda0,
    )
    .unwrap()
}

#[test]
fn diagonal_density_is_even_in_frequency() {
    let params = biv_params(0.8);
    for &nu in &[0.013, 0.4, 1.7, 6.0, 33.0] {
        let pos = spectral_density_exp_general(&params, nu).unwrap();
        let neg = spectral_density_exp_general(&params, -nu).unwrap();
        for i in 0..2 {
            let a = pos.get(i, i).re;
            let b = neg.get(i, i).re;
            assert!((a - b).abs() <= 1e-13 * a.abs(), "f_{i}{i}({nu}) = {a} vs f_{i}{i}(-{nu}) = {b}");
            assert!(pos.get(i, i).im.abs() <= 1e-13 * a.abs());
        }
        // Off-diagonals flip to their conjugates.
        let c = pos.get(0, 1);
        let d = neg.get(0, 1).conj();
        assert!((c - d).norm() <= 1e-13 * c.norm());
    }
}

// Independent noise adds lambda0 to each diagonal entry of the spectrum and
// nothing else; with the Hawkes block held fixed the identity is exact in
// floating point, not just up to rounding.
#[test]
fn poisson_noise_shifts_the_spectrum_additively() {
    let noisy = biv_params(0.8);
    let clean = biv_params(0.0);
    for &nu in &[0.05, 0.9, 4.2, 18.0] {
        let fn_ = spectral_density_exp_general(&noisy, nu).unwrap();
        let fh = spectral_density_exp_general(&clean, nu).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j {
                    fh.get(i, j) + 0.8
                } else {
                    fh.get(i, j)
                };
                let got = fn_.get(i, j);
                assert_eq!(got.re.to_bits(), expected.re.to_bits(), "entry ({i},{j}) at {nu}");
                assert_eq!(got.im.to_bits(), expected.im.to_bits(), "entry ({i},{j}) at {nu}");
            }
        }
    }
}

// The transform-based fast path has to reproduce the brute-force Fourier
// sums even on records far larger than any fit uses.
#[test]
fn fft_periodogram_matches_direct_sums_on_a_large_record() {
    let params = NoisyHawkesParams::univariate(10.0, 0.0, 1.0, 0.0).unwrap();
    let events = simulate_hawkes(&params, &SimulationConfig::new(10_000.0, 314)).unwrap();
    assert!(events.total_count() >= 95_000, "only {} events", events.total_count());

    let m = 2048;
    let direct = periodogram(&events, m, PeriodogramMethod::Direct).unwrap();
    let fast = periodogram(&events, m, PeriodogramMethod::Fft).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..m {
        let a = direct.get(k, 0, 0);
        let b = fast.get(k, 0, 0);
        worst = worst.max((a - b).norm() / a.norm().max(1e-30));
    }
    assert!(worst <= 1e-8, "max relative deviation {worst:.3e}");
}

proptest! {
    // The low-frequency expansion of the rectangle-kernel spectrum always
    // starts at a positive level and bends downward.
    #[test]
    fn rectangle_taylor_level_positive_and_curvature_negative(
        mu in 0.05f64..5.0,
        alpha in 0.01f64..0.95,
        phi in 0.05f64..4.0,
        lambda0 in 0.0f64..3.0,
    ) {
        let params = RectParams { mu, alpha, phi, lambda0 };
        let taylor = rect_taylor(&params).unwrap();
        prop_assert!(taylor.a > 0.0, "a = {}", taylor.a);
        prop_assert!(taylor.c1 < 0.0, "c1 = {}", taylor.c1);
    }
}
