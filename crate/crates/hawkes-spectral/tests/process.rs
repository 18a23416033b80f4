//! Distributional and round-trip checks of the simulator and event I/O.

use hawkes_spectral::process::{
    hawkes_mean_intensity, read_events_csv, simulate_hawkes, superpose, write_events_csv,
    EventSeries, NoisyHawkesParams, SimulationConfig,
};
use proptest::prelude::*;

/// Two-sided Kolmogorov-Smirnov statistic of `xs` against the Exp(rate) cdf.
fn ks_statistic_exponential(xs: &mut [f64], rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

// With no excitation the simulator must produce a plain Poisson process, so
// inter-event gaps are Exp(mu). Fixed seeds keep the check deterministic.
#[test]
fn interevent_gaps_without_excitation_pass_ks_against_exponential() {
    let mu = 2.0;
    let params = NoisyHawkesParams::univariate(mu, 0.0, 1.0, 0.0).unwrap();
    for seed in 0..10u64 {
        let events = simulate_hawkes(&params, &SimulationConfig::new(1500.0, seed)).unwrap();
        let ts = &events.times[0];
        let mut gaps: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
        let n = gaps.len();
        assert!(n > 1000, "seed {seed}: only {n} gaps");
        let d = ks_statistic_exponential(&mut gaps, mu);
        // Asymptotic 1% critical value of the Kolmogorov distribution.
        let crit = 1.6276 / (n as f64).sqrt();
        assert!(d < crit, "seed {seed}: KS statistic {d:.5} >= {crit:.5}");
    }
}

#[test]
fn empirical_rate_concentrates_at_long_horizons() {
    let params = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.0).unwrap();
    let m = hawkes_mean_intensity(&params).unwrap()[0];
    let t = 8000.0;
    let band = 4.0 * (m / t).sqrt();
    let mut misses = 0;
    for seed in 0..20u64 {
        let events = simulate_hawkes(&params, &SimulationConfig::new(t, seed)).unwrap();
        let rate = events.total_count() as f64 / t;
        if (rate - m).abs() > band {
            misses += 1;
        }
    }
    // 95% of seeds must land inside the 4-sigma band.
    assert!(misses <= 1, "{misses} of 20 seeds outside |rate - {m}| <= {band:.4}");
}

#[test]
fn events_csv_round_trips_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.csv");
    // Times chosen to be awkward in decimal: shortest-representation
    // serialization must still reproduce them exactly.
    let series = EventSeries::new(
        (0.0, 10.0),
        vec![
            vec![0.1, 0.1 + 0.2, std::f64::consts::PI, 5.0 + 1e-12],
            vec![f64::MIN_POSITIVE.sqrt(), 2.0 / 3.0, 9.999999999999998],
        ],
    )
    .unwrap();

    let written = write_events_csv(&series, &path).unwrap();
    assert_eq!(written, path);
    let back = read_events_csv(&path).unwrap();
    assert_eq!(back.window, series.window);
    for (a, b) in series.times.iter().zip(&back.times) {
        assert_eq!(a.len(), b.len());
        for (&x, &y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits(), "{x} came back as {y}");
        }
    }

    // The sidecar is part of the format: without it the CSV alone is
    // ambiguous (a silent trailing component could vanish), so reading
    // must fail loudly.
    std::fs::remove_file(path.with_extension("json")).unwrap();
    let err = read_events_csv(&path).unwrap_err();
    assert!(err.is_usage_error(), "unexpected error kind: {err:?}");
}

proptest! {
    // Superposition must keep every event from both inputs: counts add
    // exactly and each merged component stays strictly increasing.
    #[test]
    fn superposition_adds_counts_exactly(
        raw_a in proptest::collection::vec(0.0f64..100.0, 0..60),
        raw_b in proptest::collection::vec(0.0f64..100.0, 0..60),
    ) {
        let dedup_sort = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let a = dedup_sort(raw_a);
        // Offset by an irrational factor so the two inputs never tie.
        let b: Vec<f64> = dedup_sort(raw_b)
            .into_iter()
            .map(|t| (t * std::f64::consts::E) % 100.0)
            .collect();
        let b = dedup_sort(b);
        let sa = EventSeries::new((0.0, 100.0), vec![a.clone()]).unwrap();
        let sb = EventSeries::new((0.0, 100.0), vec![b.clone()]).unwrap();
        prop_assume!(a.iter().all(|t| !b.contains(t)));

        let merged = superpose(&sa, &sb).unwrap();
        prop_assert_eq!(merged.total_count(), a.len() + b.len());
        for comp in &merged.times {
            prop_assert!(comp.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
