//! Simulate noisy Hawkes processes and compare empirical event rates with
//! the stationary theory.
//!
//! Run with: cargo run --example simulate_and_rates

use hawkes_spectral::process::mean_intensity;
use hawkes_spectral::{simulate_noisy, NoisyHawkesParams, SimulationConfig};

fn report(label: &str, params: &NoisyHawkesParams, t: f64, seed: u64) {
    let events = simulate_noisy(params, &SimulationConfig::new(t, seed)).unwrap();
    let expected = mean_intensity(params).unwrap();
    let observed = events.empirical_rates();
    println!("{label} on [0, {t}] (seed {seed}):");
    for i in 0..params.dim() {
        println!(
            "  component {}: {} events, rate {:.4} vs stationary {:.4}",
            i + 1,
            events.counts()[i],
            observed[i],
            expected[i]
        );
    }
    println!();
}

fn main() {
    // A self-exciting univariate process buried in Poisson noise. The
    // stationary rate is mu / (1 - alpha) + lambda0 = 2.6.
    let uni = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
    report("univariate", &uni, 2000.0, 7);

    // A bivariate cascade: component 1 excites itself and component 2,
    // which stays otherwise silent.
    let biv = NoisyHawkesParams::bivariate(
        [1.0, 1.0],
        [[0.5, 0.0], [0.4, 0.0]],
        [1.0, 1.3],
        0.5,
    )
    .unwrap();
    report("bivariate", &biv, 2000.0, 8);
}
