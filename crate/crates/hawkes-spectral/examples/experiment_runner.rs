//! Run a preset experiment at reduced scale and write its result tables.
//!
//! The full presets take minutes to hours; this example shrinks the grid to
//! a few cells so it finishes quickly while exercising the whole path:
//! simulation, fitting, aggregation, and the CSV/manifest writers.
//!
//! Run with: cargo run --release --example experiment_runner

use hawkes_spectral::experiments::{run_experiment, ExperimentConfig, ExperimentId};

fn main() {
    let mut config = ExperimentConfig::for_id(ExperimentId::UniHorizon);
    config.seed = 42;
    config.trials = 3;
    config.horizons = vec![250.0, 500.0];

    let output = run_experiment(&config).unwrap();
    println!(
        "experiment {} finished in {:.1}s with {} failed trials",
        config.experiment, output.manifest.total_seconds, output.manifest.failed_trials
    );

    let dir = std::env::temp_dir().join("hawkes-spectral-example");
    let written = output.write_to_dir(&dir).unwrap();
    println!("\nwrote:");
    for path in &written {
        println!("  {}", path.display());
    }

    // The cells table is small enough to show inline.
    for table in &output.tables {
        if table.name == "cells" {
            println!("\n{}", table.csv);
        }
    }
}
