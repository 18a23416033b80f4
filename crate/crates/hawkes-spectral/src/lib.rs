//! Simulation and spectral estimation for Hawkes processes contaminated
//! by homogeneous Poisson noise.
//!
//! The observed process is the superposition of a stationary Hawkes
//! process (exponential kernels unless stated otherwise) and an
//! independent Poisson process; event labels are lost. Everything the
//! crate does flows from the spectral density of that superposition:
//!
//! * [`process`] simulates the two ingredients and their superposition.
//! * [`spectral`] evaluates spectral density matrices and periodograms
//!   (FFT-accelerated through [`nufft`]).
//! * [`whittle`] fits parameters by maximizing the Whittle frequency-
//!   domain likelihood under box constraints.
//! * [`identifiability`] constructs the one-parameter families of
//!   indistinguishable models and the probes that certify when a
//!   restricted model escapes them.
//! * [`support`] recovers the interaction support by refitting on
//!   subsamples and reading low quantiles of the estimates.
//! * [`experiments`] packages the simulation studies behind the library
//!   into reproducible table-producing runs.
//!
//! The `examples/` directory exercises each capability end to end; start
//! with `simulate_and_rates` and `whittle_fit`.

pub mod error;
pub mod experiments;
pub mod identifiability;
pub mod nufft;
pub mod optim;
pub mod process;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod support;
pub mod whittle;

pub use error::{Error, Result};
pub use process::{
    simulate_hawkes, simulate_noisy, simulate_poisson, superpose, EventSeries, NoisyHawkesParams,
    SimulationConfig,
};
pub use spectral::{
    periodogram, spectral_density_biv, spectral_density_rect, spectral_density_uni, Periodogram,
    PeriodogramMethod, RectParams, SpectralMatrix,
};
pub use whittle::{
    fit, fit_periodogram, spectral_loglik, FitConfig, FitResult, FrequencyPolicy, ModelSpec,
    ParamStatus,
};
