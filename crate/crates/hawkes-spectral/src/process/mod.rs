//! Point-process types, simulation and event-series I/O.
//!
//! The observed process is a superposition `N = H + P` of a stationary
//! multivariate Hawkes process `H` and an independent homogeneous Poisson
//! process `P` of rate `lambda0` per component. Events carry no labels:
//! only the merged times are available downstream.

mod io;
mod simulate;

pub use io::{read_events_csv, write_events_csv};
pub use simulate::{simulate_hawkes, simulate_noisy, simulate_poisson};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Event times of a `d`-variate point process on an observation window.
///
/// Invariants (checked by [`EventSeries::new`]): at least one component,
/// every time finite and inside `[window.0, window.1]`, and each component
/// strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    /// Observation window `(start, end)`, `start < end`.
    pub window: (f64, f64),
    /// `times[i]` are the event times of component `i`.
    pub times: Vec<Vec<f64>>,
}

impl EventSeries {
    pub fn new(window: (f64, f64), times: Vec<Vec<f64>>) -> Result<Self> {
        let (a, b) = window;
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidInput(format!(
                "window must be a finite interval with start < end, got ({a}, {b})"
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidInput(
                "event series needs at least one component".into(),
            ));
        }
        for (i, comp) in times.iter().enumerate() {
            for pair in comp.windows(2) {
                if !(pair[0] < pair[1]) {
                    return Err(Error::InvalidInput(format!(
                        "component {i}: times must be strictly increasing ({} then {})",
                        pair[0], pair[1]
                    )));
                }
            }
            if let (Some(&first), Some(&last)) = (comp.first(), comp.last()) {
                if !first.is_finite() || !last.is_finite() || first < a || last > b {
                    return Err(Error::InvalidInput(format!(
                        "component {i}: times must lie inside [{a}, {b}]"
                    )));
                }
            }
        }
        Ok(Self { window, times })
    }

    /// Number of components.
    pub fn dim(&self) -> usize {
        self.times.len()
    }

    /// Window length `T`.
    pub fn duration(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// Event count per component.
    pub fn counts(&self) -> Vec<usize> {
        self.times.iter().map(Vec::len).collect()
    }

    /// Total event count over all components.
    pub fn total_count(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    /// Empirical rate `N_i(T) / T` per component.
    pub fn empirical_rates(&self) -> Vec<f64> {
        let t = self.duration();
        self.times.iter().map(|c| c.len() as f64 / t).collect()
    }
}

/// Parameters of the noisy Hawkes model with exponential kernels
/// `h_ij(t) = alpha[i][j] * beta[i] * exp(-beta[i] t)` for `t >= 0`
/// (one decay rate per receiving component) plus Poisson noise of rate
/// `lambda0` on every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyHawkesParams {
    /// Baseline (immigration) intensities, one per component.
    pub mu: Vec<f64>,
    /// Interaction weights; `alpha[i][j]` scales the excitation of
    /// component `i` by events of component `j`.
    pub alpha: Vec<Vec<f64>>,
    /// Kernel decay rates, one per receiving component.
    pub beta: Vec<f64>,
    /// Rate of the independent homogeneous Poisson noise.
    pub lambda0: f64,
}

impl NoisyHawkesParams {
    pub fn new(mu: Vec<f64>, alpha: Vec<Vec<f64>>, beta: Vec<f64>, lambda0: f64) -> Result<Self> {
        let p = Self { mu, alpha, beta, lambda0 };
        p.validate()?;
        Ok(p)
    }

    /// Univariate shorthand.
    pub fn univariate(mu: f64, alpha: f64, beta: f64, lambda0: f64) -> Result<Self> {
        Self::new(vec![mu], vec![vec![alpha]], vec![beta], lambda0)
    }

    /// Bivariate shorthand; `alpha` rows are `[a11, a12]`, `[a21, a22]`.
    pub fn bivariate(
        mu: [f64; 2],
        alpha: [[f64; 2]; 2],
        beta: [f64; 2],
        lambda0: f64,
    ) -> Result<Self> {
        Self::new(
            mu.to_vec(),
            alpha.iter().map(|r| r.to_vec()).collect(),
            beta.to_vec(),
            lambda0,
        )
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Checks shapes, signs and stationarity (`rho(alpha) < 1`).
    pub fn validate(&self) -> Result<()> {
        let d = self.mu.len();
        if d == 0 {
            return Err(Error::InvalidInput("empty parameter vector".into()));
        }
        if self.beta.len() != d || self.alpha.len() != d
            || self.alpha.iter().any(|row| row.len() != d)
        {
            return Err(Error::InvalidInput(format!(
                "inconsistent dimensions: mu has {d} entries, alpha is {}x{:?}, beta has {}",
                self.alpha.len(),
                self.alpha.first().map(Vec::len),
                self.beta.len()
            )));
        }
        for &m in &self.mu {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidInput(format!("mu entries must be >= 0, got {m}")));
            }
        }
        for &b in &self.beta {
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::InvalidInput(format!("beta entries must be > 0, got {b}")));
            }
        }
        for row in &self.alpha {
            for &a in row {
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "alpha entries must be >= 0, got {a}"
                    )));
                }
            }
        }
        if !self.lambda0.is_finite() || self.lambda0 < 0.0 {
            return Err(Error::InvalidInput(format!(
                "lambda0 must be >= 0, got {}",
                self.lambda0
            )));
        }
        let rho = spectral_radius(&self.alpha)?;
        if rho >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "alpha is not stationary: spectral radius {rho} >= 1"
            )));
        }
        Ok(())
    }
}

/// Simulation window and seeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Horizon: events are kept on `[0, t]`.
    pub t: f64,
    /// The Hawkes process warms up on `[-burn_in, 0)`; those events are
    /// discarded so `[0, t]` is (approximately) stationary.
    pub burn_in: f64,
    pub seed: u64,
}

impl SimulationConfig {
    /// Default burn-in of 100 time units.
    pub fn new(t: f64, seed: u64) -> Self {
        Self { t, burn_in: 100.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || self.t <= 0.0 {
            return Err(Error::InvalidConfig(format!("horizon must be > 0, got {}", self.t)));
        }
        if !self.burn_in.is_finite() || self.burn_in < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "burn-in must be >= 0, got {}",
                self.burn_in
            )));
        }
        Ok(())
    }
}

/// Spectral radius of a square non-negative matrix (row-major nested vecs).
///
/// Closed form for 1x1 and 2x2, Schur decomposition beyond that.
pub fn spectral_radius(alpha: &[Vec<f64>]) -> Result<f64> {
    let d = alpha.len();
    if d == 0 || alpha.iter().any(|row| row.len() != d) {
        return Err(Error::InvalidInput("alpha must be square and non-empty".into()));
    }
    if alpha.iter().flatten().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput("alpha entries must be finite".into()));
    }
    match d {
        1 => Ok(alpha[0][0].abs()),
        2 => {
            let (a, b, c, e) = (alpha[0][0], alpha[0][1], alpha[1][0], alpha[1][1]);
            let disc = (a - e) * (a - e) + 4.0 * b * c;
            if disc >= 0.0 {
                // Real eigenvalues (always the case for non-negative entries).
                let root = disc.sqrt();
                Ok(((a + e + root) / 2.0).abs().max(((a + e - root) / 2.0).abs()))
            } else {
                // Complex pair: modulus^2 = det.
                Ok((a * e - b * c).abs().sqrt())
            }
        }
        _ => {
            let m = nalgebra::DMatrix::from_fn(d, d, |i, j| alpha[i][j]);
            Ok(m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
        }
    }
}

/// Stationary mean intensity `m^H = (I - alpha)^{-1} mu` of the Hawkes part.
pub fn hawkes_mean_intensity(params: &NoisyHawkesParams) -> Result<Vec<f64>> {
    params.validate()?;
    let d = params.dim();
    match d {
        1 => Ok(vec![params.mu[0] / (1.0 - params.alpha[0][0])]),
        2 => {
            let a = &params.alpha;
            let det = (1.0 - a[0][0]) * (1.0 - a[1][1]) - a[0][1] * a[1][0];
            if det <= 0.0 {
                return Err(Error::Numerical(format!("I - alpha is singular (det {det})")));
            }
            let m1 = ((1.0 - a[1][1]) * params.mu[0] + a[0][1] * params.mu[1]) / det;
            let m2 = (a[1][0] * params.mu[0] + (1.0 - a[0][0]) * params.mu[1]) / det;
            Ok(vec![m1, m2])
        }
        _ => {
            let i_minus_a =
                nalgebra::DMatrix::from_fn(d, d, |i, j| f64::from(i == j) - params.alpha[i][j]);
            let mu = nalgebra::DVector::from_column_slice(&params.mu);
            i_minus_a
                .lu()
                .solve(&mu)
                .map(|m| m.iter().copied().collect())
                .ok_or_else(|| Error::Numerical("I - alpha is singular".into()))
        }
    }
}

/// Stationary mean intensity `m^N = m^H + lambda0` of the noisy process.
pub fn mean_intensity(params: &NoisyHawkesParams) -> Result<Vec<f64>> {
    Ok(hawkes_mean_intensity(params)?
        .into_iter()
        .map(|m| m + params.lambda0)
        .collect())
}

/// Component-wise merge of two series observed on the same window.
///
/// Counts add per component. Exact ties across the inputs are rejected:
/// the merged series could not satisfy the strictly-increasing invariant.
/// Ties have probability zero for independent continuous simulations.
pub fn superpose(a: &EventSeries, b: &EventSeries) -> Result<EventSeries> {
    if a.window != b.window {
        return Err(Error::InvalidInput(format!(
            "windows differ: {:?} vs {:?}",
            a.window, b.window
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut merged = Vec::with_capacity(a.dim());
    for (xs, ys) in a.times.iter().zip(&b.times) {
        let mut out = Vec::with_capacity(xs.len() + ys.len());
        let (mut i, mut j) = (0, 0);
        while i < xs.len() && j < ys.len() {
            if xs[i] == ys[j] {
                return Err(Error::InvalidInput(format!(
                    "exact tie at t = {}: cannot superpose",
                    xs[i]
                )));
            }
            if xs[i] < ys[j] {
                out.push(xs[i]);
                i += 1;
            } else {
                out.push(ys[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&xs[i..]);
        out.extend_from_slice(&ys[j..]);
        merged.push(out);
    }
    EventSeries::new(a.window, merged)
}
