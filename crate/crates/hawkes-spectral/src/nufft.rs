//! Type-1 nonuniform FFT on the unit interval via Gaussian gridding.
//!
//! Evaluates `F(k) = sum_j exp(-2 pi i k x_j)` for `k = 1..=m_max` and
//! points `x_j` in `[0, 1)`. Each point is spread onto an oversampled
//! uniform grid with a truncated periodized Gaussian, the grid is
//! transformed with a standard FFT, and the Gaussian's transform is
//! divided back out.
//!
//! With oversampled grid size `n >= 2 (2 m_max + 1)`, spreading half-width
//! `W` and Gaussian variance `tau = g W / n^2`, the spreading truncation
//! error scales like `exp(-W / (4 g))` and the aliasing error like
//! `exp(-2 pi^2 g W)`; `g = 1 / (2 sqrt(2) pi)` balances the two at
//! `exp(-pi W / sqrt(2))`, about 3e-16 for `W = 16`. The deconvolution
//! factor grows to only `exp(pi^2 g W / 4) ~ 85` at `k = m_max`, so no
//! meaningful precision is lost there.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Spreading half-width: each source touches `2 * SPREAD_HALF_WIDTH + 1`
/// grid points.
const SPREAD_HALF_WIDTH: usize = 16;

/// The balance constant `g` from the module docs.
const BALANCE: f64 = 1.0 / (2.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI);

/// Reusable transform for a fixed largest mode `m_max`.
pub struct NufftPlan {
    m_max: usize,
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    /// `1 / (4 g W)`: the Gaussian exponent scale in grid units.
    c: f64,
    /// `exp(-c l^2)` for `l = 0..=W`.
    kernel_table: Vec<f64>,
    /// Deconvolution factors for `k = 1..=m_max`.
    correction: Vec<f64>,
}

impl NufftPlan {
    pub fn new(m_max: usize) -> Result<Self> {
        if m_max == 0 {
            return Err(Error::InvalidInput("m_max must be at least 1".into()));
        }
        let min_n = 2 * (2 * m_max + 1);
        let n = min_n.next_power_of_two().max(64);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let w = SPREAD_HALF_WIDTH as f64;
        let c = 1.0 / (4.0 * BALANCE * w);
        let kernel_table = (0..=SPREAD_HALF_WIDTH)
            .map(|l| (-c * (l * l) as f64).exp())
            .collect();
        // Continuous Gaussian variance tau = g W / n^2; its Fourier
        // coefficients are 2 sqrt(pi tau) exp(-4 pi^2 k^2 tau).
        let tau = BALANCE * w / (n * n) as f64;
        let norm = (n as f64) * 2.0 * (std::f64::consts::PI * tau).sqrt();
        let correction = (1..=m_max)
            .map(|k| (4.0 * std::f64::consts::PI.powi(2) * (k * k) as f64 * tau).exp() / norm)
            .collect();
        Ok(Self { m_max, n, fft, c, kernel_table, correction })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Computes `F(k) = sum_j exp(-2 pi i k x_j)` for `k = 1..=m_max`.
    /// Points must lie in `[0, 1)`.
    pub fn execute(&self, xs: &[f64]) -> Result<Vec<Complex64>> {
        let n = self.n;
        let nf = n as f64;
        let half = SPREAD_HALF_WIDTH as i64;
        let mut grid = vec![0.0_f64; n];
        for &x in xs {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::InvalidInput(format!("point {x} outside [0, 1)")));
            }
            let xn = x * nf;
            let center = xn.round();
            let delta = xn - center;
            // Weight at offset l is exp(-c (l - delta)^2); factor it as
            // exp(-c delta^2) * exp(-c l^2) * exp(2 c delta)^l so the loop
            // costs one multiply per grid point.
            let e0 = (-self.c * delta * delta).exp();
            let ratio = (2.0 * self.c * delta).exp();
            let base = center as i64;
            grid[(base.rem_euclid(n as i64)) as usize] += e0;
            let mut up = e0;
            let mut down = e0;
            for l in 1..=half {
                up *= ratio;
                down /= ratio;
                let k = self.kernel_table[l as usize];
                grid[((base + l).rem_euclid(n as i64)) as usize] += up * k;
                grid[((base - l).rem_euclid(n as i64)) as usize] += down * k;
            }
        }
        let mut buf: Vec<Complex64> = grid.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        Ok((1..=self.m_max)
            .map(|k| buf[k] * self.correction[k - 1])
            .collect())
    }
}

/// Reference evaluation of the same sums by direct summation, O(len * m_max).
pub fn nufft_direct(xs: &[f64], m_max: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m_max];
    for &x in xs {
        let base = -std::f64::consts::TAU * x;
        for (k, slot) in out.iter_mut().enumerate() {
            let (s, c) = (base * (k + 1) as f64).sin_cos();
            *slot += Complex64::new(c, s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Relative deviation guarded near zeros of the exact value.
    fn agreement(fast: &[Complex64], exact: &[Complex64]) -> f64 {
        let scale = exact.iter().map(|z| z.norm()).fold(0.0, f64::max);
        fast.iter()
            .zip(exact)
            .map(|(a, b)| (a - b).norm() / (b.norm() + 1e-6 * scale))
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = crate::rng::stream_rng(99, 0);
        for &(count, m) in &[(1usize, 16usize), (50, 128), (400, 1000), (2000, 300)] {
            let xs: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
            let plan = NufftPlan::new(m).unwrap();
            let fast = plan.execute(&xs).unwrap();
            let exact = nufft_direct(&xs, m);
            let dev = agreement(&fast, &exact);
            assert!(dev <= 1e-8, "count {count}, m {m}: deviation {dev}");
        }
    }

    #[test]
    fn handles_clustered_and_boundary_points() {
        // Clusters and points hugging the wrap-around are the stress case
        // for the periodized spreading.
        let mut xs = vec![0.0, 1e-12, 0.999_999_999, 0.5];
        for i in 0..200 {
            xs.push(0.25 + 1e-9 * i as f64);
        }
        let plan = NufftPlan::new(500).unwrap();
        let fast = plan.execute(&xs).unwrap();
        let exact = nufft_direct(&xs, 500);
        assert!(agreement(&fast, &exact) <= 1e-8);
    }

    #[test]
    fn empty_input_gives_zeros_and_bad_points_error() {
        let plan = NufftPlan::new(8).unwrap();
        let out = plan.execute(&[]).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
        assert!(plan.execute(&[1.0]).is_err());
        assert!(plan.execute(&[-0.1]).is_err());
    }
}
