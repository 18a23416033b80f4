//! The multivariate periodogram on the Whittle frequency grid.
//!
//! For events observed on a window of length `T`, the periodogram at
//! `nu_k = k / T` is
//!
//! ```text
//! I_ij(nu_k) = (1/T) z_i(nu_k) conj(z_j(nu_k)),
//! z_i(nu)    = sum over events t of component i of exp(-2 pi i nu t),
//! ```
//!
//! including the `k = l` self-pairs, so the diagonal at high frequency
//! hovers around `N_i(T) / T`. The periodogram is asymptotically unbiased
//! for the spectral density matrix. Times are shifted to the window start
//! first; that global phase cancels in `z_i conj(z_j)`.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nufft::{nufft_direct, NufftPlan};
use crate::process::EventSeries;

/// How to evaluate the trigonometric sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeriodogramMethod {
    /// Direct summation when `events * frequencies` is small, gridded FFT
    /// otherwise.
    #[default]
    Auto,
    /// Exact direct summation, O(events * frequencies).
    Direct,
    /// Gaussian-gridded FFT, O(grid log grid + events).
    Fft,
}

/// Above this `events * frequencies` product, `Auto` switches to the FFT.
const AUTO_DIRECT_LIMIT: u128 = 4_000_000;

/// Periodogram matrices on the grid `nu_k = k / T`, `k = 1..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Window length `T` defining the grid.
    pub t: f64,
    pub dim: usize,
    pub m: usize,
    /// Row-major `d x d` matrix per frequency: `values[k][i * d + j]`.
    pub values: Vec<Vec<Complex64>>,
}

impl Periodogram {
    /// Frequency of 0-based grid slot `idx` (i.e. `nu_{idx + 1}`).
    pub fn nu(&self, idx: usize) -> f64 {
        (idx + 1) as f64 / self.t
    }

    pub fn get(&self, idx: usize, i: usize, j: usize) -> Complex64 {
        self.values[idx][i * self.dim + j]
    }

    /// Diagonal entry as a real number (imaginary part is zero by
    /// construction).
    pub fn diag(&self, idx: usize, i: usize) -> f64 {
        self.get(idx, i, i).re
    }
}

/// Computes the periodogram on the first `m` grid frequencies.
pub fn periodogram(
    events: &EventSeries,
    m: usize,
    method: PeriodogramMethod,
) -> Result<Periodogram> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one frequency".into()));
    }
    let d = events.dim();
    let t = events.duration();
    let start = events.window.0;
    let use_direct = match method {
        PeriodogramMethod::Direct => true,
        PeriodogramMethod::Fft => false,
        PeriodogramMethod::Auto => {
            (events.total_count() as u128) * (m as u128) <= AUTO_DIRECT_LIMIT
        }
    };
    // z[i][k] for k = 1..=m
    let mut z: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    if use_direct {
        for comp in &events.times {
            let xs: Vec<f64> = comp.iter().map(|&ti| (ti - start) / t).collect();
            z.push(nufft_direct(&xs, m));
        }
    } else {
        let plan = NufftPlan::new(m)?;
        for comp in &events.times {
            // Map to [0, 1); an event exactly at the window end wraps to 0,
            // which leaves exp(-2 pi i k x) unchanged.
            let xs: Vec<f64> = comp
                .iter()
                .map(|&ti| {
                    let x = (ti - start) / t;
                    if x >= 1.0 { 0.0 } else { x }
                })
                .collect();
            z.push(plan.execute(&xs)?);
        }
    }
    let values = (0..m)
        .map(|k| {
            let mut mat = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    mat.push(z[i][k] * z[j][k].conj() / t);
                }
            }
            mat
        })
        .collect();
    Ok(Periodogram { t, dim: d, m, values })
}

/// Entrywise mean of periodograms computed on the same grid (same window
/// length, frequency count and dimension), e.g. across replicates.
pub fn average_periodograms(pgs: &[Periodogram]) -> Result<Periodogram> {
    let first = pgs
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to average".into()))?;
    for pg in pgs {
        if pg.t != first.t || pg.m != first.m || pg.dim != first.dim {
            return Err(Error::InvalidInput(
                "periodograms must share window length, frequency count and dimension".into(),
            ));
        }
    }
    let scale = 1.0 / pgs.len() as f64;
    let values = (0..first.m)
        .map(|k| {
            (0..first.dim * first.dim)
                .map(|e| pgs.iter().map(|pg| pg.values[k][e]).sum::<Complex64>() * scale)
                .collect()
        })
        .collect();
    Ok(Periodogram { t: first.t, dim: first.dim, m: first.m, values })
}

/// Writes `k, nu, re_ij / im_ij ...` rows (upper triangle plus diagonal;
/// the lower triangle is the conjugate).
pub fn write_periodogram_csv(pg: &Periodogram, path: &Path) -> Result<()> {
    let d = pg.dim;
    let mut labels: Vec<(usize, usize)> = Vec::new();
    let mut header = vec!["k".to_string(), "nu".to_string()];
    for i in 0..d {
        for j in i..d {
            labels.push((i, j));
            header.push(format!("re_{}{}", i + 1, j + 1));
            header.push(format!("im_{}{}", i + 1, j + 1));
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for k in 0..pg.m {
        let mut row = vec![format!("{}", k + 1), format!("{}", pg.nu(k))];
        for &(i, j) in &labels {
            let v = pg.get(k, i, j);
            row.push(format!("{}", v.re));
            row.push(format!("{}", v.im));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
