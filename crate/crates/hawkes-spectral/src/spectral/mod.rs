//! Spectral densities of the noisy Hawkes model.
//!
//! For a stationary Hawkes process with kernel matrix `h` and Fourier
//! transform `H(nu) = integral h(t) exp(-2 pi i nu t) dt`, the Bartlett
//! spectral density matrix is
//!
//! ```text
//! f^H(nu) = (I - H(nu))^{-1} diag(m^H) (I - H(-nu))^{-T}
//! m^H     = (I - H(0))^{-1} mu
//! ```
//!
//! and superposing independent Poisson noise of rate `lambda0` adds a flat
//! `lambda0 * I`:  `f^N(nu) = f^H(nu) + lambda0 * I`. This module provides
//! the general matrix form for any kernel callback, fast closed forms for
//! the exponential model in dimensions one and two, and the rectangle
//! (uniform) kernel with its fourth-order expansion at `nu = 0`.

mod periodogram;

pub use periodogram::{
    average_periodograms, periodogram, write_periodogram_csv, Periodogram, PeriodogramMethod,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{hawkes_mean_intensity, NoisyHawkesParams};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Hermitian `d x d` spectral matrix at a single frequency (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMatrix {
    pub nu: f64,
    pub dim: usize,
    pub values: Vec<Complex64>,
}

impl SpectralMatrix {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.dim + j]
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

/// Fourier transform of the exponential kernel
/// `h(t) = alpha * beta * exp(-beta t)` for `t >= 0`:
/// `H(nu) = alpha * beta / (beta + 2 pi i nu)`.
pub fn exp_kernel_ft(alpha: f64, beta: f64, nu: f64) -> Complex64 {
    alpha * beta / Complex64::new(beta, TWO_PI * nu)
}

/// Univariate exponential model: closed form
///
/// ```text
/// f^N(nu) = m^H * beta^2 alpha (2 - alpha) / (beta^2 (1-alpha)^2 + 4 pi^2 nu^2)
///         + m^H + lambda0,        m^H = mu / (1 - alpha).
/// ```
pub fn spectral_density_uni(params: &NoisyHawkesParams, nu: f64) -> Result<f64> {
    params.validate()?;
    if params.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "expected a univariate model, got d = {}",
            params.dim()
        )));
    }
    let (mu, alpha, beta) = (params.mu[0], params.alpha[0][0], params.beta[0]);
    let m = mu / (1.0 - alpha);
    let w2 = TWO_PI * nu * TWO_PI * nu;
    let peak = beta * beta * alpha * (2.0 - alpha) / (beta * beta * (1.0 - alpha) * (1.0 - alpha) + w2);
    Ok(m * peak + m + params.lambda0)
}

/// Bivariate exponential model, closed form.
///
/// With `G_i = beta_i / (beta_i + 2 pi i nu)`, `H_ij = alpha_ij G_i` and
/// `Delta = (1 - H_11)(1 - H_22) - H_12 H_21`:
///
/// ```text
/// f_11 = [m_1 |1 - H_22|^2 + m_2 |H_12|^2] / |Delta|^2 + lambda0
/// f_12 = [m_1 (1 - H_22) conj(H_21) + m_2 conj(1 - H_11) H_12] / |Delta|^2
/// ```
///
/// and symmetrically for `f_22`, `f_21 = conj(f_12)`.
pub fn spectral_density_biv(params: &NoisyHawkesParams, nu: f64) -> Result<SpectralMatrix> {
    params.validate()?;
    if params.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected a bivariate model, got d = {}",
            params.dim()
        )));
    }
    let m = hawkes_mean_intensity(params)?;
    let a = &params.alpha;
    let g1 = Complex64::new(params.beta[0], 0.0) / Complex64::new(params.beta[0], TWO_PI * nu);
    let g2 = Complex64::new(params.beta[1], 0.0) / Complex64::new(params.beta[1], TWO_PI * nu);
    let h11 = a[0][0] * g1;
    let h12 = a[0][1] * g1;
    let h21 = a[1][0] * g2;
    let h22 = a[1][1] * g2;
    let one = Complex64::new(1.0, 0.0);
    let delta = (one - h11) * (one - h22) - h12 * h21;
    let den = delta.norm_sqr();
    if den <= 0.0 {
        return Err(Error::Numerical(format!("degenerate spectral system at nu = {nu}")));
    }
    let f11 = (m[0] * (one - h22).norm_sqr() + m[1] * h12.norm_sqr()) / den + params.lambda0;
    let f22 = (m[1] * (one - h11).norm_sqr() + m[0] * h21.norm_sqr()) / den + params.lambda0;
    let f12 = (m[0] * (one - h22) * h21.conj() + m[1] * (one - h11).conj() * h12) / den;
    Ok(SpectralMatrix {
        nu,
        dim: 2,
        values: vec![Complex64::new(f11, 0.0), f12, f12.conj(), Complex64::new(f22, 0.0)],
    })
}

/// General matrix form for an arbitrary kernel transform callback
/// `kernel_ft(i, j, nu) -> H_ij(nu)`; evaluates the display in the module
/// docs literally via complex linear solves. Slower than the closed forms
/// but dimension-agnostic; the closed forms are tested against it.
pub fn spectral_density_general(
    mu: &[f64],
    lambda0: f64,
    kernel_ft: &dyn Fn(usize, usize, f64) -> Complex64,
    nu: f64,
) -> Result<SpectralMatrix> {
    let d = mu.len();
    if d == 0 {
        return Err(Error::InvalidInput("mu must be non-empty".into()));
    }
    if mu.iter().any(|m| !m.is_finite() || *m < 0.0) || !lambda0.is_finite() || lambda0 < 0.0 {
        return Err(Error::InvalidInput("mu and lambda0 must be finite and >= 0".into()));
    }
    let eye = nalgebra::DMatrix::<Complex64>::identity(d, d);
    let h_at = |t: f64| nalgebra::DMatrix::from_fn(d, d, |i, j| kernel_ft(i, j, t));
    let a0 = &eye - h_at(0.0);
    let mean = a0
        .clone()
        .lu()
        .solve(&nalgebra::DVector::from_iterator(
            d,
            mu.iter().map(|&m| Complex64::new(m, 0.0)),
        ))
        .ok_or_else(|| Error::Numerical("I - H(0) is singular".into()))?;
    let b = (&eye - h_at(nu))
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("I - H(nu) singular at nu = {nu}")))?;
    let c = (&eye - h_at(-nu))
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("I - H(-nu) singular at nu = {nu}")))?;
    let diag = nalgebra::DMatrix::from_fn(d, d, |i, j| {
        if i == j { mean[i] } else { Complex64::new(0.0, 0.0) }
    });
    let mut f = b * diag * c;
    for i in 0..d {
        f[(i, i)] += lambda0;
    }
    Ok(SpectralMatrix {
        nu,
        dim: d,
        values: f.transpose().iter().copied().collect(), // nalgebra stores column-major
    })
}

/// Convenience wrapper: the general matrix form specialized to this
/// crate's exponential kernels.
pub fn spectral_density_exp_general(
    params: &NoisyHawkesParams,
    nu: f64,
) -> Result<SpectralMatrix> {
    params.validate()?;
    let alpha = params.alpha.clone();
    let beta = params.beta.clone();
    let kernel = move |i: usize, j: usize, t: f64| exp_kernel_ft(alpha[i][j], beta[i], t);
    spectral_density_general(&params.mu, params.lambda0, &kernel, nu)
}

/// Univariate model with the rectangle (uniform) kernel
/// `h(t) = (1/phi) 1_{0 <= t <= phi}`, scaled by `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectParams {
    pub mu: f64,
    pub alpha: f64,
    /// Kernel support length.
    pub phi: f64,
    pub lambda0: f64,
}

impl RectParams {
    pub fn new(mu: f64, alpha: f64, phi: f64, lambda0: f64) -> Result<Self> {
        let p = Self { mu, alpha, phi, lambda0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(Error::InvalidInput(format!("mu must be > 0, got {}", self.mu)));
        }
        if !self.alpha.is_finite() || !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if !self.phi.is_finite() || self.phi <= 0.0 {
            return Err(Error::InvalidInput(format!("phi must be > 0, got {}", self.phi)));
        }
        if !self.lambda0.is_finite() || self.lambda0 < 0.0 {
            return Err(Error::InvalidInput(format!(
                "lambda0 must be >= 0, got {}",
                self.lambda0
            )));
        }
        Ok(())
    }
}

/// Fourth-order expansion of the rectangle-model density at `nu = 0`:
/// `f^N(nu) ~ a + c1 nu^2 + c2 nu^4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectTaylor {
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Below this value of `|2 pi nu phi|` the rectangle transform switches to
/// its power series: the direct expression `(1 - e^{-ix}) / (ix)` loses
/// roughly `eps / x^2` relative accuracy to cancellation as `x -> 0`.
const RECT_SERIES_CUTOFF: f64 = 1e-4;

/// Fourier transform of the unit-mass rectangle kernel on `[0, phi]`:
/// `(1 - exp(-i x)) / (i x)` with `x = 2 pi nu phi`.
pub fn rect_kernel_ft(phi: f64, nu: f64) -> Complex64 {
    let x = TWO_PI * nu * phi;
    if x.abs() < RECT_SERIES_CUTOFF {
        // sum_{n>=0} (-ix)^n / (n+1)!  up to n = 5; next term ~ x^6 / 7!.
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..=5 {
            sum += term / (n as f64 + 1.0);
            term *= Complex64::new(0.0, -x) / (n as f64 + 1.0);
        }
        sum
    } else {
        (Complex64::new(1.0, 0.0) - Complex64::new(0.0, -x).exp()) / Complex64::new(0.0, x)
    }
}

/// Rectangle-model spectral density
/// `f^N(nu) = mu / ((1 - alpha) |1 - alpha H(nu)|^2) + lambda0`.
pub fn spectral_density_rect(params: &RectParams, nu: f64) -> Result<f64> {
    params.validate()?;
    let h = rect_kernel_ft(params.phi, nu);
    let den = (Complex64::new(1.0, 0.0) - params.alpha * h).norm_sqr();
    if den <= 0.0 {
        return Err(Error::Numerical(format!("degenerate rectangle system at nu = {nu}")));
    }
    Ok(params.mu / ((1.0 - params.alpha) * den) + params.lambda0)
}

/// Closed-form Taylor coefficients of the rectangle-model density at the
/// origin, in terms of the uniform moments `m_n = phi^n / (n + 1)` and
/// `r = alpha / (1 - alpha)`:
///
/// ```text
/// a  = mu / (1-alpha)^3 + lambda0
/// c1 = 4 mu alpha pi^2 / (1-alpha)^4 * ( -m2 - r m1^2 )
/// c2 = 16 mu alpha pi^4 / (1-alpha)^4
///      * ( m4/12 + r (m1 m3 / 3 + 3 m2^2 / 4) + r^2 2 m2 m1^2 + r^3 m1^4 )
/// ```
pub fn rect_taylor(params: &RectParams) -> Result<RectTaylor> {
    params.validate()?;
    let (mu, alpha, phi) = (params.mu, params.alpha, params.phi);
    let r = alpha / (1.0 - alpha);
    let m1 = phi / 2.0;
    let m2 = phi * phi / 3.0;
    let m3 = phi * phi * phi / 4.0;
    let m4 = phi * phi * phi * phi / 5.0;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let base = (1.0 - alpha).powi(4);
    let a = mu / (1.0 - alpha).powi(3) + params.lambda0;
    let c1 = 4.0 * mu * alpha * pi2 / base * (-m2 - r * m1 * m1);
    let c2 = 16.0 * mu * alpha * pi2 * pi2 / base
        * (m4 / 12.0 + r * (m1 * m3 / 3.0 + 0.75 * m2 * m2)
            + r * r * 2.0 * m2 * m1 * m1
            + r * r * r * m1 * m1 * m1 * m1);
    Ok(RectTaylor { a, c1, c2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_kernel_ft_hand_value() {
        // alpha = 1, beta = 2 at 2 pi nu = 4: 2 / (2 + 4i) = 0.2 - 0.4i.
        let nu = 4.0 / TWO_PI;
        let h = exp_kernel_ft(1.0, 2.0, nu);
        assert!((h.re - 0.2).abs() < 1e-15);
        assert!((h.im + 0.4).abs() < 1e-15);
        // At nu = 0 the transform is the kernel mass alpha.
        let h0 = exp_kernel_ft(0.7, 3.0, 0.0);
        assert!((h0.re - 0.7).abs() < 1e-15 && h0.im == 0.0);
    }

    #[test]
    fn uni_density_limits() {
        let p = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap();
        // f(0) = mu / (1-alpha)^3 + lambda0 = 8.6
        assert!((spectral_density_uni(&p, 0.0).unwrap() - 8.6).abs() < 1e-12);
        // f(inf) -> m^H + lambda0 = 2.6
        let tail = spectral_density_uni(&p, 1e9).unwrap();
        assert!((tail - 2.6).abs() < 1e-9, "tail {tail}");
    }

    #[test]
    fn rect_taylor_hand_values() {
        // mu = 1, alpha = 1/2, phi = 1, lambda0 = 0: r = 1, moments 1/2, 1/3, 1/4, 1/5.
        let p = RectParams::new(1.0, 0.5, 1.0, 0.0).unwrap();
        let t = rect_taylor(&p).unwrap();
        assert!((t.a - 8.0).abs() < 1e-12);
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        // c1 = 32 * (-1/3 - 1/4) pi^2 = -56/3 pi^2
        assert!((t.c1 + 56.0 / 3.0 * pi2).abs() < 1e-10);
        // c2 = 128 * (89/240) pi^4 = 712/15 pi^4
        assert!((t.c2 - 712.0 / 15.0 * pi2 * pi2).abs() < 1e-9);
    }

    #[test]
    fn rect_density_is_continuous_across_series_cutoff() {
        let p = RectParams::new(1.3, 0.41, 2.7, 0.2).unwrap();
        // straddle the switch point x = 1e-4 (nu = x / (2 pi phi))
        let nu_at = |x: f64| x / (TWO_PI * p.phi);
        let below = spectral_density_rect(&p, nu_at(0.99e-4)).unwrap();
        let above = spectral_density_rect(&p, nu_at(1.01e-4)).unwrap();
        assert!((below - above).abs() / below < 1e-9, "{below} vs {above}");
        // and f(0) equals the Taylor constant
        let a = rect_taylor(&p).unwrap().a;
        assert!((spectral_density_rect(&p, 0.0).unwrap() - a).abs() / a < 1e-14);
    }
}
