//! Whittle spectral log-likelihood and model fitting.
//!
//! For a periodogram `I` on the grid `nu_k = k / T`, `k = 1..=M`, the
//! objective is
//!
//! ```text
//! l_T(theta) = -(1/T) sum_k [ log det f_theta(nu_k) + tr(f_theta(nu_k)^{-1} I(nu_k)) ]
//! ```
//!
//! maximized over the free coordinates of a [`ModelSpec`] inside their
//! boxes with multi-start L-BFGS-B. Stationarity (`rho(alpha) < 1`) is
//! kept by a quadratic penalty just inside 1 plus rejection of infeasible
//! iterates. Analytic gradients cover the exponential model in dimensions
//! one and two; central finite differences are available everywhere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{lbfgsb, Bounds, OptimOptions};
use crate::process::{spectral_radius, EventSeries, NoisyHawkesParams};
use crate::rng::substream;
use crate::spectral::{periodogram, spectral_density_exp_general, Periodogram, PeriodogramMethod};

/// Estimates at or below this value count as "null" interaction entries.
pub const NULL_ALPHA_THRESHOLD: f64 = 1e-4;

/// Default parameter boxes.
pub const MU_BOUNDS: (f64, f64) = (1e-6, 20.0);
pub const ALPHA_BOUNDS_UNI: (f64, f64) = (1e-6, 1.0 - 1e-6);
pub const ALPHA_BOUNDS: (f64, f64) = (0.0, 1.0 - 1e-6);
pub const BETA_BOUNDS: (f64, f64) = (1e-4, 50.0);
pub const LAMBDA0_BOUNDS: (f64, f64) = (1e-6, 20.0);

const TWO_PI: f64 = std::f64::consts::TAU;
/// Penalty turns on when `rho(alpha)` exceeds this.
const RHO_BAR: f64 = 1.0 - 1e-6;
const RHO_PENALTY_WEIGHT: f64 = 1e8;

/// How many Whittle grid frequencies to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyPolicy {
    /// `M = N(T)`, the number of observed events.
    N,
    /// `M = ceil(N ln N)`; finer grid, roughly ten times the work.
    NLogN,
    /// A caller-chosen count.
    Explicit(usize),
}

impl FrequencyPolicy {
    pub fn as_string(&self) -> String {
        match self {
            FrequencyPolicy::N => "n".into(),
            FrequencyPolicy::NLogN => "nlogn".into(),
            FrequencyPolicy::Explicit(m) => m.to_string(),
        }
    }
}

impl Default for FrequencyPolicy {
    fn default() -> Self {
        FrequencyPolicy::N
    }
}

impl std::str::FromStr for FrequencyPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" => Ok(FrequencyPolicy::N),
            "nlogn" => Ok(FrequencyPolicy::NLogN),
            other => other
                .parse::<usize>()
                .map(FrequencyPolicy::Explicit)
                .map_err(|_| {
                    Error::InvalidConfig(format!(
                        "frequency policy must be 'n', 'nlogn' or a positive integer, got '{s}'"
                    ))
                }),
        }
    }
}

impl std::fmt::Display for FrequencyPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.as_string())
    }
}

impl Serialize for FrequencyPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FrequencyPolicy::Explicit(m) => s.serialize_u64(*m as u64),
            other => s.serialize_str(&other.as_string()),
        }
    }
}

impl<'de> Deserialize<'de> for FrequencyPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(m) => Ok(FrequencyPolicy::Explicit(m as usize)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Number of grid frequencies for a series under a policy.
pub fn frequency_count(policy: FrequencyPolicy, events: &EventSeries) -> Result<usize> {
    let n = events.total_count();
    if n == 0 {
        return Err(Error::InvalidInput("cannot pick a frequency grid for an empty series".into()));
    }
    match policy {
        FrequencyPolicy::N => Ok(n),
        FrequencyPolicy::NLogN => Ok(((n as f64) * (n as f64).ln()).ceil().max(1.0) as usize),
        FrequencyPolicy::Explicit(m) => {
            if m == 0 {
                Err(Error::InvalidConfig("explicit frequency count must be at least 1".into()))
            } else {
                Ok(m)
            }
        }
    }
}

/// Status of one scalar parameter in a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamStatus {
    /// Optimized inside `[lo, hi]`.
    Free { lo: f64, hi: f64 },
    /// Held at a known value.
    Fixed(f64),
    /// Structurally absent (exact zero); only meaningful for `alpha`.
    Zero,
}

impl ParamStatus {
    pub fn is_free(&self) -> bool {
        matches!(self, ParamStatus::Free { .. })
    }

    /// The value a non-free status pins.
    fn pinned(&self) -> Option<f64> {
        match self {
            ParamStatus::Fixed(v) => Some(*v),
            ParamStatus::Zero => Some(0.0),
            ParamStatus::Free { .. } => None,
        }
    }
}

/// A free coordinate's position in the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeCoord {
    Mu(usize),
    Alpha(usize, usize),
    Beta(usize),
    Lambda0,
}

impl std::fmt::Display for FreeCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FreeCoord::Mu(i) => write!(f, "mu_{}", i + 1),
            FreeCoord::Alpha(i, j) => write!(f, "alpha_{}{}", i + 1, j + 1),
            FreeCoord::Beta(i) => write!(f, "beta_{}", i + 1),
            FreeCoord::Lambda0 => write!(f, "lambda0"),
        }
    }
}

/// Which parameters of the noisy Hawkes model are estimated, fixed or
/// structurally zero. Rows of `alpha` that are entirely zero leave their
/// `beta` without influence on the law; such rows must pin `beta`
/// (conventionally to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub mu: Vec<ParamStatus>,
    pub alpha: Vec<Vec<ParamStatus>>,
    pub beta: Vec<ParamStatus>,
    pub lambda0: ParamStatus,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Univariate model with every parameter free in the default boxes.
    pub fn univariate_full() -> Self {
        Self {
            mu: vec![ParamStatus::Free { lo: MU_BOUNDS.0, hi: MU_BOUNDS.1 }],
            alpha: vec![vec![ParamStatus::Free {
                lo: ALPHA_BOUNDS_UNI.0,
                hi: ALPHA_BOUNDS_UNI.1,
            }]],
            beta: vec![ParamStatus::Free { lo: BETA_BOUNDS.0, hi: BETA_BOUNDS.1 }],
            lambda0: ParamStatus::Free { lo: LAMBDA0_BOUNDS.0, hi: LAMBDA0_BOUNDS.1 },
        }
    }

    fn univariate_fixing(which: FreeCoord, value: f64) -> Self {
        let mut spec = Self::univariate_full();
        match which {
            FreeCoord::Mu(_) => spec.mu[0] = ParamStatus::Fixed(value),
            FreeCoord::Alpha(_, _) => spec.alpha[0][0] = ParamStatus::Fixed(value),
            FreeCoord::Beta(_) => spec.beta[0] = ParamStatus::Fixed(value),
            FreeCoord::Lambda0 => spec.lambda0 = ParamStatus::Fixed(value),
        }
        spec
    }

    /// Univariate submodel with the baseline known.
    pub fn q_mu(mu: f64) -> Self {
        Self::univariate_fixing(FreeCoord::Mu(0), mu)
    }

    /// Univariate submodel with the interaction weight known.
    pub fn q_alpha(alpha: f64) -> Self {
        Self::univariate_fixing(FreeCoord::Alpha(0, 0), alpha)
    }

    /// Univariate submodel with the decay rate known.
    pub fn q_beta(beta: f64) -> Self {
        Self::univariate_fixing(FreeCoord::Beta(0), beta)
    }

    /// Univariate submodel with the noise rate known.
    pub fn q_lambda0(lambda0: f64) -> Self {
        Self::univariate_fixing(FreeCoord::Lambda0, lambda0)
    }

    /// Bivariate model with all nine parameters free.
    pub fn bivariate_full() -> Self {
        let afree = ParamStatus::Free { lo: ALPHA_BOUNDS.0, hi: ALPHA_BOUNDS.1 };
        Self {
            mu: vec![ParamStatus::Free { lo: MU_BOUNDS.0, hi: MU_BOUNDS.1 }; 2],
            alpha: vec![vec![afree; 2]; 2],
            beta: vec![ParamStatus::Free { lo: BETA_BOUNDS.0, hi: BETA_BOUNDS.1 }; 2],
            lambda0: ParamStatus::Free { lo: LAMBDA0_BOUNDS.0, hi: LAMBDA0_BOUNDS.1 },
        }
    }

    /// Model whose interaction support is constrained to `mask`
    /// (`mask[i][j]` true keeps `alpha_ij` free, false zeroes it). Rows
    /// with no surviving entry get their decay rate pinned to 1.
    pub fn with_support(mask: &[Vec<bool>]) -> Result<Self> {
        let d = mask.len();
        if d == 0 || mask.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("support mask must be square".into()));
        }
        let abounds = if d == 1 { ALPHA_BOUNDS_UNI } else { ALPHA_BOUNDS };
        let alpha: Vec<Vec<ParamStatus>> = mask
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&keep| {
                        if keep {
                            ParamStatus::Free { lo: abounds.0, hi: abounds.1 }
                        } else {
                            ParamStatus::Zero
                        }
                    })
                    .collect()
            })
            .collect();
        let beta: Vec<ParamStatus> = mask
            .iter()
            .map(|row| {
                if row.iter().any(|&k| k) {
                    ParamStatus::Free { lo: BETA_BOUNDS.0, hi: BETA_BOUNDS.1 }
                } else {
                    ParamStatus::Fixed(1.0)
                }
            })
            .collect();
        Ok(Self {
            mu: vec![ParamStatus::Free { lo: MU_BOUNDS.0, hi: MU_BOUNDS.1 }; d],
            alpha,
            beta,
            lambda0: ParamStatus::Free { lo: LAMBDA0_BOUNDS.0, hi: LAMBDA0_BOUNDS.1 },
        })
    }

    /// Bivariate convenience wrapper around [`ModelSpec::with_support`].
    pub fn bivariate_with_support(mask: [[bool; 2]; 2]) -> Self {
        Self::with_support(&[mask[0].to_vec(), mask[1].to_vec()])
            .expect("2x2 mask is always square")
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidConfig("model needs at least one component".into()));
        }
        if self.beta.len() != d || self.alpha.len() != d
            || self.alpha.iter().any(|r| r.len() != d)
        {
            return Err(Error::InvalidConfig("model spec matrices are not square".into()));
        }
        let check_free = |st: &ParamStatus, name: &str, lo_min: f64| -> Result<()> {
            match st {
                ParamStatus::Free { lo, hi } => {
                    if !lo.is_finite() || !hi.is_finite() || lo >= hi || *lo < lo_min {
                        return Err(Error::InvalidConfig(format!(
                            "{name}: bad bounds [{lo}, {hi}]"
                        )));
                    }
                }
                ParamStatus::Fixed(v) => {
                    if !v.is_finite() || *v < lo_min {
                        return Err(Error::InvalidConfig(format!("{name}: bad fixed value {v}")));
                    }
                }
                ParamStatus::Zero => {}
            }
            Ok(())
        };
        for (i, st) in self.mu.iter().enumerate() {
            if matches!(st, ParamStatus::Zero) {
                return Err(Error::InvalidConfig(format!(
                    "mu_{}: zero status is reserved for alpha entries",
                    i + 1
                )));
            }
            check_free(st, &format!("mu_{}", i + 1), 0.0)?;
        }
        for (i, st) in self.beta.iter().enumerate() {
            if matches!(st, ParamStatus::Zero) {
                return Err(Error::InvalidConfig(format!(
                    "beta_{}: zero status is reserved for alpha entries",
                    i + 1
                )));
            }
            check_free(st, &format!("beta_{}", i + 1), f64::MIN_POSITIVE)?;
        }
        if matches!(self.lambda0, ParamStatus::Zero) {
            return Err(Error::InvalidConfig(
                "lambda0: zero status is reserved for alpha entries".into(),
            ));
        }
        check_free(&self.lambda0, "lambda0", 0.0)?;
        for (i, row) in self.alpha.iter().enumerate() {
            let dead_row = row
                .iter()
                .all(|st| matches!(st, ParamStatus::Zero) || st.pinned() == Some(0.0));
            if dead_row && !matches!(self.beta[i], ParamStatus::Fixed(_)) {
                return Err(Error::InvalidConfig(format!(
                    "alpha row {} is all zero, so beta_{} must be pinned (conventionally 1)",
                    i + 1,
                    i + 1
                )));
            }
            for (j, st) in row.iter().enumerate() {
                check_free(st, &format!("alpha_{}{}", i + 1, j + 1), 0.0)?;
                if d == 1 {
                    if let ParamStatus::Fixed(v) = st {
                        if *v >= 1.0 {
                            return Err(Error::InvalidConfig(format!(
                                "alpha_{}{} fixed at {v} is not stationary",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
            }
        }
        if self.n_free() == 0 {
            return Err(Error::InvalidConfig("model has no free parameter".into()));
        }
        Ok(())
    }

    /// Free coordinates in packing order (mu, alpha row-major, beta,
    /// lambda0) with their boxes.
    pub fn free_coords(&self) -> Vec<(FreeCoord, (f64, f64))> {
        let mut out = Vec::new();
        for (i, st) in self.mu.iter().enumerate() {
            if let ParamStatus::Free { lo, hi } = st {
                out.push((FreeCoord::Mu(i), (*lo, *hi)));
            }
        }
        for (i, row) in self.alpha.iter().enumerate() {
            for (j, st) in row.iter().enumerate() {
                if let ParamStatus::Free { lo, hi } = st {
                    out.push((FreeCoord::Alpha(i, j), (*lo, *hi)));
                }
            }
        }
        for (i, st) in self.beta.iter().enumerate() {
            if let ParamStatus::Free { lo, hi } = st {
                out.push((FreeCoord::Beta(i), (*lo, *hi)));
            }
        }
        if let ParamStatus::Free { lo, hi } = &self.lambda0 {
            out.push((FreeCoord::Lambda0, (*lo, *hi)));
        }
        out
    }

    pub fn n_free(&self) -> usize {
        self.free_coords().len()
    }

    pub fn bounds(&self) -> Bounds {
        let coords = self.free_coords();
        Bounds::new(
            coords.iter().map(|(_, (lo, _))| *lo).collect(),
            coords.iter().map(|(_, (_, hi))| *hi).collect(),
        )
    }

    /// Full parameter set from a free-coordinate vector; fixed and zero
    /// entries are inserted bit-exactly.
    pub fn unpack(&self, x: &[f64]) -> Result<NoisyHawkesParams> {
        let coords = self.free_coords();
        if x.len() != coords.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} free values, got {}",
                coords.len(),
                x.len()
            )));
        }
        let d = self.dim();
        let pin = |st: &ParamStatus| st.pinned().unwrap_or(f64::NAN);
        let mut params = NoisyHawkesParams {
            mu: self.mu.iter().map(pin).collect(),
            alpha: self
                .alpha
                .iter()
                .map(|row| row.iter().map(pin).collect())
                .collect(),
            beta: self.beta.iter().map(pin).collect(),
            lambda0: pin(&self.lambda0),
        };
        debug_assert_eq!(params.mu.len(), d);
        for ((coord, _), &v) in coords.iter().zip(x) {
            match coord {
                FreeCoord::Mu(i) => params.mu[*i] = v,
                FreeCoord::Alpha(i, j) => params.alpha[*i][*j] = v,
                FreeCoord::Beta(i) => params.beta[*i] = v,
                FreeCoord::Lambda0 => params.lambda0 = v,
            }
        }
        Ok(params)
    }

    /// Free-coordinate vector of a full parameter set (inverse of
    /// [`ModelSpec::unpack`] on the free part).
    pub fn pack(&self, params: &NoisyHawkesParams) -> Result<Vec<f64>> {
        if params.dim() != self.dim() {
            return Err(Error::InvalidInput("parameter dimension mismatch".into()));
        }
        Ok(self
            .free_coords()
            .iter()
            .map(|(coord, _)| match coord {
                FreeCoord::Mu(i) => params.mu[*i],
                FreeCoord::Alpha(i, j) => params.alpha[*i][*j],
                FreeCoord::Beta(i) => params.beta[*i],
                FreeCoord::Lambda0 => params.lambda0,
            })
            .collect())
    }

    /// Checks that `params` honors every fixed and zero entry.
    pub fn conforms(&self, params: &NoisyHawkesParams) -> Result<()> {
        if params.dim() != self.dim() {
            return Err(Error::InvalidInput("parameter dimension mismatch".into()));
        }
        let check = |st: &ParamStatus, value: f64, name: String| -> Result<()> {
            if let Some(pinned) = st.pinned() {
                if (value - pinned).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "{name} = {value} violates the spec's pinned value {pinned}"
                    )));
                }
            }
            Ok(())
        };
        for (i, st) in self.mu.iter().enumerate() {
            check(st, params.mu[i], format!("mu_{}", i + 1))?;
        }
        for (i, row) in self.alpha.iter().enumerate() {
            for (j, st) in row.iter().enumerate() {
                check(st, params.alpha[i][j], format!("alpha_{}{}", i + 1, j + 1))?;
            }
        }
        for (i, st) in self.beta.iter().enumerate() {
            check(st, params.beta[i], format!("beta_{}", i + 1))?;
        }
        check(&self.lambda0, params.lambda0, "lambda0".into())
    }
}

/// How gradients are obtained during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// Closed-form gradients (exponential model, d <= 2); falls back to
    /// finite differences beyond that.
    #[default]
    Analytic,
    /// Central finite differences on the free coordinates.
    CentralDiff,
}

/// Options for [`fit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Independent optimizer starts; the best converged one wins.
    pub restarts: usize,
    pub seed: u64,
    pub m_policy: FrequencyPolicy,
    pub gradient: GradientMode,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_rel_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            m_policy: FrequencyPolicy::N,
            gradient: GradientMode::Analytic,
            max_iters: 500,
            grad_tol: 1e-6,
            f_rel_tol: 1e-10,
        }
    }
}

/// Where one optimizer restart began and ended.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub init: NoisyHawkesParams,
    pub theta: NoisyHawkesParams,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub message: String,
}

/// Outcome of a Whittle fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    /// Estimated parameters; pinned entries are bit-exact.
    pub theta: NoisyHawkesParams,
    pub loglik: f64,
    /// Number of grid frequencies used.
    pub m_used: usize,
    /// Total event count behind the periodogram, when known.
    pub n_events: Option<usize>,
    pub chosen_restart: usize,
    pub restarts: Vec<RestartTrace>,
}

impl FitResult {
    /// True where the estimated interaction is at or below `threshold`.
    pub fn alpha_null_mask(&self, threshold: f64) -> Vec<Vec<bool>> {
        self.theta
            .alpha
            .iter()
            .map(|row| row.iter().map(|&a| a <= threshold).collect())
            .collect()
    }

    /// Drops the per-restart traces (e.g. for compact serialization).
    pub fn strip_traces(mut self) -> Self {
        self.restarts.clear();
        self
    }
}

// ---------------------------------------------------------------------------
// Likelihood evaluation
// ---------------------------------------------------------------------------

/// Whittle log-likelihood of `theta` under `spec` on a periodogram.
/// Validates admissibility and spec conformity first.
pub fn spectral_loglik(
    spec: &ModelSpec,
    theta: &NoisyHawkesParams,
    pg: &Periodogram,
) -> Result<f64> {
    spec.validate()?;
    theta.validate()?;
    spec.conforms(theta)?;
    if theta.dim() != pg.dim {
        return Err(Error::InvalidInput(format!(
            "model dimension {} does not match periodogram dimension {}",
            theta.dim(),
            pg.dim
        )));
    }
    eval_loglik(theta, pg)
}

/// Dispatch to the fastest available evaluator.
fn eval_loglik(theta: &NoisyHawkesParams, pg: &Periodogram) -> Result<f64> {
    match theta.dim() {
        1 => loglik_uni(theta, pg, None),
        2 => loglik_biv(theta, pg, None),
        _ => spectral_loglik_reference(theta, pg),
    }
}

/// Reference evaluation through the general matrix-form spectral density
/// (complex solves per frequency). Any dimension; slow but independent of
/// the closed-form code paths.
pub fn spectral_loglik_reference(theta: &NoisyHawkesParams, pg: &Periodogram) -> Result<f64> {
    let d = theta.dim();
    if d != pg.dim {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let mut acc = 0.0;
    for k in 0..pg.m {
        let f = spectral_density_exp_general(theta, pg.nu(k))?;
        let fm = nalgebra::DMatrix::from_fn(d, d, |i, j| f.get(i, j));
        let det = fm.determinant();
        if !(det.re > 0.0) {
            return Err(Error::Numerical(format!(
                "spectral matrix not positive definite at nu = {}",
                pg.nu(k)
            )));
        }
        let inv = fm
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular spectral matrix".into()))?;
        let mut tr = 0.0;
        for i in 0..d {
            for j in 0..d {
                tr += (inv[(i, j)] * pg.get(k, j, i)).re;
            }
        }
        acc += det.re.ln() + tr;
    }
    Ok(-acc / pg.t)
}

/// Univariate closed-form likelihood; optionally fills the gradient with
/// respect to (mu, alpha, beta, lambda0).
fn loglik_uni(theta: &NoisyHawkesParams, pg: &Periodogram, grad: Option<&mut [f64; 4]>) -> Result<f64> {
    let (mu, alpha, beta, lambda0) =
        (theta.mu[0], theta.alpha[0][0], theta.beta[0], theta.lambda0);
    let one_m = 1.0 - alpha;
    let m = mu / one_m;
    let num = beta * beta * alpha * (2.0 - alpha);
    let den0 = beta * beta * one_m * one_m;
    let base = m + lambda0;

    let dm_dalpha = mu / (one_m * one_m);
    let dnum_dalpha = beta * beta * (2.0 - 2.0 * alpha);
    let dden_dalpha = -2.0 * beta * beta * one_m;
    let dnum_dbeta = 2.0 * beta * alpha * (2.0 - alpha);
    let dden_dbeta = 2.0 * beta * one_m * one_m;

    let mut acc = 0.0;
    let mut gmu = 0.0;
    let mut galpha = 0.0;
    let mut gbeta = 0.0;
    let mut glambda = 0.0;
    let want_grad = grad.is_some();
    for k in 0..pg.m {
        let w = TWO_PI * pg.nu(k);
        let den = den0 + w * w;
        let u = num / den;
        let f = m * u + base;
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Numerical(format!(
                "spectral density not positive at nu = {}",
                pg.nu(k)
            )));
        }
        let ik = pg.values[k][0].re;
        acc += f.ln() + ik / f;
        if want_grad {
            // d/dtheta of (ln f + I/f) = (f - I) / f^2 * df/dtheta
            let s = (f - ik) / (f * f);
            let du_dalpha = (dnum_dalpha * den - num * dden_dalpha) / (den * den);
            let du_dbeta = (dnum_dbeta * den - num * dden_dbeta) / (den * den);
            gmu += s * (u + 1.0) / one_m;
            galpha += s * (dm_dalpha * (u + 1.0) + m * du_dalpha);
            gbeta += s * m * du_dbeta;
            glambda += s;
        }
    }
    if let Some(g) = grad {
        let scale = -1.0 / pg.t;
        *g = [gmu * scale, galpha * scale, gbeta * scale, glambda * scale];
    }
    Ok(-acc / pg.t)
}

type C2 = [[Complex64; 2]; 2];

#[inline]
fn mat2_mul(a: &C2, b: &C2) -> C2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Bivariate closed-form likelihood; optionally fills the gradient in the
/// order (mu1, mu2, a11, a12, a21, a22, beta1, beta2, lambda0).
fn loglik_biv(theta: &NoisyHawkesParams, pg: &Periodogram, grad: Option<&mut [f64; 9]>) -> Result<f64> {
    let a = &theta.alpha;
    let (b1, b2) = (theta.beta[0], theta.beta[1]);
    let lambda0 = theta.lambda0;
    // Stationary mean and R = (I - alpha)^{-1}; both frequency-independent.
    let det_ia = (1.0 - a[0][0]) * (1.0 - a[1][1]) - a[0][1] * a[1][0];
    if det_ia <= 0.0 {
        return Err(Error::Numerical("I - alpha is singular or negative".into()));
    }
    let r = [
        [(1.0 - a[1][1]) / det_ia, a[0][1] / det_ia],
        [a[1][0] / det_ia, (1.0 - a[0][0]) / det_ia],
    ];
    let m = [
        r[0][0] * theta.mu[0] + r[0][1] * theta.mu[1],
        r[1][0] * theta.mu[0] + r[1][1] * theta.mu[1],
    ];
    if m[0] < 0.0 || m[1] < 0.0 {
        return Err(Error::Numerical("negative stationary mean".into()));
    }

    let want_grad = grad.is_some();
    let mut acc = 0.0;
    let mut ca = [[0.0_f64; 2]; 2]; // kernel part of the alpha gradient
    let mut cb = [0.0_f64; 2];
    let mut s2 = [0.0_f64; 2]; // sums of diag(B^H W B)
    let mut cl = 0.0_f64; // sum of tr(W)

    for k in 0..pg.m {
        let w = TWO_PI * pg.nu(k);
        let gk = [
            Complex64::new(b1 * b1, -b1 * w) / (b1 * b1 + w * w),
            Complex64::new(b2 * b2, -b2 * w) / (b2 * b2 + w * w),
        ];
        // A = I - H(nu), H_ij = alpha_ij g_i
        let amat: C2 = [
            [Complex64::new(1.0, 0.0) - a[0][0] * gk[0], -a[0][1] * gk[0]],
            [-a[1][0] * gk[1], Complex64::new(1.0, 0.0) - a[1][1] * gk[1]],
        ];
        let det_a = amat[0][0] * amat[1][1] - amat[0][1] * amat[1][0];
        let nrm = det_a.norm_sqr();
        if nrm <= 0.0 || !nrm.is_finite() {
            return Err(Error::Numerical(format!("degenerate system at nu = {}", pg.nu(k))));
        }
        let inv_det = det_a.conj() / nrm;
        let bmat: C2 = [
            [amat[1][1] * inv_det, -amat[0][1] * inv_det],
            [-amat[1][0] * inv_det, amat[0][0] * inv_det],
        ];
        // f^H = B diag(m) B^H (Hermitian, real diagonal).
        let g00 = m[0] * bmat[0][0].norm_sqr() + m[1] * bmat[0][1].norm_sqr();
        let g11 = m[0] * bmat[1][0].norm_sqr() + m[1] * bmat[1][1].norm_sqr();
        let g01 = m[0] * bmat[0][0] * bmat[1][0].conj() + m[1] * bmat[0][1] * bmat[1][1].conj();
        let f00 = g00 + lambda0;
        let f11 = g11 + lambda0;
        let det_f = f00 * f11 - g01.norm_sqr();
        if !(det_f > 0.0) || !(f00 > 0.0) {
            return Err(Error::Numerical(format!(
                "spectral matrix not positive definite at nu = {}",
                pg.nu(k)
            )));
        }
        let p: C2 = [
            [Complex64::new(f11 / det_f, 0.0), -g01 / det_f],
            [-g01.conj() / det_f, Complex64::new(f00 / det_f, 0.0)],
        ];
        let ik: C2 = [
            [pg.values[k][0], pg.values[k][1]],
            [pg.values[k][2], pg.values[k][3]],
        ];
        let pik = mat2_mul(&p, &ik);
        acc += det_f.ln() + pik[0][0].re + pik[1][1].re;

        if want_grad {
            let kmat = mat2_mul(&pik, &p);
            let wmat: C2 = [
                [p[0][0] - kmat[0][0], p[0][1] - kmat[0][1]],
                [p[1][0] - kmat[1][0], p[1][1] - kmat[1][1]],
            ];
            let gmat: C2 = [
                [Complex64::new(g00, 0.0), g01],
                [g01.conj(), Complex64::new(g11, 0.0)],
            ];
            let m1 = mat2_mul(&gmat, &mat2_mul(&wmat, &bmat));
            // dA/d(alpha_ij) = -g_i E_ij  =>  tr(W df) += 2 Re(g_i M1[j][i])
            for i in 0..2 {
                for j in 0..2 {
                    ca[i][j] += 2.0 * (gk[i] * m1[j][i]).re;
                }
            }
            // dA/d(beta_i) = -(dg_i/dbeta_i) sum_j alpha_ij E_ij
            let dgk = [
                Complex64::new(0.0, w) / (Complex64::new(b1, w) * Complex64::new(b1, w)),
                Complex64::new(0.0, w) / (Complex64::new(b2, w) * Complex64::new(b2, w)),
            ];
            for i in 0..2 {
                cb[i] += 2.0 * (dgk[i] * (a[i][0] * m1[0][i] + a[i][1] * m1[1][i])).re;
            }
            // diag of B^H W B for the mean part
            for l in 0..2 {
                let col = [bmat[0][l], bmat[1][l]];
                let v = [
                    wmat[0][0] * col[0] + wmat[0][1] * col[1],
                    wmat[1][0] * col[0] + wmat[1][1] * col[1],
                ];
                s2[l] += (col[0].conj() * v[0] + col[1].conj() * v[1]).re;
            }
            cl += wmat[0][0].re + wmat[1][1].re;
        }
    }
    if let Some(g) = grad {
        let scale = -1.0 / pg.t;
        // mean part: dm/dmu_j = R e_j, dm/dalpha_ij = R e_i m_j
        let gmu = [
            (s2[0] * r[0][0] + s2[1] * r[1][0]) * scale,
            (s2[0] * r[0][1] + s2[1] * r[1][1]) * scale,
        ];
        let mut galpha = [[0.0_f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mean_part = m[j] * (s2[0] * r[0][i] + s2[1] * r[1][i]);
                galpha[i][j] = (ca[i][j] + mean_part) * scale;
            }
        }
        *g = [
            gmu[0],
            gmu[1],
            galpha[0][0],
            galpha[0][1],
            galpha[1][0],
            galpha[1][1],
            cb[0] * scale,
            cb[1] * scale,
            cl * scale,
        ];
    }
    Ok(-acc / pg.t)
}

/// Full-layout analytic gradient of the log-likelihood (d <= 2), in the
/// order mu.., alpha row-major.., beta.., lambda0. Exposed for testing
/// against finite differences.
pub fn loglik_gradient(theta: &NoisyHawkesParams, pg: &Periodogram) -> Result<(f64, Vec<f64>)> {
    match theta.dim() {
        1 => {
            let mut g = [0.0; 4];
            let l = loglik_uni(theta, pg, Some(&mut g))?;
            Ok((l, g.to_vec()))
        }
        2 => {
            let mut g = [0.0; 9];
            let l = loglik_biv(theta, pg, Some(&mut g))?;
            Ok((l, g.to_vec()))
        }
        d => Err(Error::InvalidInput(format!(
            "analytic gradients cover d <= 2, got d = {d}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Stationarity penalty
// ---------------------------------------------------------------------------

/// Quadratic penalty pushing `rho(alpha)` back under `RHO_BAR`; `Err` when
/// `rho >= 1` (the model itself is invalid there). Returns the value and
/// its gradient with respect to the alpha entries.
fn stationarity_penalty(alpha: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    let d = alpha.len();
    let rho = spectral_radius(alpha)?;
    if rho >= 1.0 {
        return Err(Error::Numerical(format!("spectral radius {rho} >= 1")));
    }
    let mut grad = vec![vec![0.0; d]; d];
    if rho <= RHO_BAR {
        return Ok((0.0, grad));
    }
    let excess = rho - RHO_BAR;
    let scale = 2.0 * RHO_PENALTY_WEIGHT * excess;
    match d {
        1 => grad[0][0] = scale * alpha[0][0].signum(),
        2 => {
            let (a, b, c, e) = (alpha[0][0], alpha[0][1], alpha[1][0], alpha[1][1]);
            let root = ((a - e) * (a - e) + 4.0 * b * c).sqrt().max(1e-12);
            grad[0][0] = scale * (0.5 + (a - e) / (2.0 * root));
            grad[1][1] = scale * (0.5 - (a - e) / (2.0 * root));
            grad[0][1] = scale * (c / root);
            grad[1][0] = scale * (b / root);
        }
        _ => {
            // Central differences; only runs in the rare penalized sliver.
            let mut work = alpha.to_vec();
            let h = 1e-7;
            for i in 0..d {
                for j in 0..d {
                    work[i][j] = alpha[i][j] + h;
                    let up = spectral_radius(&work)?;
                    work[i][j] = alpha[i][j] - h;
                    let down = spectral_radius(&work)?;
                    work[i][j] = alpha[i][j];
                    grad[i][j] = scale * (up - down) / (2.0 * h);
                }
            }
        }
    }
    Ok((RHO_PENALTY_WEIGHT * excess * excess, grad))
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Central-difference gradient of `eval` over the free coordinates,
/// falling back to one-sided differences where a probe fails.
fn fd_gradient<F: Fn(&[f64]) -> Result<f64>>(eval: &F, x: &[f64], f0: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = eval(&probe).ok().filter(|v| v.is_finite());
        probe[i] = x[i] - h;
        let down = eval(&probe).ok().filter(|v| v.is_finite());
        probe[i] = x[i];
        g[i] = match (up, down) {
            (Some(u), Some(d)) => (u - d) / (2.0 * h),
            (Some(u), None) => (u - f0) / h,
            (None, Some(d)) => (f0 - d) / h,
            (None, None) => 0.0,
        };
    }
    g
}

/// Log-uniform start inside the box; coordinates whose lower bound is zero
/// sample from `max(lo, 1e-3)` instead (a log-uniform law needs a positive
/// floor). Rejected and redrawn while the alpha part is far from
/// stationary.
fn sample_start(
    spec: &ModelSpec,
    bounds: &Bounds,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> Vec<f64> {
    use rand::Rng;
    for _ in 0..64 {
        let x: Vec<f64> = (0..bounds.len())
            .map(|i| {
                let lo = bounds.lo[i].max(1e-3);
                let hi = bounds.hi[i].max(lo * (1.0 + 1e-9));
                let u: f64 = rng.random();
                (lo.ln() + u * (hi.ln() - lo.ln())).exp()
            })
            .collect();
        if let Ok(theta) = spec.unpack(&x) {
            if spectral_radius(&theta.alpha).map(|r| r <= 0.9).unwrap_or(false) {
                return x;
            }
        }
    }
    // Give up on the stationarity guard; the objective will reject it.
    (0..bounds.len())
        .map(|i| 0.5 * (bounds.lo[i] + bounds.hi[i]))
        .collect()
}

/// Maximizes the Whittle likelihood of `spec` on a precomputed
/// periodogram.
pub fn fit_periodogram(spec: &ModelSpec, pg: &Periodogram, cfg: &FitConfig) -> Result<FitResult> {
    spec.validate()?;
    if spec.dim() != pg.dim {
        return Err(Error::InvalidInput(format!(
            "model dimension {} does not match periodogram dimension {}",
            spec.dim(),
            pg.dim
        )));
    }
    let coords = spec.free_coords();
    let bounds = spec.bounds();
    let d = spec.dim();
    let analytic = cfg.gradient == GradientMode::Analytic && d <= 2;

    let plain_eval = |x: &[f64]| -> Result<f64> {
        let theta = spec.unpack(x)?;
        let (pen, _) = stationarity_penalty(&theta.alpha)?;
        Ok(-eval_loglik(&theta, pg)? + pen)
    };
    let obj = |x: &[f64]| -> (f64, Vec<f64>) {
        let bad = (f64::INFINITY, vec![0.0; x.len()]);
        let Ok(theta) = spec.unpack(x) else { return bad };
        let Ok((pen, pen_grad)) = stationarity_penalty(&theta.alpha) else {
            return bad;
        };
        if analytic {
            let Ok((l, full)) = loglik_gradient(&theta, pg) else { return bad };
            // Project the full-layout gradient onto the free coordinates.
            let g: Vec<f64> = coords
                .iter()
                .map(|(coord, _)| match coord {
                    FreeCoord::Mu(i) => -full[*i],
                    FreeCoord::Alpha(i, j) => -full[d + i * d + j] + pen_grad[*i][*j],
                    FreeCoord::Beta(i) => -full[d + d * d + i],
                    FreeCoord::Lambda0 => -full[d + d * d + d],
                })
                .collect();
            (-l + pen, g)
        } else {
            let Ok(l) = eval_loglik(&theta, pg) else { return bad };
            let f = -l + pen;
            let g = fd_gradient(&plain_eval, x, f);
            (f, g)
        }
    };

    let opts = OptimOptions {
        memory: 10,
        max_iters: cfg.max_iters,
        grad_tol: cfg.grad_tol,
        f_rel_tol: cfg.f_rel_tol,
    };
    let mut traces = Vec::with_capacity(cfg.restarts.max(1));
    let restarts = cfg.restarts.max(1);
    for r in 0..restarts {
        let mut rng = substream(cfg.seed, &[r as u64]);
        let x0 = sample_start(spec, &bounds, &mut rng);
        let out = lbfgsb(obj, &x0, &bounds, &opts);
        let theta = spec.unpack(&out.x)?;
        let loglik = eval_loglik(&theta, pg).unwrap_or(f64::NEG_INFINITY);
        traces.push(RestartTrace {
            restart: r,
            init: spec.unpack(&x0)?,
            theta,
            loglik,
            converged: out.converged && loglik.is_finite(),
            iterations: out.iterations,
            evaluations: out.evaluations,
            message: out.message,
        });
    }
    let best = traces
        .iter()
        .filter(|t| t.converged)
        .max_by(|a, b| a.loglik.total_cmp(&b.loglik))
        .map(|t| t.restart);
    match best {
        Some(idx) => Ok(FitResult {
            theta: traces[idx].theta.clone(),
            loglik: traces[idx].loglik,
            m_used: pg.m,
            n_events: None,
            chosen_restart: idx,
            restarts: traces,
        }),
        None => Err(Error::FitFailed { restarts, traces }),
    }
}

/// Computes the periodogram under `cfg.m_policy` and maximizes the Whittle
/// likelihood of `spec` on it.
pub fn fit(spec: &ModelSpec, events: &EventSeries, cfg: &FitConfig) -> Result<FitResult> {
    if spec.dim() != events.dim() {
        return Err(Error::InvalidInput(format!(
            "model dimension {} does not match series dimension {}",
            spec.dim(),
            events.dim()
        )));
    }
    let m = frequency_count(cfg.m_policy, events)?;
    let pg = periodogram(events, m, PeriodogramMethod::Auto)?;
    let mut result = fit_periodogram(spec, &pg, cfg)?;
    result.n_events = Some(events.total_count());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_count_policies() {
        let ev = EventSeries::new(
            (0.0, 50.0),
            vec![(1..=100).map(|i| i as f64 * 0.45).collect()],
        )
        .unwrap();
        assert_eq!(frequency_count(FrequencyPolicy::N, &ev).unwrap(), 100);
        // ceil(100 ln 100) = ceil(460.517) = 461
        assert_eq!(frequency_count(FrequencyPolicy::NLogN, &ev).unwrap(), 461);
        assert_eq!(frequency_count(FrequencyPolicy::Explicit(7), &ev).unwrap(), 7);
        assert!(frequency_count(FrequencyPolicy::Explicit(0), &ev).is_err());
        let empty = EventSeries::new((0.0, 1.0), vec![vec![]]).unwrap();
        assert!(frequency_count(FrequencyPolicy::N, &empty).is_err());
    }

    #[test]
    fn policy_parsing_and_serde() {
        assert_eq!("n".parse::<FrequencyPolicy>().unwrap(), FrequencyPolicy::N);
        assert_eq!("NLogN".parse::<FrequencyPolicy>().unwrap(), FrequencyPolicy::NLogN);
        assert_eq!(
            "1234".parse::<FrequencyPolicy>().unwrap(),
            FrequencyPolicy::Explicit(1234)
        );
        assert!("banana".parse::<FrequencyPolicy>().is_err());
        let json = serde_json::to_string(&FrequencyPolicy::NLogN).unwrap();
        assert_eq!(json, "\"nlogn\"");
        let back: FrequencyPolicy = serde_json::from_str("512").unwrap();
        assert_eq!(back, FrequencyPolicy::Explicit(512));
    }

    #[test]
    fn model_spec_packing_round_trip() {
        let spec = ModelSpec::q_beta(1.0);
        assert_eq!(spec.n_free(), 3); // mu, alpha, lambda0
        let theta = NoisyHawkesParams::univariate(1.2, 0.4, 1.0, 0.8).unwrap();
        let x = spec.pack(&theta).unwrap();
        assert_eq!(x, vec![1.2, 0.4, 0.8]);
        let back = spec.unpack(&x).unwrap();
        assert_eq!(back, theta);
        // pinned value is bit-exact
        assert_eq!(back.beta[0].to_bits(), 1.0_f64.to_bits());
    }

    #[test]
    fn model_spec_validation_catches_dead_rows() {
        // Row 2 all zero without a pinned beta_2 must fail ...
        let mut bad = ModelSpec::bivariate_full();
        bad.alpha[1] = vec![ParamStatus::Zero, ParamStatus::Zero];
        assert!(bad.validate().is_err());
        // ... and the support constructor pins it automatically.
        let spec = ModelSpec::bivariate_with_support([[true, false], [false, false]]);
        assert!(spec.validate().is_ok());
        assert_eq!(spec.beta[1], ParamStatus::Fixed(1.0));
        assert_eq!(spec.n_free(), 5); // mu1, mu2, a11, beta1, lambda0
    }

    #[test]
    fn support_mask_zeroes_are_exact() {
        let spec = ModelSpec::bivariate_with_support([[false, false], [true, false]]);
        let x = vec![1.0, 1.0, 0.6, 1.3, 0.5]; // mu1 mu2 a21 beta2 lambda0
        let theta = spec.unpack(&x).unwrap();
        assert_eq!(theta.alpha[0][0].to_bits(), 0.0_f64.to_bits());
        assert_eq!(theta.alpha[0][1].to_bits(), 0.0_f64.to_bits());
        assert_eq!(theta.alpha[1][1].to_bits(), 0.0_f64.to_bits());
        assert_eq!(theta.alpha[1][0], 0.6);
        assert_eq!(theta.beta[0], 1.0); // pinned by the all-zero first row
    }
}
