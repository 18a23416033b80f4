//! Executable counterparts of the identifiability theory.
//!
//! Two kinds of oracle live here. For the non-identifiable models there
//! are closed-form maps producing a *different* parameter tuple with the
//! *same* spectral density: [`uni_equivalent`] for the univariate full
//! model, [`biv_equivalent_diag`] for diagonal interaction matrices and
//! [`biv_equivalent_row`] for a single nonzero row. Each family is indexed
//! by a noise shift `tau` ranging over an open interval ([`TauRange`]);
//! `tau = 0` is the identity.
//!
//! For the identifiable models there is no closed form to exploit, so
//! [`injectivity_probe`] samples admissible parameter pairs and verifies
//! that distinct parameters keep their spectral densities apart on a
//! fixed frequency grid.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::NoisyHawkesParams;
use crate::rng::substream;
use crate::spectral::{spectral_density_biv, spectral_density_uni};
use crate::whittle::{ALPHA_BOUNDS, BETA_BOUNDS, LAMBDA0_BOUNDS, MU_BOUNDS};

/// Frequency grid the probes evaluate densities on: log-spaced between
/// 1/T_ref (T_ref = 1000) and 64, covering both asymptotic regimes the
/// equivalence systems are extracted from.
pub const PROBE_GRID_SIZE: usize = 512;
const PROBE_NU_MIN: f64 = 1e-3;
const PROBE_NU_MAX: f64 = 64.0;

/// Open interval of admissible noise shifts. Shifting by `tau` moves
/// `lambda0` to `lambda0 + tau`; zero is always inside and maps a tuple
/// to itself, hence `excludes_zero` when the point is to produce a
/// *distinct* tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauRange {
    pub lo: f64,
    pub hi: f64,
    pub excludes_zero: bool,
}

impl TauRange {
    pub fn contains(&self, tau: f64) -> bool {
        self.lo < tau && tau < self.hi
    }

    /// `n` shifts spread over the interval, skipping the identity at 0;
    /// handy for sweeping witness families.
    pub fn interior_grid(&self, n: usize) -> Vec<f64> {
        let width = self.hi - self.lo;
        (1..=n)
            .map(|k| self.lo + width * k as f64 / (n + 1) as f64)
            .filter(|tau| tau.abs() > 1e-9 * width)
            .collect()
    }
}

fn require_dim(theta: &NoisyHawkesParams, d: usize) -> Result<()> {
    if theta.dim() != d {
        return Err(Error::InvalidInput(format!(
            "expected a {d}-dimensional parameter, got {}",
            theta.dim()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Univariate family
// ---------------------------------------------------------------------------

/// Shift interval for the univariate full model: `(-lambda0, mu/(1-alpha))`.
pub fn uni_tau_range(theta: &NoisyHawkesParams) -> Result<TauRange> {
    require_dim(theta, 1)?;
    theta.validate()?;
    Ok(TauRange {
        lo: -theta.lambda0,
        hi: theta.mu[0] / (1.0 - theta.alpha[0][0]),
        excludes_zero: true,
    })
}

/// The tuple at shift `tau` in the univariate equivalence family: same
/// spectral density, noise rate `lambda0 + tau`.
pub fn uni_equivalent(theta: &NoisyHawkesParams, tau: f64) -> Result<NoisyHawkesParams> {
    let range = uni_tau_range(theta)?;
    if !range.contains(tau) {
        return Err(Error::InvalidInput(format!(
            "tau = {tau} outside the admissible interval ({}, {})",
            range.lo, range.hi
        )));
    }
    let (mu, alpha, beta, lambda0) =
        (theta.mu[0], theta.alpha[0][0], theta.beta[0], theta.lambda0);
    let (mu1, alpha1, beta1) = uni_component_map(mu, alpha, beta, tau);
    NoisyHawkesParams::univariate(mu1, alpha1, beta1, lambda0 + tau)
}

/// Core of the univariate map, shared with the bivariate diagonal case:
/// `kappa = m beta^2 alpha (2 - alpha)` with `m = mu/(1-alpha)`, then
/// `s = sqrt(beta^2 (1-alpha)^2 + kappa/(m - tau))` rescales everything.
fn uni_component_map(mu: f64, alpha: f64, beta: f64, tau: f64) -> (f64, f64, f64) {
    let m = mu / (1.0 - alpha);
    let kappa = m * beta * beta * alpha * (2.0 - alpha);
    let s = (beta * beta * (1.0 - alpha) * (1.0 - alpha) + kappa / (m - tau)).sqrt();
    let mu1 = beta * (1.0 - alpha) * (m - tau) / s;
    let alpha1 = 1.0 - beta * (1.0 - alpha) / s;
    (mu1, alpha1, s)
}

// ---------------------------------------------------------------------------
// Bivariate diagonal family
// ---------------------------------------------------------------------------

fn require_diagonal(theta: &NoisyHawkesParams) -> Result<()> {
    require_dim(theta, 2)?;
    if theta.alpha[0][1] != 0.0 || theta.alpha[1][0] != 0.0 {
        return Err(Error::InvalidInput(
            "the diagonal family needs zero cross-interactions".into(),
        ));
    }
    Ok(())
}

/// Shift interval for diagonal interaction matrices:
/// `(-lambda0, min_i mu_i/(1 - alpha_ii))`.
pub fn biv_tau_range_diag(theta: &NoisyHawkesParams) -> Result<TauRange> {
    require_diagonal(theta)?;
    theta.validate()?;
    let m1 = theta.mu[0] / (1.0 - theta.alpha[0][0]);
    let m2 = theta.mu[1] / (1.0 - theta.alpha[1][1]);
    Ok(TauRange { lo: -theta.lambda0, hi: m1.min(m2), excludes_zero: true })
}

/// The diagonal-family tuple at shift `tau`: each component moves by the
/// univariate map (or, when its self-interaction vanishes, by the plain
/// Poisson shift `mu_i - tau`).
pub fn biv_equivalent_diag(theta: &NoisyHawkesParams, tau: f64) -> Result<NoisyHawkesParams> {
    let range = biv_tau_range_diag(theta)?;
    if !range.contains(tau) {
        return Err(Error::InvalidInput(format!(
            "tau = {tau} outside the admissible interval ({}, {})",
            range.lo, range.hi
        )));
    }
    let mut mu = [0.0; 2];
    let mut alpha = [0.0; 2];
    let mut beta = [0.0; 2];
    for i in 0..2 {
        let (m_i, a_i, b_i) = (theta.mu[i], theta.alpha[i][i], theta.beta[i]);
        if a_i == 0.0 {
            mu[i] = m_i - tau;
            alpha[i] = 0.0;
            beta[i] = b_i;
        } else {
            let (m1, a1, b1) = uni_component_map(m_i, a_i, b_i, tau);
            mu[i] = m1;
            alpha[i] = a1;
            beta[i] = b1;
        }
    }
    NoisyHawkesParams::new(
        vec![mu[0], mu[1]],
        vec![vec![alpha[0], 0.0], vec![0.0, alpha[1]]],
        vec![beta[0], beta[1]],
        theta.lambda0 + tau,
    )
}

// ---------------------------------------------------------------------------
// Bivariate single-row family
// ---------------------------------------------------------------------------

/// The five constants that determine the spectral matrix when only the
/// first interaction row is nonzero:
///
/// ```text
/// f11 = E/(C^2 + 4 pi^2 nu^2) + D,   f12 = B/(C + 2 pi i nu),   f22 = A.
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

fn require_row(theta: &NoisyHawkesParams) -> Result<()> {
    require_dim(theta, 2)?;
    if theta.alpha[1][0] != 0.0 || theta.alpha[1][1] != 0.0 {
        return Err(Error::InvalidInput(
            "the row family needs a zero second interaction row".into(),
        ));
    }
    let a11 = theta.alpha[0][0];
    if !(a11 > 0.0 && a11 < 1.0) || theta.alpha[0][1] <= 0.0 {
        return Err(Error::InvalidInput(
            "the row family needs alpha_11 in (0,1) and alpha_12 > 0".into(),
        ));
    }
    Ok(())
}

/// The invariants (A, B, C, D, E) of the single-row spectral matrix.
pub fn row_constants(theta: &NoisyHawkesParams) -> Result<RowConstants> {
    require_row(theta)?;
    let (mu1, mu2) = (theta.mu[0], theta.mu[1]);
    let (a11, a12) = (theta.alpha[0][0], theta.alpha[0][1]);
    let b1 = theta.beta[0];
    let lambda0 = theta.lambda0;
    let m1 = (mu1 + mu2 * a12) / (1.0 - a11);
    Ok(RowConstants {
        a: mu2 + lambda0,
        b: mu2 * b1 * a12,
        c: b1 * (1.0 - a11),
        d: m1 + lambda0,
        e: m1 * b1 * b1 * a11 * (2.0 - a11) + mu2 * b1 * b1 * a12 * a12,
    })
}

/// Shift interval for the single-row family: a three-way minimum keeps
/// `mu_1'`, `mu_2'` and `kappa_tau` positive.
pub fn biv_tau_range_row(theta: &NoisyHawkesParams) -> Result<TauRange> {
    require_row(theta)?;
    theta.validate()?;
    let (mu1, mu2) = (theta.mu[0], theta.mu[1]);
    let (a11, a12) = (theta.alpha[0][0], theta.alpha[0][1]);
    let t1 = mu1 / (1.0 - a11);
    let t2 = mu2;
    let growth = (mu1 + mu2 * a12) * a11 * (2.0 - a11);
    let t3 = growth * mu2 / (growth + mu2 * (1.0 - a11) * a12 * a12);
    Ok(TauRange {
        lo: -theta.lambda0,
        hi: t1.min(t2).min(t3),
        excludes_zero: true,
    })
}

/// The single-row-family tuple at shift `tau`. The second row stays zero
/// and `beta_2` keeps its pinned value.
pub fn biv_equivalent_row(theta: &NoisyHawkesParams, tau: f64) -> Result<NoisyHawkesParams> {
    let range = biv_tau_range_row(theta)?;
    if !range.contains(tau) {
        return Err(Error::InvalidInput(format!(
            "tau = {tau} outside the admissible interval ({}, {})",
            range.lo, range.hi
        )));
    }
    let (mu1, mu2) = (theta.mu[0], theta.mu[1]);
    let (a11, a12) = (theta.alpha[0][0], theta.alpha[0][1]);
    let b1 = theta.beta[0];
    let one_m = 1.0 - a11;
    let kappa = ((mu1 + mu2 * a12) * a11 * (2.0 - a11) * (mu2 - tau)
        - tau * mu2 * a12 * a12 * one_m)
        / ((mu2 - tau) * (mu1 + mu2 * a12 - tau * one_m));
    if kappa <= 0.0 {
        return Err(Error::Numerical(format!(
            "kappa = {kappa} not positive at tau = {tau}"
        )));
    }
    let s = (one_m * one_m + kappa).sqrt();
    NoisyHawkesParams::new(
        vec![(mu1 - tau * one_m) / s, mu2 - tau],
        vec![
            vec![1.0 - one_m / s, mu2 * a12 / ((mu2 - tau) * s)],
            vec![0.0, 0.0],
        ],
        vec![b1 * s, theta.beta[1]],
        theta.lambda0 + tau,
    )
}

// ---------------------------------------------------------------------------
// Spectral discrepancy and injectivity probes
// ---------------------------------------------------------------------------

/// Log-spaced probe frequencies.
pub fn probe_grid() -> Vec<f64> {
    let (lo, hi) = (PROBE_NU_MIN.ln(), PROBE_NU_MAX.ln());
    (0..PROBE_GRID_SIZE)
        .map(|k| (lo + (hi - lo) * k as f64 / (PROBE_GRID_SIZE - 1) as f64).exp())
        .collect()
}

/// Max over the grid of the entrywise relative deviation between the two
/// spectral density matrices (d = 1 or 2).
pub fn spectral_discrepancy(
    a: &NoisyHawkesParams,
    b: &NoisyHawkesParams,
    grid: &[f64],
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let mut worst = 0.0_f64;
    match a.dim() {
        1 => {
            for &nu in grid {
                let fa = spectral_density_uni(a, nu)?;
                let fb = spectral_density_uni(b, nu)?;
                worst = worst.max((fa - fb).abs() / (1.0 + fa.abs() + fb.abs()));
            }
        }
        2 => {
            for &nu in grid {
                let fa = spectral_density_biv(a, nu)?;
                let fb = spectral_density_biv(b, nu)?;
                for i in 0..2 {
                    for j in 0..2 {
                        let (va, vb) = (fa.get(i, j), fb.get(i, j));
                        let dev = (va - vb).norm() / (1.0 + va.norm() + vb.norm());
                        worst = worst.max(dev);
                    }
                }
            }
        }
        d => {
            return Err(Error::InvalidInput(format!(
                "discrepancy probes cover d <= 2, got d = {d}"
            )))
        }
    }
    Ok(worst)
}

/// Euclidean distance between parameter tuples after dividing each
/// coordinate by its default box width, so rates and weights mix sensibly.
pub fn normalized_distance(a: &NoisyHawkesParams, b: &NoisyHawkesParams) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let wmu = MU_BOUNDS.1 - MU_BOUNDS.0;
    let walpha = ALPHA_BOUNDS.1 - ALPHA_BOUNDS.0;
    let wbeta = BETA_BOUNDS.1 - BETA_BOUNDS.0;
    let wl = LAMBDA0_BOUNDS.1 - LAMBDA0_BOUNDS.0;
    let mut acc = 0.0;
    let d = a.dim();
    for i in 0..d {
        acc += ((a.mu[i] - b.mu[i]) / wmu).powi(2);
        acc += ((a.beta[i] - b.beta[i]) / wbeta).powi(2);
        for j in 0..d {
            acc += ((a.alpha[i][j] - b.alpha[i][j]) / walpha).powi(2);
        }
    }
    acc += ((a.lambda0 - b.lambda0) / wl).powi(2);
    Ok(acc.sqrt())
}

/// Families whose injectivity the probe can exercise: the univariate
/// submodels with one fixed parameter, the four identifiable bivariate
/// interaction shapes, and their union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeModel {
    /// Univariate, baseline known.
    QMu,
    /// Univariate, interaction weight known.
    QAlpha,
    /// Univariate, decay rate known.
    QBeta,
    /// Univariate, noise rate known.
    QLambda0,
    /// Bivariate, second column zero, `alpha_21 > 0`.
    Lambda1,
    /// Bivariate, first column zero, `alpha_12 > 0`.
    Lambda2,
    /// Bivariate, `alpha_12 = 0`, first column positive.
    Lambda3,
    /// Bivariate, `alpha_21 = 0`, second column positive.
    Lambda4,
    /// Union of the four bivariate shapes.
    LambdaUnion,
}

impl ProbeModel {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeModel::QMu => "q_mu",
            ProbeModel::QAlpha => "q_alpha",
            ProbeModel::QBeta => "q_beta",
            ProbeModel::QLambda0 => "q_lambda0",
            ProbeModel::Lambda1 => "lambda_1",
            ProbeModel::Lambda2 => "lambda_2",
            ProbeModel::Lambda3 => "lambda_3",
            ProbeModel::Lambda4 => "lambda_4",
            ProbeModel::LambdaUnion => "lambda_union",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "q_mu" => Ok(ProbeModel::QMu),
            "q_alpha" => Ok(ProbeModel::QAlpha),
            "q_beta" => Ok(ProbeModel::QBeta),
            "q_lambda0" => Ok(ProbeModel::QLambda0),
            "lambda_1" => Ok(ProbeModel::Lambda1),
            "lambda_2" => Ok(ProbeModel::Lambda2),
            "lambda_3" => Ok(ProbeModel::Lambda3),
            "lambda_4" => Ok(ProbeModel::Lambda4),
            "lambda_union" => Ok(ProbeModel::LambdaUnion),
            other => Err(Error::InvalidConfig(format!("unknown probe model '{other}'"))),
        }
    }

    fn tag(&self) -> u64 {
        match self {
            ProbeModel::QMu => 0,
            ProbeModel::QAlpha => 1,
            ProbeModel::QBeta => 2,
            ProbeModel::QLambda0 => 3,
            ProbeModel::Lambda1 => 4,
            ProbeModel::Lambda2 => 5,
            ProbeModel::Lambda3 => 6,
            ProbeModel::Lambda4 => 7,
            ProbeModel::LambdaUnion => 8,
        }
    }
}

/// Sampling windows for the probes; narrower than the optimizer boxes so
/// every draw is comfortably admissible.
fn sample_rate(rng: &mut rand_chacha::ChaCha12Rng) -> f64 {
    log_uniform(rng, 0.2, 5.0)
}

fn sample_weight(rng: &mut rand_chacha::ChaCha12Rng) -> f64 {
    log_uniform(rng, 0.05, 0.9)
}

fn log_uniform(rng: &mut rand_chacha::ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// One admissible tuple for a bivariate interaction shape (1..=4).
fn sample_bivariate_shape(shape: u8, rng: &mut rand_chacha::ChaCha12Rng) -> NoisyHawkesParams {
    loop {
        let mut alpha = vec![vec![0.0; 2]; 2];
        match shape {
            1 => {
                alpha[0][0] = sample_weight(rng);
                alpha[1][0] = sample_weight(rng);
            }
            2 => {
                alpha[0][1] = sample_weight(rng);
                alpha[1][1] = sample_weight(rng);
            }
            3 => {
                alpha[0][0] = sample_weight(rng);
                alpha[1][0] = sample_weight(rng);
                alpha[1][1] = sample_weight(rng);
            }
            _ => {
                alpha[0][0] = sample_weight(rng);
                alpha[0][1] = sample_weight(rng);
                alpha[1][1] = sample_weight(rng);
            }
        }
        // The dead row keeps the conventional decay rate 1.
        let beta = match shape {
            2 => vec![1.0, sample_rate(rng)],
            _ => vec![sample_rate(rng), sample_rate(rng)],
        };
        let params = NoisyHawkesParams::new(
            vec![sample_rate(rng), sample_rate(rng)],
            alpha,
            beta,
            log_uniform(rng, 0.05, 5.0),
        );
        if let Ok(p) = params {
            return p;
        }
    }
}

/// Outcome of one probed pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbePair {
    pub distance: f64,
    pub discrepancy: f64,
}

/// Summary of an injectivity probe run.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub model: String,
    pub n_pairs: usize,
    /// Pairs at normalized distance below 1e-2, excluded from the minimum.
    pub n_too_close: usize,
    /// Smallest spectral discrepancy among well-separated pairs.
    pub min_discrepancy: f64,
    pub max_discrepancy: f64,
    /// The well-separated pair achieving `min_discrepancy`.
    pub worst: Option<ProbePair>,
}

/// Distance below which a pair does not count as a separation witness.
pub const PROBE_DISTANCE_FLOOR: f64 = 1e-2;

/// Samples `n_pairs` pairs of distinct admissible tuples in `model` and
/// measures how far apart their spectral densities stay. For the
/// identifiable families every well-separated pair must come out with a
/// strictly positive discrepancy.
pub fn injectivity_probe(model: ProbeModel, n_pairs: usize, seed: u64) -> Result<ProbeReport> {
    if n_pairs == 0 {
        return Err(Error::InvalidInput("need at least one pair".into()));
    }
    let grid = probe_grid();
    let mut report = ProbeReport {
        model: model.name().into(),
        n_pairs,
        n_too_close: 0,
        min_discrepancy: f64::INFINITY,
        max_discrepancy: 0.0,
        worst: None,
    };
    for k in 0..n_pairs {
        let mut rng = substream(seed, &[model.tag(), k as u64]);
        let (a, b) = match model {
            ProbeModel::QMu => {
                // The pair shares the known coordinate; the free ones differ.
                let mu = sample_rate(&mut rng);
                let draw = |r: &mut rand_chacha::ChaCha12Rng| {
                    NoisyHawkesParams::univariate(
                        mu,
                        sample_weight(r),
                        sample_rate(r),
                        log_uniform(r, 0.05, 5.0),
                    )
                    .expect("probe draw admissible")
                };
                (draw(&mut rng), draw(&mut rng))
            }
            ProbeModel::QAlpha => {
                let alpha = sample_weight(&mut rng);
                let draw = |r: &mut rand_chacha::ChaCha12Rng| {
                    NoisyHawkesParams::univariate(
                        sample_rate(r),
                        alpha,
                        sample_rate(r),
                        log_uniform(r, 0.05, 5.0),
                    )
                    .expect("probe draw admissible")
                };
                (draw(&mut rng), draw(&mut rng))
            }
            ProbeModel::QBeta => {
                let beta = sample_rate(&mut rng);
                let draw = |r: &mut rand_chacha::ChaCha12Rng| {
                    NoisyHawkesParams::univariate(
                        sample_rate(r),
                        sample_weight(r),
                        beta,
                        log_uniform(r, 0.05, 5.0),
                    )
                    .expect("probe draw admissible")
                };
                (draw(&mut rng), draw(&mut rng))
            }
            ProbeModel::QLambda0 => {
                let lambda0 = log_uniform(&mut rng, 0.05, 5.0);
                let draw = |r: &mut rand_chacha::ChaCha12Rng| {
                    NoisyHawkesParams::univariate(
                        sample_rate(r),
                        sample_weight(r),
                        sample_rate(r),
                        lambda0,
                    )
                    .expect("probe draw admissible")
                };
                (draw(&mut rng), draw(&mut rng))
            }
            ProbeModel::Lambda1 => (
                sample_bivariate_shape(1, &mut rng),
                sample_bivariate_shape(1, &mut rng),
            ),
            ProbeModel::Lambda2 => (
                sample_bivariate_shape(2, &mut rng),
                sample_bivariate_shape(2, &mut rng),
            ),
            ProbeModel::Lambda3 => (
                sample_bivariate_shape(3, &mut rng),
                sample_bivariate_shape(3, &mut rng),
            ),
            ProbeModel::Lambda4 => (
                sample_bivariate_shape(4, &mut rng),
                sample_bivariate_shape(4, &mut rng),
            ),
            ProbeModel::LambdaUnion => {
                let sa = 1 + (rng.random_range(0..4u8));
                let sb = 1 + (rng.random_range(0..4u8));
                (
                    sample_bivariate_shape(sa, &mut rng),
                    sample_bivariate_shape(sb, &mut rng),
                )
            }
        };
        let distance = normalized_distance(&a, &b)?;
        let discrepancy = spectral_discrepancy(&a, &b, &grid)?;
        report.max_discrepancy = report.max_discrepancy.max(discrepancy);
        if distance < PROBE_DISTANCE_FLOOR {
            report.n_too_close += 1;
            continue;
        }
        if discrepancy < report.min_discrepancy {
            report.min_discrepancy = discrepancy;
            report.worst = Some(ProbePair { distance, discrepancy });
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Support-pattern classification
// ---------------------------------------------------------------------------

/// What the bivariate theory says about a given interaction support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportClass {
    /// Covered by an identifiable situation (or their union).
    Identifiable,
    /// Covered by a non-identifiable situation.
    NonIdentifiable,
    /// Not settled either way.
    Unclassified,
}

/// Classifies a 2x2 support pattern against the known situations.
/// Diagonal supports (including empty) and single-row supports with a
/// positive self-entry are non-identifiable; supports with a
/// cross-interaction that avoid those shapes are identifiable; the
/// remaining patterns are open.
pub fn classify_bivariate_support(mask: &[Vec<bool>]) -> Result<SupportClass> {
    if mask.len() != 2 || mask.iter().any(|r| r.len() != 2) {
        return Err(Error::InvalidInput("classification needs a 2x2 mask".into()));
    }
    let (s11, s12, s21, s22) = (mask[0][0], mask[0][1], mask[1][0], mask[1][1]);
    let diagonal = !s12 && !s21;
    let row1_only = (s11 && s12) && !s21 && !s22;
    let row2_only = !s11 && !s12 && (s21 && s22);
    if diagonal || row1_only || row2_only {
        return Ok(SupportClass::NonIdentifiable);
    }
    let lambda1 = !s12 && !s22 && s21;
    let lambda2 = !s11 && !s21 && s12;
    let lambda3 = s11 && s21 && !s12;
    let lambda4 = s22 && s12 && !s21;
    if lambda1 || lambda2 || lambda3 || lambda4 {
        return Ok(SupportClass::Identifiable);
    }
    Ok(SupportClass::Unclassified)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectral_density_exp_general;

    fn reference_uni() -> NoisyHawkesParams {
        NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6).unwrap()
    }

    #[test]
    fn uni_tau_range_hand_value() {
        let range = uni_tau_range(&reference_uni()).unwrap();
        assert_eq!(range.lo, -0.6);
        assert_eq!(range.hi, 2.0);
        assert!(range.excludes_zero);
        assert!(range.contains(0.3));
        assert!(!range.contains(2.0));
        assert!(!range.contains(-0.7));
    }

    #[test]
    fn uni_witness_matches_density_and_system() {
        let theta = reference_uni();
        let other = uni_equivalent(&theta, 0.3).unwrap();
        assert!(other.validate().is_ok());
        assert!((other.lambda0 - 0.9).abs() < 1e-15);
        assert!((other.alpha[0][0] - theta.alpha[0][0]).abs() > 1e-3);
        for &nu in &probe_grid()[..64] {
            let fa = spectral_density_uni(&theta, nu).unwrap();
            let fb = spectral_density_uni(&other, nu).unwrap();
            assert!(
                ((fa - fb) / fa).abs() <= 1e-10,
                "densities split at nu = {nu}: {fa} vs {fb}"
            );
        }
        // The three equalities characterizing spectral equality.
        let lhs = |p: &NoisyHawkesParams| {
            let (mu, a, b, l) = (p.mu[0], p.alpha[0][0], p.beta[0], p.lambda0);
            [
                mu / (1.0 - a) + l,
                mu * a * (2.0 - a) / (1.0 - a).powi(3),
                b * (1.0 - a),
            ]
        };
        let (sa, sb) = (lhs(&theta), lhs(&other));
        for k in 0..3 {
            assert!((sa[k] - sb[k]).abs() <= 1e-12, "identity {k} broken");
        }
    }

    #[test]
    fn uni_round_trip_recovers_theta() {
        let theta = reference_uni();
        for tau in [-0.4, 0.25, 1.2] {
            let there = uni_equivalent(&theta, tau).unwrap();
            let back = uni_equivalent(&there, -tau).unwrap();
            assert!((back.mu[0] - theta.mu[0]).abs() <= 1e-9);
            assert!((back.alpha[0][0] - theta.alpha[0][0]).abs() <= 1e-9);
            assert!((back.beta[0] - theta.beta[0]).abs() <= 1e-9);
            assert!((back.lambda0 - theta.lambda0).abs() <= 1e-12);
        }
    }

    #[test]
    fn diag_family_produces_equal_matrices() {
        let theta = NoisyHawkesParams::new(
            vec![1.0, 0.7],
            vec![vec![0.5, 0.0], vec![0.0, 0.3]],
            vec![1.0, 2.0],
            0.5,
        )
        .unwrap();
        let range = biv_tau_range_diag(&theta).unwrap();
        assert!((range.hi - 1.0).abs() < 1e-12); // min(2, 1) from the two components
        let other = biv_equivalent_diag(&theta, 0.4).unwrap();
        assert!(other.validate().is_ok());
        for &nu in &probe_grid()[..64] {
            let fa = spectral_density_biv(&theta, nu).unwrap();
            let fb = spectral_density_biv(&other, nu).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let dev = (fa.get(i, j) - fb.get(i, j)).norm();
                    assert!(dev <= 1e-10, "entry ({i},{j}) split at nu = {nu}");
                }
            }
        }
    }

    #[test]
    fn diag_family_pure_poisson_bookkeeping() {
        let theta = NoisyHawkesParams::new(
            vec![1.0, 1.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![1.0, 1.0],
            0.5,
        )
        .unwrap();
        let other = biv_equivalent_diag(&theta, 0.2).unwrap();
        assert_eq!(other.mu, vec![0.8, 0.8]);
        assert_eq!(other.lambda0, 0.7);
        assert_eq!(other.alpha, theta.alpha);
        assert!(biv_equivalent_diag(&theta, 1.0).is_err()); // boundary
    }

    #[test]
    fn row_family_preserves_constants_and_matrices() {
        // mu_2 deliberately differs from 1: several cancellations in the shift
        // formulas are exact at mu_2 = 1 and would hide a wrong kappa there.
        let theta = NoisyHawkesParams::new(
            vec![1.0, 0.7],
            vec![vec![0.5, 0.3], vec![0.0, 0.0]],
            vec![1.0, 1.0],
            0.5,
        )
        .unwrap();
        let range = biv_tau_range_row(&theta).unwrap();
        assert!(range.lo == -0.5 && range.hi > 0.0);
        for tau in [0.5 * range.hi, 0.6 * range.lo] {
            let other = biv_equivalent_row(&theta, tau).unwrap();
            assert!(other.validate().is_ok());
            assert_eq!(other.alpha[1], vec![0.0, 0.0]);
            let (ca, cb) = (row_constants(&theta).unwrap(), row_constants(&other).unwrap());
            assert!((ca.a - cb.a).abs() <= 1e-10);
            assert!((ca.b - cb.b).abs() <= 1e-10);
            assert!((ca.c - cb.c).abs() <= 1e-10);
            assert!((ca.d - cb.d).abs() <= 1e-10);
            assert!((ca.e - cb.e).abs() <= 1e-10);
            for &nu in &probe_grid()[..64] {
                let fa = spectral_density_biv(&theta, nu).unwrap();
                let fb = spectral_density_biv(&other, nu).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        let dev = (fa.get(i, j) - fb.get(i, j)).norm();
                        assert!(dev <= 1e-9, "entry ({i},{j}) split at nu = {nu}");
                    }
                }
            }
        }
        // Sanity: the closed forms above agree with the matrix-form density.
        let fm = spectral_density_exp_general(&theta, 0.37).unwrap();
        let fc = spectral_density_biv(&theta, 0.37).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((fm.get(i, j) - fc.get(i, j)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn row_family_rejects_out_of_range_shifts() {
        let theta = NoisyHawkesParams::new(
            vec![1.0, 1.0],
            vec![vec![0.5, 0.3], vec![0.0, 0.0]],
            vec![1.0, 1.0],
            0.5,
        )
        .unwrap();
        let range = biv_tau_range_row(&theta).unwrap();
        assert!(biv_equivalent_row(&theta, range.hi + 0.1).is_err());
        assert!(biv_equivalent_row(&theta, range.lo - 0.1).is_err());
        // Wrong shape: nonzero second row.
        let bad = NoisyHawkesParams::new(
            vec![1.0, 1.0],
            vec![vec![0.5, 0.3], vec![0.1, 0.0]],
            vec![1.0, 1.0],
            0.5,
        )
        .unwrap();
        assert!(biv_equivalent_row(&bad, 0.1).is_err());
    }

    #[test]
    fn probe_separates_identifiable_families() {
        for model in [ProbeModel::QLambda0, ProbeModel::Lambda1] {
            let report = injectivity_probe(model, 25, 7).unwrap();
            assert!(report.min_discrepancy > 1e-6, "{:?}: {report:?}", model);
            assert!(report.worst.is_some());
        }
    }

    #[test]
    fn probe_grid_shape() {
        let grid = probe_grid();
        assert_eq!(grid.len(), PROBE_GRID_SIZE);
        assert!((grid[0] - 1e-3).abs() < 1e-12);
        assert!((grid[PROBE_GRID_SIZE - 1] - 64.0).abs() < 1e-9);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn support_classification_table() {
        let class = |m: [[bool; 2]; 2]| {
            classify_bivariate_support(&[m[0].to_vec(), m[1].to_vec()]).unwrap()
        };
        use SupportClass::*;
        // Diagonal shapes and full single rows cannot be told apart.
        assert_eq!(class([[false, false], [false, false]]), NonIdentifiable);
        assert_eq!(class([[true, false], [false, false]]), NonIdentifiable);
        assert_eq!(class([[false, false], [false, true]]), NonIdentifiable);
        assert_eq!(class([[true, false], [false, true]]), NonIdentifiable);
        assert_eq!(class([[true, true], [false, false]]), NonIdentifiable);
        assert_eq!(class([[false, false], [true, true]]), NonIdentifiable);
        // The four identifiable shapes.
        assert_eq!(class([[false, false], [true, false]]), Identifiable);
        assert_eq!(class([[true, false], [true, false]]), Identifiable);
        assert_eq!(class([[false, true], [false, false]]), Identifiable);
        assert_eq!(class([[false, true], [false, true]]), Identifiable);
        assert_eq!(class([[true, false], [true, true]]), Identifiable);
        assert_eq!(class([[true, true], [false, true]]), Identifiable);
        // Both cross-interactions at once are open territory.
        assert_eq!(class([[false, true], [true, false]]), Unclassified);
        assert_eq!(class([[true, true], [true, false]]), Unclassified);
        assert_eq!(class([[false, true], [true, true]]), Unclassified);
        assert_eq!(class([[true, true], [true, true]]), Unclassified);
    }
}
