//! Three-step recovery of the interaction support.
//!
//! Step one fits the full model on many subsamples (independent
//! replicates, or windows cut from one long observation by
//! [`partition`]). Step two reads, for each interaction entry, the low
//! empirical quantile of the subsample estimates: entries whose quantile
//! sits at zero are declared null ([`detect_support`]). Step three refits
//! the reduced model with those entries pinned to zero. When the detected
//! support lands on a pattern known to be non-identifiable the pipeline
//! emits a structured warning and withholds the refit.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identifiability::{classify_bivariate_support, SupportClass};
use crate::process::EventSeries;
use crate::rng::substream;
use crate::spectral::{average_periodograms, periodogram, PeriodogramMethod};
use crate::stats::lower_quantile;
use crate::whittle::{
    fit, fit_periodogram, FitConfig, FitResult, ModelSpec, NULL_ALPHA_THRESHOLD,
};

/// Default quantile level for the null screen.
pub const DEFAULT_QUANTILE_LEVEL: f64 = 0.05;
/// Default minimum null proportion for the alternative screen.
pub const DEFAULT_NULL_PROPORTION: f64 = 0.3;
/// Fewest subsample fits the screen accepts.
pub const MIN_SUBSAMPLE_FITS: usize = 5;

/// Cuts `[start, end]` into `n_parts` equal windows, each re-based to
/// start at zero. An event on an interior boundary belongs to the window
/// opening there (half-open intervals); the final window keeps its right
/// endpoint.
pub fn partition(events: &EventSeries, n_parts: usize) -> Result<Vec<EventSeries>> {
    if n_parts < 2 {
        return Err(Error::InvalidInput("partitioning needs at least 2 parts".into()));
    }
    let (start, end) = events.window;
    let width = (end - start) / n_parts as f64;
    if !(width > 0.0) {
        return Err(Error::InvalidInput(format!(
            "window of length {} cannot be cut into {n_parts} parts",
            end - start
        )));
    }
    let d = events.dim();
    let mut parts: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); d]; n_parts];
    for (comp, times) in events.times.iter().enumerate() {
        for &t in times {
            let mut k = ((t - start) / width).floor() as usize;
            if k >= n_parts {
                k = n_parts - 1; // the right endpoint of the last window
            }
            // Guard against rounding placing t just below its boundary.
            let left = start + k as f64 * width;
            if t < left && k > 0 {
                k -= 1;
            } else if k + 1 < n_parts && t >= start + (k + 1) as f64 * width {
                k += 1;
            }
            parts[k][comp].push(t - (start + k as f64 * width));
        }
    }
    parts
        .into_iter()
        .map(|times| EventSeries::new((0.0, width), times))
        .collect()
}

/// How subsample estimates are screened for nullness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRule {
    /// Keep an entry when its `level`-quantile exceeds the null threshold.
    Quantile { level: f64 },
    /// Drop an entry when at least `min_null` of its estimates are null.
    NullProportion { min_null: f64 },
}

impl Default for SupportRule {
    fn default() -> Self {
        SupportRule::Quantile { level: DEFAULT_QUANTILE_LEVEL }
    }
}

/// Multiple-testing adjustment applied to the quantile rule when the
/// number of entries grows. Under Bonferroni the quantile level is
/// divided by the number of entries; under Benjamini-Hochberg the
/// per-entry null proportions enter a step-up comparison against
/// `level * rank / m`. The null-proportion rule ignores the correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
    BenjaminiHochberg,
}

/// Per-entry summary of the subsample screen.
#[derive(Debug, Clone, Serialize)]
pub struct SupportReport {
    /// Low empirical quantile of each interaction estimate.
    pub quantiles: Vec<Vec<f64>>,
    /// Fraction of subsamples estimating each entry at (or below) the
    /// null threshold.
    pub null_props: Vec<Vec<f64>>,
    /// True where the entry stays in the support.
    pub support_mask: Vec<Vec<bool>>,
    pub n_subsamples: usize,
}

impl SupportReport {
    pub fn dim(&self) -> usize {
        self.support_mask.len()
    }

    /// One line per entry: name, quantile, null proportion, verdict.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("entry,quantile,null_proportion,in_support\n");
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out.push_str(&format!(
                    "alpha_{}{},{},{},{}\n",
                    i + 1,
                    j + 1,
                    self.quantiles[i][j],
                    self.null_props[i][j],
                    self.support_mask[i][j]
                ));
            }
        }
        out
    }
}

/// Screens subsample fits with the default quantile rule.
pub fn detect_support(
    fits: &[FitResult],
    quantile_level: f64,
    null_threshold: f64,
) -> Result<SupportReport> {
    detect_support_with(
        fits,
        SupportRule::Quantile { level: quantile_level },
        Correction::None,
        null_threshold,
    )
}

/// Screens subsample fits for null interaction entries.
pub fn detect_support_with(
    fits: &[FitResult],
    rule: SupportRule,
    correction: Correction,
    null_threshold: f64,
) -> Result<SupportReport> {
    if fits.len() < MIN_SUBSAMPLE_FITS {
        return Err(Error::InvalidInput(format!(
            "support screening needs at least {MIN_SUBSAMPLE_FITS} fits, got {}",
            fits.len()
        )));
    }
    let d = fits[0].theta.dim();
    if fits.iter().any(|f| f.theta.dim() != d) {
        return Err(Error::InvalidInput("fits mix dimensions".into()));
    }
    match rule {
        SupportRule::Quantile { level } => {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::InvalidConfig(format!("quantile level {level} not in (0,1)")));
            }
        }
        SupportRule::NullProportion { min_null } => {
            if !(min_null > 0.0 && min_null <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "null proportion threshold {min_null} not in (0,1]"
                )));
            }
        }
    }
    let n = fits.len() as f64;
    let mut quantiles = vec![vec![0.0; d]; d];
    let mut null_props = vec![vec![0.0; d]; d];
    let mut estimates = vec![vec![Vec::with_capacity(fits.len()); d]; d];
    for f in fits {
        for i in 0..d {
            for j in 0..d {
                estimates[i][j].push(f.theta.alpha[i][j]);
            }
        }
    }
    let level = match rule {
        SupportRule::Quantile { level } => level,
        SupportRule::NullProportion { .. } => DEFAULT_QUANTILE_LEVEL,
    };
    for i in 0..d {
        for j in 0..d {
            null_props[i][j] =
                estimates[i][j].iter().filter(|&&a| a <= null_threshold).count() as f64 / n;
            quantiles[i][j] = lower_quantile(&estimates[i][j], level);
        }
    }
    let support_mask = match rule {
        SupportRule::NullProportion { min_null } => (0..d)
            .map(|i| (0..d).map(|j| null_props[i][j] < min_null).collect())
            .collect(),
        SupportRule::Quantile { level } => match correction {
            Correction::None => (0..d)
                .map(|i| (0..d).map(|j| quantiles[i][j] > null_threshold).collect())
                .collect(),
            Correction::Bonferroni => {
                let adj = level / (d * d) as f64;
                (0..d)
                    .map(|i| {
                        (0..d)
                            .map(|j| lower_quantile(&estimates[i][j], adj) > null_threshold)
                            .collect()
                    })
                    .collect()
            }
            Correction::BenjaminiHochberg => {
                // Step-up on the null proportions, smallest first.
                let m = d * d;
                let mut order: Vec<(usize, usize)> =
                    (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
                order.sort_by(|a, b| null_props[a.0][a.1].total_cmp(&null_props[b.0][b.1]));
                let mut cutoff = 0;
                for (rank, &(i, j)) in order.iter().enumerate() {
                    if null_props[i][j] <= level * (rank + 1) as f64 / m as f64 {
                        cutoff = rank + 1;
                    }
                }
                let mut mask = vec![vec![false; d]; d];
                for &(i, j) in &order[..cutoff] {
                    mask[i][j] = true;
                }
                mask
            }
        },
    };
    Ok(SupportReport { quantiles, null_props, support_mask, n_subsamples: fits.len() })
}

/// Structured, machine-checkable pipeline warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportWarning {
    /// The detected support is a pattern proven non-identifiable; the
    /// reduced-model refit is withheld.
    NonIdentifiableSupport { mask: Vec<Vec<bool>> },
    /// The detected support is neither in the proven-identifiable nor the
    /// proven-non-identifiable lists; the refit proceeds.
    UnclassifiedSupport { mask: Vec<Vec<bool>> },
    /// A subsample contained no events and was skipped.
    EmptySubsample { index: usize },
}

/// Options for the full pipeline.
#[derive(Debug, Clone, Default)]
pub struct ThreeStepConfig {
    pub fit: FitConfig,
    pub rule: SupportRule,
    pub correction: Correction,
    /// Estimates at or below this value count as null; also the mask
    /// comparison threshold. Defaults to the optimizer convention.
    pub null_threshold: Option<f64>,
}

impl ThreeStepConfig {
    fn threshold(&self) -> f64 {
        self.null_threshold.unwrap_or(NULL_ALPHA_THRESHOLD)
    }
}

/// Everything the pipeline produced.
#[derive(Debug, Clone, Serialize)]
pub struct ThreeStepOutcome {
    pub report: SupportReport,
    /// Full-model fits per usable subsample, in subsample order.
    pub subsample_fits: Vec<FitResult>,
    /// The reduced model implied by the detected support, when a refit
    /// happened.
    pub reduced_spec: Option<ModelSpec>,
    pub reduced: Option<FitResult>,
    pub warnings: Vec<SupportWarning>,
}

/// Per-subsample seed, decorrelated from the restart streams inside each
/// fit.
fn subsample_seed(seed: u64, index: usize) -> u64 {
    substream(seed, &[0x5b5a_u64, index as u64]).next_u64()
}

/// Fits the full model on every usable subsample, in parallel, keeping
/// subsample order. Failures carry the subsample index.
fn fit_subsamples(
    subsamples: &[EventSeries],
    full_spec: &ModelSpec,
    cfg: &ThreeStepConfig,
    warnings: &mut Vec<SupportWarning>,
) -> Result<Vec<FitResult>> {
    let usable: Vec<(usize, &EventSeries)> = subsamples
        .iter()
        .enumerate()
        .filter(|(idx, s)| {
            if s.total_count() == 0 {
                warnings.push(SupportWarning::EmptySubsample { index: *idx });
                false
            } else {
                true
            }
        })
        .collect();
    usable
        .par_iter()
        .map(|(idx, series)| {
            let mut fit_cfg = cfg.fit.clone();
            fit_cfg.seed = subsample_seed(cfg.fit.seed, *idx);
            fit(full_spec, series, &fit_cfg).map_err(|e| Error::Subsample {
                index: *idx,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Decides the refit model from a detected mask, pushing warnings.
fn reduced_model_for(
    mask: &[Vec<bool>],
    warnings: &mut Vec<SupportWarning>,
) -> Result<Option<ModelSpec>> {
    let d = mask.len();
    let all_null = mask.iter().all(|row| row.iter().all(|&k| !k));
    if d == 2 {
        match classify_bivariate_support(mask)? {
            SupportClass::NonIdentifiable => {
                warnings.push(SupportWarning::NonIdentifiableSupport { mask: mask.to_vec() });
                return Ok(None);
            }
            SupportClass::Unclassified => {
                warnings.push(SupportWarning::UnclassifiedSupport { mask: mask.to_vec() });
            }
            SupportClass::Identifiable => {}
        }
    } else if all_null {
        // In any dimension an interaction-free model reduces to Poisson
        // plus noise, where only the sum of the rates is determined.
        warnings.push(SupportWarning::NonIdentifiableSupport { mask: mask.to_vec() });
        return Ok(None);
    }
    ModelSpec::with_support(mask).map(Some)
}

/// Three-step pipeline on independent replicates. The refit maximizes the
/// Whittle likelihood of the averaged periodogram across replicates, on a
/// grid sized by the mean event count.
pub fn three_step_fit(
    replicates: &[EventSeries],
    full_spec: &ModelSpec,
    cfg: &ThreeStepConfig,
) -> Result<ThreeStepOutcome> {
    if replicates.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 replicates".into()));
    }
    let mut warnings = Vec::new();
    let fits = fit_subsamples(replicates, full_spec, cfg, &mut warnings)?;
    let report = screen(&fits, cfg)?;
    let reduced_spec = reduced_model_for(&report.support_mask, &mut warnings)?;
    let reduced = match &reduced_spec {
        None => None,
        Some(spec) => {
            let nonempty: Vec<&EventSeries> =
                replicates.iter().filter(|s| s.total_count() > 0).collect();
            let mean_count = nonempty.iter().map(|s| s.total_count()).sum::<usize>() as f64
                / nonempty.len() as f64;
            let m = mean_count.ceil().max(1.0) as usize;
            let pgs: Vec<_> = nonempty
                .iter()
                .map(|s| periodogram(s, m, PeriodogramMethod::Auto))
                .collect::<Result<_>>()?;
            let avg = average_periodograms(&pgs)?;
            Some(fit_periodogram(spec, &avg, &cfg.fit)?)
        }
    };
    Ok(ThreeStepOutcome { report, subsample_fits: fits, reduced_spec, reduced, warnings })
}

/// Three-step pipeline on a single long observation: subsample fits come
/// from an equal partition of the window, and the refit runs on the
/// original undivided series.
pub fn three_step_fit_partitioned(
    events: &EventSeries,
    n_parts: usize,
    full_spec: &ModelSpec,
    cfg: &ThreeStepConfig,
) -> Result<ThreeStepOutcome> {
    let parts = partition(events, n_parts)?;
    let mut warnings = Vec::new();
    let fits = fit_subsamples(&parts, full_spec, cfg, &mut warnings)?;
    let report = screen(&fits, cfg)?;
    let reduced_spec = reduced_model_for(&report.support_mask, &mut warnings)?;
    let reduced = match &reduced_spec {
        None => None,
        Some(spec) => Some(fit(spec, events, &cfg.fit)?),
    };
    Ok(ThreeStepOutcome { report, subsample_fits: fits, reduced_spec, reduced, warnings })
}

fn screen(fits: &[FitResult], cfg: &ThreeStepConfig) -> Result<SupportReport> {
    detect_support_with(fits, cfg.rule, cfg.correction, cfg.threshold())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::NoisyHawkesParams;

    fn series_with(times: Vec<f64>, window: (f64, f64)) -> EventSeries {
        EventSeries::new(window, vec![times]).unwrap()
    }

    #[test]
    fn partition_cuts_equal_rebased_windows() {
        let events = series_with((0..600).map(|k| k as f64 * 10.0 + 0.5).collect(), (0.0, 6000.0));
        let parts = partition(&events, 20).unwrap();
        assert_eq!(parts.len(), 20);
        for p in &parts {
            assert_eq!(p.window, (0.0, 300.0));
        }
        let total: usize = parts.iter().map(|p| p.total_count()).sum();
        assert_eq!(total, events.total_count());
    }

    #[test]
    fn partition_boundary_goes_right_and_endpoint_stays() {
        // 300.0 opens the second window; 600.0 is the global right
        // endpoint and stays in the last window.
        let events = series_with(vec![299.0, 300.0, 600.0], (0.0, 600.0));
        let parts = partition(&events, 2).unwrap();
        assert_eq!(parts[0].times[0], vec![299.0]);
        assert_eq!(parts[1].times[0], vec![0.0, 300.0]);
    }

    #[test]
    fn partition_flags_empty_parts_not_errors() {
        let events = series_with(vec![1.0, 2.0, 3.0], (0.0, 100.0));
        let parts = partition(&events, 2).unwrap();
        assert_eq!(parts[0].total_count(), 3);
        assert_eq!(parts[1].total_count(), 0);
        assert!(partition(&events, 1).is_err());
    }

    fn fake_fit(alpha: [[f64; 2]; 2]) -> FitResult {
        let theta = NoisyHawkesParams::new(
            vec![1.0, 1.0],
            vec![alpha[0].to_vec(), alpha[1].to_vec()],
            vec![1.0, 1.0],
            0.5,
        )
        .unwrap();
        FitResult {
            theta,
            loglik: 0.0,
            m_used: 100,
            n_events: Some(100),
            chosen_restart: 0,
            restarts: Vec::new(),
        }
    }

    /// 50 fits: entry (0,0) always ~0.4; entry (0,1) null in 28% of
    /// fits; entry (1,0) always ~0.32; entry (1,1) always null.
    fn scenario_fits() -> Vec<FitResult> {
        (0..50)
            .map(|k| {
                let a01 = if k < 14 { 0.0 } else { 0.2 + 0.001 * k as f64 };
                fake_fit([[0.4 + 0.001 * k as f64, a01], [0.32, 0.0]])
            })
            .collect()
    }

    #[test]
    fn quantile_screen_matches_tabled_behaviour() {
        let fits = scenario_fits();
        let report = detect_support(&fits, 0.05, NULL_ALPHA_THRESHOLD).unwrap();
        assert_eq!(report.n_subsamples, 50);
        // Entirely positive entries survive; 28% zeros or all zeros drop.
        assert_eq!(
            report.support_mask,
            vec![vec![true, false], vec![true, false]]
        );
        assert!(report.quantiles[0][0] >= 0.4);
        assert_eq!(report.quantiles[0][1], 0.0);
        assert!((report.null_props[0][1] - 0.28).abs() < 1e-12);
        assert_eq!(report.null_props[1][1], 1.0);
        assert_eq!(report.quantiles[1][1], 0.0);
    }

    #[test]
    fn null_proportion_rule_uses_its_own_cutoff() {
        let fits = scenario_fits();
        // 28% nulls is below the 30% bar, so the entry survives here.
        let report = detect_support_with(
            &fits,
            SupportRule::NullProportion { min_null: DEFAULT_NULL_PROPORTION },
            Correction::None,
            NULL_ALPHA_THRESHOLD,
        )
        .unwrap();
        assert_eq!(
            report.support_mask,
            vec![vec![true, true], vec![true, false]]
        );
    }

    #[test]
    fn raising_the_threshold_never_adds_support() {
        let fits = scenario_fits();
        let mut previous = None;
        for thr in [1e-6, 1e-4, 1e-2, 0.25, 0.45] {
            let mask = detect_support(&fits, 0.05, thr).unwrap().support_mask;
            if let Some(prev) = previous {
                let prev: Vec<Vec<bool>> = prev;
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(
                            !mask[i][j] || prev[i][j],
                            "threshold {thr} added entry ({i},{j})"
                        );
                    }
                }
            }
            previous = Some(mask);
        }
    }

    #[test]
    fn bonferroni_is_no_looser_than_uncorrected() {
        let fits = scenario_fits();
        let rule = SupportRule::Quantile { level: 0.05 };
        let plain = detect_support_with(&fits, rule, Correction::None, NULL_ALPHA_THRESHOLD)
            .unwrap()
            .support_mask;
        let bonf = detect_support_with(&fits, rule, Correction::Bonferroni, NULL_ALPHA_THRESHOLD)
            .unwrap()
            .support_mask;
        for i in 0..2 {
            for j in 0..2 {
                assert!(!bonf[i][j] || plain[i][j]);
            }
        }
        let bh = detect_support_with(
            &fits,
            rule,
            Correction::BenjaminiHochberg,
            NULL_ALPHA_THRESHOLD,
        )
        .unwrap()
        .support_mask;
        // Step-up keeps the always-positive entries and drops the all-null one.
        assert!(bh[0][0] && bh[1][0]);
        assert!(!bh[1][1]);
    }

    #[test]
    fn screen_rejects_small_samples_and_bad_levels() {
        let fits: Vec<FitResult> = (0..4).map(|_| fake_fit([[0.4, 0.0], [0.3, 0.0]])).collect();
        assert!(detect_support(&fits, 0.05, NULL_ALPHA_THRESHOLD).is_err());
        let fits = scenario_fits();
        assert!(detect_support(&fits, 0.0, NULL_ALPHA_THRESHOLD).is_err());
        assert!(detect_support(&fits, 1.0, NULL_ALPHA_THRESHOLD).is_err());
    }

    #[test]
    fn reduced_model_decision_matches_classification() {
        let mut warnings = Vec::new();
        // Scenario-1 pattern: identifiable, refit proceeds silently.
        let spec = reduced_model_for(
            &[vec![true, false], vec![true, false]],
            &mut warnings,
        )
        .unwrap();
        assert!(spec.is_some());
        assert!(warnings.is_empty());
        // Diagonal pattern: warning, no refit.
        let spec = reduced_model_for(&[vec![true, false], vec![false, true]], &mut warnings)
            .unwrap();
        assert!(spec.is_none());
        assert!(matches!(
            warnings.last(),
            Some(SupportWarning::NonIdentifiableSupport { .. })
        ));
        // Both cross-entries: unclassified warning but a refit happens.
        warnings.clear();
        let spec = reduced_model_for(&[vec![false, true], vec![true, false]], &mut warnings)
            .unwrap();
        assert!(spec.is_some());
        assert!(matches!(
            warnings.last(),
            Some(SupportWarning::UnclassifiedSupport { .. })
        ));
        // Univariate all-null: Poisson-only, warning, no refit.
        warnings.clear();
        let spec = reduced_model_for(&[vec![false]], &mut warnings).unwrap();
        assert!(spec.is_none());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn report_csv_layout() {
        let fits = scenario_fits();
        let report = detect_support(&fits, 0.05, NULL_ALPHA_THRESHOLD).unwrap();
        let csv = report.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "entry,quantile,null_proportion,in_support");
        assert!(lines[1].starts_with("alpha_11,"));
        assert!(lines[4].starts_with("alpha_22,") && lines[4].ends_with("false"));
    }
}
