//! Normalized inductive conformal prediction over per-feature regressors.
//!
//! Each feature gets a point predictor g_i from latent space, a
//! heteroscedasticity estimate, and a calibrated scale factor epsilon_i.
//! The score of a row is gamma_i(x) = |x_i - g_i(f(x))| / sigma_i(x);
//! epsilon_i is the k-th smallest calibration score with
//! k = ceil((m + 1)(1 - alpha)), which makes the interval
//! [g_i - eps_i sigma_i, g_i + eps_i sigma_i] cover with probability at
//! least 1 - alpha under exchangeability. Too-small calibration sets push
//! k past the largest score; the threshold is then unbounded and flagged.
//!
//! The per-row spread combines a regression tree over the latent
//! representation (fitted to log absolute residuals, large leaves for
//! stability) with a local-density factor from nearest-neighbor distances
//! in standardized input space, plus a range-scaled floor so the scale
//! never collapses to zero.

use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::representer::Representer;
use crate::stats;
use crate::tree::{RegressionTree, TreeParams};

/// Tuning knobs for conformal fitting. The defaults are the configuration
/// validated end to end on the synthetic benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalParams {
    /// Miscoverage level; intervals target 1 - alpha coverage.
    pub alpha: f64,
    /// Leaf size of the per-feature point predictors.
    pub g_min_leaf: usize,
    /// Leaf size of the spread trees. Much larger than the point
    /// predictor's: per-leaf mean absolute residuals need many samples
    /// before they are stable enough to divide by.
    pub sigma_min_leaf: usize,
    /// Neighbors used by the local-density factor.
    pub difficulty_k: usize,
    /// Exponent of the local-density factor; 0 disables it.
    pub difficulty_eta: f64,
    /// Offset added inside log(|residual| + offset) so exact fits stay
    /// finite.
    pub residual_offset: f64,
    /// The additive floor on sigma is `beta_scale * (b_i - a_i)` per
    /// feature, where [a_i, b_i] is the feature's training range.
    pub beta_scale: f64,
}

impl Default for ConformalParams {
    fn default() -> Self {
        ConformalParams {
            alpha: 0.05,
            g_min_leaf: 5,
            sigma_min_leaf: 100,
            difficulty_k: 5,
            difficulty_eta: 0.3,
            residual_offset: 1e-8,
            beta_scale: 1e-6,
        }
    }
}

/// Local-density difficulty factor in standardized input space.
///
/// The factor of a query is (mean distance to its k nearest reference
/// rows / median reference distance) ^ eta: above one in sparse regions,
/// below one in dense ones. The median is taken over the reference rows'
/// own k-nearest means (each including its zero self-distance).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifficultyIndex {
    reference: Mat,
    k: usize,
    eta: f64,
    median_distance: f64,
}

impl DifficultyIndex {
    /// Builds the index from standardized reference rows.
    pub fn fit(reference: Mat, k: usize, eta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("difficulty index needs k >= 1".into()));
        }
        if reference.rows() < k {
            return Err(Error::Data(format!(
                "difficulty index needs at least k = {k} reference rows, got {}",
                reference.rows()
            )));
        }
        let mut own = Vec::with_capacity(reference.rows());
        for r in 0..reference.rows() {
            own.push(mean_knn_distance(&reference, reference.row(r), k));
        }
        let median_distance = stats::median(&own);
        Ok(DifficultyIndex { reference, k, eta, median_distance })
    }

    /// Difficulty factor for one standardized row.
    pub fn factor(&self, std_row: &[f64]) -> f64 {
        // A degenerate reference (all rows near-identical) has zero median
        // distance; the factor is then uninformative and collapses to 1.
        if self.median_distance <= 0.0 || self.eta == 0.0 {
            return 1.0;
        }
        (mean_knn_distance(&self.reference, std_row, self.k) / self.median_distance)
            .powf(self.eta)
    }
}

/// Mean Euclidean distance from `row` to its `k` nearest rows of `m`
/// (including an exact self-match if present).
fn mean_knn_distance(m: &Mat, row: &[f64], k: usize) -> f64 {
    let mut dists: Vec<f64> = (0..m.rows())
        .map(|r| {
            m.row(r).iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .collect();
    dists.sort_by(|a, b| a.total_cmp(b));
    dists.iter().take(k).sum::<f64>() / k as f64
}

/// Point predictor, spread model, and calibrated threshold for one feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeaturePredictor {
    pub g: RegressionTree,
    pub sigma_tree: RegressionTree,
    pub beta: f64,
    /// Calibrated score threshold; `f64::INFINITY` when the calibration
    /// set was too small for the requested level.
    pub epsilon: f64,
    pub epsilon_unbounded: bool,
}

/// A fitted conformal predictor over all features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalModel {
    pub representer: Representer,
    pub difficulty: DifficultyIndex,
    pub features: Vec<FeaturePredictor>,
    pub alpha: f64,
    /// Per-feature [a_i, b_i] training ranges used for the sigma floor and
    /// later for width normalization and clipping.
    pub ranges: Vec<(f64, f64)>,
}

/// Calibrated threshold from a set of nonconformity scores: the k-th
/// smallest with k = ceil((m + 1)(1 - alpha)). Returns the threshold and
/// whether it was unbounded (k beyond the sample).
pub fn epsilon_threshold(scores: &[f64], alpha: f64) -> Result<(f64, bool)> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if scores.is_empty() {
        return Err(Error::Data("cannot calibrate on an empty score set".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::Numeric(format!("invalid nonconformity score {bad}")));
    }
    let m = scores.len();
    let k = ((m as f64 + 1.0) * (1.0 - alpha)).ceil() as usize;
    if k > m {
        return Ok((f64::INFINITY, true));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok((sorted[k - 1], false))
}

/// Fits per-feature predictors on the proper split and calibrates their
/// thresholds on the calibration split.
///
/// `proper` and `calibration` live in the same (possibly augmented) input
/// space the representer was fitted on; `ranges` are the per-feature
/// training ranges of the real data.
pub fn fit_conformal(
    representer: Representer,
    proper: &TabularDataset,
    calibration: &TabularDataset,
    ranges: &[(f64, f64)],
    params: &ConformalParams,
) -> Result<ConformalModel> {
    let d = proper.dims();
    if calibration.dims() != d {
        return Err(Error::Data(format!(
            "proper split has {d} features but calibration has {}",
            calibration.dims()
        )));
    }
    if ranges.len() != d {
        return Err(Error::Data(format!("{} ranges supplied for {d} features", ranges.len())));
    }
    if !(0.0 < params.alpha && params.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", params.alpha)));
    }
    for (i, &(a, b)) in ranges.iter().enumerate() {
        // partial_cmp keeps NaN-valued ranges on the error path.
        if b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Data(format!(
                "feature '{}' has a degenerate training range [{a}, {b}]",
                proper.columns[i].name
            )));
        }
    }

    let latents_proper = representer.transform(proper)?;
    let latents_cal = representer.transform(calibration)?;

    let mut std_proper = Mat::zeros(proper.rows(), representer.standardization.kept.len());
    for r in 0..proper.rows() {
        for (c, v) in representer.standardize_row(proper.row(r))?.into_iter().enumerate() {
            std_proper.set(r, c, v);
        }
    }
    let difficulty =
        DifficultyIndex::fit(std_proper, params.difficulty_k, params.difficulty_eta)?;

    let mut cal_factors = Vec::with_capacity(calibration.rows());
    for r in 0..calibration.rows() {
        cal_factors.push(difficulty.factor(&representer.standardize_row(calibration.row(r))?));
    }

    // Large datasets keep the validated leaf size; tiny ones cap it so the
    // spread tree degenerates to fewer leaves instead of failing outright.
    let sigma_leaf = params.sigma_min_leaf.min(proper.rows());
    let mut features = Vec::with_capacity(d);
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        let target = proper.column(i);
        let g = RegressionTree::fit(
            &latents_proper,
            &target,
            TreeParams::with_min_leaf(params.g_min_leaf),
        )?;
        let log_resid: Vec<f64> = (0..proper.rows())
            .map(|r| {
                let resid = (target[r] - g.predict_row(latents_proper.row(r))).abs();
                (resid + params.residual_offset).ln()
            })
            .collect();
        let sigma_tree = RegressionTree::fit(
            &latents_proper,
            &log_resid,
            TreeParams::with_min_leaf(sigma_leaf),
        )?;
        let beta = params.beta_scale * (hi - lo);

        let scores: Vec<f64> = (0..calibration.rows())
            .map(|r| {
                let h = latents_cal.row(r);
                let sigma = sigma_tree.predict_row(h).exp() * cal_factors[r] + beta;
                (calibration.value(r, i) - g.predict_row(h)).abs() / sigma
            })
            .collect();
        let (epsilon, epsilon_unbounded) = epsilon_threshold(&scores, params.alpha)?;
        features.push(FeaturePredictor { g, sigma_tree, beta, epsilon, epsilon_unbounded });
    }

    Ok(ConformalModel { representer, difficulty, features, alpha: params.alpha, ranges: ranges.to_vec() })
}

impl ConformalModel {
    /// Number of features the model predicts.
    pub fn dims(&self) -> usize {
        self.features.len()
    }

    /// True when any feature's threshold is unbounded.
    pub fn any_epsilon_unbounded(&self) -> bool {
        self.features.iter().any(|f| f.epsilon_unbounded)
    }

    /// Per-feature calibrated thresholds.
    pub fn epsilons(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.epsilon).collect()
    }

    /// Predicts per-feature intervals for every row of `ds`.
    pub fn predict(&self, ds: &TabularDataset) -> Result<IntervalSet> {
        let d = self.dims();
        if ds.dims() != d {
            return Err(Error::Data(format!(
                "model covers {d} features but input has {}",
                ds.dims()
            )));
        }
        let n = ds.rows();
        let latents = self.representer.transform(ds)?;
        let mut lower = Mat::zeros(n, d);
        let mut upper = Mat::zeros(n, d);
        let mut center = Mat::zeros(n, d);
        let mut sigma = Mat::zeros(n, d);
        let mut scores = Mat::zeros(n, d);
        for r in 0..n {
            let h = latents.row(r);
            let factor = self.difficulty.factor(&self.representer.standardize_row(ds.row(r))?);
            for (i, f) in self.features.iter().enumerate() {
                let c = f.g.predict_row(h);
                let s = f.sigma_tree.predict_row(h).exp() * factor + f.beta;
                let half = f.epsilon * s;
                center.set(r, i, c);
                sigma.set(r, i, s);
                lower.set(r, i, c - half);
                upper.set(r, i, c + half);
                scores.set(r, i, (ds.value(r, i) - c).abs() / s);
            }
        }
        Ok(IntervalSet {
            lower,
            upper,
            center,
            sigma,
            observed: ds.matrix().clone(),
            scores,
            epsilons: self.epsilons(),
            alpha: self.alpha,
            ranges: self.ranges.clone(),
        })
    }
}

/// Per-feature intervals for a batch of rows, along with everything needed
/// to evaluate them: observed values, nonconformity scores, thresholds,
/// and the training ranges for normalization and clipping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalSet {
    pub lower: Mat,
    pub upper: Mat,
    pub center: Mat,
    pub sigma: Mat,
    pub observed: Mat,
    pub scores: Mat,
    pub epsilons: Vec<f64>,
    pub alpha: f64,
    pub ranges: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn rows(&self) -> usize {
        self.lower.rows()
    }

    pub fn dims(&self) -> usize {
        self.lower.cols()
    }

    /// Whether the observed value of (row, feature) lies inside its
    /// interval (bounds inclusive).
    pub fn contains(&self, r: usize, i: usize) -> bool {
        let x = self.observed.get(r, i);
        x >= self.lower.get(r, i) && x <= self.upper.get(r, i)
    }

    /// Fraction of (row, feature) pairs whose interval covers the
    /// observed value.
    pub fn coverage(&self) -> f64 {
        let mut hit = 0usize;
        for r in 0..self.rows() {
            for i in 0..self.dims() {
                if self.contains(r, i) {
                    hit += 1;
                }
            }
        }
        hit as f64 / (self.rows() * self.dims()) as f64
    }

    /// Coverage split out per feature.
    pub fn per_feature_coverage(&self) -> Vec<f64> {
        (0..self.dims())
            .map(|i| {
                let hits = (0..self.rows()).filter(|&r| self.contains(r, i)).count();
                hits as f64 / self.rows() as f64
            })
            .collect()
    }

    /// Interval width of one (row, feature) cell.
    pub fn width(&self, r: usize, i: usize) -> f64 {
        self.upper.get(r, i) - self.lower.get(r, i)
    }

    /// Bounds clamped to the per-feature training ranges. Reported widths
    /// and downstream metrics sometimes want physically meaningful
    /// intervals; coverage statements always use the unclipped bounds.
    pub fn clipped_bounds(&self) -> (Mat, Mat) {
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        for r in 0..self.rows() {
            for i in 0..self.dims() {
                let (a, b) = self.ranges[i];
                lo.set(r, i, lo.get(r, i).clamp(a, b));
                hi.set(r, i, hi.get(r, i).clamp(a, b));
            }
        }
        (lo, hi)
    }
}
