//! Instance stratification from per-feature intervals.
//!
//! Two per-row summaries drive everything here. The inconsistency
//! nu(x) is the fraction of features whose observed value falls outside
//! its interval; rows with nu above a threshold lambda are flagged as
//! inconsistent with the training distribution. The uncertainty delta(x)
//! is the mean interval width after dividing each feature's width by its
//! training range, so features on different scales contribute comparably;
//! widths use the unclipped bounds and can exceed one when an interval is
//! wider than the range itself. Ranking rows by ascending delta yields the
//! certain group (narrowest prefix) and uncertain group (widest suffix).

use serde::{Deserialize, Serialize};

use crate::conformal::IntervalSet;
use crate::data::{ColumnKind, TabularDataset};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::representer::{fit_representer_with_dim, Representer};

/// Per-row stratification summary over one batch of intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratificationReport {
    /// Fraction of features outside their interval, per row.
    pub nu: Vec<f64>,
    /// nu > lambda, per row.
    pub inconsistent: Vec<bool>,
    /// Mean range-normalized interval width, per row.
    pub delta: Vec<f64>,
    /// Row indices sorted by ascending delta; ties broken by row index.
    pub ranking: Vec<usize>,
    /// Threshold the inconsistency flags were computed at.
    pub lambda: f64,
}

/// Computes per-row inconsistency and uncertainty from intervals.
pub fn stratify(intervals: &IntervalSet, lambda: f64) -> Result<StratificationReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let n = intervals.rows();
    let d = intervals.dims();
    if n == 0 {
        return Err(Error::Data("cannot stratify an empty interval set".into()));
    }
    let mut nu = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for r in 0..n {
        let outside = (0..d).filter(|&i| !intervals.contains(r, i)).count();
        nu.push(outside as f64 / d as f64);
        let mut total = 0.0;
        for i in 0..d {
            let (a, b) = intervals.ranges[i];
            total += intervals.width(r, i) / (b - a);
        }
        delta.push(total / d as f64);
    }
    let inconsistent = nu.iter().map(|&v| v > lambda).collect();
    let mut ranking: Vec<usize> = (0..n).collect();
    ranking.sort_by(|&a, &b| delta[a].total_cmp(&delta[b]).then(a.cmp(&b)));
    Ok(StratificationReport { nu, inconsistent, delta, ranking, lambda })
}

impl StratificationReport {
    pub fn rows(&self) -> usize {
        self.nu.len()
    }

    /// Number of rows in a group at fraction `p`: ceil(p * n).
    pub fn group_size(&self, p: f64) -> usize {
        (p * self.rows() as f64).ceil() as usize
    }

    /// The `m` most certain rows (narrowest intervals first). No size
    /// guard: callers sweeping many fractions may let prefix and suffix
    /// overlap.
    pub fn most_certain(&self, m: usize) -> &[usize] {
        &self.ranking[..m.min(self.rows())]
    }

    /// The `m` most uncertain rows, widest last.
    pub fn most_uncertain(&self, m: usize) -> &[usize] {
        &self.ranking[self.rows() - m.min(self.rows())..]
    }

    /// Certain group at fraction `p`. Requires p in (0, 0.5] so the
    /// certain and uncertain groups cannot overlap.
    pub fn certain(&self, p: f64) -> Result<Vec<usize>> {
        Ok(self.most_certain(self.checked_size(p)?).to_vec())
    }

    /// Uncertain group at fraction `p`; same admissible range as
    /// [`StratificationReport::certain`].
    pub fn uncertain(&self, p: f64) -> Result<Vec<usize>> {
        Ok(self.most_uncertain(self.checked_size(p)?).to_vec())
    }

    /// Count of rows flagged inconsistent.
    pub fn inconsistent_count(&self) -> usize {
        self.inconsistent.iter().filter(|&&b| b).count()
    }

    fn checked_size(&self, p: f64) -> Result<usize> {
        if !(p > 0.0 && p <= 0.5) {
            return Err(Error::Config(format!("group fraction must lie in (0, 0.5], got {p}")));
        }
        Ok(self.group_size(p))
    }
}

/// Centroid prototype of a row subset.
///
/// Continuous columns take their mean. One-hot indicator blocks are
/// resolved to a valid encoding: the level with the largest mean indicator
/// gets 1, the rest of its block 0. Raw (unencoded) categorical columns
/// have no meaningful centroid and are rejected.
pub fn prototype(ds: &TabularDataset, indices: &[usize]) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::Data("prototype of an empty group is undefined".into()));
    }
    for &r in indices {
        if r >= ds.rows() {
            return Err(Error::Data(format!("row index {r} out of bounds for {}", ds.rows())));
        }
    }
    let d = ds.dims();
    let mut proto = vec![0.0; d];
    for (i, p) in proto.iter_mut().enumerate() {
        if let ColumnKind::Categorical { .. } = ds.columns[i].kind {
            return Err(Error::Data(format!(
                "column '{}' is a raw categorical; one-hot encode before taking prototypes",
                ds.columns[i].name
            )));
        }
        *p = indices.iter().map(|&r| ds.value(r, i)).sum::<f64>() / indices.len() as f64;
    }

    // Snap each one-hot block to its strongest level.
    let mut blocks: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, col) in ds.columns.iter().enumerate() {
        if let ColumnKind::OneHot { source, .. } = &col.kind {
            match blocks.iter_mut().find(|(s, _)| s == source) {
                Some((_, cols)) => cols.push(i),
                None => blocks.push((source.clone(), vec![i])),
            }
        }
    }
    for (_, cols) in &blocks {
        let best = cols
            .iter()
            .copied()
            .max_by(|&a, &b| proto[a].total_cmp(&proto[b]).then(b.cmp(&a)))
            .expect("non-empty block");
        for &c in cols {
            proto[c] = if c == best { 1.0 } else { 0.0 };
        }
    }
    Ok(proto)
}

/// Index of the dataset row closest to `point` in Euclidean distance;
/// ties resolve to the lowest index.
pub fn nearest_row(ds: &TabularDataset, point: &[f64]) -> Result<usize> {
    if point.len() != ds.dims() {
        return Err(Error::Data(format!(
            "point has {} values but dataset has {} columns",
            point.len(),
            ds.dims()
        )));
    }
    if ds.rows() == 0 {
        return Err(Error::Data("cannot search an empty dataset".into()));
    }
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for r in 0..ds.rows() {
        let d2: f64 = ds.row(r).iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best_d {
            best_d = d2;
            best = r;
        }
    }
    Ok(best)
}

/// Two-dimensional coordinates for plotting stratified rows.
///
/// Uses the first two latent dimensions of the supplied representer when
/// it has at least two; otherwise refits a two-component projection on the
/// data itself, which requires at least two (non-constant) input columns.
pub fn project_2d(ds: &TabularDataset, representer: Option<&Representer>) -> Result<Mat> {
    if let Some(rep) = representer {
        if rep.d_latent() >= 2 {
            let h = rep.transform(ds)?;
            let mut out = Mat::zeros(ds.rows(), 2);
            for r in 0..ds.rows() {
                out.set(r, 0, h.get(r, 0));
                out.set(r, 1, h.get(r, 1));
            }
            return Ok(out);
        }
    }
    if ds.dims() < 2 {
        return Err(Error::Data(format!(
            "2-D projection needs at least two feature columns, dataset '{}' has {}",
            ds.name,
            ds.dims()
        )));
    }
    let rep = fit_representer_with_dim(ds, 2)?;
    rep.transform(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureColumn;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Interval set with bounds centered on zero and given half-widths;
    /// observations chosen so row r has `outside[r]` features uncovered.
    fn toy_intervals(half_widths: &[Vec<f64>], outside: &[usize]) -> IntervalSet {
        let n = half_widths.len();
        let d = half_widths[0].len();
        let mut lower = Mat::zeros(n, d);
        let mut upper = Mat::zeros(n, d);
        let mut observed = Mat::zeros(n, d);
        for (r, widths) in half_widths.iter().enumerate() {
            for (i, &w) in widths.iter().enumerate() {
                lower.set(r, i, -w);
                upper.set(r, i, w);
                // Outside features sit past the upper bound.
                observed.set(r, i, if i < outside[r] { w + 1.0 } else { 0.0 });
            }
        }
        IntervalSet {
            lower,
            upper,
            center: Mat::zeros(n, d),
            sigma: Mat::zeros(n, d),
            observed,
            scores: Mat::zeros(n, d),
            epsilons: vec![1.0; d],
            alpha: 0.05,
            ranges: vec![(-1.0, 1.0); d],
        }
    }

    #[test]
    fn nu_and_delta_match_hand_computation() {
        let iv = toy_intervals(
            &[vec![0.5, 1.0], vec![0.1, 0.1], vec![2.0, 2.0], vec![0.3, 0.5]],
            &[1, 0, 2, 0],
        );
        let rep = stratify(&iv, 0.5).unwrap();
        assert_eq!(rep.nu, vec![0.5, 0.0, 1.0, 0.0]);
        assert_eq!(rep.inconsistent, vec![false, false, true, false]);
        // delta(r) = mean_i (2 * half_width / 2) = mean of half-widths.
        assert_abs_diff_eq!(rep.delta[0], 0.75);
        assert_abs_diff_eq!(rep.delta[1], 0.1);
        assert_abs_diff_eq!(rep.delta[2], 2.0);
        assert_abs_diff_eq!(rep.delta[3], 0.4);
        assert_eq!(rep.ranking, vec![1, 3, 0, 2]);
        assert_eq!(rep.inconsistent_count(), 1);
    }

    #[test]
    fn delta_may_exceed_one_for_very_wide_intervals() {
        let iv = toy_intervals(&[vec![3.0, 3.0]], &[0]);
        let rep = stratify(&iv, 0.5).unwrap();
        assert!(rep.delta[0] > 1.0);
    }

    #[test]
    fn groups_are_prefix_and_suffix_and_disjoint_when_small() {
        let iv = toy_intervals(
            &(0..10).map(|r| vec![0.1 * (r as f64 + 1.0); 2]).collect::<Vec<_>>(),
            &[0; 10],
        );
        let rep = stratify(&iv, 0.5).unwrap();
        let cert = rep.certain(0.3).unwrap();
        let unc = rep.uncertain(0.3).unwrap();
        assert_eq!(cert, vec![0, 1, 2]);
        assert_eq!(unc, vec![7, 8, 9]);
        assert!(cert.iter().all(|i| !unc.contains(i)));
        // Nesting: smaller p gives a prefix of larger p's group.
        let small = rep.certain(0.1).unwrap();
        assert!(cert.starts_with(&small));
    }

    #[test]
    fn group_fraction_guard() {
        let iv = toy_intervals(&[vec![0.1], vec![0.2]], &[0, 0]);
        let rep = stratify(&iv, 0.5).unwrap();
        assert!(rep.certain(0.0).is_err());
        assert!(rep.certain(0.6).is_err());
        assert!(rep.certain(0.5).is_ok());
        assert!(stratify(&iv, -0.1).is_err());
        assert!(stratify(&iv, 1.5).is_err());
    }

    #[test]
    fn equal_deltas_rank_by_row_index() {
        let iv = toy_intervals(&[vec![0.5], vec![0.5], vec![0.5]], &[0, 0, 0]);
        let rep = stratify(&iv, 0.5).unwrap();
        assert_eq!(rep.ranking, vec![0, 1, 2]);
    }

    #[test]
    fn inconsistent_count_is_non_increasing_in_lambda() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 50;
        let d = 8;
        let halfw: Vec<Vec<f64>> = (0..n).map(|_| vec![0.5; d]).collect();
        let outs: Vec<usize> = (0..n).map(|_| rng.random_range(0..=d)).collect();
        let iv = toy_intervals(&halfw, &outs);
        let mut prev = usize::MAX;
        for step in 0..=10 {
            let lambda = step as f64 / 10.0;
            let count = stratify(&iv, lambda).unwrap().inconsistent_count();
            assert!(count <= prev, "count grew at lambda {lambda}");
            prev = count;
        }
    }

    #[test]
    fn prototype_means_continuous_and_snaps_onehot_blocks() {
        let columns = vec![
            FeatureColumn::continuous("age"),
            FeatureColumn {
                name: "color=blue".into(),
                kind: ColumnKind::OneHot { source: "color".into(), level: "blue".into() },
                range: Some((0.0, 1.0)),
            },
            FeatureColumn {
                name: "color=red".into(),
                kind: ColumnKind::OneHot { source: "color".into(), level: "red".into() },
                range: Some((0.0, 1.0)),
            },
        ];
        let values = Mat::from_rows(&[
            vec![10.0, 1.0, 0.0],
            vec![20.0, 1.0, 0.0],
            vec![30.0, 0.0, 1.0],
        ])
        .unwrap();
        let ds = TabularDataset::new("mixed", columns, values).unwrap();
        let proto = prototype(&ds, &[0, 1, 2]).unwrap();
        assert_abs_diff_eq!(proto[0], 20.0);
        // blue appears in 2 of 3 rows: the block snaps to blue.
        assert_eq!(&proto[1..], &[1.0, 0.0]);
        let near = nearest_row(&ds, &proto).unwrap();
        assert_eq!(near, 1);
    }

    #[test]
    fn prototype_rejects_raw_categoricals_and_empty_groups() {
        let columns = vec![FeatureColumn {
            name: "city".into(),
            kind: ColumnKind::Categorical { levels: vec!["a".into(), "b".into()] },
            range: None,
        }];
        let ds = TabularDataset::new(
            "raw",
            columns,
            Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
        )
        .unwrap();
        assert!(prototype(&ds, &[0, 1]).is_err());
        let cont = TabularDataset::from_rows("c", &["x"], &[vec![1.0]]).unwrap();
        assert!(prototype(&cont, &[]).is_err());
    }

    #[test]
    fn projection_separates_well_separated_clusters() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..40 {
            rows.push(vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]);
            labels.push(0usize);
        }
        for _ in 0..40 {
            rows.push(vec![
                8.0 + rng.random::<f64>(),
                8.0 + rng.random::<f64>(),
                rng.random::<f64>(),
            ]);
            labels.push(1usize);
        }
        let ds = TabularDataset::from_rows("clusters", &["x", "y", "z"], &rows).unwrap();
        let coords = project_2d(&ds, None).unwrap();
        assert_eq!(coords.cols(), 2);

        // Mean silhouette must be positive for separated clusters.
        let dist = |a: usize, b: usize| -> f64 {
            (0..2).map(|c| (coords.get(a, c) - coords.get(b, c)).powi(2)).sum::<f64>().sqrt()
        };
        let mut total = 0.0;
        for i in 0..rows.len() {
            let (mut same, mut other, mut ns, mut no) = (0.0, 0.0, 0, 0);
            for j in 0..rows.len() {
                if i == j {
                    continue;
                }
                if labels[i] == labels[j] {
                    same += dist(i, j);
                    ns += 1;
                } else {
                    other += dist(i, j);
                    no += 1;
                }
            }
            let a = same / ns as f64;
            let b = other / no as f64;
            total += (b - a) / a.max(b);
        }
        assert!(total / rows.len() as f64 > 0.0);
    }

    #[test]
    fn projection_uses_wide_representers_and_guards_thin_data() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> =
            (0..60).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let ds = TabularDataset::from_rows("wide", &["a", "b", "c", "d"], &rows).unwrap();
        let rep = fit_representer_with_dim(&ds, 3).unwrap();
        let coords = project_2d(&ds, Some(&rep)).unwrap();
        let h = rep.transform(&ds).unwrap();
        for r in 0..ds.rows() {
            assert_abs_diff_eq!(coords.get(r, 0), h.get(r, 0));
            assert_abs_diff_eq!(coords.get(r, 1), h.get(r, 1));
        }

        let thin = TabularDataset::from_rows(
            "thin",
            &["only"],
            &(0..30).map(|i| vec![i as f64]).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(project_2d(&thin, None).is_err());
    }
}
