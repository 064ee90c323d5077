//! Bagged Gini-tree classifier and accuracy-by-group evaluation.
//!
//! The classifier is a random forest: each tree trains on a bootstrap
//! resample and considers ceil(sqrt(d)) randomly drawn features at every
//! split. Prediction is a majority vote over trees, with ties broken
//! toward the lower class index so results are deterministic. Trees carry
//! independently derived seeds, so the ensemble is reproducible and the
//! trees could be grown in any order.
//!
//! `evaluate_stratification` measures how classifier accuracy differs
//! between the most-certain and most-uncertain slices of a ranked test
//! set, against the whole-test baseline and an equal-size random control.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::stats;
use crate::stratify::StratificationReport;
use crate::tree::TreeParams;

/// Largest accepted class index + 1; labels above this are almost
/// certainly raw values passed by mistake.
const MAX_CLASSES: usize = 256;

/// Ensemble size and per-tree growth limits. Defaults: 100 fully grown
/// trees with single-row leaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            tree: TreeParams { max_depth: None, min_samples_split: 2, min_samples_leaf: 1 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { class: usize },
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// One Gini-grown classification tree over a feature subsample per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassificationTree {
    nodes: Vec<Node>,
}

impl ClassificationTree {
    /// Grows a tree on the rows in `idx`. `features_per_split` features are
    /// drawn uniformly without replacement at each node; if none of them
    /// separates the node, it becomes a leaf even when impure.
    fn fit(
        x: &Mat,
        y: &[usize],
        idx: Vec<usize>,
        n_classes: usize,
        features_per_split: usize,
        params: TreeParams,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let mut tree = ClassificationTree { nodes: Vec::new() };
        tree.build(x, y, idx, n_classes, features_per_split, params, 0, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        x: &Mat,
        y: &[usize],
        idx: Vec<usize>,
        n_classes: usize,
        features_per_split: usize,
        params: TreeParams,
        depth: usize,
        rng: &mut ChaCha12Rng,
    ) -> usize {
        let n = idx.len();
        let mut counts = vec![0usize; n_classes];
        for &i in &idx {
            counts[y[i]] += 1;
        }
        let class = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;

        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        let splittable = !pure
            && !depth_capped
            && n >= params.min_samples_split
            && n >= 2 * params.min_samples_leaf;
        let best = if splittable {
            // Feature subsample, sorted so equal-cost ties resolve to the
            // lowest feature index regardless of draw order.
            let mut feats =
                rand::seq::index::sample(rng, x.cols(), features_per_split.min(x.cols())).into_vec();
            feats.sort_unstable();
            best_gini_split(x, y, &idx, n_classes, &feats, params.min_samples_leaf)
        } else {
            None
        };

        match best {
            None => {
                self.nodes.push(Node::Leaf { class });
                self.nodes.len() - 1
            }
            Some((feature, threshold)) => {
                let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
                for &i in &idx {
                    if x.get(i, feature) <= threshold {
                        left_idx.push(i);
                    } else {
                        right_idx.push(i);
                    }
                }
                // Reserve our slot first so child indices are stable.
                let me = self.nodes.len();
                self.nodes.push(Node::Leaf { class });
                let left =
                    self.build(x, y, left_idx, n_classes, features_per_split, params, depth + 1, rng);
                let right =
                    self.build(x, y, right_idx, n_classes, features_per_split, params, depth + 1, rng);
                self.nodes[me] = Node::Split { feature, threshold, left, right };
                me
            }
        }
    }

    fn predict_row(&self, row: &[f64]) -> usize {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Index of the largest count, ties toward the lower class index.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Best `(feature, threshold)` among `feats` by weighted child Gini
/// impurity; `None` when no threshold separates distinct values with
/// full-size leaves. Only a strictly better cost replaces the incumbent.
fn best_gini_split(
    x: &Mat,
    y: &[usize],
    idx: &[usize],
    n_classes: usize,
    feats: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = idx.len();
    let mut total = vec![0usize; n_classes];
    for &i in idx {
        total[y[i]] += 1;
    }

    let mut best: Option<(f64, usize, f64)> = None; // (cost, feature, threshold)
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut left = vec![0usize; n_classes];
    for &f in feats {
        order.clear();
        order.extend_from_slice(idx);
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        left.iter_mut().for_each(|c| *c = 0);

        for s in 1..n {
            left[y[order[s - 1]]] += 1;
            if s < min_leaf || n - s < min_leaf {
                continue;
            }
            let a = x.get(order[s - 1], f);
            let b = x.get(order[s], f);
            if a == b {
                continue;
            }
            // Weighted impurity n_L*G_L + n_R*G_R with G = 1 - sum p_k^2,
            // written via sums of squared counts.
            let (nl, nr) = (s as f64, (n - s) as f64);
            let mut sq_l = 0.0;
            let mut sq_r = 0.0;
            for k in 0..n_classes {
                let l = left[k] as f64;
                let r = (total[k] - left[k]) as f64;
                sq_l += l * l;
                sq_r += r * r;
            }
            let cost = (nl - sq_l / nl) + (nr - sq_r / nr);
            if best.as_ref().is_none_or(|&(c, _, _)| cost < c) {
                // Midpoint can round up to b for adjacent floats; fall
                // back to a so `<= threshold` keeps the left block exact.
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some((cost, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Bagged ensemble of Gini trees with majority-vote prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleClassifier {
    trees: Vec<ClassificationTree>,
    n_classes: usize,
    features_per_split: usize,
    /// Accuracy over rows predicted by the trees whose bootstrap missed
    /// them; `None` when every row landed in every bootstrap (tiny data).
    oob_accuracy: Option<f64>,
}

/// Fits the default 100-tree forest. See [`fit_classifier_with`].
pub fn fit_classifier(
    train: &TabularDataset,
    labels: &[usize],
    seed: u64,
) -> Result<TreeEnsembleClassifier> {
    fit_classifier_with(train, labels, &ForestParams::default(), seed)
}

/// Fits a bagged Gini-tree classifier.
///
/// Each tree gets its own bootstrap resample and a seed derived from
/// `seed` and the tree index, so the fit is reproducible. Labels must be
/// class indices `0..n_classes` with at least two classes present.
pub fn fit_classifier_with(
    train: &TabularDataset,
    labels: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<TreeEnsembleClassifier> {
    let n = train.rows();
    if n != labels.len() {
        return Err(Error::Data(format!(
            "{n} training rows but {} labels",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(Error::Data("classifier needs at least two rows".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("ensemble needs at least one tree".into()));
    }
    let n_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    if n_classes > MAX_CLASSES {
        return Err(Error::Data(format!(
            "label {} looks like a raw value; expected class indices below {MAX_CLASSES}",
            n_classes - 1
        )));
    }
    let distinct = {
        let mut seen = vec![false; n_classes];
        labels.iter().for_each(|&c| seen[c] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::Data("labels contain a single class; nothing to classify".into()));
    }

    let x = train.matrix();
    let features_per_split = (x.cols() as f64).sqrt().ceil() as usize;
    let mut trees = Vec::with_capacity(params.n_trees);
    // votes[r][k]: OOB votes for class k on row r.
    let mut votes = vec![vec![0usize; n_classes]; n];
    for t in 0..params.n_trees {
        let mut rng = ChaCha12Rng::seed_from_u64(stats::derive_seed(seed, &format!("tree-{t}")));
        let mut in_bag = vec![false; n];
        let sample: Vec<usize> = (0..n)
            .map(|_| {
                let r = rng.random_range(0..n);
                in_bag[r] = true;
                r
            })
            .collect();
        let tree =
            ClassificationTree::fit(x, labels, sample, n_classes, features_per_split, params.tree, &mut rng);
        for (r, bag) in in_bag.iter().enumerate() {
            if !bag {
                votes[r][tree.predict_row(x.row(r))] += 1;
            }
        }
        trees.push(tree);
    }

    let mut evaluated = 0usize;
    let mut correct = 0usize;
    for (r, v) in votes.iter().enumerate() {
        if v.iter().sum::<usize>() == 0 {
            continue;
        }
        evaluated += 1;
        if majority(v) == labels[r] {
            correct += 1;
        }
    }
    let oob_accuracy = (evaluated > 0).then(|| correct as f64 / evaluated as f64);

    Ok(TreeEnsembleClassifier { trees, n_classes, features_per_split, oob_accuracy })
}

impl TreeEnsembleClassifier {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    pub fn oob_accuracy(&self) -> Option<f64> {
        self.oob_accuracy
    }

    /// Majority vote over trees, ties toward the lower class index.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for tree in &self.trees {
            counts[tree.predict_row(row)] += 1;
        }
        majority(&counts)
    }

    pub fn predict(&self, ds: &TabularDataset) -> Vec<usize> {
        (0..ds.rows()).map(|r| self.predict_row(ds.row(r))).collect()
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy(&self, ds: &TabularDataset, labels: &[usize]) -> Result<f64> {
        if ds.rows() != labels.len() || ds.rows() == 0 {
            return Err(Error::Data(format!(
                "cannot score {} rows against {} labels",
                ds.rows(),
                labels.len()
            )));
        }
        let correct = (0..ds.rows())
            .filter(|&r| self.predict_row(ds.row(r)) == labels[r])
            .count();
        Ok(correct as f64 / ds.rows() as f64)
    }
}

/// Accuracy of the two ranked slices at one slice fraction, next to an
/// equal-size random control.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub p: f64,
    pub group_size: usize,
    pub certain: f64,
    pub uncertain: f64,
    pub random_control: f64,
}

/// Accuracy-versus-fraction curves over a certainty ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratificationEvaluation {
    pub whole_test: f64,
    pub per_p: Vec<GroupAccuracy>,
    /// Fractions whose groups were empty and therefore not evaluated.
    pub skipped: Vec<f64>,
}

/// Scores the classifier on the most-certain and most-uncertain slices of
/// the ranked test set for each fraction p in {0.05, 0.10, ..., 1.00}.
///
/// Every row also carries a random control: the accuracy on `group_size`
/// rows drawn uniformly without replacement (seeded per fraction), which
/// should track the whole-test baseline.
pub fn evaluate_stratification(
    clf: &TreeEnsembleClassifier,
    test: &TabularDataset,
    labels: &[usize],
    report: &StratificationReport,
    seed: u64,
) -> Result<StratificationEvaluation> {
    let n = test.rows();
    if n == 0 {
        return Err(Error::Data("cannot evaluate on an empty test set".into()));
    }
    if labels.len() != n || report.rows() != n {
        return Err(Error::Data(format!(
            "test has {n} rows but {} labels and a ranking of {}",
            labels.len(),
            report.rows()
        )));
    }
    let predictions = clf.predict(test);
    let subset_accuracy = |rows: &[usize]| -> f64 {
        let correct = rows.iter().filter(|&&r| predictions[r] == labels[r]).count();
        correct as f64 / rows.len() as f64
    };
    let all: Vec<usize> = (0..n).collect();
    let whole_test = subset_accuracy(&all);

    let mut per_p = Vec::new();
    let mut skipped = Vec::new();
    for k in 1..=20u32 {
        let p = f64::from(k) * 0.05;
        let m = report.group_size(p);
        if m == 0 {
            skipped.push(p);
            continue;
        }
        let mut rng =
            ChaCha12Rng::seed_from_u64(stats::derive_seed(seed, &format!("control-{k}")));
        let control = rand::seq::index::sample(&mut rng, n, m.min(n)).into_vec();
        per_p.push(GroupAccuracy {
            p,
            group_size: m,
            certain: subset_accuracy(report.most_certain(m)),
            uncertain: subset_accuracy(report.most_uncertain(m)),
            random_control: subset_accuracy(&control),
        });
    }
    if per_p.is_empty() {
        return Err(Error::Data("every slice fraction produced an empty group".into()));
    }
    Ok(StratificationEvaluation { whole_test, per_p, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::IntervalSet;
    use crate::stratify::stratify;

    /// Two well-separated square blobs in the plane.
    fn blobs(n_per_class: usize, seed: u64) -> (TabularDataset, Vec<usize>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2usize {
            let center = if class == 0 { -3.0 } else { 3.0 };
            for _ in 0..n_per_class {
                let dx = rng.random::<f64>() * 2.0 - 1.0;
                let dy = rng.random::<f64>() * 2.0 - 1.0;
                rows.push(vec![center + dx, dy]);
                labels.push(class);
            }
        }
        let ds = TabularDataset::from_rows("blobs", &["x", "y"], &rows).unwrap();
        (ds, labels)
    }

    #[test]
    fn separable_blobs_reach_high_training_accuracy() {
        let (ds, labels) = blobs(100, 1);
        let clf = fit_classifier(&ds, &labels, 7).unwrap();
        assert!(clf.accuracy(&ds, &labels).unwrap() > 0.99);
        assert!(clf.oob_accuracy().unwrap() > 0.95);
        assert_eq!(clf.n_trees(), 100);
        assert_eq!(clf.features_per_split(), 2); // ceil(sqrt(2))
    }

    #[test]
    fn coin_flip_labels_score_near_chance_on_fresh_rows() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let draw = |rng: &mut ChaCha12Rng, n: usize| {
            let rows: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let labels: Vec<usize> = (0..n).map(|_| usize::from(rng.random::<f64>() > 0.5)).collect();
            (TabularDataset::from_rows("noise", &["a", "b"], &rows).unwrap(), labels)
        };
        let (train, train_labels) = draw(&mut rng, 400);
        let (test, test_labels) = draw(&mut rng, 1000);
        let clf = fit_classifier(&train, &train_labels, 3).unwrap();
        let acc = clf.accuracy(&test, &test_labels).unwrap();
        assert!((acc - 0.5).abs() < 0.05, "null-signal accuracy {acc} too far from 0.5");
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let (ds, _) = blobs(20, 2);
        let single = vec![0usize; ds.rows()];
        assert!(fit_classifier(&ds, &single, 0).is_err());
        let short = vec![0usize; 3];
        assert!(fit_classifier(&ds, &short, 0).is_err());
        let huge = (0..ds.rows()).map(|r| if r == 0 { 100_000 } else { 0 }).collect::<Vec<_>>();
        assert!(fit_classifier(&ds, &huge, 0).is_err());
    }

    #[test]
    fn majority_breaks_ties_toward_the_lower_class() {
        assert_eq!(majority(&[3, 3, 1]), 0);
        assert_eq!(majority(&[0, 2, 2]), 1);
        assert_eq!(majority(&[1, 0, 4]), 2);
    }

    #[test]
    fn fit_is_deterministic_per_seed() {
        let (ds, labels) = blobs(40, 5);
        let a = fit_classifier(&ds, &labels, 11).unwrap();
        let b = fit_classifier(&ds, &labels, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&ds), b.predict(&ds));
    }

    #[test]
    fn predictions_stay_in_the_label_set() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> =
            (0..90).map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
        let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
        let ds = TabularDataset::from_rows("tri", &["a", "b"], &rows).unwrap();
        let clf = fit_classifier(&ds, &labels, 23).unwrap();
        assert_eq!(clf.n_classes(), 3);
        for r in 0..ds.rows() {
            assert!(clf.predict_row(ds.row(r)) < 3);
        }
        // Probes far outside the training range still land in the label set.
        assert!(clf.predict_row(&[1e9, -1e9]) < 3);
    }

    #[test]
    fn whole_test_accuracy_mixes_partition_accuracies() {
        let (ds, labels) = blobs(60, 8);
        // Flip some labels so accuracy is not trivially 1.
        let labels: Vec<usize> =
            labels.iter().enumerate().map(|(i, &c)| if i % 7 == 0 { 1 - c } else { c }).collect();
        let clf = fit_classifier(&ds, &labels, 31).unwrap();
        let n = ds.rows();
        let half: Vec<usize> = (0..n / 2).collect();
        let rest: Vec<usize> = (n / 2..n).collect();
        let acc = |rows: &[usize]| {
            rows.iter().filter(|&&r| clf.predict_row(ds.row(r)) == labels[r]).count() as f64
                / rows.len() as f64
        };
        let whole = clf.accuracy(&ds, &labels).unwrap();
        let mixed =
            (half.len() as f64 * acc(&half) + rest.len() as f64 * acc(&rest)) / n as f64;
        assert!((whole - mixed).abs() < 1e-12);
    }

    /// Interval set whose first `certain` rows are narrow and the rest wide,
    /// with every observation inside its interval.
    fn planted_intervals(n: usize, certain: usize) -> IntervalSet {
        let d = 2;
        let mut lower = Mat::zeros(n, d);
        let mut upper = Mat::zeros(n, d);
        let mut center = Mat::zeros(n, d);
        let mut sigma = Mat::zeros(n, d);
        for r in 0..n {
            let w = if r < certain { 0.2 } else { 2.0 };
            for i in 0..d {
                let c = (r as f64 * 0.01) - 2.0;
                center.set(r, i, c);
                lower.set(r, i, c - w / 2.0);
                upper.set(r, i, c + w / 2.0);
                sigma.set(r, i, w);
            }
        }
        IntervalSet {
            observed: center.clone(),
            lower,
            upper,
            center,
            sigma,
            scores: Mat::zeros(n, d),
            epsilons: vec![1.0; d],
            alpha: 0.05,
            ranges: vec![(-5.0, 5.0); d],
        }
    }

    #[test]
    fn full_coverage_groups_match_the_whole_test() {
        let (ds, labels) = blobs(50, 12);
        let clf = fit_classifier(&ds, &labels, 4).unwrap();
        let report = stratify(&planted_intervals(ds.rows(), 50), 0.5).unwrap();
        let eval = evaluate_stratification(&clf, &ds, &labels, &report, 6).unwrap();
        let last = eval.per_p.last().unwrap();
        assert!((last.p - 1.0).abs() < 1e-12);
        assert_eq!(last.group_size, ds.rows());
        assert_eq!(last.certain, eval.whole_test);
        assert_eq!(last.uncertain, eval.whole_test);
        assert_eq!(last.random_control, eval.whole_test);
        assert!(eval.skipped.is_empty());
    }

    #[test]
    fn random_control_tracks_the_whole_test_baseline() {
        let (ds, labels) = blobs(150, 14);
        // Flip a fifth of the labels so the baseline sits strictly inside (0, 1).
        let labels: Vec<usize> =
            labels.iter().enumerate().map(|(i, &c)| if i % 5 == 0 { 1 - c } else { c }).collect();
        let clf = fit_classifier(&ds, &labels, 41).unwrap();
        let report = stratify(&planted_intervals(ds.rows(), 150), 0.5).unwrap();
        let eval = evaluate_stratification(&clf, &ds, &labels, &report, 21).unwrap();
        let whole = eval.whole_test;
        for row in &eval.per_p {
            if row.group_size < 30 {
                continue; // tiny subsets are too noisy for a moment bound
            }
            let se = (whole * (1.0 - whole) / row.group_size as f64).sqrt();
            assert!(
                (row.random_control - whole).abs() <= 3.0 * se + 1e-12,
                "control at p={} drifted: {} vs {whole}",
                row.p,
                row.random_control
            );
        }
    }

    #[test]
    fn planted_noise_orders_group_accuracies() {
        // Train on cleanly labeled data: class = sign(x0).
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let draw_rows = |rng: &mut ChaCha12Rng, n: usize| -> (Vec<Vec<f64>>, Vec<usize>) {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for i in 0..n {
                let side = if i % 2 == 0 { -1.0 } else { 1.0 };
                let x0 = side * (0.5 + 1.5 * rng.random::<f64>());
                let x1 = rng.random::<f64>() * 2.0 - 1.0;
                rows.push(vec![x0, x1]);
                labels.push(usize::from(side > 0.0));
            }
            (rows, labels)
        };
        let (train_rows, train_labels) = draw_rows(&mut rng, 400);
        let train = TabularDataset::from_rows("train", &["x0", "x1"], &train_rows).unwrap();
        let clf = fit_classifier(&train, &train_labels, 55).unwrap();

        // Test set: rows past `certain` get wide intervals and 40% of their
        // labels flipped, so accuracy should be lower wherever the ranking
        // says "uncertain".
        let n = 400;
        let certain = 200;
        let (test_rows, mut test_labels) = draw_rows(&mut rng, n);
        for (r, label) in test_labels.iter_mut().enumerate() {
            if r >= certain && r % 5 < 2 {
                *label = 1 - *label;
            }
        }
        let test = TabularDataset::from_rows("test", &["x0", "x1"], &test_rows).unwrap();
        let report = stratify(&planted_intervals(n, certain), 0.5).unwrap();
        let eval = evaluate_stratification(&clf, &test, &test_labels, &report, 91).unwrap();

        let ordered =
            eval.per_p.iter().filter(|row| row.certain >= row.uncertain).count();
        assert!(
            ordered as f64 >= 0.8 * eval.per_p.len() as f64,
            "certain ≥ uncertain at only {ordered}/{} fractions",
            eval.per_p.len()
        );
        // The small-p ends of the curves must separate decisively.
        let first = &eval.per_p[0];
        assert!(first.certain > first.uncertain + 0.2);
    }
}
