//! D-vine construction over a dataset and sampling from the fitted model.
//!
//! The vine arranges variables on a path. Tree `t` (0-indexed) holds one
//! fitted pair copula per edge `j`, coupling path positions `j` and
//! `j + t + 1` given the variables between them; the conditional
//! pseudo-observations feeding each level come from the h-functions of the
//! level below. Sampling inverts that construction row by row (inverse
//! Rosenblatt transform) and maps the resulting uniforms back through the
//! empirical marginals, so every sampled value lies inside the observed
//! range of its column.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::copula::family::{clamp_unit, fit_pair_copula, PairCopula};
use crate::copula::marginal::{fit_marginal, EmpiricalMarginal};
use crate::data::{FeatureColumn, TabularDataset};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::stats;

/// How many fresh uniforms to try for one sampled coordinate before giving
/// up on numeric grounds.
const SAMPLE_RETRIES: usize = 20;

/// A fitted D-vine: path order, pair copulas per tree level, and the
/// empirical marginals that connect the unit cube to the data scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VineModel {
    /// `order[k]` is the original column index at path position `k`.
    pub order: Vec<usize>,
    /// `trees[t][j]` couples path positions `(j, j + t + 1)`.
    pub trees: Vec<Vec<PairCopula>>,
    /// Marginal transforms, indexed by path position.
    pub marginals: Vec<EmpiricalMarginal>,
    /// Schema of the training data, in original column order.
    pub columns: Vec<FeatureColumn>,
    /// Number of tree levels actually fitted; levels beyond are implicit
    /// independence copulas.
    pub depth: usize,
    /// Training rows the model was fitted on.
    pub n_train: usize,
    dataset_name: String,
}

/// Fits a D-vine to every column of `ds`.
///
/// `truncation` caps the number of tree levels; deeper levels are treated
/// as independence. With `reorder` the path is chosen greedily by absolute
/// Kendall tau (strongest pair first, then extend whichever end has the
/// strongest remaining link); otherwise columns keep their dataset order.
pub fn fit_dvine(
    ds: &TabularDataset,
    truncation: Option<usize>,
    reorder: bool,
) -> Result<VineModel> {
    let d = ds.dims();
    let n = ds.rows();
    if d < 2 {
        return Err(Error::Data(format!(
            "a vine needs at least 2 columns, dataset '{}' has {d}",
            ds.name
        )));
    }
    if n < 10 {
        return Err(Error::Data(format!(
            "a vine needs at least 10 rows, dataset '{}' has {n}",
            ds.name
        )));
    }

    let raw_columns: Vec<Vec<f64>> = (0..d).map(|c| ds.column(c)).collect();
    let order =
        if reorder { max_dependence_path(&raw_columns) } else { (0..d).collect::<Vec<_>>() };

    let mut marginals = Vec::with_capacity(d);
    let mut pseudo: Vec<Vec<f64>> = Vec::with_capacity(d);
    for &col in &order {
        let m = fit_marginal(&raw_columns[col])?;
        pseudo.push(raw_columns[col].iter().map(|&x| m.cdf(x)).collect());
        marginals.push(m);
    }

    let depth = truncation.unwrap_or(d - 1).min(d - 1);
    // a[j] carries F(x_j | between), b[j] carries F(x_{j+t+1} | between)
    // for the current level t.
    let mut a: Vec<Vec<f64>> = pseudo[..d - 1].to_vec();
    let mut b: Vec<Vec<f64>> = pseudo[1..].to_vec();
    let mut trees = Vec::with_capacity(depth);
    for t in 0..depth {
        let width = d - 1 - t;
        let mut edges = Vec::with_capacity(width);
        for j in 0..width {
            edges.push(fit_pair_copula(&a[j], &b[j])?);
        }
        if t + 1 < depth {
            let mut next_a = Vec::with_capacity(width - 1);
            let mut next_b = Vec::with_capacity(width - 1);
            for j in 0..width - 1 {
                next_a.push(
                    a[j].iter().zip(&b[j]).map(|(&u, &v)| edges[j].h(u, v)).collect::<Vec<f64>>(),
                );
                next_b.push(
                    b[j + 1]
                        .iter()
                        .zip(&a[j + 1])
                        .map(|(&u, &v)| edges[j + 1].h(u, v))
                        .collect::<Vec<f64>>(),
                );
            }
            a = next_a;
            b = next_b;
        }
        trees.push(edges);
    }

    Ok(VineModel {
        order,
        trees,
        marginals,
        columns: ds.columns.clone(),
        depth,
        n_train: n,
        dataset_name: ds.name.clone(),
    })
}

impl VineModel {
    /// Pair copula at tree level `t`, edge `j`; independence beyond the
    /// fitted depth.
    fn edge(&self, t: usize, j: usize) -> PairCopula {
        self.trees.get(t).map_or_else(PairCopula::independence, |level| level[j])
    }
}

/// Draws `n` rows from a fitted vine.
///
/// Each row starts from independent uniforms and walks the inverse
/// Rosenblatt transform down the tree levels; coordinates that come back
/// non-finite are retried with fresh uniforms a bounded number of times.
/// Output columns keep the training schema and order.
pub fn sample_dvine(model: &VineModel, n: usize, seed: u64) -> Result<TabularDataset> {
    let d = model.order.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut values = Mat::zeros(n, d);

    // l[s][e] = F(x_s | x_{s+1..e}), r[s][e] = F(x_e | x_{s..e-1}), both in
    // path coordinates; only entries with s <= e are used.
    let mut l = vec![vec![0.0; d]; d];
    let mut r = vec![vec![0.0; d]; d];
    for row in 0..n {
        let mut u = vec![0.0; d];
        for i in 0..d {
            let mut z = f64::NAN;
            for _ in 0..SAMPLE_RETRIES {
                z = clamp_unit(rng.random::<f64>());
                for t in (1..=i.min(model.depth)).rev() {
                    let s = i - t;
                    z = model.edge(t - 1, s).h_inv(z, l[s][i - 1]);
                }
                if z.is_finite() {
                    break;
                }
            }
            if !z.is_finite() {
                return Err(Error::Numeric(format!(
                    "vine sampling produced non-finite values at row {row}, position {i} \
                     after {SAMPLE_RETRIES} retries"
                )));
            }
            u[i] = z;
            l[i][i] = z;
            r[i][i] = z;
            for t in 1..=i {
                let s = i - t;
                let e = model.edge(t - 1, s);
                let l_new = e.h(l[s][i - 1], r[s + 1][i]);
                let r_new = e.h(r[s + 1][i], l[s][i - 1]);
                l[s][i] = l_new;
                r[s][i] = r_new;
            }
        }
        for (k, &z) in u.iter().enumerate() {
            values.set(row, model.order[k], model.marginals[k].quantile(z));
        }
    }

    TabularDataset::new(
        &format!("{}-synthetic", model.dataset_name),
        model.columns.clone(),
        values,
    )
}

/// Greedy path through the columns maximizing absolute Kendall tau:
/// start from the strongest pair, then repeatedly attach the unused column
/// with the strongest link to either end.
fn max_dependence_path(columns: &[Vec<f64>]) -> Vec<usize> {
    let d = columns.len();
    let mut tau = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let t = stats::kendall_tau(&columns[i], &columns[j]).abs();
            tau[i][j] = t;
            tau[j][i] = t;
        }
    }
    let (mut bi, mut bj, mut best) = (0, 1, f64::NEG_INFINITY);
    for (i, row) in tau.iter().enumerate() {
        for (j, &t) in row.iter().enumerate().skip(i + 1) {
            if t > best {
                best = t;
                bi = i;
                bj = j;
            }
        }
    }
    let mut path = std::collections::VecDeque::from([bi, bj]);
    let mut used = vec![false; d];
    used[bi] = true;
    used[bj] = true;
    for _ in 2..d {
        let front = *path.front().unwrap();
        let back = *path.back().unwrap();
        let best_for = |anchor: usize| {
            (0..d)
                .filter(|&c| !used[c])
                .map(|c| (tau[anchor][c], c))
                .max_by(|x, y| x.0.total_cmp(&y.0))
                .unwrap()
        };
        let (tf, cf) = best_for(front);
        let (tb, cb) = best_for(back);
        if tf > tb {
            path.push_front(cf);
            used[cf] = true;
        } else {
            path.push_back(cb);
            used[cb] = true;
        }
    }
    path.into()
}
