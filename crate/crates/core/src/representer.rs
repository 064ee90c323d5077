//! Low-dimensional linear representation of the (augmented) feature space.
//!
//! Fitting standardizes every column to zero mean and unit variance
//! (dropping constants), runs a principal component analysis via singular
//! value decomposition, and keeps the top components by explained
//! variance. The default latent width is half the input width, at least
//! one. Component signs are fixed so the largest-magnitude loading of each
//! component is positive, which makes refits on identical data
//! reproducible bit for bit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, StandardizationParams, TabularDataset};
use crate::error::{Error, Result};
use crate::mat::Mat;

/// Fitted standardize-then-project transform into latent space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Representer {
    /// Standardization fitted alongside the projection; its `kept` indices
    /// refer to the original input columns.
    pub standardization: StandardizationParams,
    /// One row per latent dimension, each of length `kept`; orthonormal.
    components: Vec<Vec<f64>>,
    /// Data variance along each component, in component order
    /// (non-increasing).
    explained_variance: Vec<f64>,
    d_input: usize,
    d_latent: usize,
}

/// Fits a representer with the default latent width
/// `max(1, input_width / 2)`.
pub fn fit_representer(ds: &TabularDataset) -> Result<Representer> {
    fit_representer_with_dim(ds, (ds.dims() / 2).max(1))
}

/// Fits a representer with an explicit latent width.
pub fn fit_representer_with_dim(ds: &TabularDataset, d_latent: usize) -> Result<Representer> {
    if d_latent == 0 {
        return Err(Error::Config("latent dimension must be at least 1".into()));
    }
    let (std_ds, params) = standardize(ds, None)?;
    let n = std_ds.rows();
    let k = std_ds.dims();
    if d_latent > k.min(n) {
        return Err(Error::Data(format!(
            "latent dimension {d_latent} exceeds what {n} rows with {k} usable features support"
        )));
    }

    let m = DMatrix::from_row_slice(n, k, std_ds.matrix().values());
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let s = &svd.singular_values;

    // nalgebra does not promise ordered singular values; order explicitly.
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(d_latent);
    let mut explained_variance = Vec::with_capacity(d_latent);
    for &c in idx.iter().take(d_latent) {
        let mut w: Vec<f64> = (0..k).map(|j| v_t[(c, j)]).collect();
        let lead = (0..k)
            .max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()).then(b.cmp(&a)))
            .expect("non-empty component");
        if w[lead] < 0.0 {
            for x in &mut w {
                *x = -*x;
            }
        }
        components.push(w);
        explained_variance.push(s[c] * s[c] / n as f64);
    }

    Ok(Representer {
        standardization: params,
        components,
        explained_variance,
        d_input: ds.dims(),
        d_latent,
    })
}

impl Representer {
    pub fn d_input(&self) -> usize {
        self.d_input
    }

    pub fn d_latent(&self) -> usize {
        self.d_latent
    }

    /// Orthonormal component rows, strongest direction first.
    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Data variance captured by each component.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// Standardizes one full-width input row (selecting the kept columns).
    pub fn standardize_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.d_input {
            return Err(Error::Data(format!(
                "row has {} values, representer expects {}",
                row.len(),
                self.d_input
            )));
        }
        let p = &self.standardization;
        Ok(p.kept.iter().enumerate().map(|(k, &j)| (row[j] - p.means[k]) / p.stds[k]).collect())
    }

    /// Projects one full-width input row into latent space.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let z = self.standardize_row(row)?;
        Ok(self.components.iter().map(|w| dot(w, &z)).collect())
    }

    /// Projects every row of a dataset; returns an `n x d_latent` matrix.
    pub fn transform(&self, ds: &TabularDataset) -> Result<Mat> {
        let mut out = Mat::zeros(ds.rows(), self.d_latent);
        for r in 0..ds.rows() {
            let h = self.transform_row(ds.row(r))?;
            for (c, v) in h.into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    /// Mean squared reconstruction error in standardized coordinates:
    /// project each row, map back through the transposed components, and
    /// average the squared residual across rows.
    pub fn reconstruction_error(&self, ds: &TabularDataset) -> Result<f64> {
        let k = self.standardization.kept.len();
        let mut total = 0.0;
        for r in 0..ds.rows() {
            let z = self.standardize_row(ds.row(r))?;
            let h: Vec<f64> = self.components.iter().map(|w| dot(w, &z)).collect();
            for j in 0..k {
                let back: f64 = self.components.iter().zip(&h).map(|(w, &hc)| w[j] * hc).sum();
                total += (z[j] - back) * (z[j] - back);
            }
        }
        Ok(total / ds.rows() as f64)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
