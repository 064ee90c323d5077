//! Empirical marginal transform between data scale and the unit interval.
//!
//! Fitting stores the sorted sample with plotting positions (k - 0.5) / n.
//! The cdf linearly interpolates those positions and the quantile inverts
//! them, so transforming a column and mapping back reproduces the sample.
//! Probabilities are clamped to [0.5/n, 1 - 0.5/n]: the transform never
//! emits 0 or 1, and the quantile never extrapolates beyond the observed
//! minimum and maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distinct-value count below which a fitted marginal is flagged as too
/// coarse for a smooth probability transform.
const LOW_RESOLUTION_DISTINCT: usize = 10;

/// Piecewise-linear empirical cdf/quantile pair for one column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalMarginal {
    /// Sample values in ascending order, duplicates retained.
    xs: Vec<f64>,
    /// Plotting position (k - 0.5) / n for each sorted sample value.
    us: Vec<f64>,
    /// True when the sample had fewer than 10 distinct values.
    low_resolution: bool,
}

/// Fits an empirical marginal to a column of finite values.
///
/// Columns with fewer than 10 distinct values are still fitted but come
/// back flagged via [`EmpiricalMarginal::low_resolution`].
pub fn fit_marginal(values: &[f64]) -> Result<EmpiricalMarginal> {
    if values.is_empty() {
        return Err(Error::Data("cannot fit a marginal to an empty column".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value {bad} in marginal input")));
    }
    let mut xs = values.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let us: Vec<f64> = (0..xs.len()).map(|k| (k as f64 + 0.5) / n).collect();
    let mut distinct = 1usize;
    for w in xs.windows(2) {
        if w[1] > w[0] {
            distinct += 1;
        }
    }
    Ok(EmpiricalMarginal { xs, us, low_resolution: distinct < LOW_RESOLUTION_DISTINCT })
}

impl EmpiricalMarginal {
    /// Probability transform: data scale to (0, 1), clamped to the
    /// plotting-position range.
    pub fn cdf(&self, x: f64) -> f64 {
        interp_leftmost(&self.xs, &self.us, x)
    }

    /// Quantile transform: (0, 1) back to the data scale, clamped to the
    /// observed sample range.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(self.us[0], self.us[self.us.len() - 1]);
        interp_leftmost(&self.us, &self.xs, u)
    }

    /// Smallest observed sample value.
    pub fn min(&self) -> f64 {
        self.xs[0]
    }

    /// Largest observed sample value.
    pub fn max(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Whether the fitted sample had fewer than 10 distinct values.
    pub fn low_resolution(&self) -> bool {
        self.low_resolution
    }
}

/// Piecewise-linear interpolation of `q` over the knots `(grid, vals)`,
/// holding the end values outside the grid. `grid` must be ascending; on a
/// run of equal grid values the leftmost knot wins.
fn interp_leftmost(grid: &[f64], vals: &[f64], q: f64) -> f64 {
    let n = grid.len();
    let i = grid.partition_point(|g| *g < q);
    if i == n {
        return vals[n - 1];
    }
    if grid[i] == q || i == 0 {
        return vals[i];
    }
    let (g0, g1) = (grid[i - 1], grid[i]);
    let t = (q - g0) / (g1 - g0);
    vals[i - 1] + t * (vals[i] - vals[i - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn four_point_sample_has_symmetric_positions() {
        let m = fit_marginal(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        // Positions are 1/8, 3/8, 5/8, 7/8; the midpoint maps to 0.5.
        assert_abs_diff_eq!(m.cdf(1.0), 0.125);
        assert_abs_diff_eq!(m.cdf(2.5), 0.5);
        assert_abs_diff_eq!(m.cdf(4.0), 0.875);
        assert_abs_diff_eq!(m.quantile(0.5), 2.5);
    }

    #[test]
    fn cdf_clamps_outside_sample_range() {
        let m = fit_marginal(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(m.cdf(-100.0), 0.1);
        assert_abs_diff_eq!(m.cdf(100.0), 0.9);
        assert_abs_diff_eq!(m.quantile(0.0), 0.0);
        assert_abs_diff_eq!(m.quantile(1.0), 4.0);
    }

    #[test]
    fn roundtrip_recovers_sample_values() {
        let vals: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 * 0.31 - 4.0).collect();
        let m = fit_marginal(&vals).unwrap();
        for &x in &vals {
            assert_abs_diff_eq!(m.quantile(m.cdf(x)), x, epsilon = 1e-9);
        }
    }

    #[test]
    fn ties_roundtrip_through_shared_position() {
        let m = fit_marginal(&[1.0, 2.0, 2.0, 2.0, 3.0]).unwrap();
        let u = m.cdf(2.0);
        assert_abs_diff_eq!(m.quantile(u), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn low_resolution_flag_tracks_distinct_count() {
        let coarse: Vec<f64> = (0..40).map(|i| (i % 5) as f64).collect();
        assert!(fit_marginal(&coarse).unwrap().low_resolution());
        let fine: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(!fit_marginal(&fine).unwrap().low_resolution());
    }

    #[test]
    fn rejects_empty_and_non_finite_input() {
        assert!(fit_marginal(&[]).is_err());
        assert!(fit_marginal(&[1.0, f64::NAN]).is_err());
    }
}
