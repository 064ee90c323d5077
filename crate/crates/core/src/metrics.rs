//! Interval-quality metrics and the downstream performance-improvement
//! score.
//!
//! Deficit measures what coverage failures cost: for observations outside
//! their interval, the distance to the nearest bound (zero when inside).
//! Excess measures wasted width: for observations inside, the distance to
//! the nearest bound (zero when outside). Both are averaged over all
//! (row, feature) cells, so full coverage forces deficit exactly to zero
//! and zero coverage forces excess exactly to zero.
//!
//! The model performance improvement (MPI) summarizes how well
//! uncertainty ranks rows for a downstream task: over group fractions
//! p = 0.05, 0.10, ..., 1.00 it averages the accuracy gap between the p
//! most certain and p most uncertain rows. A positive MPI means certain
//! rows are systematically easier for the downstream model.

use serde::{Deserialize, Serialize};

use crate::conformal::IntervalSet;
use crate::error::{Error, Result};
use crate::stratify::StratificationReport;

/// Coverage, deficit, and excess for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureQuality {
    pub coverage: f64,
    pub deficit: f64,
    pub excess: f64,
}

/// Pooled interval quality with a per-feature breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalQuality {
    /// Fraction of covered (row, feature) cells.
    pub coverage: f64,
    /// Mean distance from uncovered observations to their nearest bound,
    /// averaged over all cells.
    pub deficit: f64,
    /// Mean slack between covered observations and their nearest bound,
    /// averaged over all cells.
    pub excess: f64,
    pub per_feature: Vec<FeatureQuality>,
}

/// Evaluates interval quality over every cell of an interval set.
pub fn interval_quality(iv: &IntervalSet) -> Result<IntervalQuality> {
    let n = iv.rows();
    let d = iv.dims();
    if n == 0 || d == 0 {
        return Err(Error::Data("cannot score an empty interval set".into()));
    }
    let mut per_feature = Vec::with_capacity(d);
    let (mut cov_sum, mut def_sum, mut exc_sum) = (0.0, 0.0, 0.0);
    for i in 0..d {
        let (mut hits, mut deficit, mut excess) = (0usize, 0.0, 0.0);
        for r in 0..n {
            let x = iv.observed.get(r, i);
            let (l, u) = (iv.lower.get(r, i), iv.upper.get(r, i));
            if x >= l && x <= u {
                hits += 1;
                excess += (x - l).min(u - x);
            } else {
                deficit += (x - l).abs().min((x - u).abs());
            }
        }
        let fq = FeatureQuality {
            coverage: hits as f64 / n as f64,
            deficit: deficit / n as f64,
            excess: excess / n as f64,
        };
        cov_sum += fq.coverage;
        def_sum += fq.deficit;
        exc_sum += fq.excess;
        per_feature.push(fq);
    }
    Ok(IntervalQuality {
        coverage: cov_sum / d as f64,
        deficit: def_sum / d as f64,
        excess: exc_sum / d as f64,
        per_feature,
    })
}

/// Which stratified group a downstream accuracy is being requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    Certain,
    Uncertain,
}

/// MPI result: the averaged gap plus the per-fraction evaluations and any
/// fractions the callback declined.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpiOutcome {
    pub mpi: f64,
    /// (p, accuracy on certain group, accuracy on uncertain group).
    pub evaluated: Vec<(f64, f64, f64)>,
    /// Fractions where the callback returned no accuracy.
    pub skipped: Vec<f64>,
}

/// Computes the model performance improvement over fractions
/// 0.05, 0.10, ..., 1.00.
///
/// `accuracy` receives the group kind and the row indices of that group
/// (certain groups are ranking prefixes, uncertain groups suffixes; above
/// p = 0.5 they overlap by construction). Returning `None` for either
/// group skips that fraction; at least one fraction must be evaluable.
pub fn mpi(
    report: &StratificationReport,
    mut accuracy: impl FnMut(GroupKind, &[usize]) -> Option<f64>,
) -> Result<MpiOutcome> {
    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    for k in 1..=20 {
        let p = k as f64 * 0.05;
        let m = report.group_size(p);
        let cert = report.most_certain(m);
        let unc = report.most_uncertain(m);
        match (accuracy(GroupKind::Certain, cert), accuracy(GroupKind::Uncertain, unc)) {
            (Some(a_cert), Some(a_unc)) => evaluated.push((p, a_cert, a_unc)),
            _ => skipped.push(p),
        }
    }
    if evaluated.is_empty() {
        return Err(Error::Data(
            "no group fraction could be evaluated for the improvement score".into(),
        ));
    }
    let mpi = evaluated.iter().map(|(_, c, u)| c - u).sum::<f64>() / evaluated.len() as f64;
    Ok(MpiOutcome { mpi, evaluated, skipped })
}
