//! Per-feature confidence intervals for tabular data.
//!
//! The library builds calibrated, instance-specific intervals around every
//! feature of a tabular dataset and uses them to grade test instances:
//!
//! 1. [`copula`] fits a D-vine to the training data and samples synthetic
//!    rows, enlarging the training set without touching the test set.
//! 2. [`representer`] compresses the augmented data to a low-dimensional
//!    latent space with PCA.
//! 3. [`conformal`] trains per-feature regression trees on the latents,
//!    learns residual-scale normalizers, and calibrates critical scores so
//!    the resulting intervals carry a finite-sample coverage guarantee.
//! 4. [`stratify`] turns intervals into inconsistency flags and
//!    range-normalized width scores, ranking instances from certain to
//!    uncertain.
//! 5. [`metrics`] scores interval quality (coverage, deficit, excess) and
//!    the downstream accuracy gap between certain and uncertain groups.
//!
//! [`pipeline`] wires the stages together behind one fit/predict API, and
//! [`synth`] provides the correlated-Gaussian benchmark generator and
//! perturbation harness used by the evaluation suite.

pub mod conformal;
pub mod copula;
pub mod data;
pub mod error;
pub mod forest;
pub mod mat;
pub mod metrics;
pub mod pipeline;
pub mod representer;
pub mod stats;
pub mod stratify;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
