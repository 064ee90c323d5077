//! D-vine copula: empirical marginals, four pair-copula families, vine
//! fitting over conditional pseudo-observations, and inverse-Rosenblatt
//! sampling.
//!
//! The vine factorizes a d-dimensional dependence structure into bivariate
//! copulas along a path: tree 1 couples consecutive variables, tree t
//! couples variables t apart conditioned on everything between them. Each
//! bivariate edge gets the best of Gaussian, Frank, Clayton, or Gumbel by
//! maximum likelihood, with an independence fallback.

pub mod family;
pub mod marginal;
pub mod vine;

pub use family::{fit_pair_copula, Family, PairCopula};
pub use marginal::{fit_marginal, EmpiricalMarginal};
pub use vine::{fit_dvine, sample_dvine, VineModel};
