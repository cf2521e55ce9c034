//! Maximum-likelihood (and MAP) point estimation with Wald intervals.

mod fit;
pub mod lbfgs;

pub use fit::{fit_ml, normal_quantile, wald_intervals, IntervalRow, MLFit, MlObjective, MlOptions};
