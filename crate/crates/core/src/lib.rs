//! Dirichlet regression with a softmax mean link and a log-linear precision,
//! fitted by maximum likelihood or sampled with NUTS.

pub mod composition;
pub mod error;
pub mod hmc;
pub mod likelihood;
pub mod ml;
pub mod model;
pub mod posterior;
pub mod simulate;
pub mod special;

pub use composition::{CompositionMatrix, DirichletParams};
pub use error::{Error, Result};
pub use likelihood::{EvalContext, LogDensityResult};
pub use ml::{fit_ml, wald_intervals, IntervalRow, MLFit, MlObjective, MlOptions};
pub use model::{Coefficients, DesignMatrix, FormulaSpec, ModelDims, ModelSpec, Priors};
pub use hmc::{run_chains, Diagnostics, PosteriorDraws, SamplerConfig};
pub use posterior::{
    credible_interval, expected_values_per_draw, renormalize_adjustment, summarize_fit, ExpectedValueDraws,
    ParameterLabels, SummaryRow, SummaryTable, SummaryTarget,
};
