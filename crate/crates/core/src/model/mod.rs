//! Formula parsing, design matrices, link functions and the coefficient layout.

mod coefficients;
mod data;
mod design;
mod formula;
mod link;

pub use coefficients::{Coefficients, ModelDims, ModelSpec, Priors};
pub use data::{Column, DataTable, Value};
pub use design::{build_design_matrix, DesignMatrix, TermEncoding, INTERCEPT};
pub use formula::{parse_formula, FormulaSpec};
pub use link::{alpha_from, linear_predictors, precision_values, softmax, SOFTMAX_RANGE};

pub(crate) use link::log_softmax_into;
