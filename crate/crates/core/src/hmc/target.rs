use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::likelihood::EvalContext;

/// A differentiable log density on `ℝ^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes `∇ log p(q)` into `grad` and returns `log p(q)`.
    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl LogDensity for EvalContext {
    fn dim(&self) -> usize {
        self.n_free()
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.log_posterior_and_grad(q, grad)
    }
}

/// Multivariate normal target, used to calibrate the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_len("covariance rows", mean.len(), covariance.nrows())?;
        check_len("covariance columns", mean.len(), covariance.ncols())?;
        let precision = covariance
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("covariance is not positive definite".into()))?
            .inverse();
        Ok(Self {
            mean: DVector::from_vec(mean),
            precision,
        })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            precision: DMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(mean: Vec<f64>, variances: &[f64]) -> Result<Self> {
        Self::new(mean, DMatrix::from_diagonal(&DVector::from_column_slice(variances)))
    }
}

impl LogDensity for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len("position", self.dim(), q.len())?;
        let diff = DVector::from_column_slice(q) - &self.mean;
        let g = -(&self.precision * &diff);
        grad.copy_from_slice(g.as_slice());
        Ok(0.5 * diff.dot(&g))
    }
}
