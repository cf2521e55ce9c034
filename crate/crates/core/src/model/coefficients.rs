use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::formula::FormulaSpec;
use crate::error::{check_len, Error, Result};

/// Shape of a model: component count, reference component (0-based) and the
/// widths of the mean and precision designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub components: usize,
    pub reference: usize,
    pub p_beta: usize,
    pub p_gamma: usize,
}

impl ModelDims {
    pub fn new(components: usize, reference: usize, p_beta: usize, p_gamma: usize) -> Result<Self> {
        if components < 2 {
            return Err(Error::Dimension(format!(
                "at least two components required, got {components}"
            )));
        }
        if reference >= components {
            return Err(Error::InvalidConfig(format!(
                "reference component {} outside 1..={components}",
                reference + 1
            )));
        }
        if p_beta == 0 || p_gamma == 0 {
            return Err(Error::Dimension("designs need an intercept column".into()));
        }
        Ok(Self {
            components,
            reference,
            p_beta,
            p_gamma,
        })
    }

    /// `(C − 1)·p_β + p_γ`.
    pub fn n_free(&self) -> usize {
        (self.components - 1) * self.p_beta + self.p_gamma
    }

    /// Free components in packing order.
    pub fn free_components(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.components).filter(move |&c| c != self.reference)
    }

    /// Offset of `β[c, j]` in the free vector, `None` for the reference row.
    pub fn beta_index(&self, component: usize, j: usize) -> Option<usize> {
        if component == self.reference {
            return None;
        }
        let rank = if component > self.reference {
            component - 1
        } else {
            component
        };
        Some(rank * self.p_beta + j)
    }

    pub fn gamma_offset(&self) -> usize {
        (self.components - 1) * self.p_beta
    }

    /// Labels `component:column` for β and `precision:column` for γ, in packing order.
    pub fn free_parameter_names(
        &self,
        component_names: &[String],
        mean_columns: &[String],
        precision_columns: &[String],
    ) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_free());
        for c in self.free_components() {
            for col in mean_columns {
                names.push(format!("{}:{col}", component_names[c]));
            }
        }
        for col in precision_columns {
            names.push(format!("precision:{col}"));
        }
        names
    }
}

/// Mean coefficients `β` (`C × p_β`, reference row zero) and precision coefficients `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub beta: DMatrix<f64>,
    pub gamma: Vec<f64>,
    pub dims: ModelDims,
}

impl Coefficients {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            beta: DMatrix::zeros(dims.components, dims.p_beta),
            gamma: vec![0.0; dims.p_gamma],
            dims,
        }
    }

    /// Build from full matrices; the reference row must already be zero.
    pub fn new(beta: DMatrix<f64>, gamma: Vec<f64>, reference: usize) -> Result<Self> {
        let dims = ModelDims::new(beta.nrows(), reference, beta.ncols(), gamma.len())?;
        if beta.row(reference).iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidConfig(
                "reference row of beta must be zero".into(),
            ));
        }
        Ok(Self { beta, gamma, dims })
    }

    /// Flatten to `β` rows for `c ≠ reference` (ascending, row-major) then `γ`.
    pub fn pack_free(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dims.n_free());
        for c in self.dims.free_components() {
            out.extend(self.beta.row(c).iter());
        }
        out.extend_from_slice(&self.gamma);
        out
    }

    /// Inverse of [`Coefficients::pack_free`].
    pub fn unpack_free(free: &[f64], dims: ModelDims) -> Result<Self> {
        check_len("free parameter vector", dims.n_free(), free.len())?;
        let mut beta = DMatrix::zeros(dims.components, dims.p_beta);
        for c in dims.free_components() {
            for j in 0..dims.p_beta {
                beta[(c, j)] = free[dims.beta_index(c, j).unwrap()];
            }
        }
        Ok(Self {
            beta,
            gamma: free[dims.gamma_offset()..].to_vec(),
            dims,
        })
    }
}

/// Prior standard deviations of the zero-mean normal priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub sd_beta: f64,
    pub sd_theta: f64,
}

impl Priors {
    pub fn new(sd_beta: f64, sd_theta: f64) -> Result<Self> {
        for sd in [sd_beta, sd_theta] {
            if !(sd > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "prior standard deviations must be positive, got {sd}"
                )));
            }
        }
        Ok(Self { sd_beta, sd_theta })
    }

    /// Effectively flat priors, for maximum likelihood.
    pub fn flat() -> Self {
        Self {
            sd_beta: f64::INFINITY,
            sd_theta: f64::INFINITY,
        }
    }
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            sd_beta: 5.0,
            sd_theta: 5.0,
        }
    }
}

/// A formula together with its identifiability and prior configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub formula: FormulaSpec,
    /// 0-based index of the component whose coefficient row is pinned to zero.
    pub reference: usize,
    pub priors: Priors,
}

impl ModelSpec {
    pub fn varying_precision(&self) -> bool {
        !self.formula.has_common_precision()
    }
}
