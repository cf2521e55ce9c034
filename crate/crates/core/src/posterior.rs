//! Post-estimation on posterior draws: expected-value simplexes per draw,
//! credible intervals and coefficient summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::hmc::PosteriorDraws;
use crate::likelihood::EvalContext;
use crate::model::{log_softmax_into, Coefficients, ModelDims};

/// Names for the full coefficient layout of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterLabels {
    pub components: Vec<String>,
    pub mean_columns: Vec<String>,
    pub precision_columns: Vec<String>,
}

impl ParameterLabels {
    pub fn from_context(ctx: &EvalContext) -> Self {
        Self {
            components: ctx.y().component_names().to_vec(),
            mean_columns: ctx.x().column_names().to_vec(),
            precision_columns: ctx.z().column_names().to_vec(),
        }
    }

    /// `component:column` for every β entry (reference rows included), then
    /// `precision:column`.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .components
            .iter()
            .flat_map(|c| self.mean_columns.iter().map(move |col| format!("{c}:{col}")))
            .collect();
        names.extend(self.precision_columns.iter().map(|col| format!("precision:{col}")));
        names
    }
}

/// Expected-value simplexes, one row per draw, at a fixed covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedValueDraws {
    /// `S × C`.
    pub values: DMatrix<f64>,
    pub covariate_label: String,
}

/// `softmax(x βᵀ)` for one coefficient set, reference component included.
pub fn expected_value(coeffs: &Coefficients, x: &[f64]) -> Result<Vec<f64>> {
    check_len("covariate vector", coeffs.dims.p_beta, x.len())?;
    let eta: Vec<f64> = (0..coeffs.dims.components)
        .map(|c| coeffs.beta.row(c).iter().zip(x).map(|(b, v)| b * v).sum())
        .collect();
    simplex_from(&eta)
}

fn simplex_from(eta: &[f64]) -> Result<Vec<f64>> {
    let mut log_mu = vec![0.0; eta.len()];
    log_softmax_into(eta, &mut log_mu)?;
    let mut mu: Vec<f64> = log_mu.iter().map(|l| l.exp()).collect();
    let sum: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= sum);
    Ok(mu)
}

/// Transform every draw to its expected-value simplex at `x`.
pub fn expected_values_per_draw(
    draws: &PosteriorDraws,
    x: &[f64],
    dims: ModelDims,
    covariate_label: impl Into<String>,
) -> Result<ExpectedValueDraws> {
    check_len("free parameter columns", dims.n_free(), draws.dim())?;
    check_len("covariate vector", dims.p_beta, x.len())?;
    let c_n = dims.components;
    let mut values = DMatrix::zeros(draws.n_draws(), c_n);
    let mut eta = vec![0.0; c_n];
    for s in 0..draws.n_draws() {
        let row = draws.draws.row(s);
        for (c, e) in eta.iter_mut().enumerate() {
            *e = match dims.beta_index(c, 0) {
                Some(off) => x.iter().enumerate().map(|(j, v)| v * row[off + j]).sum(),
                None => 0.0,
            };
        }
        for (c, m) in simplex_from(&eta)?.into_iter().enumerate() {
            values[(s, c)] = m;
        }
    }
    Ok(ExpectedValueDraws {
        values,
        covariate_label: covariate_label.into(),
    })
}

/// Divide each row by its sum.
pub fn renormalize_adjustment(raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = raw.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        if let Some(&value) = row.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveEntry { row: i, value });
        }
        let s = row.sum();
        row /= s;
    }
    Ok(out)
}

/// Quantile with linear interpolation between order statistics at
/// position `(n − 1) p` (the inclusive definition).
pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("probability {p} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central interval between the `(1 − level)/2` and `(1 + level)/2`
/// quantiles.
pub fn credible_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("interval level {level} outside (0, 1)")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&sorted, 0.5 * (1.0 - level)),
        quantile_sorted(&sorted, 0.5 * (1.0 + level)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub level: f64,
}

impl SummaryTable {
    pub fn get(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

fn summarize(name: String, samples: &[f64], level: f64) -> Result<SummaryRow> {
    let (lower, upper) = credible_interval(samples, level)?;
    Ok(SummaryRow {
        name,
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        lower,
        upper,
    })
}

/// What [`summarize_fit`] reports.
#[derive(Debug, Clone, PartialEq)]
pub enum SummaryTarget {
    /// Every coefficient; reference rows as fixed zeros.
    Coefficients,
    /// Expected-value components at labelled covariate vectors, named
    /// `label:component`.
    ExpectedValues(Vec<(String, Vec<f64>)>),
}

pub fn summarize_fit(
    draws: &PosteriorDraws,
    dims: ModelDims,
    labels: &ParameterLabels,
    target: &SummaryTarget,
    level: f64,
) -> Result<SummaryTable> {
    check_len("free parameter columns", dims.n_free(), draws.dim())?;
    check_len("component labels", dims.components, labels.components.len())?;
    check_len("mean columns", dims.p_beta, labels.mean_columns.len())?;
    check_len("precision columns", dims.p_gamma, labels.precision_columns.len())?;
    let mut rows = Vec::new();
    match target {
        SummaryTarget::Coefficients => {
            for (c, comp) in labels.components.iter().enumerate() {
                for (j, col) in labels.mean_columns.iter().enumerate() {
                    let name = format!("{comp}:{col}");
                    rows.push(match dims.beta_index(c, j) {
                        Some(k) => summarize(name, &draws.column(k), level)?,
                        None => SummaryRow {
                            name,
                            mean: 0.0,
                            lower: 0.0,
                            upper: 0.0,
                        },
                    });
                }
            }
            for (j, col) in labels.precision_columns.iter().enumerate() {
                let k = dims.gamma_offset() + j;
                rows.push(summarize(format!("precision:{col}"), &draws.column(k), level)?);
            }
        }
        SummaryTarget::ExpectedValues(settings) => {
            for (label, x) in settings {
                let ev = expected_values_per_draw(draws, x, dims, label.clone())?;
                for (c, comp) in labels.components.iter().enumerate() {
                    let col: Vec<f64> = ev.values.column(c).iter().copied().collect();
                    rows.push(summarize(format!("{label}:{comp}"), &col, level)?);
                }
            }
        }
    }
    Ok(SummaryTable { rows, level })
}
