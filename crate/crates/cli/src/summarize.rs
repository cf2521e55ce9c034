//! Recompute summaries from a finished run's artifacts.

use std::path::Path;

use dirreg_core::hmc::PosteriorDraws;
use dirreg_core::ml::normal_quantile;
use dirreg_core::model::{Coefficients, ModelDims};
use dirreg_core::posterior::{expected_value, ParameterLabels};

use crate::artifacts::{read_draws_csv, read_fit_json, DataSummary, ExpectedValueRow, FitReport, MlReport, SummaryLine};
use crate::error::{CliError, Result};
use crate::run::{bayes_expected_values, bayes_summary_lines};

/// A run reloaded from disk.
#[derive(Debug, Clone)]
pub struct Restored {
    pub report: FitReport,
    pub data: DataSummary,
    pub dims: ModelDims,
    pub labels: ParameterLabels,
    /// Present when the run sampled and wrote `draws.csv`.
    pub draws: Option<PosteriorDraws>,
}

impl Restored {
    pub fn ml_coefficients(&self) -> Result<Option<Coefficients>> {
        match &self.report.ml {
            Some(ml) => Ok(Some(Coefficients::unpack_free(&ml.free, self.dims)?)),
            None => Ok(None),
        }
    }
}

pub fn restore(dir: &Path) -> Result<Restored> {
    let report = read_fit_json(dir)?;
    let data = match (&report.data, &report.error) {
        (Some(d), _) => d.clone(),
        (None, Some(e)) => {
            return Err(CliError::MissingArtifacts(format!(
                "run in {} failed ({}): {}",
                dir.display(),
                e.code,
                e.message
            )))
        }
        (None, None) => return Err(CliError::MissingArtifacts("fit.json has no data section".into())),
    };
    let dims = ModelDims::new(
        data.components.len(),
        data.reference_index - 1,
        data.mean_columns.len(),
        data.precision_columns.len(),
    )?;
    let labels = ParameterLabels {
        components: data.components.clone(),
        mean_columns: data.mean_columns.clone(),
        precision_columns: data.precision_columns.clone(),
    };
    let draws = match &report.bayes {
        Some(bayes) => {
            let (names, matrix, chain_ids) = read_draws_csv(dir)?;
            if names != data.parameter_names {
                return Err(CliError::Config("draws.csv columns do not match fit.json".into()));
            }
            Some(PosteriorDraws {
                draws: matrix,
                chain_ids,
                divergence_count: bayes.divergence_count.clone(),
                treedepth_saturation_count: bayes.treedepth_saturation_count.clone(),
                step_sizes: bayes.step_sizes.clone(),
                mass_diag: bayes.mass_diag.clone(),
                seed: report.seed,
                mean_accept: bayes.mean_accept.clone(),
            })
        }
        None => None,
    };
    Ok(Restored {
        report,
        data,
        dims,
        labels,
        draws,
    })
}

fn ml_lines(ml: &MlReport, level: f64) -> Vec<SummaryLine> {
    let z = normal_quantile(0.5 * (1.0 + level));
    ml.coefficients
        .iter()
        .map(|c| {
            let interval = c.std_error.map(|se| (c.estimate - z * se, c.estimate + z * se));
            SummaryLine {
                panel: "ml",
                parameter: c.name.clone(),
                lower: interval.map(|i| i.0),
                estimate: c.estimate,
                upper: interval.map(|i| i.1),
            }
        })
        .collect()
}

/// Coefficient and expected-value tables at `level` (the run's level when
/// absent), in the same layout `fit` writes them.
pub fn summarize(restored: &Restored, level: Option<f64>) -> Result<(Vec<SummaryLine>, Vec<ExpectedValueRow>)> {
    let level = level.unwrap_or(restored.report.config.level);
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Config(format!("level {level} outside (0, 1)")));
    }
    let mut lines = Vec::new();
    let mut expected = Vec::new();
    if let (Some(ml), Some(coeffs)) = (&restored.report.ml, restored.ml_coefficients()?) {
        lines.extend(ml_lines(ml, level));
        for s in &restored.data.settings {
            let mu = expected_value(&coeffs, &s.x)?;
            for (comp, m) in restored.labels.components.iter().zip(mu) {
                expected.push(ExpectedValueRow {
                    setting: s.label.clone(),
                    method: "ml",
                    component: comp.clone(),
                    estimate: m,
                    interval: None,
                });
            }
        }
    }
    if let Some(draws) = &restored.draws {
        lines.extend(bayes_summary_lines(draws, restored.dims, &restored.labels, level)?);
        expected.extend(bayes_expected_values(
            draws,
            restored.dims,
            &restored.labels,
            &restored.data.settings,
            level,
        )?);
    }
    Ok((lines, expected))
}
