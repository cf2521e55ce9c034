//! The `fit` pipeline: ingest, build designs, fit, write artifacts.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use dirreg_core::hmc::{run_chains, Diagnostics, PosteriorDraws};
use dirreg_core::ml::{fit_ml, wald_intervals, MLFit, MlOptions};
use dirreg_core::model::{build_design_matrix, parse_formula, FormulaSpec, ModelDims};
use dirreg_core::posterior::{expected_value, summarize_fit, ParameterLabels, SummaryTarget};
use dirreg_core::EvalContext;

use crate::artifacts::{
    finite, write_draws_csv, write_expected_values_csv, write_fit_json, write_summary_csv, BayesReport,
    CovariateSetting, DataSummary, ErrorReport, ExpectedValueRow, FitReport, MlCoefficient, MlReport,
    ParameterDiagnostics, Status, SummaryLine, FORMAT_VERSION,
};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, Ingested, ResponseSelector};

/// Split-R̂ above this marks the run as failed diagnostics.
pub const RHAT_THRESHOLD: f64 = 1.05;

/// Data and model ready to fit.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub formula: FormulaSpec,
    pub ingested: Ingested,
    pub ctx: EvalContext,
    pub labels: ParameterLabels,
    pub settings: Vec<CovariateSetting>,
    /// Index into `settings` for every observation.
    pub setting_of_row: Vec<usize>,
}

impl Prepared {
    pub fn dims(&self) -> ModelDims {
        self.ctx.dims()
    }

    pub fn data_summary(&self) -> DataSummary {
        let dims = self.dims();
        DataSummary {
            ingest: self.ingested.report,
            components: self.labels.components.clone(),
            reference: self.labels.components[dims.reference].clone(),
            reference_index: dims.reference + 1,
            mean_columns: self.labels.mean_columns.clone(),
            precision_columns: self.labels.precision_columns.clone(),
            parameter_names: self.ctx.parameter_names(),
            settings: self.settings.clone(),
        }
    }
}

/// Component name, or 1-based index, to a 0-based index; the last
/// component when absent.
pub fn resolve_reference(reference: Option<&str>, components: &[String]) -> Result<usize> {
    let Some(r) = reference else {
        return Ok(components.len() - 1);
    };
    if let Some(i) = components.iter().position(|c| c == r) {
        return Ok(i);
    }
    match r.parse::<usize>() {
        Ok(i) if (1..=components.len()).contains(&i) => Ok(i - 1),
        _ => Err(CliError::Config(format!(
            "reference `{r}` is neither a component ({}) nor an index in 1..={}",
            components.join(", "),
            components.len()
        ))),
    }
}

fn setting_label(formula: &FormulaSpec, ingested: &Ingested, row: usize) -> String {
    if formula.mean_terms.is_empty() {
        return dirreg_core::model::INTERCEPT.to_string();
    }
    formula
        .mean_terms
        .iter()
        .map(|t| {
            let value = ingested
                .covariates
                .column(t)
                .and_then(|c| c.value(row))
                .map(|v| v.to_string())
                .unwrap_or_default();
            format!("{t}={value}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Distinct mean-design rows in order of first appearance.
fn covariate_settings(formula: &FormulaSpec, ingested: &Ingested, ctx: &EvalContext) -> (Vec<CovariateSetting>, Vec<usize>) {
    let mut settings: Vec<CovariateSetting> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut of_row = Vec::with_capacity(ctx.n_obs());
    for i in 0..ctx.n_obs() {
        let x = ctx.x().row(i);
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let k = *index.entry(key).or_insert_with(|| {
            settings.push(CovariateSetting {
                label: setting_label(formula, ingested, i),
                x,
                n_obs: 0,
            });
            settings.len() - 1
        });
        settings[k].n_obs += 1;
        of_row.push(k);
    }
    (settings, of_row)
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let formula = parse_formula(&config.formula)?;
    let selector = match &config.response {
        Some(cols) => ResponseSelector::Columns(cols.clone()),
        None => ResponseSelector::Prefix(formula.response.clone()),
    };
    let mut covariates: Vec<String> = Vec::new();
    for t in formula.mean_terms.iter().chain(&formula.precision_terms) {
        if !covariates.contains(t) {
            covariates.push(t.clone());
        }
    }
    let ingested = ingest_csv(&config.input, &selector, &covariates)?;
    let x = build_design_matrix(&formula.mean_terms, &ingested.covariates)?;
    let z = build_design_matrix(&formula.precision_terms, &ingested.covariates)?;
    let reference = resolve_reference(config.reference.as_deref(), ingested.y.component_names())?;
    let ctx = EvalContext::new(ingested.y.clone(), x, z, reference, config.priors()?)?;
    let labels = ParameterLabels::from_context(&ctx);
    let (settings, setting_of_row) = covariate_settings(&formula, &ingested, &ctx);
    Ok(Prepared {
        formula,
        ingested,
        ctx,
        labels,
        settings,
        setting_of_row,
    })
}

fn ml_report(fit: &MLFit, labels: &ParameterLabels, level: f64) -> Result<MlReport> {
    let dims = fit.coefficients.dims;
    let intervals = match fit.std_errors {
        Some(_) => Some(wald_intervals(fit, level)?),
        None => None,
    };
    let mut coefficients = Vec::new();
    for (i, name) in labels.coefficient_names().into_iter().enumerate() {
        let k = if i < dims.components * dims.p_beta {
            dims.beta_index(i / dims.p_beta, i % dims.p_beta)
        } else {
            Some(dims.gamma_offset() + i - dims.components * dims.p_beta)
        };
        let (estimate, std_error) = match k {
            Some(k) => (fit.free[k], fit.std_errors.as_ref().map(|se| se[k])),
            None => (0.0, Some(0.0)),
        };
        coefficients.push(MlCoefficient {
            name,
            estimate,
            std_error,
            lower: intervals.as_ref().map(|r| r[i].lower),
            upper: intervals.as_ref().map(|r| r[i].upper),
        });
    }
    Ok(MlReport {
        converged: fit.converged,
        iterations: fit.iterations,
        log_likelihood: fit.log_likelihood_at_max,
        gradient_max_norm: fit.gradient_max_norm,
        hessian_condition: finite(fit.hessian_condition),
        hessian_asymmetry: fit.hessian_asymmetry,
        diagnostic: fit.diagnostic.clone(),
        coefficients,
        free: fit.free.clone(),
    })
}

fn ml_expected_values(fit: &MLFit, labels: &ParameterLabels, settings: &[CovariateSetting]) -> Result<Vec<ExpectedValueRow>> {
    let mut rows = Vec::new();
    for s in settings {
        let mu = expected_value(&fit.coefficients, &s.x)?;
        for (comp, m) in labels.components.iter().zip(mu) {
            rows.push(ExpectedValueRow {
                setting: s.label.clone(),
                method: "ml",
                component: comp.clone(),
                estimate: m,
                interval: None,
            });
        }
    }
    Ok(rows)
}

/// Posterior coefficient lines for `summary.csv`.
pub fn bayes_summary_lines(
    draws: &PosteriorDraws,
    dims: ModelDims,
    labels: &ParameterLabels,
    level: f64,
) -> Result<Vec<SummaryLine>> {
    let table = summarize_fit(draws, dims, labels, &SummaryTarget::Coefficients, level)?;
    Ok(table
        .rows
        .into_iter()
        .map(|r| SummaryLine {
            panel: "bayes",
            parameter: r.name,
            lower: Some(r.lower),
            estimate: r.mean,
            upper: Some(r.upper),
        })
        .collect())
}

/// Posterior expected-value lines for `expected_values.csv`.
pub fn bayes_expected_values(
    draws: &PosteriorDraws,
    dims: ModelDims,
    labels: &ParameterLabels,
    settings: &[CovariateSetting],
    level: f64,
) -> Result<Vec<ExpectedValueRow>> {
    let target = SummaryTarget::ExpectedValues(settings.iter().map(|s| (s.label.clone(), s.x.clone())).collect());
    let table = summarize_fit(draws, dims, labels, &target, level)?;
    let c_n = labels.components.len();
    Ok(table
        .rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| ExpectedValueRow {
            setting: settings[i / c_n].label.clone(),
            method: "bayes",
            component: labels.components[i % c_n].clone(),
            estimate: r.mean,
            interval: Some((r.lower, r.upper)),
        })
        .collect())
}

fn bayes_report(
    draws: &PosteriorDraws,
    diagnostics: &Diagnostics,
    prep: &Prepared,
    level: f64,
) -> Result<BayesReport> {
    let table = summarize_fit(draws, prep.dims(), &prep.labels, &SummaryTarget::Coefficients, level)?;
    let names = prep.ctx.parameter_names();
    let per_parameter = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| ParameterDiagnostics {
            name,
            rhat: diagnostics.rhat.get(j).copied().and_then(finite),
            ess_bulk: diagnostics.ess_bulk.get(j).copied().and_then(finite),
            zero_variance: diagnostics.zero_variance.get(j).copied().unwrap_or(false),
        })
        .collect();
    Ok(BayesReport {
        chains: draws.n_chains(),
        draws_per_chain: draws.n_draws() / draws.n_chains().max(1),
        coefficients: table.rows,
        diagnostics: per_parameter,
        max_rhat: finite(diagnostics.max_rhat()),
        divergences: diagnostics.divergences,
        divergence_count: draws.divergence_count.clone(),
        treedepth_saturation_count: draws.treedepth_saturation_count.clone(),
        step_sizes: draws.step_sizes.clone(),
        mass_diag: draws.mass_diag.clone(),
        mean_accept: draws.mean_accept.clone(),
    })
}

/// Fit and write every artifact; errors are left to [`run`].
pub fn execute(config: &RunConfig) -> Result<FitReport> {
    config.validate()?;
    fs::create_dir_all(&config.out).map_err(|e| CliError::io(&config.out, e))?;
    let prep = prepare(config)?;
    let mut report = FitReport {
        version: FORMAT_VERSION,
        status: Status::Ok,
        config: config.clone(),
        seed: config.sampler.seed,
        data: Some(prep.data_summary()),
        ml: None,
        bayes: None,
        error: None,
    };
    let mut lines = Vec::new();
    let mut expected = Vec::new();

    if config.method.ml() {
        let opts = MlOptions {
            n_starts: config.ml_starts,
            seed: config.sampler.seed,
            ..MlOptions::default()
        };
        let fit = fit_ml(&prep.ctx, &opts)?;
        let ml = ml_report(&fit, &prep.labels, config.level)?;
        lines.extend(ml.coefficients.iter().map(|c| SummaryLine {
            panel: "ml",
            parameter: c.name.clone(),
            lower: c.lower,
            estimate: c.estimate,
            upper: c.upper,
        }));
        expected.extend(ml_expected_values(&fit, &prep.labels, &prep.settings)?);
        report.ml = Some(ml);
    }

    if config.method.bayes() {
        let (draws, diagnostics) = run_chains(&prep.ctx, &config.sampler)?;
        lines.extend(bayes_summary_lines(&draws, prep.dims(), &prep.labels, config.level)?);
        expected.extend(bayes_expected_values(
            &draws,
            prep.dims(),
            &prep.labels,
            &prep.settings,
            config.level,
        )?);
        let bayes = bayes_report(&draws, &diagnostics, &prep, config.level)?;
        if bayes.max_rhat.is_some_and(|r| r > RHAT_THRESHOLD) {
            report.status = Status::DiagnosticsFailed;
        }
        if config.write_draws {
            write_draws_csv(&config.out, &draws, &prep.ctx.parameter_names())?;
        }
        report.bayes = Some(bayes);
    }

    write_summary_csv(&config.out, &lines)?;
    write_expected_values_csv(&config.out, &expected)?;
    write_fit_json(&config.out, &report)?;
    Ok(report)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: FitReport,
    pub error: Option<CliError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        self.report.status.exit_code()
    }
}

/// [`execute`], turning any error into an error-status `fit.json`.
pub fn run(config: &RunConfig) -> RunOutcome {
    match execute(config) {
        Ok(report) => RunOutcome { report, error: None },
        Err(e) => {
            let report = FitReport {
                version: FORMAT_VERSION,
                status: Status::Error,
                config: config.clone(),
                seed: config.sampler.seed,
                data: None,
                ml: None,
                bayes: None,
                error: Some(ErrorReport {
                    code: e.code().to_string(),
                    message: e.to_string(),
                }),
            };
            if fs::create_dir_all(&config.out).is_ok() {
                // Best effort: the error is still returned to the caller.
                let _ = write_fit_json(Path::new(&config.out), &report);
            }
            RunOutcome { report, error: Some(e) }
        }
    }
}
