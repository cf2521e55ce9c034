use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use super::lbfgs::{max_abs, minimize, LbfgsOptions, LbfgsResult};
use crate::error::{Error, Result};
use crate::likelihood::EvalContext;
use crate::model::Coefficients;

/// What [`fit_ml`] maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MlObjective {
    #[default]
    Likelihood,
    /// Posterior mode under the context's priors.
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    pub objective: MlObjective,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            n_starts: 1,
            seed: 0,
            objective: MlObjective::Likelihood,
        }
    }
}

/// A fitted point estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MLFit {
    pub coefficients: Coefficients,
    pub free: Vec<f64>,
    /// Maximized objective (log-likelihood, or log-posterior for MAP).
    pub log_likelihood_at_max: f64,
    /// Wald standard errors aligned with `free`; `None` when the Hessian is
    /// not negative definite.
    pub std_errors: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Ratio of largest to smallest eigenvalue of the negative Hessian.
    pub hessian_condition: f64,
    /// `max |H − Hᵀ| / max |H|` before symmetrization.
    pub hessian_asymmetry: f64,
    pub gradient_max_norm: f64,
    pub diagnostic: Option<String>,
    pub parameter_names: Vec<String>,
    pub component_names: Vec<String>,
    pub mean_columns: Vec<String>,
    pub precision_columns: Vec<String>,
}

/// One line of a Table-style interval summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub name: String,
    pub lower: f64,
    pub estimate: f64,
    pub upper: f64,
}

fn objective_and_grad(ctx: &EvalContext, kind: MlObjective, x: &[f64], g: &mut [f64]) -> Result<f64> {
    match kind {
        MlObjective::Likelihood => ctx.log_likelihood_and_grad(x, g),
        MlObjective::Posterior => ctx.log_posterior_and_grad(x, g),
    }
}

/// Maximize the log-likelihood (or log-posterior) with L-BFGS from
/// `n_starts` points: the origin, then seeded `N(0, 0.5²)` jitter. A few
/// Newton steps on the numerical Hessian finish off runs that stall short
/// of the gradient tolerance.
pub fn fit_ml(ctx: &EvalContext, opts: &MlOptions) -> Result<MLFit> {
    let dim = ctx.n_free();
    if ctx.n_obs() < dim {
        return Err(Error::DegenerateData(format!(
            "{} observations for {dim} free parameters",
            ctx.n_obs()
        )));
    }
    if opts.n_starts == 0 {
        return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
    }
    let lbfgs = LbfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.tol,
        ..LbfgsOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let jitter = Normal::new(0.0, 0.5).expect("valid sd");

    let mut best: Option<LbfgsResult> = None;
    for start in 0..opts.n_starts {
        let x0: Vec<f64> = if start == 0 {
            vec![0.0; dim]
        } else {
            (0..dim).map(|_| jitter.sample(&mut rng)).collect()
        };
        let mut neg = |x: &[f64], g: &mut [f64]| -> Option<f64> {
            let v = objective_and_grad(ctx, opts.objective, x, g).ok()?;
            g.iter_mut().for_each(|gi| *gi = -*gi);
            Some(-v)
        };
        let Some(run) = minimize(&mut neg, &x0, &lbfgs) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.ok_or(Error::NonFiniteParameters)?;
    let mut free = best.x;
    let mut iterations = best.iterations;

    let mut grad = vec![0.0; dim];
    let mut value = objective_and_grad(ctx, opts.objective, &free, &mut grad)?;
    let mut hess = hessian(ctx, opts.objective, &free)?;
    for _ in 0..10 {
        if max_abs(&grad) < opts.tol {
            break;
        }
        let Some(step) = newton_step(&hess.matrix, &grad) else {
            break;
        };
        let trial: Vec<f64> = free.iter().zip(&step).map(|(a, b)| a + b).collect();
        let mut trial_grad = vec![0.0; dim];
        let Ok(trial_value) = objective_and_grad(ctx, opts.objective, &trial, &mut trial_grad) else {
            break;
        };
        if max_abs(&trial_grad) >= max_abs(&grad) {
            break;
        }
        free = trial;
        grad = trial_grad;
        value = trial_value;
        iterations += 1;
        hess = hessian(ctx, opts.objective, &free)?;
    }
    let gradient_max_norm = max_abs(&grad);
    let converged = gradient_max_norm < opts.tol;

    let neg_h = -&hess.matrix;
    let eigen = SymmetricEigen::new(neg_h.clone());
    let (min_ev, max_ev) = eigen
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let hessian_condition = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };
    let (std_errors, diagnostic) = match neg_h.cholesky() {
        Some(chol) => {
            let cov = chol.inverse();
            (Some((0..dim).map(|j| cov[(j, j)].sqrt()).collect()), None)
        }
        None => (
            None,
            Some(format!(
                "Hessian is not negative definite (smallest eigenvalue of −H: {min_ev:e}); standard errors withheld"
            )),
        ),
    };
    let diagnostic = match (diagnostic, converged) {
        (Some(d), _) => Some(d),
        (None, false) => Some(format!(
            "gradient max-norm {gradient_max_norm:e} above tolerance {:e}",
            opts.tol
        )),
        (None, true) => None,
    };

    Ok(MLFit {
        coefficients: Coefficients::unpack_free(&free, ctx.dims())?,
        free,
        log_likelihood_at_max: value,
        std_errors,
        converged,
        iterations,
        hessian_condition,
        hessian_asymmetry: hess.asymmetry,
        gradient_max_norm,
        diagnostic,
        parameter_names: ctx.parameter_names(),
        component_names: ctx.y().component_names().to_vec(),
        mean_columns: ctx.x().column_names().to_vec(),
        precision_columns: ctx.z().column_names().to_vec(),
    })
}

struct Hessian {
    matrix: DMatrix<f64>,
    asymmetry: f64,
}

/// Central differences of the analytic gradient, then symmetrized.
fn hessian(ctx: &EvalContext, kind: MlObjective, at: &[f64]) -> Result<Hessian> {
    let dim = at.len();
    let mut h = DMatrix::zeros(dim, dim);
    let mut up = vec![0.0; dim];
    let mut dn = vec![0.0; dim];
    for j in 0..dim {
        let step = 1e-5 * at[j].abs().max(1.0);
        let mut x = at.to_vec();
        x[j] = at[j] + step;
        objective_and_grad(ctx, kind, &x, &mut up)?;
        x[j] = at[j] - step;
        objective_and_grad(ctx, kind, &x, &mut dn)?;
        for i in 0..dim {
            h[(i, j)] = (up[i] - dn[i]) / (2.0 * step);
        }
    }
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let asym = (&h - h.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let asymmetry = if scale > 0.0 { asym / scale } else { 0.0 };
    let matrix = 0.5 * (&h + h.transpose());
    Ok(Hessian { matrix, asymmetry })
}

fn newton_step(h: &DMatrix<f64>, grad: &[f64]) -> Option<Vec<f64>> {
    let chol = (-h).cholesky()?;
    // −H Δ = g
    let step = chol.solve(&DVector::from_column_slice(grad));
    Some(step.iter().copied().collect())
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    StatNormal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// `est ± z_{(1+level)/2} · se` over the full coefficient layout, with the
/// reference component's rows reported as fixed zeros.
pub fn wald_intervals(fit: &MLFit, level: f64) -> Result<Vec<IntervalRow>> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidConfig(format!("interval level {level} outside [0, 1)")));
    }
    let se = fit.std_errors.as_ref().ok_or_else(|| {
        Error::MissingStdErrors(
            fit.diagnostic
                .clone()
                .unwrap_or_else(|| "Hessian not negative definite".into()),
        )
    })?;
    let z = if level == 0.0 {
        0.0
    } else {
        normal_quantile(0.5 * (1.0 + level))
    };
    let dims = fit.coefficients.dims;
    let mut rows = Vec::new();
    for c in 0..dims.components {
        for (j, col) in fit.mean_columns.iter().enumerate() {
            let name = format!("{}:{col}", fit.component_names[c]);
            rows.push(match dims.beta_index(c, j) {
                None => IntervalRow {
                    name,
                    lower: 0.0,
                    estimate: 0.0,
                    upper: 0.0,
                },
                Some(k) => interval_row(name, fit.free[k], se[k], z),
            });
        }
    }
    for (j, col) in fit.precision_columns.iter().enumerate() {
        let k = dims.gamma_offset() + j;
        rows.push(interval_row(format!("precision:{col}"), fit.free[k], se[k], z));
    }
    Ok(rows)
}

fn interval_row(name: String, est: f64, se: f64, z: f64) -> IntervalRow {
    IntervalRow {
        name,
        lower: est - z * se,
        estimate: est,
        upper: est + z * se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::CompositionMatrix;
    use crate::model::{DesignMatrix, Priors};
    use crate::simulate::{random_instance, BloodShaped};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn fake_fit(free: Vec<f64>, se: Option<Vec<f64>>) -> MLFit {
        let dims = crate::model::ModelDims::new(2, 1, 1, 1).unwrap();
        MLFit {
            coefficients: Coefficients::unpack_free(&free, dims).unwrap(),
            free,
            log_likelihood_at_max: 0.0,
            std_errors: se,
            converged: true,
            iterations: 0,
            hessian_condition: 1.0,
            hessian_asymmetry: 0.0,
            gradient_max_norm: 0.0,
            diagnostic: None,
            parameter_names: vec!["a:(Intercept)".into(), "precision:(Intercept)".into()],
            component_names: vec!["a".into(), "b".into()],
            mean_columns: vec!["(Intercept)".into()],
            precision_columns: vec!["(Intercept)".into()],
        }
    }

    #[test]
    fn wald_examples() {
        let fit = fake_fit(vec![0.0, 3.0], Some(vec![0.1, 0.2]));
        let rows = wald_intervals(&fit, 0.95).unwrap();
        assert_eq!(rows.len(), 3);
        assert_abs_diff_eq!(rows[0].lower, -0.195_996_4, epsilon = 1e-7);
        assert_abs_diff_eq!(rows[0].upper, 0.195_996_4, epsilon = 1e-7);
        assert_eq!((rows[1].lower, rows[1].estimate, rows[1].upper), (0.0, 0.0, 0.0));
        assert_eq!(rows[1].name, "b:(Intercept)");
        let rows = wald_intervals(&fit, 0.0).unwrap();
        assert_eq!((rows[2].lower, rows[2].estimate, rows[2].upper), (3.0, 3.0, 3.0));
        assert!(matches!(
            wald_intervals(&fake_fit(vec![0.0, 3.0], None), 0.95),
            Err(Error::MissingStdErrors(_))
        ));
    }

    #[test]
    fn symmetric_data_gives_zero_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut rows = Vec::new();
        for _ in 0..50 {
            let a: f64 = 0.2 + 0.6 * rng.random::<f64>();
            rows.extend_from_slice(&[a, 1.0 - a, 1.0 - a, a]);
        }
        let y = CompositionMatrix::new(
            DMatrix::from_row_slice(100, 2, &rows),
            CompositionMatrix::default_names(2),
        )
        .unwrap();
        let ctx = EvalContext::new(
            y,
            DesignMatrix::intercept_only(100),
            DesignMatrix::intercept_only(100),
            1,
            Priors::default(),
        )
        .unwrap();
        let fit = fit_ml(&ctx, &MlOptions::default()).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.free[0], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn optimum_properties_and_determinism() {
        let data = BloodShaped {
            n: 400,
            seed: 21,
            ..BloodShaped::default()
        }
        .generate()
        .unwrap();
        let ctx = data.context(Priors::default()).unwrap();
        let opts = MlOptions {
            n_starts: 3,
            seed: 5,
            ..MlOptions::default()
        };
        let fit = fit_ml(&ctx, &opts).unwrap();
        assert!(fit.converged, "{:?}", fit.diagnostic);
        let g = ctx.log_likelihood_and_grad(&fit.free, &mut [0.0; 7]);
        assert!(g.is_ok());
        assert!(fit.gradient_max_norm < 1e-8);
        assert!(fit.hessian_asymmetry < 1e-4);
        assert!(fit.std_errors.as_ref().unwrap().iter().all(|&s| s > 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let dir: Vec<f64> = (0..7).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let probe: Vec<f64> = fit.free.iter().zip(&dir).map(|(a, d)| a + 0.1 * d / norm).collect();
            assert!(ctx.log_likelihood(&probe).unwrap() <= fit.log_likelihood_at_max);
        }

        let again = fit_ml(&ctx, &opts).unwrap();
        assert_eq!(fit.free, again.free);
        assert_eq!(fit.std_errors, again.std_errors);
    }

    #[test]
    fn map_is_pulled_towards_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (ctx, _) = random_instance(&mut rng, 3, 2, false, 40);
        let ml = fit_ml(&ctx, &MlOptions::default()).unwrap();
        let tight = ctx.with_priors(Priors::new(0.1, 0.1).unwrap());
        let map = fit_ml(
            &tight,
            &MlOptions {
                objective: MlObjective::Posterior,
                ..MlOptions::default()
            },
        )
        .unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        assert!(norm(&map.free) < norm(&ml.free));
    }

    #[test]
    fn too_few_observations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (ctx, _) = random_instance(&mut rng, 4, 3, false, 5);
        assert!(matches!(
            fit_ml(&ctx, &MlOptions::default()),
            Err(Error::DegenerateData(_))
        ));
    }
}
