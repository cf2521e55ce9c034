//! Log-likelihood, log-posterior and analytic gradients over the free
//! parameter vector.
//!
//! Per observation, with `μ = softmax(x βᵀ)`, `θ = exp(z γ)` and `α = μ θ`:
//!
//! ```text
//! ℓ_i        = ln Γ(θ) − Σ_c ln Γ(α_c) + Σ_c (α_c − 1) ln y_c
//! ∂ℓ_i/∂α_c  = g_c = ln y_c − ψ(α_c) + ψ(θ)
//! ∂ℓ_i/∂η_k  = θ μ_k (g_k − Σ_c μ_c g_c)
//! ∂ℓ_i/∂lnθ  = Σ_c α_c g_c
//! ```
//!
//! The normal priors contribute `−v² / (2σ²)` per free coordinate; their
//! normalizing constants are dropped, so `log_posterior(0) == log_likelihood(0)`.

use crate::composition::CompositionMatrix;
use crate::error::{check_len, Error, Result};
use crate::model::{log_softmax_into, DesignMatrix, ModelDims, Priors};
use crate::special::{digamma_unchecked, ln_gamma_unchecked};

/// Immutable data and configuration a log density is evaluated against.
#[derive(Debug, Clone)]
pub struct EvalContext {
    y: CompositionMatrix,
    x: DesignMatrix,
    z: DesignMatrix,
    dims: ModelDims,
    priors: Priors,
    // Row-major caches for the hot loop.
    log_y: Vec<f64>,
    x_rows: Vec<f64>,
    z_rows: Vec<f64>,
}

/// Value and optional gradient of a log density.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensityResult {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
}

impl EvalContext {
    /// `y` must be interior (zero transform applied); `reference` is 0-based.
    pub fn new(
        y: CompositionMatrix,
        x: DesignMatrix,
        z: DesignMatrix,
        reference: usize,
        priors: Priors,
    ) -> Result<Self> {
        let n = y.n_obs();
        check_len("mean design rows", n, x.n_rows())?;
        check_len("precision design rows", n, z.n_rows())?;
        if !y.is_interior() {
            return Err(Error::Dimension(
                "response has entries on the simplex boundary; apply the zero transform".into(),
            ));
        }
        let dims = ModelDims::new(y.n_components(), reference, x.n_cols(), z.n_cols())?;
        let log_y = (0..n)
            .flat_map(|i| y.row(i).into_iter().map(f64::ln))
            .collect();
        let x_rows = (0..n).flat_map(|i| x.row(i)).collect();
        let z_rows = (0..n).flat_map(|i| z.row(i)).collect();
        Ok(Self {
            y,
            x,
            z,
            dims,
            priors,
            log_y,
            x_rows,
            z_rows,
        })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn n_free(&self) -> usize {
        self.dims.n_free()
    }

    pub fn n_obs(&self) -> usize {
        self.y.n_obs()
    }

    pub fn y(&self) -> &CompositionMatrix {
        &self.y
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn z(&self) -> &DesignMatrix {
        &self.z
    }

    pub fn priors(&self) -> Priors {
        self.priors
    }

    pub fn with_priors(&self, priors: Priors) -> Self {
        Self {
            priors,
            ..self.clone()
        }
    }

    /// Context restricted to the given observations.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let pick = |d: &DesignMatrix| {
            DesignMatrix::from_columns(d.values().select_rows(rows), d.column_names().to_vec())
        };
        Self::new(
            self.y.select_rows(rows),
            pick(&self.x)?,
            pick(&self.z)?,
            self.dims.reference,
            self.priors,
        )
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.dims.free_parameter_names(
            self.y.component_names(),
            self.x.column_names(),
            self.z.column_names(),
        )
    }

    pub fn log_likelihood(&self, free: &[f64]) -> Result<f64> {
        self.evaluate(free, None)
    }

    pub fn log_likelihood_and_grad(&self, free: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len("gradient buffer", self.n_free(), grad.len())?;
        grad.fill(0.0);
        self.evaluate(free, Some(grad))
    }

    pub fn log_posterior(&self, free: &[f64]) -> Result<f64> {
        Ok(self.evaluate(free, None)? + self.log_prior(free, None))
    }

    pub fn grad_log_posterior(&self, free: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.n_free()];
        self.log_posterior_and_grad(free, &mut grad)?;
        Ok(grad)
    }

    pub fn log_posterior_and_grad(&self, free: &[f64], grad: &mut [f64]) -> Result<f64> {
        let ll = self.log_likelihood_and_grad(free, grad)?;
        Ok(ll + self.log_prior(free, Some(grad)))
    }

    /// Convenience wrapper returning both pieces.
    pub fn log_posterior_result(&self, free: &[f64], with_gradient: bool) -> Result<LogDensityResult> {
        if with_gradient {
            let mut grad = vec![0.0; self.n_free()];
            let value = self.log_posterior_and_grad(free, &mut grad)?;
            Ok(LogDensityResult {
                value,
                gradient: Some(grad),
            })
        } else {
            Ok(LogDensityResult {
                value: self.log_posterior(free)?,
                gradient: None,
            })
        }
    }

    /// Prior log density without constants; adds its gradient when asked.
    pub fn log_prior(&self, free: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let split = self.dims.gamma_offset();
        let precision = |j: usize| {
            let sd = if j < split {
                self.priors.sd_beta
            } else {
                self.priors.sd_theta
            };
            if sd.is_finite() {
                1.0 / (sd * sd)
            } else {
                0.0
            }
        };
        if let Some(grad) = grad {
            for (j, (g, &v)) in grad.iter_mut().zip(free).enumerate() {
                *g -= v * precision(j);
            }
        }
        free.iter()
            .enumerate()
            .map(|(j, &v)| -0.5 * v * v * precision(j))
            .sum()
    }

    fn evaluate(&self, free: &[f64], mut grad: Option<&mut [f64]>) -> Result<f64> {
        check_len("free parameter vector", self.n_free(), free.len())?;
        if free.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameters);
        }
        let ModelDims {
            components: c_n,
            reference,
            p_beta,
            p_gamma,
        } = self.dims;
        let gamma = &free[self.dims.gamma_offset()..];
        let gamma_offset = self.dims.gamma_offset();
        // Offset of each component's β row in `free`, None for the reference.
        let rows: Vec<Option<usize>> = (0..c_n)
            .map(|c| self.dims.beta_index(c, 0))
            .collect();

        let mut eta = vec![0.0; c_n];
        let mut log_mu = vec![0.0; c_n];
        let mut alpha = vec![0.0; c_n];
        let mut g = vec![0.0; c_n];
        let mut total = 0.0;

        for i in 0..self.n_obs() {
            let x = &self.x_rows[i * p_beta..(i + 1) * p_beta];
            let z = &self.z_rows[i * p_gamma..(i + 1) * p_gamma];
            let log_y = &self.log_y[i * c_n..(i + 1) * c_n];

            for (e, row) in eta.iter_mut().zip(&rows) {
                *e = match row {
                    Some(off) => x.iter().zip(&free[*off..*off + p_beta]).map(|(a, b)| a * b).sum(),
                    None => 0.0,
                };
            }
            log_softmax_into(&eta, &mut log_mu)?;
            let log_theta: f64 = z.iter().zip(gamma).map(|(a, b)| a * b).sum();
            let theta = log_theta.exp();
            if !theta.is_finite() {
                return Err(Error::OverflowToInfinity(log_theta));
            }
            if theta <= 0.0 {
                return Err(Error::NonPositiveTheta(theta));
            }

            let mut row_value = ln_gamma_unchecked(theta);
            for c in 0..c_n {
                let a = (log_mu[c] + log_theta).exp();
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::NonFiniteParameters);
                }
                alpha[c] = a;
                row_value += (a - 1.0) * log_y[c] - ln_gamma_unchecked(a);
            }
            total += row_value;

            if let Some(grad) = grad.as_deref_mut() {
                let psi0 = digamma_unchecked(theta);
                let mut mean_g = 0.0;
                let mut d_log_theta = 0.0;
                for c in 0..c_n {
                    g[c] = log_y[c] - digamma_unchecked(alpha[c]) + psi0;
                    mean_g += log_mu[c].exp() * g[c];
                    d_log_theta += alpha[c] * g[c];
                }
                for c in 0..c_n {
                    if c == reference {
                        continue;
                    }
                    let off = rows[c].unwrap();
                    // θ μ_c (g_c − ḡ) = α_c (g_c − ḡ)
                    let d_eta = alpha[c] * (g[c] - mean_g);
                    for (gj, xj) in grad[off..off + p_beta].iter_mut().zip(x) {
                        *gj += d_eta * xj;
                    }
                }
                for (gj, zj) in grad[gamma_offset..].iter_mut().zip(z) {
                    *gj += d_log_theta * zj;
                }
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFiniteParameters);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::dirichlet_log_density;
    use crate::model::{softmax, Coefficients};
    use crate::simulate::{simulate_responses, random_instance};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_row(y: [f64; 2]) -> EvalContext {
        let y = CompositionMatrix::new(
            DMatrix::from_row_slice(1, 2, &y),
            CompositionMatrix::default_names(2),
        )
        .unwrap();
        EvalContext::new(
            y,
            DesignMatrix::intercept_only(1),
            DesignMatrix::intercept_only(1),
            1,
            Priors::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_term_reduction() {
        let ctx = single_row([0.3, 0.7]);
        let ll = ctx.log_likelihood(&[0.0, 0.0]).unwrap();
        let want = dirichlet_log_density(&[0.3, 0.7], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(ll, want, epsilon = 1e-13);
    }

    /// Independent per-row route through softmax, exp and the density.
    fn brute_force_log_likelihood(ctx: &EvalContext, free: &[f64]) -> f64 {
        let coeffs = Coefficients::unpack_free(free, ctx.dims()).unwrap();
        (0..ctx.n_obs())
            .map(|i| {
                let x = ctx.x().row(i);
                let eta: Vec<f64> = (0..ctx.dims().components)
                    .map(|c| (0..x.len()).map(|j| coeffs.beta[(c, j)] * x[j]).sum())
                    .collect();
                let mu = softmax(&eta).unwrap();
                let z = ctx.z().row(i);
                let theta = z.iter().zip(&coeffs.gamma).map(|(a, b)| a * b).sum::<f64>().exp();
                let alpha: Vec<f64> = mu.iter().map(|m| m * theta).collect();
                dirichlet_log_density(&ctx.y().row(i), &alpha).unwrap()
            })
            .sum()
    }

    #[test]
    fn matches_per_row_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..10 {
            let (ctx, truth) = random_instance(&mut rng, 2 + k % 3, 1 + k % 3, k % 2 == 1, 40);
            let ll = ctx.log_likelihood(&truth).unwrap();
            let oracle = brute_force_log_likelihood(&ctx, &truth);
            assert!((ll - oracle).abs() < 1e-10 * oracle.abs().max(1.0), "{ll} vs {oracle}");
            // Decomposition into single-row contexts.
            let rows: f64 = (0..ctx.n_obs())
                .map(|i| ctx.subset(&[i]).unwrap().log_likelihood(&truth).unwrap())
                .sum();
            assert!((ll - rows).abs() < 1e-9 * ll.abs().max(1.0));
        }
    }

    #[test]
    fn truth_beats_distant_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (ctx, truth) = random_instance(&mut rng, 3, 2, false, 500);
        let at_truth = ctx.log_likelihood(&truth).unwrap();
        for _ in 0..100 {
            let dir: Vec<f64> = (0..truth.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let far: Vec<f64> = truth.iter().zip(&dir).map(|(t, d)| t + 5.0 * d / norm).collect();
            // Outside the representable range counts as worse.
            if let Ok(v) = ctx.log_likelihood(&far) {
                assert!(v < at_truth);
            }
        }
    }

    #[test]
    fn prior_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ctx, _) = random_instance(&mut rng, 4, 2, false, 30);
        let zero = vec![0.0; ctx.n_free()];
        assert_eq!(ctx.log_posterior(&zero).unwrap(), ctx.log_likelihood(&zero).unwrap());
        let mut free = zero.clone();
        free[0] = 5.0;
        let lp = ctx.with_priors(Priors::new(5.0, 5.0).unwrap()).log_posterior(&free).unwrap();
        assert_abs_diff_eq!(lp, ctx.log_likelihood(&free).unwrap() - 0.5, epsilon = 1e-10);

        // sd 50 vs sd 5: the difference is exactly the closed-form penalty gap.
        let free: Vec<f64> = (0..ctx.n_free()).map(|j| 0.1 * j as f64 - 0.2).collect();
        let tight = ctx.with_priors(Priors::new(5.0, 5.0).unwrap()).log_posterior(&free).unwrap();
        let loose = ctx.with_priors(Priors::new(50.0, 50.0).unwrap()).log_posterior(&free).unwrap();
        let ss: f64 = free.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(loose - tight, 0.5 * ss * (1.0 / 25.0 - 1.0 / 2500.0), epsilon = 1e-9);
    }

    #[test]
    fn flat_prior_limit_on_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (ctx, truth) = random_instance(&mut rng, 3, 2, true, 50);
        let mut ll_grad = vec![0.0; ctx.n_free()];
        ctx.log_likelihood_and_grad(&truth, &mut ll_grad).unwrap();
        for sd in [1e3, 1e6, f64::INFINITY] {
            let wide = ctx.with_priors(Priors { sd_beta: sd, sd_theta: sd });
            let g = wide.grad_log_posterior(&truth).unwrap();
            let worst = g.iter().zip(&ll_grad).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let bound = truth.iter().map(|t| t.abs()).fold(0.0, f64::max) / (sd * sd);
            assert!(worst <= bound + 1e-12, "sd {sd}: {worst}");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in 0..20 {
            let (ctx, truth) = random_instance(&mut rng, 2 + k % 3, 1 + (k / 3) % 3, k % 2 == 0, 25);
            let free: Vec<f64> = truth.iter().map(|t| t + 0.3 * (rng.random::<f64>() - 0.5)).collect();
            let grad = ctx.grad_log_posterior(&free).unwrap();
            let h = 1e-5;
            for j in 0..free.len() {
                let mut up = free.clone();
                let mut dn = free.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (ctx.log_posterior(&up).unwrap() - ctx.log_posterior(&dn).unwrap()) / (2.0 * h);
                let rel = (grad[j] - fd).abs() / grad[j].abs().max(1.0);
                assert!(rel < 1e-6, "instance {k}, coordinate {j}: {} vs {fd}", grad[j]);
            }
        }
    }

    #[test]
    fn swapping_columns_flips_intercept_gradient() {
        // Mirrored data: every row appears alongside its swapped twin.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        for _ in 0..20 {
            let a: f64 = 0.1 + 0.8 * rng.random::<f64>();
            rows.extend_from_slice(&[a, 1.0 - a]);
        }
        let make = |data: &[f64]| {
            let y = CompositionMatrix::new(
                DMatrix::from_row_slice(data.len() / 2, 2, data),
                CompositionMatrix::default_names(2),
            )
            .unwrap();
            let n = y.n_obs();
            EvalContext::new(
                y,
                DesignMatrix::intercept_only(n),
                DesignMatrix::intercept_only(n),
                1,
                Priors::flat(),
            )
            .unwrap()
        };
        let swapped: Vec<f64> = rows.chunks(2).flat_map(|r| [r[1], r[0]]).collect();
        let (a, b) = (make(&rows), make(&swapped));
        for free in [[0.3, 1.0], [-0.7, 2.0], [0.0, 0.5]] {
            let ga = a.grad_log_posterior(&free).unwrap();
            let gb = b.grad_log_posterior(&[-free[0], free[1]]).unwrap();
            assert_abs_diff_eq!(ga[0], -gb[0], epsilon = 1e-9);
            assert_abs_diff_eq!(ga[1], gb[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_boundary_data_and_bad_parameters() {
        let y = CompositionMatrix::new(
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            CompositionMatrix::default_names(2),
        )
        .unwrap();
        assert!(EvalContext::new(
            y,
            DesignMatrix::intercept_only(1),
            DesignMatrix::intercept_only(1),
            1,
            Priors::default()
        )
        .is_err());
        let ctx = single_row([0.4, 0.6]);
        assert_eq!(ctx.log_likelihood(&[f64::NAN, 0.0]), Err(Error::NonFiniteParameters));
        assert!(matches!(ctx.log_likelihood(&[0.0, 800.0]), Err(Error::OverflowToInfinity(_))));
        assert!(ctx.log_likelihood(&[0.0]).is_err());
    }

    #[test]
    fn simulated_responses_feed_the_context() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DesignMatrix::intercept_only(10);
        let coeffs = Coefficients::zeros(crate::model::ModelDims::new(3, 2, 1, 1).unwrap());
        let y = simulate_responses(&x, &x, &coeffs, &mut rng).unwrap();
        assert_eq!(y.n_obs(), 10);
        assert!(y.is_interior());
    }
}
