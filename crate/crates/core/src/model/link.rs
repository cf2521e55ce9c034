//! Link functions of the mean/precision parametrization.

use nalgebra::DMatrix;

use super::coefficients::Coefficients;
use crate::composition::DirichletParams;
use crate::error::{check_len, Error, Result};

/// Largest admissible spread `max η − min η` before softmax is refused.
pub const SOFTMAX_RANGE: f64 = 700.0;

/// `η = X βᵀ` (`n × C`); the reference column is identically zero.
pub fn linear_predictors(x: &DMatrix<f64>, coeffs: &Coefficients) -> Result<DMatrix<f64>> {
    check_len("design width", coeffs.dims.p_beta, x.ncols())?;
    Ok(x * coeffs.beta.transpose())
}

/// Log of the softmax, into `out`. Shared by [`softmax`] and the likelihood.
#[inline]
pub(crate) fn log_softmax_into(eta: &[f64], out: &mut [f64]) -> Result<()> {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &e in eta {
        if !e.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        max = max.max(e);
        min = min.min(e);
    }
    if max - min > SOFTMAX_RANGE {
        return Err(Error::SoftmaxRange(max - min));
    }
    let sum: f64 = eta.iter().map(|&e| (e - max).exp()).sum();
    let log_norm = max + sum.ln();
    for (o, &e) in out.iter_mut().zip(eta) {
        *o = e - log_norm;
    }
    Ok(())
}

/// `μ_c = exp(η_c) / Σ_d exp(η_d)`, evaluated with max-subtraction.
pub fn softmax(eta: &[f64]) -> Result<Vec<f64>> {
    if eta.is_empty() {
        return Err(Error::Dimension("softmax of an empty vector".into()));
    }
    let mut out = vec![0.0; eta.len()];
    log_softmax_into(eta, &mut out)?;
    for v in &mut out {
        *v = v.exp();
    }
    // Renormalize so the simplex sum holds to rounding.
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// `θ_i = exp(z_iᵀ γ)`.
pub fn precision_values(z: &DMatrix<f64>, gamma: &[f64]) -> Result<Vec<f64>> {
    check_len("precision design width", gamma.len(), z.ncols())?;
    z.row_iter()
        .map(|row| {
            let lin: f64 = row.iter().zip(gamma).map(|(a, b)| a * b).sum();
            let theta = lin.exp();
            if !theta.is_finite() {
                Err(Error::OverflowToInfinity(lin))
            } else if theta <= 0.0 {
                Err(Error::NonPositiveTheta(theta))
            } else {
                Ok(theta)
            }
        })
        .collect()
}

/// `α = μ θ`.
pub fn alpha_from(mu: &[f64], theta: f64) -> Result<DirichletParams> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::NonPositiveTheta(theta));
    }
    DirichletParams::new(mu.iter().map(|m| m * theta).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::dirichlet_mean;
    use crate::model::coefficients::ModelDims;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn blood_coefficients() -> Coefficients {
        let beta = DMatrix::from_row_slice(
            4,
            2,
            &[
                0.630_107_00, -0.251_916_09, //
                0.062_740_25, -0.309_527_37, //
                -0.486_286_55, -0.181_896_66, //
                0.0, 0.0,
            ],
        );
        Coefficients::new(beta, vec![4.222_724_95], 3).unwrap()
    }

    #[test]
    fn predictors_at_blood_coefficients() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let eta = linear_predictors(&x, &blood_coefficients()).unwrap();
        let want = [
            [0.630_107_00, 0.062_740_25, -0.486_286_55, 0.0],
            [0.378_190_91, -0.246_787_12, -0.668_183_21, 0.0],
        ];
        for i in 0..2 {
            for c in 0..4 {
                assert_abs_diff_eq!(eta[(i, c)], want[i][c], epsilon = 1e-12);
            }
        }
        let zero = Coefficients::zeros(ModelDims::new(4, 3, 2, 1).unwrap());
        assert!(linear_predictors(&x, &zero).unwrap().iter().all(|&v| v == 0.0));
        assert!(linear_predictors(&DMatrix::zeros(2, 3), &zero).is_err());
    }

    #[test]
    fn softmax_golden_mu() {
        assert_eq!(softmax(&[0.0; 4]).unwrap(), vec![0.25; 4]);
        let mu = softmax(&[0.630_11, 0.062_74, -0.486_29, 0.0]).unwrap();
        for (got, want) in mu.iter().zip([0.41203, 0.23363, 0.13492, 0.21942]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
        let mu = softmax(&[0.378_19, -0.246_79, -0.668_18, 0.0]).unwrap();
        for (got, want) in mu.iter().zip([0.38887, 0.20815, 0.13657, 0.26641]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert_eq!(softmax(&[0.0, f64::NAN]), Err(Error::NonFiniteInput));
        assert!(matches!(softmax(&[800.0, 0.0]), Err(Error::SoftmaxRange(_))));
        // Large but admissible magnitudes are fine after max-subtraction.
        let mu = softmax(&[1000.0, 999.0]).unwrap();
        assert_abs_diff_eq!(mu[0], 1.0 / (1.0 + (-1f64).exp()), epsilon = 1e-15);
    }

    #[test]
    fn precision_examples() {
        let ones = DMatrix::from_element(3, 1, 1.0);
        assert_eq!(precision_values(&ones, &[0.0]).unwrap(), vec![1.0; 3]);
        let theta = precision_values(&ones, &[4.222_724_95]).unwrap();
        assert_abs_diff_eq!(theta[0], 68.22, epsilon = 5e-3);
        let z = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert_abs_diff_eq!(
            precision_values(&z, &[1.0, 1.0]).unwrap()[0],
            std::f64::consts::E.powi(2),
            epsilon = 1e-12
        );
        assert!(matches!(
            precision_values(&ones, &[800.0]),
            Err(Error::OverflowToInfinity(_))
        ));
        assert!(precision_values(&ones, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_from(&[0.5, 0.5], 10.0).unwrap().alpha(), &[5.0, 5.0]);
        let a = alpha_from(&[0.25, 0.75], 8.0).unwrap();
        assert_eq!(a.alpha(), &[2.0, 6.0]);
        assert_eq!(a.alpha0(), 8.0);
        assert_eq!(alpha_from(&[0.5, 0.5], 0.0), Err(Error::NonPositiveTheta(0.0)));
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(eta in prop::collection::vec(-20.0f64..20.0, 2..8), shift in -100.0f64..100.0) {
            let a = softmax(&eta).unwrap();
            let shifted: Vec<f64> = eta.iter().map(|e| e + shift).collect();
            let b = softmax(&shifted).unwrap();
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn alpha_round_trips_through_mean(eta in prop::collection::vec(-5.0f64..5.0, 2..6), theta in 0.01f64..1e4) {
            let mu = softmax(&eta).unwrap();
            let back = dirichlet_mean(alpha_from(&mu, theta).unwrap().alpha()).unwrap();
            for (x, y) in mu.iter().zip(&back) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
