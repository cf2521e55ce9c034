//! Compositional responses and Dirichlet distribution mathematics.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::special::ln_gamma_unchecked;

/// Row sums must hit 1 within this tolerance to count as a composition.
pub const ROW_SUM_TOLERANCE: f64 = 1e-10;
/// Raw rows whose sum deviates from 1 by more than this are reported as renormalized.
pub const NORMALIZATION_FLAG_TOLERANCE: f64 = 1e-8;

/// An `n × C` matrix of proportions, one composition per row.
///
/// Entries lie in `[0, 1]` and rows sum to one. Zeros are allowed until
/// [`transform_zeros`] has been applied; [`CompositionMatrix::is_interior`]
/// tells the two states apart.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix {
    values: DMatrix<f64>,
    component_names: Vec<String>,
}

impl CompositionMatrix {
    pub fn new(values: DMatrix<f64>, component_names: Vec<String>) -> Result<Self> {
        check_dims(&values)?;
        check_len("component names", values.ncols(), component_names.len())?;
        for (i, row) in values.row_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::BoundaryY { index: c, value: v });
                }
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Dimension(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self {
            values,
            component_names,
        })
    }

    /// Component labels `c1, c2, …` for unnamed data.
    pub fn default_names(components: usize) -> Vec<String> {
        (1..=components).map(|c| format!("c{c}")).collect()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn component_names(&self) -> &[String] {
        &self.component_names
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// True when every entry is strictly inside `(0, 1)`.
    pub fn is_interior(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0 && v < 1.0)
    }

    /// Keep only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(rows),
            component_names: self.component_names.clone(),
        }
    }
}

fn check_dims(values: &DMatrix<f64>) -> Result<()> {
    if values.ncols() < 2 {
        return Err(Error::Dimension(format!(
            "at least two components required, got {}",
            values.ncols()
        )));
    }
    if values.nrows() < 1 {
        return Err(Error::Dimension("no observations".into()));
    }
    Ok(())
}

/// Result of [`validate_and_normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub matrix: CompositionMatrix,
    /// Rows whose raw sum differed from one by more than [`NORMALIZATION_FLAG_TOLERANCE`].
    pub normalized_rows: usize,
}

impl Normalized {
    /// The "normalization forced" flag.
    pub fn was_forced(&self) -> bool {
        self.normalized_rows > 0
    }
}

/// Divide each row of non-negative raw values by its sum.
pub fn validate_and_normalize(
    raw: &DMatrix<f64>,
    component_names: Vec<String>,
) -> Result<Normalized> {
    check_dims(raw)?;
    let mut values = raw.clone();
    let mut normalized_rows = 0;
    for (i, mut row) in values.row_iter_mut().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeEntry { row: i, col: c, value: v });
            }
        }
        let sum: f64 = row.sum();
        if sum <= 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        if (sum - 1.0).abs() > NORMALIZATION_FLAG_TOLERANCE {
            normalized_rows += 1;
        }
        row /= sum;
    }
    Ok(Normalized {
        matrix: CompositionMatrix::new(values, component_names)?,
        normalized_rows,
    })
}

/// Result of [`transform_zeros`].
#[derive(Debug, Clone)]
pub struct ZeroTransformed {
    pub matrix: CompositionMatrix,
    /// Number of zero entries that were replaced.
    pub replaced_zeros: usize,
    /// Number of rows the affine map was applied to.
    pub transformed_rows: usize,
}

/// Rounded-zero smoothing.
///
/// Every entry of a row containing at least one zero is mapped through
/// `y ↦ (y·(n − 1) + 1/C) / n`, with `n` the number of observations. Rows
/// without zeros are left untouched, so the output is interior and every row
/// still sums to one.
pub fn transform_zeros(m: &CompositionMatrix) -> Result<ZeroTransformed> {
    check_dims(&m.values)?;
    let n = m.n_obs() as f64;
    let inv_c = 1.0 / m.n_components() as f64;
    let mut values = m.values.clone();
    let mut replaced_zeros = 0;
    let mut transformed_rows = 0;
    for mut row in values.row_iter_mut() {
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if zeros == 0 {
            continue;
        }
        replaced_zeros += zeros;
        transformed_rows += 1;
        row.apply(|v| *v = (*v * (n - 1.0) + inv_c) / n);
    }
    Ok(ZeroTransformed {
        matrix: CompositionMatrix {
            values,
            component_names: m.component_names.clone(),
        },
        replaced_zeros,
        transformed_rows,
    })
}

/// Dirichlet shape vector with its precision `α₀ = Σ α_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    alpha0: f64,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        check_alpha(&alpha)?;
        let alpha0 = alpha.iter().sum();
        Ok(Self { alpha, alpha0 })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn mean(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a / self.alpha0).collect()
    }
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.len() < 2 {
        return Err(Error::Dimension(format!(
            "at least two components required, got {}",
            alpha.len()
        )));
    }
    for (index, &value) in alpha.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveAlpha { index, value });
        }
    }
    Ok(())
}

/// `ln B(α) = Σ ln Γ(α_c) − ln Γ(Σ α_c)`.
pub fn log_multinomial_beta(alpha: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(log_beta_unchecked(alpha))
}

#[inline]
fn log_beta_unchecked(alpha: &[f64]) -> f64 {
    let sum: f64 = alpha.iter().sum();
    alpha.iter().map(|&a| ln_gamma_unchecked(a)).sum::<f64>() - ln_gamma_unchecked(sum)
}

/// `ln f(y | α) = −ln B(α) + Σ (α_c − 1) ln y_c` for interior `y`.
pub fn dirichlet_log_density(y: &[f64], alpha: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    check_len("composition", alpha.len(), y.len())?;
    for (index, &value) in y.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::BoundaryY { index, value });
        }
    }
    let kernel: f64 = y
        .iter()
        .zip(alpha)
        .map(|(&yc, &ac)| (ac - 1.0) * yc.ln())
        .sum();
    Ok(kernel - log_beta_unchecked(alpha))
}

/// `E(Y) = α / α₀`.
pub fn dirichlet_mean(alpha: &[f64]) -> Result<Vec<f64>> {
    Ok(DirichletParams::new(alpha.to_vec())?.mean())
}

/// One Dirichlet draw by Gamma normalization.
///
/// Gamma variates are drawn in log space (`G_a = G_{a+1} · U^{1/a}`) so that
/// small shapes cannot underflow to an exact zero; the result is always
/// strictly interior.
pub fn dirichlet_sample<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut log_g = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let gamma = Gamma::new(a + 1.0, 1.0)
            .map_err(|_| Error::NonPositiveAlpha { index: 0, value: a })?;
        let g: f64 = gamma.sample(rng);
        let u: f64 = rng.random::<f64>();
        // Open interval: random::<f64>() may return 0.
        let u = u.max(f64::MIN_POSITIVE);
        log_g.push(g.ln() + u.ln() / a);
    }
    let max = log_g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_g.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
        *v = v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn names(c: usize) -> Vec<String> {
        CompositionMatrix::default_names(c)
    }

    #[test]
    fn normalize_leaves_closed_rows_alone() {
        let raw = DMatrix::from_row_slice(1, 4, &[0.348, 0.197, 0.201, 0.254]);
        let out = validate_and_normalize(&raw, names(4)).unwrap();
        assert!(!out.was_forced());
        for c in 0..4 {
            assert_abs_diff_eq!(out.matrix.values()[(0, c)], raw[(0, c)], epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_flags_open_rows() {
        let raw = DMatrix::from_row_slice(1, 2, &[2.0, 2.0]);
        let out = validate_and_normalize(&raw, names(2)).unwrap();
        assert!(out.was_forced());
        assert_eq!(out.matrix.row(0), vec![0.5, 0.5]);

        let raw = DMatrix::from_row_slice(1, 3, &[0.3, 0.3, 0.3]);
        let out = validate_and_normalize(&raw, names(3)).unwrap();
        assert!(out.was_forced());
        for v in out.matrix.row(0) {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_errors() {
        let raw = DMatrix::from_row_slice(1, 2, &[-0.1, 1.1]);
        assert!(matches!(
            validate_and_normalize(&raw, names(2)),
            Err(Error::NegativeEntry { row: 0, col: 0, .. })
        ));
        let raw = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(
            validate_and_normalize(&raw, names(2)).unwrap_err(),
            Error::ZeroRow { row: 1 }
        );
        let raw = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            validate_and_normalize(&raw, names(1)),
            Err(Error::Dimension(_))
        ));
    }

    fn thirty_rows_with(row: [f64; 4]) -> CompositionMatrix {
        let mut values = DMatrix::from_element(30, 4, 0.25);
        for c in 0..4 {
            values[(7, c)] = row[c];
        }
        CompositionMatrix::new(values, names(4)).unwrap()
    }

    #[test]
    fn zero_transform_single_zero() {
        let m = thirty_rows_with([0.4, 0.35, 0.25, 0.0]);
        let out = transform_zeros(&m).unwrap();
        assert_eq!(out.replaced_zeros, 1);
        assert_eq!(out.transformed_rows, 1);
        assert_abs_diff_eq!(out.matrix.values()[(7, 3)], 1.0 / 120.0, epsilon = 1e-15);
        // Untouched rows.
        assert_eq!(out.matrix.row(0), vec![0.25; 4]);
    }

    #[test]
    fn zero_transform_whole_row() {
        let m = thirty_rows_with([0.5, 0.5, 0.0, 0.0]);
        let out = transform_zeros(&m).unwrap();
        let row = out.matrix.row(7);
        // (0.5·29 + 0.25)/30 and (0·29 + 0.25)/30
        assert_abs_diff_eq!(row[0], 14.75 / 30.0, epsilon = 1e-15);
        assert_abs_diff_eq!(row[1], 14.75 / 30.0, epsilon = 1e-15);
        assert_abs_diff_eq!(row[2], 1.0 / 120.0, epsilon = 1e-15);
        assert_abs_diff_eq!(row[3], 1.0 / 120.0, epsilon = 1e-15);
        assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(out.matrix.is_interior());
    }

    #[test]
    fn zero_transform_identity_without_zeros() {
        let m = thirty_rows_with([0.4, 0.3, 0.2, 0.1]);
        let out = transform_zeros(&m).unwrap();
        assert_eq!(out.matrix, m);
        assert_eq!(out.replaced_zeros, 0);
    }

    #[test]
    fn log_beta_values() {
        assert_abs_diff_eq!(log_multinomial_beta(&[1.0, 1.0]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            log_multinomial_beta(&[2.0, 2.0]).unwrap(),
            (1.0f64 / 6.0).ln(),
            epsilon = 1e-14
        );
        // ln Γ(3) + ln Γ(4) + ln Γ(5) − ln Γ(12), 40-digit reference.
        assert_abs_diff_eq!(
            log_multinomial_beta(&[3.0, 4.0, 5.0]).unwrap(),
            -11.839_347_365_737_939_909,
            epsilon = 1e-12
        );
        assert!(matches!(
            log_multinomial_beta(&[1.0, 0.0]),
            Err(Error::NonPositiveAlpha { index: 1, .. })
        ));
    }

    #[test]
    fn log_density_values() {
        assert_abs_diff_eq!(
            dirichlet_log_density(&[0.5, 0.5], &[1.0, 1.0]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            dirichlet_log_density(&[0.5, 0.5], &[2.0, 2.0]).unwrap(),
            1.5f64.ln(),
            epsilon = 1e-14
        );
        // Flat Dirichlet has density Γ(C) = (C − 1)!
        let y = [0.1, 0.2, 0.3, 0.15, 0.25];
        assert_abs_diff_eq!(
            dirichlet_log_density(&y, &[1.0; 5]).unwrap(),
            24f64.ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn log_density_errors() {
        assert!(matches!(
            dirichlet_log_density(&[0.0, 1.0], &[1.0, 1.0]),
            Err(Error::BoundaryY { index: 0, .. })
        ));
        assert!(matches!(
            dirichlet_log_density(&[0.5, 0.5], &[1.0, 1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            dirichlet_log_density(&[0.5, 0.5], &[-1.0, 1.0]),
            Err(Error::NonPositiveAlpha { .. })
        ));
    }

    /// Midpoint rule after `y = (1 − cos t)/2`, which absorbs the endpoint
    /// singularities for α < 1.
    fn integrate_beta_density(a: f64, b: f64) -> f64 {
        let steps = 200_000;
        let h = std::f64::consts::PI / steps as f64;
        (0..steps)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                let y = 0.5 * (1.0 - t.cos());
                let dy = 0.5 * t.sin();
                dirichlet_log_density(&[y, 1.0 - y], &[a, b]).unwrap().exp() * dy * h
            })
            .sum()
    }

    #[test]
    fn density_integrates_to_one() {
        for (a, b) in [(1.0, 1.0), (2.0, 3.0), (0.5, 0.5)] {
            let total = integrate_beta_density(a, b);
            assert!((total - 1.0).abs() < 1e-6, "α = ({a}, {b}): {total}");
        }
    }

    #[test]
    fn mean_values() {
        for v in dirichlet_mean(&[2.0, 2.0, 2.0]).unwrap() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(dirichlet_mean(&[2.0, 6.0]).unwrap(), vec![0.25, 0.75]);
        let m = dirichlet_mean(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        for (got, want) in m.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn sample_moments() {
        for alpha in [[5.0, 5.0], [2.0, 6.0]] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let draws = 100_000;
            let mut mean = [0.0; 2];
            for _ in 0..draws {
                let y = dirichlet_sample(&alpha, &mut rng).unwrap();
                mean[0] += y[0] / draws as f64;
                mean[1] += y[1] / draws as f64;
            }
            let want = dirichlet_mean(&alpha).unwrap();
            assert!((mean[0] - want[0]).abs() < 0.005, "{alpha:?}: {mean:?}");
            assert!((mean[1] - want[1]).abs() < 0.005, "{alpha:?}: {mean:?}");
        }
    }

    #[test]
    fn sample_is_deterministic_and_interior() {
        let alpha = [0.01, 0.02, 3.0];
        let a = dirichlet_sample(&alpha, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = dirichlet_sample(&alpha, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let y = dirichlet_sample(&alpha, &mut rng).unwrap();
            assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn alpha_vec() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.05f64..50.0, 2..7)
        }

        proptest! {
            #[test]
            fn mean_is_a_simplex(alpha in alpha_vec()) {
                let m = dirichlet_mean(&alpha).unwrap();
                prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(m.iter().all(|&v| v > 0.0));
            }

            #[test]
            fn log_beta_is_permutation_symmetric(alpha in alpha_vec(), rot in 0usize..6) {
                let mut rotated = alpha.clone();
                let k = rot % alpha.len();
                rotated.rotate_left(k);
                let mut reversed = alpha.clone();
                reversed.reverse();
                let base = log_multinomial_beta(&alpha).unwrap();
                prop_assert!((base - log_multinomial_beta(&rotated).unwrap()).abs() < 1e-10 * base.abs().max(1.0));
                prop_assert!((base - log_multinomial_beta(&reversed).unwrap()).abs() < 1e-10 * base.abs().max(1.0));
            }

            #[test]
            fn zero_transform_yields_interior_closed_rows(
                rows in prop::collection::vec(prop::collection::vec(0u8..4, 4), 1..40)
            ) {
                // Integer weights, so zeros are exact after closing each row.
                let n = rows.len();
                let mut raw = DMatrix::zeros(n, 4);
                for (i, r) in rows.iter().enumerate() {
                    for (c, &w) in r.iter().enumerate() {
                        raw[(i, c)] = w as f64;
                    }
                    if r.iter().all(|&w| w == 0) {
                        raw[(i, 0)] = 1.0;
                    }
                }
                let closed = validate_and_normalize(&raw, names(4)).unwrap().matrix;
                let out = transform_zeros(&closed).unwrap().matrix;
                if n > 1 {
                    prop_assert!(out.is_interior());
                }
                for i in 0..n {
                    prop_assert!((out.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
                }
                // Idempotent once interior.
                if out.is_interior() {
                    prop_assert_eq!(&transform_zeros(&out).unwrap().matrix, &out);
                }
            }

            #[test]
            fn sample_mean_within_five_standard_errors(alpha in prop::collection::vec(0.3f64..20.0, 2..5), seed in 0u64..1000) {
                let draws = 4000;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let c = alpha.len();
                let mut sum = vec![0.0; c];
                for _ in 0..draws {
                    let y = dirichlet_sample(&alpha, &mut rng).unwrap();
                    for k in 0..c { sum[k] += y[k]; }
                }
                let a0: f64 = alpha.iter().sum();
                for k in 0..c {
                    let m = alpha[k] / a0;
                    let var = m * (1.0 - m) / (a0 + 1.0);
                    let se = (var / draws as f64).sqrt();
                    prop_assert!((sum[k] / draws as f64 - m).abs() < 5.0 * se);
                }
            }
        }
    }
}
