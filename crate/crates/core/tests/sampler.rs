use dirreg_core::hmc::{run_chains, Gaussian, SamplerConfig};
use dirreg_core::model::Priors;
use dirreg_core::simulate::BloodShaped;
use dirreg_core::{fit_ml, MlOptions};
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

fn quick(seed: u64) -> SamplerConfig {
    SamplerConfig {
        iterations: 2000,
        warmup: 1000,
        max_treedepth: 10,
        seed,
        ..SamplerConfig::default()
    }
}

#[test]
fn correlated_gaussian_covariance() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
    let target = Gaussian::new(vec![1.0, -2.0], cov.clone()).unwrap();
    let (draws, diag) = run_chains(&target, &quick(3)).unwrap();
    let n = draws.n_draws() as f64;
    let mean: Vec<f64> = (0..2).map(|j| draws.column(j).iter().sum::<f64>() / n).collect();
    assert!((mean[0] - 1.0).abs() < 0.1 && (mean[1] + 2.0).abs() < 0.1, "{mean:?}");
    for a in 0..2 {
        for b in 0..2 {
            let (xa, xb) = (draws.column(a), draws.column(b));
            let c = xa.iter().zip(&xb).map(|(u, v)| (u - mean[a]) * (v - mean[b])).sum::<f64>() / (n - 1.0);
            assert!((c - cov[(a, b)]).abs() < 0.1 * cov[(a, b)].abs(), "cov[{a},{b}] = {c}");
        }
    }
    assert!(diag.max_rhat() < 1.01);
    assert_eq!(diag.divergences, 0);
}

#[test]
fn kolmogorov_smirnov_on_standard_normal() {
    // Every tenth draw, so the 4000 kept are close to independent.
    let target = Gaussian::standard(1);
    let cfg = SamplerConfig {
        iterations: 11_000,
        ..quick(11)
    };
    let (draws, _) = run_chains(&target, &cfg).unwrap();
    let mut xs: Vec<f64> = draws.column(0).into_iter().step_by(10).collect();
    assert_eq!(xs.len(), 4000);
    xs.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS statistic {ks}");
}

#[test]
fn blood_shaped_posterior_converges() {
    let data = BloodShaped::default().generate().unwrap();
    let ctx = data.context(Priors::default()).unwrap();
    let (draws, diag) = run_chains(&ctx, &SamplerConfig { seed: 5, ..SamplerConfig::default() }).unwrap();
    assert_eq!(draws.n_draws(), 4000);
    assert!(diag.max_rhat() < 1.01, "rhat {:?}", diag.rhat);
    assert!(diag.min_ess() > 400.0, "ess {:?}", diag.ess_bulk);
    assert!(draws.draws.iter().all(|v| v.is_finite()));
}

#[test]
fn posterior_means_track_ml_on_large_data() {
    let data = BloodShaped {
        n: 1000,
        seed: 8,
        ..BloodShaped::default()
    }
    .generate()
    .unwrap();
    let ctx = data.context(Priors::default()).unwrap();
    let ml = fit_ml(&ctx, &MlOptions::default()).unwrap();
    let (draws, diag) = run_chains(&ctx, &SamplerConfig { seed: 2, ..SamplerConfig::default() }).unwrap();
    assert_eq!(diag.divergences, 0);
    for j in 0..ctx.n_free() {
        let col = draws.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!((mean - ml.free[j]).abs() < 0.05, "parameter {j}: {mean} vs {}", ml.free[j]);
    }
}
