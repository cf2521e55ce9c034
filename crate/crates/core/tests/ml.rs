use dirreg_core::ml::{fit_ml, wald_intervals, MlOptions};
use dirreg_core::model::Priors;
use dirreg_core::simulate::BloodShaped;

#[test]
fn wald_intervals_cover_truth_in_most_replications() {
    let mut covered = 0;
    let mut total = 0;
    for seed in 0..20 {
        let data = BloodShaped {
            n: 500,
            seed: 1000 + seed,
            ..BloodShaped::default()
        }
        .generate()
        .unwrap();
        let ctx = data.context(Priors::default()).unwrap();
        let fit = fit_ml(&ctx, &MlOptions::default()).unwrap();
        assert!(fit.converged, "seed {seed}: {:?}", fit.diagnostic);
        let se = fit.std_errors.as_ref().unwrap();
        for (j, truth) in data.truth.pack_free().iter().enumerate() {
            total += 1;
            covered += usize::from((fit.free[j] - truth).abs() <= 1.96 * se[j]);
        }
    }
    let rate = covered as f64 / total as f64;
    assert!((0.88..=1.0).contains(&rate), "coverage {rate}");
}

#[test]
fn interval_rows_follow_the_coefficient_layout() {
    let data = BloodShaped::default().generate().unwrap();
    let ctx = data.context(Priors::default()).unwrap();
    let fit = fit_ml(&ctx, &MlOptions::default()).unwrap();
    let rows = wald_intervals(&fit, 0.95).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "Albumin:(Intercept)",
            "Albumin:DiseaseB",
            "Pre.Albumin:(Intercept)",
            "Pre.Albumin:DiseaseB",
            "Globulin.A:(Intercept)",
            "Globulin.A:DiseaseB",
            "Globulin.B:(Intercept)",
            "Globulin.B:DiseaseB",
            "precision:(Intercept)",
        ]
    );
    assert_eq!(rows[6].estimate, 0.0);
    assert!(rows.iter().all(|r| r.lower <= r.estimate && r.estimate <= r.upper));
}

#[test]
fn multiple_starts_agree_on_a_concave_problem() {
    let data = BloodShaped {
        n: 200,
        seed: 4,
        ..BloodShaped::default()
    }
    .generate()
    .unwrap();
    let ctx = data.context(Priors::default()).unwrap();
    let one = fit_ml(&ctx, &MlOptions::default()).unwrap();
    let many = fit_ml(
        &ctx,
        &MlOptions {
            n_starts: 5,
            seed: 3,
            ..MlOptions::default()
        },
    )
    .unwrap();
    for (a, b) in one.free.iter().zip(&many.free) {
        assert!((a - b).abs() < 1e-6);
    }
}
