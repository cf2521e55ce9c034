//! Shared fixtures for the benchmarks.

use dirreg_core::simulate::{random_instance, BloodShaped};
use dirreg_core::{EvalContext, Priors};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Blood-shaped two-group data, four components, `n` rows.
pub fn blood_context(n: usize) -> EvalContext {
    let data = BloodShaped {
        n,
        ..BloodShaped::default()
    }
    .generate()
    .expect("valid design");
    data.context(Priors::default()).expect("consistent data")
}

/// A random instance with `components` parts and `p` mean columns.
pub fn random_context(components: usize, p: usize, n: usize) -> (EvalContext, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    random_instance(&mut rng, components, p, false, n)
}
