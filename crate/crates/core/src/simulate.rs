//! Synthetic data with known coefficients.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::composition::{dirichlet_sample, CompositionMatrix};
use crate::error::{check_len, Result};
use crate::likelihood::EvalContext;
use crate::model::{
    precision_values, softmax, Coefficients, Column, DataTable, DesignMatrix, ModelDims, Priors,
};

/// Component names of the four-part blood-protein composition.
pub const BLOOD_COMPONENTS: [&str; 4] = ["Albumin", "Pre.Albumin", "Globulin.A", "Globulin.B"];

/// Reference ML fit for the blood data: rows Albumin, Pre.Albumin, Globulin.A
/// (intercept, Disease B), reference Globulin.B, log precision.
pub const BLOOD_BETA: [[f64; 2]; 3] = [
    [0.630_107_00, -0.251_916_09],
    [0.062_740_25, -0.309_527_37],
    [-0.486_286_55, -0.181_896_66],
];
pub const BLOOD_GAMMA: f64 = 4.222_724_95;

/// Draw one composition per design row from `D(softmax(x βᵀ), exp(z γ))`.
pub fn simulate_responses<R: Rng + ?Sized>(
    x: &DesignMatrix,
    z: &DesignMatrix,
    coeffs: &Coefficients,
    rng: &mut R,
) -> Result<CompositionMatrix> {
    check_len("precision design rows", x.n_rows(), z.n_rows())?;
    let theta = precision_values(z.values(), &coeffs.gamma)?;
    let eta = crate::model::linear_predictors(x.values(), coeffs)?;
    let c = coeffs.dims.components;
    let mut values = DMatrix::zeros(x.n_rows(), c);
    for i in 0..x.n_rows() {
        let eta_i: Vec<f64> = eta.row(i).iter().copied().collect();
        let alpha: Vec<f64> = softmax(&eta_i)?.iter().map(|m| m * theta[i]).collect();
        let y = dirichlet_sample(&alpha, rng)?;
        for (k, v) in y.into_iter().enumerate() {
            values[(i, k)] = v;
        }
    }
    // Sampled rows are closed up to rounding; renormalize exactly.
    for mut row in values.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    CompositionMatrix::new(values, CompositionMatrix::default_names(c))
}

/// A two-group design shaped like the blood-sample study.
#[derive(Debug, Clone, PartialEq)]
pub struct BloodShaped {
    pub n: usize,
    /// Share of observations in group `A`; the rest are `B`.
    pub share_a: f64,
    /// `(C − 1) × 2` rows of (intercept, group-B effect) for the non-reference components.
    pub beta: Vec<[f64; 2]>,
    pub log_precision: f64,
    pub seed: u64,
}

impl Default for BloodShaped {
    fn default() -> Self {
        Self {
            n: 30,
            share_a: 14.0 / 30.0,
            beta: BLOOD_BETA.to_vec(),
            log_precision: 68f64.ln(),
            seed: 1,
        }
    }
}

/// Output of [`BloodShaped::generate`].
#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// A `Disease` column with levels `A`/`B`.
    pub table: DataTable,
    pub y: CompositionMatrix,
    pub x: DesignMatrix,
    pub z: DesignMatrix,
    pub truth: Coefficients,
}

impl SimulatedData {
    pub fn context(&self, priors: Priors) -> Result<EvalContext> {
        EvalContext::new(
            self.y.clone(),
            self.x.clone(),
            self.z.clone(),
            self.truth.dims.reference,
            priors,
        )
    }
}

impl BloodShaped {
    pub fn components(&self) -> usize {
        self.beta.len() + 1
    }

    pub fn component_names(&self) -> Vec<String> {
        if self.components() == BLOOD_COMPONENTS.len() {
            BLOOD_COMPONENTS.iter().map(|s| s.to_string()).collect()
        } else {
            CompositionMatrix::default_names(self.components())
        }
    }

    pub fn truth(&self) -> Result<Coefficients> {
        let c = self.components();
        let mut beta = DMatrix::zeros(c, 2);
        for (k, row) in self.beta.iter().enumerate() {
            beta[(k, 0)] = row[0];
            beta[(k, 1)] = row[1];
        }
        Coefficients::new(beta, vec![self.log_precision], c - 1)
    }

    pub fn generate(&self) -> Result<SimulatedData> {
        let n_a = (self.n as f64 * self.share_a).round() as usize;
        let groups: Vec<Option<String>> = (0..self.n)
            .map(|i| Some(if i < n_a { "A" } else { "B" }.to_string()))
            .collect();
        let mut table = DataTable::new(self.n);
        table.insert("Disease", Column::Categorical(groups))?;
        let x = DesignMatrix::from_columns(
            DMatrix::from_fn(self.n, 2, |i, j| if j == 0 || i >= n_a { 1.0 } else { 0.0 }),
            vec![crate::model::INTERCEPT.to_string(), "DiseaseB".to_string()],
        )?;
        let z = DesignMatrix::intercept_only(self.n);
        let truth = self.truth()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let y = simulate_responses(&x, &z, &truth, &mut rng)?;
        let y = CompositionMatrix::new(y.values().clone(), self.component_names())?;
        Ok(SimulatedData {
            table,
            y,
            x,
            z,
            truth,
        })
    }
}

/// A random problem: `n` rows, `components` parts, `p` mean columns
/// (intercept plus standard-normal covariates), and either a common
/// precision or the mean design reused for the precision. Returns the context
/// (default priors) and the true free vector.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    components: usize,
    p: usize,
    varying_precision: bool,
    n: usize,
) -> (EvalContext, Vec<f64>) {
    let x_vals = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { std_normal(rng) });
    let names: Vec<String> = (0..p)
        .map(|j| {
            if j == 0 {
                crate::model::INTERCEPT.to_string()
            } else {
                format!("x{j}")
            }
        })
        .collect();
    let x = DesignMatrix::from_columns(x_vals, names).expect("intercept column");
    let z = if varying_precision {
        x.clone()
    } else {
        DesignMatrix::intercept_only(n)
    };
    let dims = ModelDims::new(components, components - 1, p, z.n_cols()).expect("valid dims");
    let mut free = Vec::with_capacity(dims.n_free());
    for _ in 0..(components - 1) * p {
        free.push(0.5 * std_normal(rng));
    }
    for j in 0..z.n_cols() {
        free.push(if j == 0 {
            2.0 + 2.0 * rng.random::<f64>()
        } else {
            0.3 * std_normal(rng)
        });
    }
    let truth = Coefficients::unpack_free(&free, dims).expect("matching length");
    let y = simulate_responses(&x, &z, &truth, rng).expect("finite truth");
    let ctx = EvalContext::new(y, x, z, dims.reference, Priors::default()).expect("consistent");
    (ctx, free)
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
