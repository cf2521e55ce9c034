use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapt::{initial_step_size, metric_windows, DualAveraging, Welford};
use super::diagnostics::Diagnostics;
use super::integrator::PhasePoint;
use super::nuts::{nuts_transition, ChainState};
use super::target::LogDensity;
use crate::error::{Error, Result};

pub const MAX_INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Iterations per chain, warmup included.
    pub iterations: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub max_treedepth: usize,
    pub seed: u64,
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 2000,
            warmup: 1000,
            target_accept: 0.95,
            max_treedepth: 20,
            seed: 1,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.chains == 0 {
            return bad("at least one chain required".into());
        }
        if self.warmup >= self.iterations {
            return bad(format!(
                "warmup ({}) must be below iterations ({})",
                self.warmup, self.iterations
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!("target acceptance {} outside (0, 1)", self.target_accept));
        }
        if !(self.init_radius > 0.0 && self.init_radius.is_finite()) {
            return bad(format!("init radius {} must be positive", self.init_radius));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        self.iterations - self.warmup
    }
}

/// Post-warmup draws of all chains, stacked in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    /// `S × dim`.
    pub draws: DMatrix<f64>,
    pub chain_ids: Vec<usize>,
    pub divergence_count: Vec<usize>,
    pub treedepth_saturation_count: Vec<usize>,
    pub step_sizes: Vec<f64>,
    /// Per-chain adapted inverse metric (draw variances).
    pub mass_diag: Vec<Vec<f64>>,
    pub seed: u64,
    /// Mean acceptance statistic over each chain's post-warmup transitions.
    pub mean_accept: Vec<f64>,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn n_chains(&self) -> usize {
        self.step_sizes.len()
    }

    pub fn draw(&self, s: usize) -> Vec<f64> {
        self.draws.row(s).iter().copied().collect()
    }

    /// `[chain][draw][param]`.
    pub fn by_chain(&self) -> Vec<Vec<Vec<f64>>> {
        let mut out = vec![Vec::new(); self.n_chains()];
        for s in 0..self.n_draws() {
            out[self.chain_ids[s]].push(self.draw(s));
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.column(j).iter().copied().collect()
    }
}

/// Everything one chain produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    pub divergences: usize,
    pub treedepth_saturations: usize,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    /// Acceptance statistic of every iteration, warmup included.
    pub accept_stats: Vec<f64>,
}

/// RNG for chain `chain`: one ChaCha stream per chain under the shared seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initial_state<T: LogDensity + ?Sized>(
    target: &T,
    radius: f64,
    chain: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ChainState> {
    for _ in 0..MAX_INIT_ATTEMPTS {
        let q: Vec<f64> = (0..target.dim())
            .map(|_| rng.random_range(-radius..=radius))
            .collect();
        if let Ok(z) = PhasePoint::new(target, q, vec![0.0; target.dim()]) {
            return Ok(z.into());
        }
    }
    Err(Error::NonFiniteInit {
        chain,
        attempts: MAX_INIT_ATTEMPTS,
    })
}

/// Run one chain: warmup with adaptation, then sampling with the adapted
/// step size and metric.
pub fn run_chain<T: LogDensity + ?Sized>(target: &T, config: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain);
    let mut state = initial_state(target, config.init_radius, chain, &mut rng)?;
    let dim = target.dim();
    let mut inv_metric = vec![1.0; dim];
    let mut eps = initial_step_size(target, &state, &inv_metric, 1.0, &mut rng);
    let mut dual = DualAveraging::new(config.target_accept, eps);
    let windows = metric_windows(config.warmup);
    let mut window = 0;
    let mut welford = Welford::new(dim);

    let mut out = ChainOutput {
        draws: Vec::with_capacity(config.draws_per_chain()),
        divergences: 0,
        treedepth_saturations: 0,
        step_size: eps,
        inv_metric: Vec::new(),
        accept_stats: Vec::with_capacity(config.iterations),
    };
    for it in 0..config.iterations {
        let (next, stats) = nuts_transition(target, &state, eps, &inv_metric, config.max_treedepth, &mut rng);
        state = next;
        out.accept_stats.push(stats.accept_stat);
        if it < config.warmup {
            eps = dual.update(stats.accept_stat);
            if let Some(&(start, end)) = windows.get(window) {
                if it >= start {
                    welford.push(&state.q);
                }
                if it + 1 == end {
                    inv_metric = welford.regularized_variance();
                    welford = Welford::new(dim);
                    window += 1;
                    eps = initial_step_size(target, &state, &inv_metric, eps, &mut rng);
                    dual = DualAveraging::new(config.target_accept, eps);
                }
            }
            if it + 1 == config.warmup {
                eps = dual.final_step_size();
            }
        } else {
            out.divergences += usize::from(stats.divergent);
            out.treedepth_saturations += usize::from(stats.depth >= config.max_treedepth);
            out.draws.push(state.q.clone());
        }
    }
    out.step_size = eps;
    out.inv_metric = inv_metric;
    Ok(out)
}

/// Run all chains in parallel and merge them by chain index.
pub fn run_chains<T: LogDensity + ?Sized>(target: &T, config: &SamplerConfig) -> Result<(PosteriorDraws, Diagnostics)> {
    config.validate()?;
    let outputs: Vec<ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|chain| run_chain(target, config, chain))
        .collect::<Result<_>>()?;
    let per_chain = config.draws_per_chain();
    if outputs.iter().all(|o| o.divergences == per_chain) {
        return Err(Error::AllChainsDiverged);
    }
    let dim = target.dim();
    let total = per_chain * config.chains;
    let draws = DMatrix::from_fn(total, dim, |s, j| outputs[s / per_chain].draws[s % per_chain][j]);
    let divergences: usize = outputs.iter().map(|o| o.divergences).sum();
    let diagnostics = if config.chains >= 2 && per_chain >= 4 {
        let by_chain: Vec<Vec<Vec<f64>>> = outputs.iter().map(|o| o.draws.clone()).collect();
        Diagnostics::compute(&by_chain, divergences)?
    } else {
        // Too few chains or draws for R̂; report neutral values.
        Diagnostics {
            rhat: vec![f64::NAN; dim],
            ess_bulk: vec![f64::NAN; dim],
            divergences,
            zero_variance: vec![false; dim],
        }
    };
    let posterior = PosteriorDraws {
        draws,
        chain_ids: (0..total).map(|s| s / per_chain).collect(),
        divergence_count: outputs.iter().map(|o| o.divergences).collect(),
        treedepth_saturation_count: outputs.iter().map(|o| o.treedepth_saturations).collect(),
        step_sizes: outputs.iter().map(|o| o.step_size).collect(),
        mass_diag: outputs.iter().map(|o| o.inv_metric.clone()).collect(),
        seed: config.seed,
        mean_accept: outputs
            .iter()
            .map(|o| {
                let post = &o.accept_stats[config.warmup..];
                post.iter().sum::<f64>() / post.len() as f64
            })
            .collect(),
    };
    Ok((posterior, diagnostics))
}
