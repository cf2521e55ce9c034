//! No-U-Turn sampling with warmup adaptation and convergence diagnostics.

mod adapt;
mod diagnostics;
mod integrator;
mod nuts;
mod sampler;
mod target;

pub use adapt::{initial_step_size, metric_windows, DualAveraging, Welford, MIN_WINDOWED_WARMUP};
pub use diagnostics::{ess_bulk, split_rhat, Diagnostics};
pub use integrator::{leapfrog, PhasePoint};
pub use nuts::{nuts_transition, ChainState, TransitionStats, MAX_ENERGY_ERROR};
pub use sampler::{chain_rng, run_chain, run_chains, ChainOutput, PosteriorDraws, SamplerConfig, MAX_INIT_ATTEMPTS};
pub use target::{Gaussian, LogDensity};
