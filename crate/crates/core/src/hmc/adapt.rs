//! Warmup: dual-averaging step size and a windowed diagonal metric.

use rand::Rng;

use super::integrator::{leapfrog, PhasePoint};
use super::nuts::{sample_momentum, ChainState};
use super::target::LogDensity;

/// Below this many warmup iterations only the step size is adapted.
pub const MIN_WINDOWED_WARMUP: usize = 150;
const INIT_BUFFER: usize = 75;
const TERM_BUFFER: usize = 50;
const BASE_WINDOW: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(target: f64, eps: f64) -> Self {
        Self {
            target,
            mu: (10.0 * eps).ln(),
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    /// Feed one acceptance statistic; returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let w = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        x.exp()
    }

    /// Step size to keep once adaptation ends.
    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Half-open warmup-iteration ranges whose draws estimate the metric: after
/// a 75-iteration buffer, windows of 25, 50, 100, … with the last stretched to
/// end 50 iterations before warmup does. Empty below [`MIN_WINDOWED_WARMUP`].
pub fn metric_windows(warmup: usize) -> Vec<(usize, usize)> {
    if warmup < MIN_WINDOWED_WARMUP {
        return Vec::new();
    }
    let last_end = warmup - TERM_BUFFER;
    let mut windows = Vec::new();
    let mut start = INIT_BUFFER;
    let mut size = BASE_WINDOW;
    loop {
        let mut end = start + size;
        if end + 2 * size >= last_end {
            end = last_end;
        }
        windows.push((start, end));
        if end == last_end {
            return windows;
        }
        start = end;
        size *= 2;
    }
}

/// Running mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.n as f64;
            *s += d * (v - *m);
        }
    }

    /// Sample variance shrunk towards `1e-3`.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|s| {
                let var = if self.n > 1 { s / (n - 1.0) } else { 0.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Doubles or halves `eps` until a single leapfrog step's acceptance
/// probability crosses 0.8.
pub fn initial_step_size<T, R>(
    target: &T,
    state: &ChainState,
    inv_metric: &[f64],
    mut eps: f64,
    rng: &mut R,
) -> f64
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let threshold = 0.8f64.ln();
    let delta_h = |eps: f64, rng: &mut R| {
        let z = PhasePoint {
            q: state.q.clone(),
            p: sample_momentum(rng, inv_metric),
            grad: state.grad.clone(),
            log_density: state.log_density,
        };
        let h0 = z.hamiltonian(inv_metric);
        match leapfrog(target, &z, eps, inv_metric) {
            Ok(next) => {
                let d = h0 - next.hamiltonian(inv_metric);
                if d.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    d
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let up = delta_h(eps, rng) > threshold;
    for _ in 0..100 {
        let d = delta_h(eps, rng);
        if up && !(d > threshold) || !up && !(d < threshold) {
            break;
        }
        let next = if up { 2.0 * eps } else { 0.5 * eps };
        if !(1e-12..=1e7).contains(&next) {
            break;
        }
        eps = next;
    }
    eps
}
