//! Multinomial NUTS with the generalized U-turn criterion, including the
//! extra checks across subtree boundaries.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::integrator::{leapfrog, PhasePoint};
use super::target::LogDensity;

/// Energy error beyond which a trajectory is declared divergent.
pub const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    /// Mean Metropolis acceptance over all leapfrog states; drives step-size
    /// adaptation.
    pub accept_stat: f64,
    pub depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

/// Position with its cached log density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub q: Vec<f64>,
    pub grad: Vec<f64>,
    pub log_density: f64,
}

impl From<PhasePoint> for ChainState {
    fn from(z: PhasePoint) -> Self {
        Self {
            q: z.q,
            grad: z.grad,
            log_density: z.log_density,
        }
    }
}

pub(crate) fn sample_momentum<R: Rng + ?Sized>(rng: &mut R, inv_metric: &[f64]) -> Vec<f64> {
    inv_metric
        .iter()
        .map(|m| {
            let n: f64 = StandardNormal.sample(rng);
            n / m.sqrt()
        })
        .collect()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(v_minus: &[f64], v_plus: &[f64], rho: &[f64]) -> bool {
    let dot = |a: &[f64]| a.iter().zip(rho).map(|(x, y)| x * y).sum::<f64>();
    dot(v_minus) > 0.0 && dot(v_plus) > 0.0
}

/// A finished subtree. `inner` is the state adjacent to the tree it extends,
/// `outer` the far end; `p`/`v` are momentum and velocity at those ends.
struct Subtree {
    proposal: PhasePoint,
    log_weight: f64,
    rho: Vec<f64>,
    p_inner: Vec<f64>,
    v_inner: Vec<f64>,
    p_outer: Vec<f64>,
    v_outer: Vec<f64>,
}

struct Builder<'a, T: ?Sized, R: ?Sized> {
    target: &'a T,
    inv_metric: &'a [f64],
    eps: f64,
    h0: f64,
    rng: &'a mut R,
    n_leapfrog: usize,
    sum_accept: f64,
    divergent: bool,
}

impl<T: LogDensity + ?Sized, R: Rng + ?Sized> Builder<'_, T, R> {
    /// Grows `2^depth` states from `edge` in direction `sign`, moving `edge`
    /// to the new end. `None` when the subtree diverged or turned.
    fn build(&mut self, edge: &mut PhasePoint, depth: usize, sign: f64) -> Option<Subtree> {
        if depth == 0 {
            self.n_leapfrog += 1;
            let next = match leapfrog(self.target, edge, sign * self.eps, self.inv_metric) {
                Ok(z) => z,
                Err(_) => {
                    self.divergent = true;
                    return None;
                }
            };
            let h = next.hamiltonian(self.inv_metric);
            let h = if h.is_nan() { f64::INFINITY } else { h };
            let delta = self.h0 - h;
            self.sum_accept += if delta > 0.0 { 1.0 } else { delta.exp() };
            if -delta > MAX_ENERGY_ERROR {
                self.divergent = true;
                return None;
            }
            let v = next.velocity(self.inv_metric);
            *edge = next.clone();
            return Some(Subtree {
                log_weight: delta,
                rho: next.p.clone(),
                p_inner: next.p.clone(),
                v_inner: v.clone(),
                p_outer: next.p.clone(),
                v_outer: v,
                proposal: next,
            });
        }
        let init = self.build(edge, depth - 1, sign)?;
        let last = self.build(edge, depth - 1, sign)?;
        let log_weight = log_add_exp(init.log_weight, last.log_weight);
        let take_last = last.log_weight > log_weight
            || self.rng.random::<f64>() < (last.log_weight - log_weight).exp();
        let rho = add(&init.rho, &last.rho);
        let persist = no_u_turn(&init.v_inner, &last.v_outer, &rho)
            && no_u_turn(&init.v_inner, &last.v_inner, &add(&init.rho, &last.p_inner))
            && no_u_turn(&init.v_outer, &last.v_outer, &add(&last.rho, &init.p_outer));
        if !persist {
            return None;
        }
        Some(Subtree {
            proposal: if take_last { last.proposal } else { init.proposal },
            log_weight,
            rho,
            p_inner: init.p_inner,
            v_inner: init.v_inner,
            p_outer: last.p_outer,
            v_outer: last.v_outer,
        })
    }
}

/// One NUTS transition from `state`. Divergences are reported in the stats;
/// the chain then stays at the last accepted proposal.
pub fn nuts_transition<T, R>(
    target: &T,
    state: &ChainState,
    eps: f64,
    inv_metric: &[f64],
    max_depth: usize,
    rng: &mut R,
) -> (ChainState, TransitionStats)
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let z0 = PhasePoint {
        q: state.q.clone(),
        p: sample_momentum(rng, inv_metric),
        grad: state.grad.clone(),
        log_density: state.log_density,
    };
    let h0 = z0.hamiltonian(inv_metric);
    let v0 = z0.velocity(inv_metric);

    // Trajectory ends: phase point, momentum and velocity at each end.
    let mut fwd = z0.clone();
    let mut bck = z0.clone();
    let (mut p_fwd, mut v_fwd) = (z0.p.clone(), v0.clone());
    let (mut p_bck, mut v_bck) = (z0.p.clone(), v0);
    let mut rho = z0.p.clone();
    let mut log_weight = 0.0;
    let mut sample = z0;
    let mut depth = 0;

    let mut builder = Builder {
        target,
        inv_metric,
        eps,
        h0,
        rng,
        n_leapfrog: 0,
        sum_accept: 0.0,
        divergent: false,
    };

    while depth < max_depth {
        let forward = builder.rng.random::<f64>() > 0.5;
        let (edge, sign) = if forward { (&mut fwd, 1.0) } else { (&mut bck, -1.0) };
        let Some(sub) = builder.build(edge, depth, sign) else {
            break;
        };
        depth += 1;
        if sub.log_weight > log_weight
            || builder.rng.random::<f64>() < (sub.log_weight - log_weight).exp()
        {
            sample = sub.proposal.clone();
        }
        log_weight = log_add_exp(log_weight, sub.log_weight);

        // Ends of the old tree adjacent to / opposite the new subtree.
        let (p_near, v_near, v_far) = if forward {
            (&p_fwd, &v_fwd, &v_bck)
        } else {
            (&p_bck, &v_bck, &v_fwd)
        };
        let old_rho = rho.clone();
        rho = add(&rho, &sub.rho);
        let persist = no_u_turn(v_far, &sub.v_outer, &rho)
            && no_u_turn(v_far, &sub.v_inner, &add(&old_rho, &sub.p_inner))
            && no_u_turn(v_near, &sub.v_outer, &add(&sub.rho, p_near));
        if forward {
            p_fwd = sub.p_outer;
            v_fwd = sub.v_outer;
        } else {
            p_bck = sub.p_outer;
            v_bck = sub.v_outer;
        }
        if !persist {
            break;
        }
    }

    let stats = TransitionStats {
        accept_stat: if builder.n_leapfrog > 0 {
            builder.sum_accept / builder.n_leapfrog as f64
        } else {
            0.0
        },
        depth,
        n_leapfrog: builder.n_leapfrog,
        divergent: builder.divergent,
        energy: sample.hamiltonian(inv_metric),
    };
    (sample.into(), stats)
}
