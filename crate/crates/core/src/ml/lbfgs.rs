//! Limited-memory BFGS minimization with a strong-Wolfe line search.

use std::collections::VecDeque;

/// Objective callback: writes the gradient and returns the value, or `None`
/// where the objective is undefined (treated as `+∞`).
pub trait Objective {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        self(x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Converged once `max |∇f| < grad_tol`.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the line search could not make progress.
    pub stalled: bool,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 40;

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` from `x0`. `x0` must be a point where `f` is defined.
pub fn minimize<F: Objective>(f: &mut F, x0: &[f64], opts: &LbfgsOptions) -> Option<LbfgsResult> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = f.eval(&x, &mut grad)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut stalled = false;

    while iterations < opts.max_iter {
        if max_abs(&grad) < opts.grad_tol {
            break;
        }
        iterations += 1;
        let mut dir = two_loop(&grad, &history);
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            // Not a descent direction: fall back to steepest descent.
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&dir, &grad);
        }
        let initial = if history.is_empty() {
            (1.0 / max_abs(&grad)).min(1.0)
        } else {
            1.0
        };
        let step = match line_search(f, &x, value, &dir, slope, initial) {
            Some(s) => s,
            None if !history.is_empty() => {
                history.clear();
                continue;
            }
            None => {
                stalled = true;
                break;
            }
        };
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = step.x;
        grad = step.grad;
        value = step.value;
    }
    Some(LbfgsResult {
        converged: max_abs(&grad) < opts.grad_tol,
        x,
        value,
        grad,
        iterations,
        stalled,
    })
}

fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let scale = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= scale;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

struct Trial {
    t: f64,
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    slope: f64,
}

impl Trial {
    fn eval<F: Objective>(f: &mut F, x0: &[f64], dir: &[f64], t: f64) -> Option<Trial> {
        let x: Vec<f64> = x0.iter().zip(dir).map(|(a, d)| a + t * d).collect();
        let mut grad = vec![0.0; x.len()];
        let value = f.eval(&x, &mut grad).filter(|v| v.is_finite())?;
        if grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let slope = dot(&grad, dir);
        Some(Trial {
            t,
            x,
            value,
            grad,
            slope,
        })
    }
}

/// Bracket, then zoom until the strong Wolfe conditions hold. Undefined
/// points act as an upper end of the bracket.
fn line_search<F: Objective>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    dir: &[f64],
    slope0: f64,
    initial: f64,
) -> Option<Trial> {
    let armijo = |t: &Trial| t.value <= f0 + C1 * t.t * slope0;
    let curvature = |t: &Trial| t.slope.abs() <= -C2 * slope0;

    // Best acceptable point so far as (t, value, slope); t = 0 is the start.
    let mut lo = (0.0, f0, slope0);
    let mut lo_trial: Option<Trial> = None;
    // Other end of the bracket, with its value when defined.
    let mut hi: Option<(f64, Option<f64>)> = None;
    let mut t = initial;
    for _ in 0..MAX_LINE_EVALS {
        match Trial::eval(f, x0, dir, t) {
            None => hi = Some((t, None)),
            Some(trial) => {
                if !armijo(&trial) || trial.value >= lo.1 {
                    hi = Some((t, Some(trial.value)));
                } else if curvature(&trial) {
                    return Some(trial);
                } else {
                    let towards_hi = hi.map_or(f64::INFINITY, |h| h.0 - trial.t);
                    if trial.slope * towards_hi >= 0.0 {
                        hi = Some((lo.0, Some(lo.1)));
                    }
                    lo = (trial.t, trial.value, trial.slope);
                    lo_trial = Some(trial);
                }
            }
        }
        t = match hi {
            None => 2.0 * t,
            Some((h, h_value)) => {
                let (a, b) = if lo.0 < h { (lo.0, h) } else { (h, lo.0) };
                let width = b - a;
                if width < 1e-16 * b.abs().max(1.0) {
                    break;
                }
                // Quadratic through (lo, f_lo, f'_lo) and (h, f_h), kept
                // away from the bracket ends.
                let d = h - lo.0;
                let guess = h_value
                    .map(|fh| lo.0 - lo.2 * d * d / (2.0 * (fh - lo.1 - lo.2 * d)))
                    .filter(|g| g.is_finite())
                    .unwrap_or(0.5 * (a + b));
                guess.clamp(a + 0.1 * width, b - 0.1 * width)
            }
        };
    }
    // Accept a sufficient-decrease point even if curvature never held.
    lo_trial
}
