use super::target::LogDensity;
use crate::error::{Error, Result};

/// A point in phase space with the log density and gradient at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub log_density: f64,
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let mut grad = vec![0.0; q.len()];
        let log_density = target.log_density_and_grad(&q, &mut grad)?;
        if !log_density.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok(Self {
            q,
            p,
            grad,
            log_density,
        })
    }

    pub fn kinetic_energy(&self, inv_metric: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    /// `H = −log p(q) + ½ pᵀ M⁻¹ p`.
    pub fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        -self.log_density + self.kinetic_energy(inv_metric)
    }

    /// Velocity `M⁻¹ p`.
    pub fn velocity(&self, inv_metric: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_metric).map(|(p, m)| p * m).collect()
    }
}

/// One leapfrog step of size `eps` (negative steps integrate backwards) with
/// the diagonal inverse metric `inv_metric`.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    z: &PhasePoint,
    eps: f64,
    inv_metric: &[f64],
) -> Result<PhasePoint> {
    let half = 0.5 * eps;
    let mut p: Vec<f64> = z.p.iter().zip(&z.grad).map(|(p, g)| p + half * g).collect();
    let q: Vec<f64> = z
        .q
        .iter()
        .zip(&p)
        .zip(inv_metric)
        .map(|((q, p), m)| q + eps * m * p)
        .collect();
    let mut grad = vec![0.0; q.len()];
    let log_density = target
        .log_density_and_grad(&q, &mut grad)
        .map_err(|_| Error::NonFiniteGradient)?;
    if !log_density.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    for (p, g) in p.iter_mut().zip(&grad) {
        *p += half * g;
    }
    Ok(PhasePoint {
        q,
        p,
        grad,
        log_density,
    })
}
