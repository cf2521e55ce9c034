//! Rank-normalized split-R̂ and bulk effective sample size.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn check_shape(chains: &[&[f64]]) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::InsufficientDraws(format!(
            "{} chain(s); at least 2 required",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InsufficientDraws("chains differ in length".into()));
    }
    if n < 4 {
        return Err(Error::InsufficientDraws(format!("{n} draws per chain; at least 4 required")));
    }
    Ok(n)
}

/// Each chain cut into a first and second half (dropping the middle draw of
/// odd-length chains).
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = chains[0].len();
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..].to_vec()])
        .collect()
}

fn is_constant(chains: &[&[f64]]) -> bool {
    let first = chains[0][0];
    chains.iter().all(|c| c.iter().all(|&v| v == first))
}

/// Replace every value by `Φ⁻¹((r − 3/8) / (S + 1/4))` of its pooled rank,
/// with ties sharing their average rank.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(m, c)| c.iter().enumerate().map(move |(i, &v)| (v, m, i)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len() as f64;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start + 1;
        while end < pooled.len() && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        // 1-based average rank of the tie group.
        let rank = (start + 1 + end) as f64 / 2.0;
        let z = normal.inverse_cdf((rank - 0.375) / (s + 0.25));
        for &(_, m, i) in &pooled[start..end] {
            out[m][i] = z;
        }
        start = end;
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn basic_rhat(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

/// Maximum of the bulk and tail (folded) rank-normalized split-R̂. All-equal
/// draws give 1.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    check_shape(chains)?;
    if is_constant(chains) {
        return Ok(1.0);
    }
    let halves = split(chains);
    let bulk = basic_rhat(&rank_normalize(&halves));
    let mut pooled: Vec<f64> = halves.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let median = quantile_sorted(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = halves
        .iter()
        .map(|c| c.iter().map(|x| (x - median).abs()).collect())
        .collect();
    let tail = basic_rhat(&rank_normalize(&folded));
    Ok(bulk.max(tail))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Multi-chain ESS with Geyer's initial monotone sequence.
fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    // Biased autocovariance at lag t averaged over chains.
    let acov = |t: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - t).map(|i| (c[i] - mu) * (c[i + t] - mu)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let mean_var = acov(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        let grand = mean(&means);
        var_plus += means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    }
    let rho_at = |t: usize| 1.0 - (mean_var - acov(t)) / var_plus;

    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho_at(1);
    rho[1] = odd;
    let mut t = 1;
    while t + 3 < n && even + odd > 0.0 {
        even = rho_at(t + 1);
        odd = rho_at(t + 2);
        if even + odd >= 0.0 {
            rho[t + 1] = even;
            rho[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t - 1;
    let max_t = max_t.saturating_sub(1);
    if even > 0.0 {
        rho[max_t + 1] = even;
    }
    let mut t = 1;
    while t + 2 <= max_t {
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t] {
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
            rho[t + 2] = rho[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..=max_t].iter().sum::<f64>() + rho[max_t + 1];
    let tau = tau.max(1.0 / total.log10());
    total / tau
}

/// Bulk ESS from rank-normalized split chains, capped at the number of draws.
/// All-equal draws report the number of draws.
pub fn ess_bulk(chains: &[&[f64]]) -> Result<f64> {
    let n = check_shape(chains)?;
    let total = (chains.len() * n) as f64;
    if is_constant(chains) {
        return Ok(total);
    }
    Ok(ess(&rank_normalize(&split(chains))).min(total))
}

/// Per-parameter convergence summary.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostics {
    pub rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
    pub divergences: usize,
    /// Parameters whose draws are all identical.
    pub zero_variance: Vec<bool>,
}

impl Diagnostics {
    /// `draws[chain][draw][param]`.
    pub fn compute(draws: &[Vec<Vec<f64>>], divergences: usize) -> Result<Self> {
        let dim = draws.first().and_then(|c| c.first()).map_or(0, Vec::len);
        let mut rhat = Vec::with_capacity(dim);
        let mut ess = Vec::with_capacity(dim);
        let mut zero_variance = Vec::with_capacity(dim);
        for j in 0..dim {
            let columns: Vec<Vec<f64>> = draws
                .iter()
                .map(|c| c.iter().map(|d| d[j]).collect())
                .collect();
            let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
            rhat.push(split_rhat(&refs)?);
            ess.push(ess_bulk(&refs)?);
            zero_variance.push(is_constant(&refs));
        }
        Ok(Self {
            rhat,
            ess_bulk: ess,
            divergences,
            zero_variance,
        })
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(1.0, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess_bulk.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
