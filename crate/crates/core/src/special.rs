//! Log-gamma and digamma for strictly positive real arguments.
//!
//! `lgamma` combines three regimes: a Taylor series of `ln Γ(2 + z)` for
//! `|z| ≤ 0.5` (which keeps full relative accuracy around the zeros at 1 and
//! 2), upward recurrence onto the Stirling series for `2.5 < x < 10`, and
//! the Stirling series alone for `x ≥ 10`. `digamma` uses upward recurrence onto
//! `x ≥ 10` followed by its asymptotic expansion.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;
const STIRLING_CUTOFF: f64 = 10.0;

/// `ζ(k) − 1` for `k = 2, 3, …`; coefficients of the `ln Γ(2 + z)` series.
const ZETA_MINUS_ONE: [f64; 40] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    9.945_751_278_180_853e-4,
    4.941_886_041_194_646e-4,
    2.460_865_533_080_483e-4,
    1.227_133_475_784_891e-4,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_840e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_330e-7,
    1.192_199_259_653_111e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
    7.450_711_789_835_429e-9,
    3.725_334_024_788_457e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_682e-10,
    4.656_629_065_033_784e-10,
    2.328_311_833_676_505e-10,
    1.164_155_017_270_052e-10,
    5.820_772_087_902_701e-11,
    2.910_385_044_497_100e-11,
    1.455_192_189_104_198e-11,
    7.275_959_835_057_481e-12,
    3.637_979_547_378_651e-12,
    1.818_989_650_307_066e-12,
    9.094_947_840_263_889e-13,
    4.547_473_783_042_154e-13,
];

/// `(−1)^k (ζ(k) − 1) / k`.
const SERIES: [f64; 40] = {
    let mut out = [0.0; 40];
    let mut i = 0;
    while i < 40 {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        out[i] = sign * ZETA_MINUS_ONE[i] / (i + 2) as f64;
        i += 1;
    }
    out
};

/// Natural log of the Gamma function, `x > 0`.
pub fn lgamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::NonPositiveArgument(x));
    }
    Ok(ln_gamma_unchecked(x))
}

/// Digamma function `ψ(x) = d/dx ln Γ(x)`, `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::NonPositiveArgument(x));
    }
    Ok(digamma_unchecked(x))
}

/// `ln Γ(x)` without the domain check; callers guarantee `x > 0`.
#[inline]
pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x >= STIRLING_CUTOFF {
        return stirling(x);
    }
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x, and x + 1 lands in [1, 1.5).
        return ln_gamma_near_one_two(x + 1.0) - x.ln();
    }
    if x <= 2.5 {
        return ln_gamma_near_one_two(x);
    }
    // Γ(x) = Γ(x + k) / (x (x + 1) ⋯ (x + k − 1))
    let mut y = x;
    let mut prod = 1.0;
    while y < STIRLING_CUTOFF {
        prod *= y;
        y += 1.0;
    }
    stirling(y) - prod.ln()
}

/// `x ∈ [0.5, 2.5]`.
#[inline]
fn ln_gamma_near_one_two(x: f64) -> f64 {
    if x < 1.5 {
        let z = x - 1.0;
        ln_gamma_two_plus(z) - z.ln_1p()
    } else {
        ln_gamma_two_plus(x - 2.0)
    }
}

/// `ln Γ(2 + z) = (1 − γ) z + Σ_{k≥2} (−1)^k (ζ(k) − 1) z^k / k`, `|z| ≤ 0.5`.
#[inline]
fn ln_gamma_two_plus(z: f64) -> f64 {
    let mut acc = 0.0;
    for c in SERIES.iter().rev() {
        acc = acc * z + c;
    }
    z * ((1.0 - EULER_GAMMA) + z * acc)
}

#[inline]
fn stirling(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r
        * (1.0 / 12.0
            + r2 * (-1.0 / 360.0
                + r2 * (1.0 / 1260.0
                    + r2 * (-1.0 / 1680.0
                        + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 / 156.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + series
}

#[inline]
pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    let mut y = x;
    let mut shift = 0.0;
    while y < STIRLING_CUTOFF {
        shift -= 1.0 / y;
        y += 1.0;
    }
    let r = 1.0 / y;
    let r2 = r * r;
    let tail = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0
                        - r2 * (1.0 / 132.0 - r2 * (691.0 / 32_760.0 - r2 / 12.0))))));
    shift + y.ln() - 0.5 * r - tail
}
