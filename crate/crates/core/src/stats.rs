//! Special functions, chi-squared distribution and seeded Gaussian sampling.

use crate::error::{FlexError, Result};
use crate::linalg::CholeskyFactor;
use rand_core::Rng as _;
use rand_pcg::Pcg32;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function (Lanczos, g = 7, nine terms).
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(FlexError::Domain(format!("ln_gamma({x})")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x) Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma_pos(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma function `P(a, x) = γ(a, x) / Γ(a)`.
///
/// Series expansion for `x < a + 1`, Lentz continued fraction for the
/// upper tail otherwise.
pub fn reg_lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) || !a.is_finite() {
        return Err(FlexError::Domain(format!("P({a}, {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_pref = -x + a * x.ln() - ln_gamma_pos(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        Ok((sum * log_pref.exp()).clamp(0.0, 1.0))
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-17 {
                break;
            }
        }
        Ok((1.0 - log_pref.exp() * h).clamp(0.0, 1.0))
    }
}

/// Chi-squared CDF with `k` degrees of freedom.
pub fn chi2_cdf(k: u32, x: f64) -> Result<f64> {
    if k == 0 || !(x >= 0.0) {
        return Err(FlexError::Domain(format!("chi2_cdf({k}, {x})")));
    }
    reg_lower_incomplete_gamma(0.5 * k as f64, 0.5 * x)
}

/// Inverse of [`chi2_cdf`] by bracketing and bisection to `|Δx| ≤ 1e-10`.
pub fn chi2_quantile(k: u32, alpha: f64) -> Result<f64> {
    if k == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(FlexError::Domain(format!("chi2_quantile({k}, {alpha})")));
    }
    let mut lo = 0.0;
    let mut hi = k.max(1) as f64;
    while chi2_cdf(k, hi)? < alpha {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(FlexError::Domain(format!(
                "chi2_quantile({k}, {alpha}) does not bracket"
            )));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(k, mid)? < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Seeded generator: PCG-XSH-RR 64/32 (64-bit LCG state, multiplier
/// 6364136223846793005, increment `2·stream + 1`, xorshift-high then
/// random-rotate output). Uniform doubles take the top 53 bits of a 64-bit
/// draw made from two consecutive 32-bit outputs.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: Pcg32,
    seed: u64,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent substream, e.g. one per Monte Carlo chunk.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self {
            inner: Pcg32::new(seed, stream),
            seed,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the (non-polar) Box–Muller transform; the second
    /// variate of each pair is cached.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Draws `mean + L ξ` with `ξ` standard normal.
pub fn sample_gaussian(mean: &[f64], chol: &CholeskyFactor, rng: &mut Rng) -> Vec<f64> {
    debug_assert_eq!(mean.len(), chol.dim());
    let xi: Vec<f64> = (0..mean.len()).map(|_| rng.standard_normal()).collect();
    let mut out = chol.mul_l(&xi);
    out.iter_mut().zip(mean).for_each(|(o, m)| *o += m);
    out
}

/// Uniform draw from the ball `{x : ‖x‖² ≤ radius_sq}` in `n` dimensions.
pub fn sample_in_ball(n: usize, radius_sq: f64, rng: &mut Rng) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = radius_sq.max(0.0).sqrt() * rng.uniform().powf(1.0 / n as f64);
    g.iter_mut().for_each(|v| *v *= r / norm);
    g
}
