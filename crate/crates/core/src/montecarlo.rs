//! Plain Monte Carlo estimates of the stochastic flexibility `SF` and of the
//! probability mass of an ellipsoid.
//!
//! Samples are drawn in chunks of [`CHUNK`]; chunk `k` uses substream `k` of
//! the seed, so counts do not depend on the execution mode or thread count.

use crate::error::{FlexError, Result};
use crate::exec::{map_indexed, Execution};
use crate::flexindex::{psi, FEASIBLE_TOL};
use crate::model::SystemModel;
use crate::stats::{sample_gaussian, Rng};
use serde::Serialize;
use std::time::Instant;

pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub n_samples: usize,
    pub seed: u64,
    /// Wall time in seconds.
    pub elapsed: f64,
}

impl McEstimate {
    fn from_count(hits: usize, n: usize, seed: u64, elapsed: f64) -> Self {
        let p = hits as f64 / n as f64;
        let stderr = (p * (1.0 - p) / n as f64).sqrt();
        Self {
            estimate: p,
            stderr,
            ci95: ((p - 1.96 * stderr).max(0.0), (p + 1.96 * stderr).min(1.0)),
            n_samples: n,
            seed,
            elapsed,
        }
    }
}

fn count<F>(model: &SystemModel, n: usize, seed: u64, exec: Execution, hit: F) -> Result<usize>
where
    F: Fn(&[f64]) -> Result<bool> + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let unc = &model.uncertainty;
    let per_chunk = map_indexed(exec, chunks, |k| {
        let mut rng = Rng::with_stream(seed, k as u64);
        let len = CHUNK.min(n - k * CHUNK);
        let mut hits = 0usize;
        for _ in 0..len {
            let theta = sample_gaussian(unc.mean(), unc.chol(), &mut rng);
            if hit(&theta)? {
                hits += 1;
            }
        }
        Ok(hits)
    });
    per_chunk.into_iter().sum()
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(FlexError::Domain("n_samples must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of `θ ~ N(θ̄, V)` with `ψ(θ) ≤ 1e-9`.
pub fn estimate_sf(model: &SystemModel, n_samples: usize, seed: u64) -> Result<McEstimate> {
    estimate_sf_with(model, n_samples, seed, Execution::available())
}

pub fn estimate_sf_with(
    model: &SystemModel,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    check_n(n_samples)?;
    let start = Instant::now();
    let hits = count(model, n_samples, seed, exec, |theta| {
        Ok(psi(model, theta)?.u <= FEASIBLE_TOL)
    })?;
    Ok(McEstimate::from_count(
        hits,
        n_samples,
        seed,
        start.elapsed().as_secs_f64(),
    ))
}

/// Fraction of `θ ~ N(θ̄, V)` inside `(θ-θ̄)ᵀ V⁻¹ (θ-θ̄) ≤ delta_star`.
pub fn estimate_alpha(
    model: &SystemModel,
    delta_star: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    estimate_alpha_with(model, delta_star, n_samples, seed, Execution::available())
}

pub fn estimate_alpha_with(
    model: &SystemModel,
    delta_star: f64,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    check_n(n_samples)?;
    if !(delta_star >= 0.0) {
        return Err(FlexError::Domain(format!("delta_star = {delta_star}")));
    }
    let start = Instant::now();
    let unc = &model.uncertainty;
    let hits = count(model, n_samples, seed, exec, |theta| {
        Ok(unc.mahalanobis_sq(theta) <= delta_star)
    })?;
    Ok(McEstimate::from_count(
        hits,
        n_samples,
        seed,
        start.elapsed().as_secs_f64(),
    ))
}
