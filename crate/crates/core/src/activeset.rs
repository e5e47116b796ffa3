//! Candidate active sets of size `n_z + 1`.
//!
//! A subset can be the active set of the inner `min_z max_j f_j` problem only
//! if some convex combination of its recourse gradients vanishes:
//!
//! ```text
//! Σ λ_j = 1,   Σ λ_j a_z,j = 0,   λ ≥ 0
//! ```

use crate::error::{FlexError, Result};
use crate::linalg::{row_rank, Matrix};
use crate::lp::{solve_lp, LpProblem, Sense};
use crate::model::SystemModel;
use itertools::Itertools;
use serde::Serialize;

const LAMBDA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveCandidate {
    /// Sorted constraint indices.
    pub indices: Vec<usize>,
    pub lambda: Vec<f64>,
    /// Rank of the stacked `[a_z | a_θ]` rows.
    pub gradient_rank: usize,
}

impl ActiveCandidate {
    pub fn names<'a>(&self, model: &'a SystemModel) -> Vec<&'a str> {
        self.indices
            .iter()
            .map(|&j| model.constraints[j].name.as_str())
            .collect()
    }
}

/// Solves the multiplier system for `subset`; `None` when it is infeasible.
pub fn multiplier_check(model: &SystemModel, subset: &[usize]) -> Result<Option<Vec<f64>>> {
    let k = subset.len();
    if k != model.n_z + 1 {
        return Err(FlexError::Dimension(format!(
            "active subset has {k} members, expected {}",
            model.n_z + 1
        )));
    }
    for &j in subset {
        if j >= model.num_constraints() {
            return Err(FlexError::Index {
                index: j,
                len: model.num_constraints(),
            });
        }
    }
    let mut lp = LpProblem::new(Sense::Min, vec![0.0; k]);
    for i in 0..k {
        lp.set_bounds(i, Some(0.0), None);
    }
    lp.add_eq(&vec![1.0; k], 1.0)?;
    for i in 0..model.n_z {
        let row: Vec<f64> = subset
            .iter()
            .map(|&j| model.constraints[j].a_z[i])
            .collect();
        lp.add_eq(&row, 0.0)?;
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let lambda: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
    // the simplex residual is far below the invariant tolerance; confirm anyway
    let sum: f64 = lambda.iter().sum();
    let stationary = (0..model.n_z).all(|i| {
        let s: f64 = subset
            .iter()
            .zip(&lambda)
            .map(|(&j, l)| l * model.constraints[j].a_z[i])
            .sum();
        s.abs() <= LAMBDA_TOL
    });
    if (sum - 1.0).abs() > LAMBDA_TOL || !stationary {
        log::debug!("multiplier LP for {subset:?} returned an inexact point");
        return Ok(None);
    }
    Ok(Some(lambda))
}

fn gradient_rank(model: &SystemModel, subset: &[usize]) -> usize {
    let cols = model.n_z + model.n_theta;
    let mut m = Matrix::zeros(0, cols);
    for &j in subset {
        let c = &model.constraints[j];
        let row: Vec<f64> = c.a_z.iter().chain(&c.a_theta).copied().collect();
        m.push_row(&row).expect("row length matches");
    }
    row_rank(&m, 1e-10)
}

/// All subsets of size `n_z + 1` in lexicographic order that pass
/// [`multiplier_check`].
pub fn enumerate_candidates(model: &SystemModel) -> Result<Vec<ActiveCandidate>> {
    let size = model.n_z + 1;
    if model.num_constraints() < size {
        return Err(FlexError::NoCandidates { size });
    }
    let mut out = Vec::new();
    for subset in (0..model.num_constraints()).combinations(size) {
        if let Some(lambda) = multiplier_check(model, &subset)? {
            let gradient_rank = gradient_rank(model, &subset);
            out.push(ActiveCandidate {
                indices: subset,
                lambda,
                gradient_rank,
            });
        }
    }
    if out.is_empty() {
        return Err(FlexError::NoCandidates { size });
    }
    Ok(out)
}
