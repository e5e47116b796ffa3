//! Feasibility function, flexibility test and flexibility indexes.
//!
//! Every set-based problem is solved by enumerating the candidate active
//! sets from [`crate::activeset`]: for a fixed candidate the active
//! constraints hold with equality and the others stay feasible, which turns
//! the bilevel problem into one convex LP or QP per candidate.
//!
//! Quadratic sets work in whitened coordinates `θ = θ̄ + L x` where
//! `V = L Lᵀ` (ellipsoid) or `L = I` (ℓ2), so the set is the ball
//! `xᵀx ≤ r²`.

use crate::activeset::{enumerate_candidates, ActiveCandidate};
use crate::error::{FlexError, Result};
use crate::exec::{map_indexed, Execution};
use crate::linalg::{dot, CholeskyFactor, Matrix};
use crate::lp::{solve_lp, LpProblem, LpStatus, Sense};
use crate::model::{HyperboxSpec, SetKind, SystemModel, UncertaintySet};
use crate::qp::{solve_qp, QpProblem, QpStatus};
use crate::stats::{chi2_cdf, sample_in_ball, Rng};
use serde::Serialize;

/// `ψ ≤ FEASIBLE_TOL` counts as feasible.
pub const FEASIBLE_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-9;
const BISECTION_TOL: f64 = 1e-8;
const BALL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiResult {
    pub u: f64,
    pub z_star: Vec<f64>,
    /// Constraints within [`FEASIBLE_TOL`] of `u`.
    pub active_constraints: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiResult {
    pub chi: f64,
    pub theta_worst: Vec<f64>,
    pub z_worst: Vec<f64>,
    pub active_set: Vec<usize>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CandidateOutcome {
    Optimal { value: f64 },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRecord {
    pub indices: Vec<usize>,
    #[serde(flatten)]
    pub outcome: CandidateOutcome,
    /// Within the tie tolerance of the reported optimum.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexResult {
    pub set: SetKind,
    pub delta_star: f64,
    pub delta_units: String,
    pub theta_star: Vec<f64>,
    pub z_star: Vec<f64>,
    pub active_set: Option<ActiveCandidate>,
    pub alpha_star: Option<f64>,
    /// `false` when `ψ(θ̄) ≥ 0`; `delta_star` is then 0.
    pub interior: bool,
    pub psi_nominal: f64,
    pub candidates: Vec<CandidateRecord>,
}

impl IndexResult {
    /// Active sets tied with the reported one.
    pub fn ties(&self) -> Vec<&[usize]> {
        self.candidates
            .iter()
            .filter(|c| c.tie)
            .map(|c| c.indices.as_slice())
            .collect()
    }
}

fn check_theta(model: &SystemModel, theta: &[f64]) -> Result<()> {
    if theta.len() != model.n_theta {
        return Err(FlexError::Dimension(format!(
            "theta has length {}, expected {}",
            theta.len(),
            model.n_theta
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(FlexError::Domain("theta is not finite".into()));
    }
    Ok(())
}

fn constraint_values(model: &SystemModel, z: &[f64], theta: &[f64]) -> Vec<f64> {
    model.constraints.iter().map(|c| c.eval(z, theta)).collect()
}

fn argmax_within(values: &[f64], tol: f64) -> (f64, Vec<usize>) {
    let u = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let act = (0..values.len())
        .filter(|&j| values[j] >= u - tol)
        .collect();
    (u, act)
}

/// `ψ(θ) = min_z max_j f_j(z, θ)`.
pub fn psi(model: &SystemModel, theta: &[f64]) -> Result<PsiResult> {
    check_theta(model, theta)?;
    let nz = model.n_z;
    let z_star = if nz == 0 {
        Vec::new()
    } else {
        let mut obj = vec![0.0; nz + 1];
        obj[nz] = 1.0;
        let mut lp = LpProblem::new(Sense::Min, obj);
        for c in &model.constraints {
            let mut row = c.a_z.clone();
            row.push(-1.0);
            lp.add_ineq(&row, -(dot(&c.a_theta, theta) + c.c))?;
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => sol.x[..nz].to_vec(),
            LpStatus::Unbounded => return Err(FlexError::UnboundedPsi),
            // u is free, so the epigraph LP always has a feasible point
            LpStatus::Infeasible => {
                return Err(FlexError::Domain(
                    "feasibility LP reported infeasible".into(),
                ))
            }
        }
    };
    let (u, active_constraints) =
        argmax_within(&constraint_values(model, &z_star, theta), FEASIBLE_TOL);
    Ok(PsiResult {
        u,
        z_star,
        active_constraints,
    })
}

/// Smallest scale `δ` with `θ ∈ T(δ)`.
pub fn set_measure(model: &SystemModel, set: &UncertaintySet, theta: &[f64]) -> f64 {
    set.measure(model, theta)
}

/// `α* = F_χ²(n_θ)(δ*)`.
pub fn confidence_level(delta_star: f64, n_theta: usize) -> Result<f64> {
    if !(delta_star >= 0.0) {
        return Err(FlexError::Domain(format!("delta_star = {delta_star}")));
    }
    chi2_cdf(n_theta as u32, delta_star)
}

/// Constraint rows in whitened coordinates: `f_j = g_jᵀ x + a_z,jᵀ z - h_j`.
struct Whitened {
    l: CholeskyFactor,
    g: Vec<Vec<f64>>,
    h: Vec<f64>,
}

impl Whitened {
    fn new(model: &SystemModel, set: &UncertaintySet) -> Self {
        let l = match set {
            UncertaintySet::Ellipsoid => model.uncertainty.chol().clone(),
            _ => CholeskyFactor::identity(model.n_theta),
        };
        let mean = model.uncertainty.mean();
        let g = model
            .constraints
            .iter()
            .map(|c| l.mul_lt(&c.a_theta))
            .collect();
        let h = model
            .constraints
            .iter()
            .map(|c| -(dot(&c.a_theta, mean) + c.c))
            .collect();
        Self { l, g, h }
    }

    fn theta(&self, model: &SystemModel, x: &[f64]) -> Vec<f64> {
        let mut t = self.l.mul_l(x);
        t.iter_mut()
            .zip(model.uncertainty.mean())
            .for_each(|(t, m)| *t += m);
        t
    }

    /// Rows over `(x, z[, u])`; with `u_col` the row reads `f_j - u`,
    /// otherwise the right-hand side is shifted by `u_fixed`.
    fn qp(
        &self,
        model: &SystemModel,
        cand: &[usize],
        u_col: bool,
        u_fixed: f64,
    ) -> Result<QpProblem> {
        let (nt, nz) = (model.n_theta, model.n_z);
        let n = nt + nz + usize::from(u_col);
        let mut diag = vec![0.0; n];
        diag[..nt].iter_mut().for_each(|d| *d = 2.0);
        let mut p = QpProblem::new(Matrix::diag(&diag), vec![0.0; n]);
        for (j, c) in model.constraints.iter().enumerate() {
            let mut row = self.g[j].clone();
            row.extend_from_slice(&c.a_z);
            if u_col {
                row.push(-1.0);
            }
            let rhs = self.h[j] + if u_col { 0.0 } else { u_fixed };
            if cand.binary_search(&j).is_ok() {
                p.add_eq(&row, rhs)?;
            } else {
                p.add_ineq(&row, rhs)?;
            }
        }
        Ok(p)
    }
}

/// `(value, θ or x, z)` of one candidate subproblem.
type Point = (f64, Vec<f64>, Vec<f64>);

/// `Err(reason)` when the candidate is skipped.
type CandidateSolve = std::result::Result<Point, String>;

fn index_quadratic(
    model: &SystemModel,
    w: &Whitened,
    cand: &[usize],
    sqrt: bool,
) -> Result<CandidateSolve> {
    let nt = model.n_theta;
    let sol = solve_qp(&w.qp(model, cand, false, 0.0)?)?;
    match sol.status {
        QpStatus::Optimal => {
            let x = &sol.x[..nt];
            let q = dot(x, x);
            let v = if sqrt { q.sqrt() } else { q };
            Ok(Ok((v, w.theta(model, x), sol.x[nt..].to_vec())))
        }
        QpStatus::Infeasible => Ok(Err(
            "active equalities and inactive bounds are inconsistent".into(),
        )),
        QpStatus::UnboundedSubspace => Ok(Err("subproblem unbounded".into())),
    }
}

/// Rows of `θ ∈ T(δ)` for a polyhedral set over `(θ, z, δ, t)`.
fn polyhedral_rows(
    lp: &mut LpProblem,
    model: &SystemModel,
    set: &UncertaintySet,
    delta_col: usize,
) -> Result<()> {
    let nt = model.n_theta;
    let n = lp.num_vars();
    let mean = model.uncertainty.mean();
    let ones = HyperboxSpec::symmetric(vec![1.0; nt]);
    let hb = match set {
        UncertaintySet::Hyperbox(h) => Some(h),
        UncertaintySet::Linf => Some(&ones),
        _ => None,
    };
    if let Some(h) = hb {
        for i in 0..nt {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row[delta_col] = -h.delta_plus[i];
            lp.add_ineq(&row, mean[i])?;
            let mut row = vec![0.0; n];
            row[i] = -1.0;
            row[delta_col] = -h.delta_minus[i];
            lp.add_ineq(&row, -mean[i])?;
        }
    } else {
        let t0 = delta_col + 1;
        for i in 0..nt {
            for s in [1.0, -1.0] {
                let mut row = vec![0.0; n];
                row[i] = s;
                row[t0 + i] = -1.0;
                lp.add_ineq(&row, s * mean[i])?;
            }
        }
        let mut row = vec![0.0; n];
        row[t0..t0 + nt].iter_mut().for_each(|v| *v = 1.0);
        row[delta_col] = -1.0;
        lp.add_ineq(&row, 0.0)?;
    }
    Ok(())
}

fn set_extra_vars(set: &UncertaintySet, nt: usize) -> usize {
    if matches!(set, UncertaintySet::L1) {
        nt
    } else {
        0
    }
}

fn index_polyhedral(
    model: &SystemModel,
    set: &UncertaintySet,
    cand: &[usize],
) -> Result<CandidateSolve> {
    let (nt, nz) = (model.n_theta, model.n_z);
    let dcol = nt + nz;
    let n = dcol + 1 + set_extra_vars(set, nt);
    let mut obj = vec![0.0; n];
    obj[dcol] = 1.0;
    let mut lp = LpProblem::new(Sense::Min, obj);
    lp.set_bounds(dcol, Some(0.0), None);
    for (j, c) in model.constraints.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[..nt].copy_from_slice(&c.a_theta);
        row[nt..dcol].copy_from_slice(&c.a_z);
        if cand.binary_search(&j).is_ok() {
            lp.add_eq(&row, -c.c)?;
        } else {
            lp.add_ineq(&row, -c.c)?;
        }
    }
    polyhedral_rows(&mut lp, model, set, dcol)?;
    let sol = solve_lp(&lp)?;
    Ok(match sol.status {
        LpStatus::Optimal => Ok((sol.x[dcol], sol.x[..nt].to_vec(), sol.x[nt..dcol].to_vec())),
        LpStatus::Infeasible => {
            Err("active equalities and inactive bounds are inconsistent".into())
        }
        LpStatus::Unbounded => Err("subproblem unbounded".into()),
    })
}

/// Flexibility index with the default execution mode.
pub fn flexibility_index(model: &SystemModel, set: &UncertaintySet) -> Result<IndexResult> {
    flexibility_index_with(model, set, Execution::available())
}

pub fn flexibility_index_with(
    model: &SystemModel,
    set: &UncertaintySet,
    exec: Execution,
) -> Result<IndexResult> {
    if let UncertaintySet::Hyperbox(h) = set {
        if h.delta_minus.len() != model.n_theta || h.delta_plus.len() != model.n_theta {
            return Err(FlexError::Dimension(
                "hyperbox length differs from n_theta".into(),
            ));
        }
    }
    let kind = set.kind();
    let nominal = psi(model, model.uncertainty.mean())?;
    let mut result = IndexResult {
        set: kind,
        delta_star: 0.0,
        delta_units: set.delta_units().to_string(),
        theta_star: model.uncertainty.mean().to_vec(),
        z_star: nominal.z_star.clone(),
        active_set: None,
        alpha_star: (kind == SetKind::Ellipsoid).then_some(0.0),
        interior: nominal.u < 0.0,
        psi_nominal: nominal.u,
        candidates: Vec::new(),
    };
    if !result.interior {
        log::warn!("nominal point is not interior (psi = {:.3e})", nominal.u);
        return Ok(result);
    }

    let cands = enumerate_candidates(model)?;
    let whitened = Whitened::new(model, set);
    let solved = map_indexed(exec, cands.len(), |k| {
        let idx = &cands[k].indices;
        match set {
            UncertaintySet::Ellipsoid => index_quadratic(model, &whitened, idx, false),
            UncertaintySet::L2 => index_quadratic(model, &whitened, idx, true),
            _ => index_polyhedral(model, set, idx),
        }
    });
    let solved: Vec<CandidateSolve> = solved.into_iter().collect::<Result<_>>()?;

    let best = solved
        .iter()
        .filter_map(|s| s.as_ref().ok().map(|v| v.0))
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(FlexError::UnboundedIndex);
    }
    let tie_tol = TIE_TOL * best.abs().max(1.0);
    let mut winner = None;
    for (k, s) in solved.iter().enumerate() {
        let (outcome, tie) = match s {
            Ok((v, _, _)) => (
                CandidateOutcome::Optimal { value: *v },
                *v <= best + tie_tol,
            ),
            Err(reason) => (
                CandidateOutcome::Skipped {
                    reason: reason.clone(),
                },
                false,
            ),
        };
        if tie && winner.is_none() {
            winner = Some(k);
        }
        result.candidates.push(CandidateRecord {
            indices: cands[k].indices.clone(),
            outcome,
            tie,
        });
    }
    let k = winner.expect("finite optimum has a candidate");
    let (value, theta, z) = solved[k].clone().expect("winner is optimal");
    let ties = result.candidates.iter().filter(|c| c.tie).count();
    if ties > 1 {
        log::info!("{ties} candidate active sets tie at delta = {value:.10}");
    }
    result.delta_star = value.max(0.0);
    result.theta_star = theta;
    result.z_star = z;
    result.active_set = Some(cands[k].clone());
    if kind == SetKind::Ellipsoid {
        result.alpha_star = Some(confidence_level(result.delta_star, model.n_theta)?);
    }
    Ok(result)
}

/// Largest `u` with an `(x, z)` in the ball of radius² `r2` satisfying the
/// candidate rows; `None` when the candidate cannot be met inside the ball.
fn test_quadratic(
    model: &SystemModel,
    w: &Whitened,
    cand: &[usize],
    r2: f64,
) -> Result<Option<Point>> {
    let (nt, nz) = (model.n_theta, model.n_z);
    let ball_tol = BALL_TOL * r2.max(1.0);

    let free = solve_qp(&w.qp(model, cand, true, 0.0)?)?;
    if free.status != QpStatus::Optimal || dot(&free.x[..nt], &free.x[..nt]) > r2 + ball_tol {
        return Ok(None);
    }
    let mut lo = free.x[nt + nz];
    let mut best = (free.x[..nt].to_vec(), free.x[nt..nt + nz].to_vec());

    let n = nt + nz + 1;
    let mut obj = vec![0.0; n];
    obj[n - 1] = 1.0;
    let mut lp = LpProblem::new(Sense::Max, obj);
    let r = r2.max(0.0).sqrt();
    for i in 0..nt {
        lp.set_bounds(i, Some(-r), Some(r));
    }
    for (j, c) in model.constraints.iter().enumerate() {
        let mut row = w.g[j].clone();
        row.extend_from_slice(&c.a_z);
        row.push(-1.0);
        if cand.binary_search(&j).is_ok() {
            lp.add_eq(&row, w.h[j])?;
        } else {
            lp.add_ineq(&row, w.h[j])?;
        }
    }
    let sol = solve_lp(&lp)?;
    let mut hi = match sol.status {
        LpStatus::Optimal => sol.objective_value.max(lo),
        LpStatus::Infeasible => lo,
        LpStatus::Unbounded => return Err(FlexError::UnboundedPsi),
    };

    let reach = |u: f64| -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let s = solve_qp(&w.qp(model, cand, false, u)?)?;
        Ok(
            (s.status == QpStatus::Optimal && dot(&s.x[..nt], &s.x[..nt]) <= r2 + ball_tol)
                .then(|| (s.x[..nt].to_vec(), s.x[nt..].to_vec())),
        )
    };
    if let Some(p) = reach(hi)? {
        return Ok(Some((hi, p.0, p.1)));
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        match reach(mid)? {
            Some(p) => {
                lo = mid;
                best = p;
            }
            None => hi = mid,
        }
    }
    Ok(Some((lo, best.0, best.1)))
}

fn test_polyhedral(
    model: &SystemModel,
    set: &UncertaintySet,
    cand: &[usize],
    delta: f64,
) -> Result<Option<Point>> {
    let (nt, nz) = (model.n_theta, model.n_z);
    let ucol = nt + nz;
    let dcol = ucol + 1;
    let n = dcol + 1 + set_extra_vars(set, nt);
    let mut obj = vec![0.0; n];
    obj[ucol] = 1.0;
    let mut lp = LpProblem::new(Sense::Max, obj);
    lp.set_bounds(dcol, Some(delta), Some(delta));
    for (j, c) in model.constraints.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[..nt].copy_from_slice(&c.a_theta);
        row[nt..ucol].copy_from_slice(&c.a_z);
        row[ucol] = -1.0;
        if cand.binary_search(&j).is_ok() {
            lp.add_eq(&row, -c.c)?;
        } else {
            lp.add_ineq(&row, -c.c)?;
        }
    }
    polyhedral_rows(&mut lp, model, set, dcol)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some((
            sol.x[ucol],
            sol.x[..nt].to_vec(),
            sol.x[nt..ucol].to_vec(),
        ))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(FlexError::UnboundedPsi),
    }
}

/// `χ = max_{θ ∈ T(δ)} ψ(θ)`. For the ellipsoid `delta` is the squared
/// Mahalanobis radius, for the other sets the scale of [`UncertaintySet`].
pub fn flexibility_test(
    model: &SystemModel,
    set: &UncertaintySet,
    delta: f64,
) -> Result<ChiResult> {
    flexibility_test_with(model, set, delta, Execution::available())
}

pub fn flexibility_test_with(
    model: &SystemModel,
    set: &UncertaintySet,
    delta: f64,
    exec: Execution,
) -> Result<ChiResult> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(FlexError::Domain(format!("set scale {delta}")));
    }
    let cands = enumerate_candidates(model)?;
    let whitened = Whitened::new(model, set);
    let solved = map_indexed(exec, cands.len(), |k| {
        let idx = &cands[k].indices;
        match set {
            UncertaintySet::Ellipsoid => test_quadratic(model, &whitened, idx, delta),
            UncertaintySet::L2 => test_quadratic(model, &whitened, idx, delta * delta),
            _ => test_polyhedral(model, set, idx, delta),
        }
    });
    let mut best: Option<(usize, f64, Vec<f64>, Vec<f64>)> = None;
    for (k, s) in solved.into_iter().enumerate() {
        if let Some((u, a, z)) = s? {
            if best.as_ref().is_none_or(|b| u > b.1) {
                best = Some((k, u, a, z));
            }
        }
    }
    let (k, chi, a, z) = best.ok_or(FlexError::NoCandidates {
        size: model.n_z + 1,
    })?;
    let theta_worst = match set {
        UncertaintySet::Ellipsoid | UncertaintySet::L2 => whitened.theta(model, &a),
        _ => a,
    };
    Ok(ChiResult {
        chi,
        theta_worst,
        z_worst: z,
        active_set: cands[k].indices.clone(),
        feasible: chi <= FEASIBLE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckOutcome>,
    pub n_probe: usize,
    pub passed: bool,
}

/// Checks an ellipsoidal result: probes drawn uniformly inside `T(δ*)` are
/// feasible, `θ*` is on the feasible boundary and on the ellipsoid.
pub fn verify_solution(
    model: &SystemModel,
    result: &IndexResult,
    n_probe: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if result.set != SetKind::Ellipsoid {
        return Err(FlexError::Domain(
            "verification needs an ellipsoidal result".into(),
        ));
    }
    let mut checks = Vec::new();
    if n_probe > 0 {
        let mut rng = Rng::new(seed);
        let w = Whitened::new(model, &UncertaintySet::Ellipsoid);
        let probes: Vec<Vec<f64>> = (0..n_probe)
            .map(|_| {
                w.theta(
                    model,
                    &sample_in_ball(model.n_theta, result.delta_star, &mut rng),
                )
            })
            .collect();
        let vals = map_indexed(Execution::available(), n_probe, |i| {
            psi(model, &probes[i]).map(|p| p.u)
        });
        let worst = vals
            .into_iter()
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckOutcome {
            name: "containment".into(),
            passed: worst <= 1e-6,
            worst,
            tolerance: 1e-6,
        });
    }
    let p = psi(model, &result.theta_star)?.u;
    checks.push(CheckOutcome {
        name: "feasible_boundary".into(),
        passed: p.abs() <= 1e-7 || !result.interior,
        worst: p.abs(),
        tolerance: 1e-7,
    });
    let gap = (model.uncertainty.mahalanobis_sq(&result.theta_star) - result.delta_star).abs();
    checks.push(CheckOutcome {
        name: "ellipsoid_boundary".into(),
        passed: gap <= 1e-7,
        worst: gap,
        tolerance: 1e-7,
    });
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport {
        checks,
        n_probe,
        passed,
    })
}
