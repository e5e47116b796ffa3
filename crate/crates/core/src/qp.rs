//! Primal active-set solver for convex quadratic programs
//!
//! ```text
//! minimize ½ xᵀ W x + qᵀ x   s.t.  A_eq x = b_eq,  A_ineq x ≤ b_ineq
//! ```
//!
//! `W` only needs to be positive semidefinite. Each iteration works in the
//! null space of the working set; directions of zero curvature in that
//! subspace are followed when the linear term decreases along them, which is
//! how recourse variables with no quadratic weight are handled without
//! regularizing `W`.

use crate::error::{FlexError, Result};
use crate::linalg::{cholesky, dot, norm_inf, null_space, pivoted_cholesky, row_rank, Matrix};
use crate::lp::{solve_lp, LinearRows, LpProblem, LpStatus, Sense};

const MAX_CHANGES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub w: Matrix,
    pub q: Vec<f64>,
    pub eq: LinearRows,
    pub ineq: LinearRows,
}

impl QpProblem {
    pub fn new(w: Matrix, q: Vec<f64>) -> Self {
        let n = q.len();
        Self {
            w,
            q,
            eq: LinearRows::empty(n),
            ineq: LinearRows::empty(n),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn add_eq(&mut self, row: &[f64], rhs: f64) -> Result<&mut Self> {
        self.eq.push(row, rhs)?;
        Ok(self)
    }

    pub fn add_ineq(&mut self, row: &[f64], rhs: f64) -> Result<&mut Self> {
        self.ineq.push(row, rhs)?;
        Ok(self)
    }

    /// `½ xᵀ W x + qᵀ x`
    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self.w.quad_form(x) + dot(&self.q, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    UnboundedSubspace,
}

/// Result of [`solve_qp`]. Multipliers satisfy
/// `W x + q + A_eqᵀ y_eq + A_ineqᵀ y_ineq = 0` with `y_ineq ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub active: Vec<usize>,
    pub dual_eq: Vec<f64>,
    pub dual_ineq: Vec<f64>,
    pub changes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Row {
    Eq(usize),
    Ineq(usize),
}

struct Workspace<'a> {
    p: &'a QpProblem,
    w: Matrix,
    work: Vec<Row>,
}

impl Workspace<'_> {
    fn row(&self, r: Row) -> &[f64] {
        match r {
            Row::Eq(i) => self.p.eq.a.row(i),
            Row::Ineq(i) => self.p.ineq.a.row(i),
        }
    }

    fn working_matrix(&self) -> Matrix {
        let n = self.p.num_vars();
        let mut a = Matrix::zeros(0, n);
        for &r in &self.work {
            a.push_row(self.row(r)).expect("row length");
        }
        a
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.w.matvec(x);
        g.iter_mut().zip(&self.p.q).for_each(|(gi, qi)| *gi += qi);
        g
    }
}

/// Search direction in the working-set null space.
enum Direction {
    /// Minimizer of the model in the subspace lies at `x + p`.
    Newton(Vec<f64>),
    /// Zero-curvature descent ray.
    Ray(Vec<f64>),
}

/// Solves `min ½ yᵀ H y + rᵀ y` for PSD `H`, or returns a descent ray with
/// `H v = 0`, `rᵀ v < 0` when the model is unbounded below.
fn reduced_step(h: &Matrix, r: &[f64], gscale: f64) -> Result<(Vec<f64>, bool)> {
    let k = h.rows();
    let (perm, l, s) = pivoted_cholesky(h, 1e-12)?;
    let solve11 = |rhs: &[f64]| -> Vec<f64> {
        // L11 L11ᵀ y = rhs
        let mut y = rhs.to_vec();
        for i in 0..s {
            for t in 0..i {
                y[i] -= l[(i, t)] * y[t];
            }
            y[i] /= l[(i, i)];
        }
        for i in (0..s).rev() {
            for t in (i + 1)..s {
                y[i] -= l[(t, i)] * y[t];
            }
            y[i] /= l[(i, i)];
        }
        y
    };
    let hp = |i: usize, j: usize| h[(perm[i], perm[j])];
    let rp: Vec<f64> = perm.iter().map(|&i| r[i]).collect();

    if s < k {
        // null vectors of H in permuted coordinates: [-H11⁻¹ H12 e_i; e_i]
        let mut c_sum = vec![0.0; k];
        let mut any = false;
        for free in s..k {
            let h12: Vec<f64> = (0..s).map(|i| hp(i, free)).collect();
            let top = solve11(&h12);
            let mut nv = vec![0.0; k];
            for i in 0..s {
                nv[i] = -top[i];
            }
            nv[free] = 1.0;
            let nn = nv.iter().map(|v| v * v).sum::<f64>().sqrt();
            nv.iter_mut().for_each(|v| *v /= nn);
            let c = dot(&nv, &rp);
            if c.abs() > 1e-10 * (1.0 + gscale) {
                any = true;
                for i in 0..k {
                    c_sum[i] -= c * nv[i];
                }
            }
        }
        if any {
            let mut v = vec![0.0; k];
            for (i, &pi) in perm.iter().enumerate() {
                v[pi] = c_sum[i];
            }
            return Ok((v, true));
        }
    }
    let y1 = solve11(&rp[..s]);
    let mut y = vec![0.0; k];
    for i in 0..s {
        y[perm[i]] = -y1[i];
    }
    Ok((y, false))
}

fn direction(ws: &Workspace, x: &[f64], g: &[f64]) -> Result<Direction> {
    let n = x.len();
    let aw = ws.working_matrix();
    let (z, _) = null_space(&aw, 1e-12);
    if z.cols() == 0 {
        return Ok(Direction::Newton(vec![0.0; n]));
    }
    let wz = ws.w.matmul(&z)?;
    let h = z.transpose().matmul(&wz)?.symmetrized();
    let r = z.tr_matvec(g);
    let (y, ray) = reduced_step(&h, &r, norm_inf(g))?;
    let p = z.matvec(&y);
    Ok(if ray {
        Direction::Ray(p)
    } else {
        Direction::Newton(p)
    })
}

/// Least-squares multipliers for the working set: `A_wᵀ μ = -g`.
fn multipliers(ws: &Workspace, g: &[f64]) -> Result<Vec<f64>> {
    let aw = ws.working_matrix();
    let k = aw.rows();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut gram = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = dot(aw.row(i), aw.row(j));
        }
    }
    let rhs: Vec<f64> = (0..k).map(|i| -dot(aw.row(i), g)).collect();
    Ok(cholesky(&gram)
        .map_err(|_| FlexError::RankDeficient {
            rank: row_rank(&aw, 1e-12),
            rows: k,
        })?
        .solve(&rhs))
}

fn validate(p: &QpProblem) -> Result<Matrix> {
    let n = p.num_vars();
    if p.w.rows() != n
        || p.w.cols() != n
        || p.eq.a.cols() != n
        || p.ineq.a.cols() != n
        || p.eq.a.rows() != p.eq.b.len()
        || p.ineq.a.rows() != p.ineq.b.len()
    {
        return Err(FlexError::Dimension("inconsistent QP dimensions".into()));
    }
    if p.w.asymmetry() > 1e-10 * (1.0 + p.w.max_abs()) {
        return Err(FlexError::NotPsd(format!(
            "asymmetry {:.3e}",
            p.w.asymmetry()
        )));
    }
    let w = p.w.symmetrized();
    pivoted_cholesky(&w, 1e-10)?;
    Ok(w)
}

/// Solves a convex QP by the primal active-set method, starting from a
/// feasible point found by the simplex solver.
pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    let w = validate(p)?;
    let n = p.num_vars();

    let mut lp = LpProblem::new(Sense::Min, vec![0.0; n]);
    lp.eq = p.eq.clone();
    lp.ineq = p.ineq.clone();
    let start = solve_lp(&lp)?;
    if start.status == LpStatus::Infeasible {
        return Ok(QpSolution {
            status: QpStatus::Infeasible,
            x: vec![f64::NAN; n],
            objective_value: f64::NAN,
            active: Vec::new(),
            dual_eq: vec![0.0; p.eq.len()],
            dual_ineq: vec![0.0; p.ineq.len()],
            changes: 0,
        });
    }
    let mut x = start.x;

    let mut ws = Workspace {
        p,
        w,
        work: Vec::new(),
    };
    // independent subset of the equality rows
    for i in 0..p.eq.len() {
        ws.work.push(Row::Eq(i));
        let a = ws.working_matrix();
        if row_rank(&a, 1e-12) < a.rows() {
            ws.work.pop();
        }
    }

    let mut changes = 0;
    let mut stationary = false;
    let mut loops = 0;
    loop {
        loops += 1;
        if changes >= MAX_CHANGES || loops > 10 * MAX_CHANGES {
            return Err(FlexError::IterationLimit {
                solver: "active-set QP",
                limit: MAX_CHANGES,
            });
        }
        let g = ws.gradient(&x);
        let xscale = 1.0 + norm_inf(&x);

        let dir = if stationary {
            Direction::Newton(vec![0.0; n])
        } else {
            direction(&ws, &x, &g)?
        };
        let (step, ray) = match dir {
            Direction::Newton(p) => (p, false),
            Direction::Ray(p) => (p, true),
        };

        if !ray && norm_inf(&step) <= 1e-11 * xscale {
            let mu = multipliers(&ws, &g)?;
            let tol = 1e-10 * (1.0 + norm_inf(&g));
            let mut drop: Option<(usize, usize, f64)> = None;
            for (k, (&r, &m)) in ws.work.iter().zip(&mu).enumerate() {
                if let Row::Ineq(i) = r {
                    if m < -tol {
                        let better = match drop {
                            None => true,
                            Some((_, bi, bm)) => m < bm || (m == bm && i < bi),
                        };
                        if better {
                            drop = Some((k, i, m));
                        }
                    }
                }
            }
            match drop {
                Some((k, _, _)) => {
                    ws.work.remove(k);
                    changes += 1;
                    stationary = false;
                    continue;
                }
                None => {
                    let mut dual_eq = vec![0.0; p.eq.len()];
                    let mut dual_ineq = vec![0.0; p.ineq.len()];
                    let mut active = Vec::new();
                    for (&r, &m) in ws.work.iter().zip(&mu) {
                        match r {
                            Row::Eq(i) => dual_eq[i] = m,
                            Row::Ineq(i) => {
                                dual_ineq[i] = m.max(0.0);
                                active.push(i);
                            }
                        }
                    }
                    active.sort_unstable();
                    return Ok(QpSolution {
                        status: QpStatus::Optimal,
                        objective_value: p.objective(&x),
                        x,
                        active,
                        dual_eq,
                        dual_ineq,
                        changes,
                    });
                }
            }
        }

        // ratio test over inequalities outside the working set
        let pnorm = norm_inf(&step);
        let mut alpha = if ray { f64::INFINITY } else { 1.0 };
        let mut block: Option<usize> = None;
        for i in 0..p.ineq.len() {
            if ws.work.contains(&Row::Ineq(i)) {
                continue;
            }
            let a = p.ineq.a.row(i);
            let ap = dot(a, &step);
            if ap > 1e-12 * norm_inf(a) * pnorm {
                let slack = (p.ineq.b[i] - dot(a, &x)).max(0.0);
                let t = slack / ap;
                if t < alpha {
                    alpha = t;
                    block = Some(i);
                }
            }
        }
        if alpha.is_infinite() {
            return Ok(QpSolution {
                status: QpStatus::UnboundedSubspace,
                objective_value: f64::NEG_INFINITY,
                x,
                active: Vec::new(),
                dual_eq: vec![0.0; p.eq.len()],
                dual_ineq: vec![0.0; p.ineq.len()],
                changes,
            });
        }
        for (xi, pi) in x.iter_mut().zip(&step) {
            *xi += alpha * pi;
        }
        match block {
            Some(i) => {
                ws.work.push(Row::Ineq(i));
                changes += 1;
                stationary = false;
            }
            None => stationary = !ray,
        }
    }
}

/// Largest violation of the QP constraints at `x`.
pub fn constraint_violation(p: &QpProblem, x: &[f64]) -> f64 {
    let eq = p.eq.a.matvec(x);
    let ineq = p.ineq.a.matvec(x);
    let e = eq
        .iter()
        .zip(&p.eq.b)
        .fold(0.0_f64, |m, (v, b)| m.max((v - b).abs()));
    ineq.iter().zip(&p.ineq.b).fold(e, |m, (v, b)| m.max(v - b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Largest KKT residual: stationarity, feasibility, dual sign and
    /// complementarity.
    fn kkt_residual(p: &QpProblem, s: &QpSolution) -> f64 {
        let mut g = p.w.matvec(&s.x);
        g.iter_mut().zip(&p.q).for_each(|(a, b)| *a += b);
        let e = p.eq.a.tr_matvec(&s.dual_eq);
        let i = p.ineq.a.tr_matvec(&s.dual_ineq);
        let stat = (0..g.len()).fold(0.0_f64, |m, k| m.max((g[k] + e[k] + i[k]).abs()));
        let feas = constraint_violation(p, &s.x).max(0.0);
        let sign = s.dual_ineq.iter().fold(0.0_f64, |m, v| m.max(-v));
        let ax = p.ineq.a.matvec(&s.x);
        let comp = (0..ax.len()).fold(0.0_f64, |m, k| {
            m.max((s.dual_ineq[k] * (ax[k] - p.ineq.b[k])).abs())
        });
        stat.max(feas).max(sign).max(comp)
    }

    #[test]
    fn scalar_bound() {
        let mut p = QpProblem::new(Matrix::diag(&[2.0]), vec![0.0]);
        p.add_ineq(&[-1.0], -1.0).unwrap();
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, 1.0, epsilon = 1e-12);
        assert_eq!(s.active, vec![0]);
        assert!(kkt_residual(&p, &s) < 1e-8);
    }

    #[test]
    fn simple_system_case_two_projection() {
        // (θ1-4)²/2 + (θ2-5)²/3 = ½θᵀWθ + qᵀθ + const
        let w = Matrix::diag(&[1.0, 2.0 / 3.0]);
        let q = vec![-4.0, -10.0 / 3.0];
        let constant = 16.0 / 2.0 + 25.0 / 3.0;
        let mut p = QpProblem::new(w, q);
        p.add_eq(&[1.0, -2.0], 2.0).unwrap();
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value + constant, 224.0 / 49.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[0], 36.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 11.0 / 7.0, epsilon = 1e-12);
        assert!(kkt_residual(&p, &s) < 1e-8);
    }

    #[test]
    fn infeasible_equalities() {
        let mut p = QpProblem::new(Matrix::diag(&[2.0]), vec![0.0]);
        p.add_eq(&[1.0], 1.0).unwrap();
        p.add_eq(&[1.0], 2.0).unwrap();
        assert_eq!(solve_qp(&p).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn zero_curvature_with_linear_cost_is_unbounded() {
        // min x² + z, z free
        let mut p = QpProblem::new(Matrix::diag(&[2.0, 0.0]), vec![0.0, 1.0]);
        p.add_ineq(&[1.0, 0.0], 3.0).unwrap();
        assert_eq!(solve_qp(&p).unwrap().status, QpStatus::UnboundedSubspace);
    }

    #[test]
    fn singular_weight_recourse_is_not_penalized() {
        // min x² s.t. x + z ≥ 1, z ≤ 0.25: z absorbs what it can, x = 0.75
        let mut p = QpProblem::new(Matrix::diag(&[2.0, 0.0]), vec![0.0, 0.0]);
        p.add_ineq(&[-1.0, -1.0], -1.0).unwrap();
        p.add_ineq(&[0.0, 1.0], 0.25).unwrap();
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 0.75, epsilon = 1e-10);
        assert_abs_diff_eq!(s.objective_value, 0.5625, epsilon = 1e-10);
        assert!(kkt_residual(&p, &s) < 1e-8);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut p = QpProblem::new(Matrix::identity(2), vec![0.0, 0.0]);
        p.add_eq(&[1.0, 1.0], 2.0).unwrap();
        p.add_eq(&[2.0, 2.0], 4.0).unwrap();
        let s = solve_qp(&p).unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-12);
        assert!(kkt_residual(&p, &s) < 1e-8);
    }

    #[test]
    fn rejects_indefinite_weight() {
        let p = QpProblem::new(Matrix::diag(&[1.0, -1.0]), vec![0.0, 0.0]);
        assert!(matches!(solve_qp(&p), Err(FlexError::NotPsd(_))));
    }

    fn random_qp(vals: &[f64], n: usize, m: usize, psd_rank: usize) -> QpProblem {
        let mut it = vals.iter().copied();
        let mut f = Matrix::zeros(psd_rank, n);
        for i in 0..psd_rank {
            for j in 0..n {
                f[(i, j)] = it.next().unwrap();
            }
        }
        let w = f.transpose().matmul(&f).unwrap();
        let q: Vec<f64> = (0..n).map(|_| it.next().unwrap()).collect();
        let x0: Vec<f64> = (0..n).map(|_| it.next().unwrap()).collect();
        let mut p = QpProblem::new(w, q);
        for _ in 0..m {
            let row: Vec<f64> = (0..n).map(|_| it.next().unwrap()).collect();
            let b = dot(&row, &x0) + it.next().unwrap().abs();
            p.add_ineq(&row, b).unwrap();
        }
        // keep everything bounded
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            p.add_ineq(&e, 10.0).unwrap();
            e[j] = -1.0;
            p.add_ineq(&e, 10.0).unwrap();
        }
        p
    }

    proptest! {
        #[test]
        fn kkt_holds_on_random_problems(vals in prop::collection::vec(-2.0f64..2.0, 120),
                                        n in 2usize..6, m in 0usize..6, rank in 0usize..6) {
            let p = random_qp(&vals, n, m, rank.min(n));
            let s = solve_qp(&p).unwrap();
            prop_assert_eq!(s.status, QpStatus::Optimal);
            prop_assert!(kkt_residual(&p, &s) <= 1e-8, "kkt {}", kkt_residual(&p, &s));
        }

        #[test]
        fn objective_invariant_under_row_permutation(vals in prop::collection::vec(-2.0f64..2.0, 120),
                                                     n in 2usize..6, m in 1usize..6, k in 1usize..11) {
            let p = random_qp(&vals, n, m, n);
            let mut rows: Vec<(Vec<f64>, f64)> = (0..p.ineq.len())
                .map(|i| (p.ineq.a.row(i).to_vec(), p.ineq.b[i])).collect();
            let len = rows.len();
            rows.rotate_left(k % len);
            let mut q = QpProblem::new(p.w.clone(), p.q.clone());
            for (r, b) in &rows { q.add_ineq(r, *b).unwrap(); }
            let a = solve_qp(&p).unwrap();
            let b = solve_qp(&q).unwrap();
            prop_assert!((a.objective_value - b.objective_value).abs() <= 1e-9 * (1.0 + a.objective_value.abs()));
        }

        #[test]
        fn zero_weight_reproduces_lp(vals in prop::collection::vec(-2.0f64..2.0, 120),
                                     n in 2usize..6, m in 1usize..6) {
            let p = random_qp(&vals, n, m, 0);
            let mut lp = LpProblem::new(Sense::Min, p.q.clone());
            lp.ineq = p.ineq.clone();
            let l = solve_lp(&lp).unwrap();
            let s = solve_qp(&p).unwrap();
            prop_assert!((l.objective_value - s.objective_value).abs() <= 1e-9 * (1.0 + l.objective_value.abs()));
        }
    }
}
