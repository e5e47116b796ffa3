//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated over free variables with optional per-variable
//! bounds, equality rows `A_eq x = b_eq` and inequality rows
//! `A_ineq x ≤ b_ineq`. Internally they are brought to standard form
//! (`x ≥ 0`, equalities with nonnegative right-hand side) by shifting and
//! splitting variables and adding slacks, then solved on a full tableau
//! with one artificial per row. Dantzig pricing is used until too many
//! degenerate pivots accumulate, after which Bland's rule takes over.

use crate::error::{FlexError, Result};
use crate::linalg::{dot, Matrix};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// A block of linear rows `A x (= or ≤) b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRows {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl LinearRows {
    pub fn empty(n: usize) -> Self {
        Self {
            a: Matrix::zeros(0, n),
            b: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn push(&mut self, row: &[f64], rhs: f64) -> Result<()> {
        self.a.push_row(row)?;
        self.b.push(rhs);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub eq: LinearRows,
    pub ineq: LinearRows,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl LpProblem {
    /// A problem over `objective.len()` free variables with no constraints.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            eq: LinearRows::empty(n),
            ineq: LinearRows::empty(n),
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: &[f64], rhs: f64) -> Result<&mut Self> {
        self.eq.push(row, rhs)?;
        Ok(self)
    }

    pub fn add_ineq(&mut self, row: &[f64], rhs: f64) -> Result<&mut Self> {
        self.ineq.push(row, rhs)?;
        Ok(self)
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let dims_ok = self.eq.a.cols() == n
            && self.ineq.a.cols() == n
            && self.eq.a.rows() == self.eq.b.len()
            && self.ineq.a.rows() == self.ineq.b.len()
            && self.lower.len() == n
            && self.upper.len() == n;
        if !dims_ok {
            return Err(FlexError::Dimension("inconsistent LP dimensions".into()));
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.eq.a.is_finite()
            && self.ineq.a.is_finite()
            && self.eq.b.iter().chain(&self.ineq.b).all(|v| v.is_finite());
        if !finite {
            return Err(FlexError::Dimension("non-finite LP coefficient".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if let (Some(l), Some(u)) = (l, u) {
                if l > u {
                    return Err(FlexError::Dimension(format!("bound {l} > {u}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`].
///
/// Multipliers follow the convention `s·c + A_eqᵀ y_eq + A_ineqᵀ y_ineq + r = 0`
/// with `s = +1` for `Min`, `s = -1` for `Max`, `y_ineq ≥ 0`, and `r` the
/// bound multipliers (positive at an active upper bound, negative at an
/// active lower bound).
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub dual_eq: Vec<f64>,
    pub dual_ineq: Vec<f64>,
    pub bound_dual: Vec<f64>,
    pub dual_objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn status_only(status: LpStatus, n: usize, p: &LpProblem, pivots: usize) -> Self {
        let v = match (status, p.sense) {
            (LpStatus::Unbounded, Sense::Min) => f64::NEG_INFINITY,
            (LpStatus::Unbounded, Sense::Max) => f64::INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            x: vec![f64::NAN; n],
            objective_value: v,
            dual_eq: vec![0.0; p.eq.len()],
            dual_ineq: vec![0.0; p.ineq.len()],
            bound_dual: vec![0.0; n],
            dual_objective: f64::NAN,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How a user variable is expressed through standard-form columns.
#[derive(Debug, Clone)]
enum VarMap {
    /// `x = offset + x_s[col]`
    Shift { col: usize, offset: f64 },
    /// `x = offset - x_s[col]`
    Mirror { col: usize, offset: f64 },
    /// `x = x_s[pos] - x_s[neg]`
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum RowOrigin {
    Eq(usize),
    Ineq(usize),
    Upper(usize),
}

struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    constant: f64,
    origin: Vec<RowOrigin>,
    sign: Vec<f64>,
    vars: Vec<VarMap>,
    /// rows found empty and dropped: (origin, sign)
    dropped: Vec<RowOrigin>,
}

fn standard_form(p: &LpProblem) -> std::result::Result<StandardForm, LpStatus> {
    let n = p.num_vars();
    let sense = match p.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut vars = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut upper_rows = Vec::new();
    for i in 0..n {
        match (p.lower[i], p.upper[i]) {
            (Some(l), u) => {
                vars.push(VarMap::Shift {
                    col: ncols,
                    offset: l,
                });
                if let Some(u) = u {
                    upper_rows.push((i, ncols, u - l));
                }
                ncols += 1;
            }
            (None, Some(u)) => {
                vars.push(VarMap::Mirror {
                    col: ncols,
                    offset: u,
                });
                ncols += 1;
            }
            (None, None) => {
                vars.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }
    let nslack = p.ineq.len() + upper_rows.len();
    let total = ncols + nslack;

    let mut c = vec![0.0; total];
    let mut constant = 0.0;
    for (i, vm) in vars.iter().enumerate() {
        let ci = sense * p.objective[i];
        match *vm {
            VarMap::Shift { col, offset } => {
                c[col] += ci;
                constant += ci * offset;
            }
            VarMap::Mirror { col, offset } => {
                c[col] -= ci;
                constant += ci * offset;
            }
            VarMap::Split { pos, neg } => {
                c[pos] += ci;
                c[neg] -= ci;
            }
        }
    }

    let expand = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; total];
        let mut rhs = rhs;
        for (i, &aij) in row.iter().enumerate() {
            if aij == 0.0 {
                continue;
            }
            match vars[i] {
                VarMap::Shift { col, offset } => {
                    out[col] += aij;
                    rhs -= aij * offset;
                }
                VarMap::Mirror { col, offset } => {
                    out[col] -= aij;
                    rhs -= aij * offset;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += aij;
                    out[neg] -= aij;
                }
            }
        }
        (out, rhs)
    };

    let mut sf = StandardForm {
        a: Vec::new(),
        b: Vec::new(),
        c,
        constant,
        origin: Vec::new(),
        sign: Vec::new(),
        vars: Vec::new(),
        dropped: Vec::new(),
    };
    let push = |sf: &mut StandardForm, mut row: Vec<f64>, mut rhs: f64, origin: RowOrigin| {
        let scale = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            // empty row: consistent rows are dropped, otherwise infeasible
            let ok = match origin {
                RowOrigin::Eq(_) => rhs.abs() <= PHASE1_TOL,
                _ => rhs >= -PHASE1_TOL,
            };
            sf.dropped.push(origin);
            return ok;
        }
        let mut s = 1.0;
        if rhs < 0.0 {
            s = -1.0;
            rhs = -rhs;
            row.iter_mut().for_each(|v| *v = -*v);
        }
        sf.a.push(row);
        sf.b.push(rhs);
        sf.origin.push(origin);
        sf.sign.push(s);
        true
    };

    let mut feasible = true;
    for i in 0..p.eq.len() {
        let (row, rhs) = expand(p.eq.a.row(i), p.eq.b[i]);
        feasible &= push(&mut sf, row, rhs, RowOrigin::Eq(i));
    }
    let mut slack = ncols;
    for i in 0..p.ineq.len() {
        let (mut row, rhs) = expand(p.ineq.a.row(i), p.ineq.b[i]);
        let empty = row.iter().all(|v| *v == 0.0);
        if !empty {
            row[slack] = 1.0;
        }
        slack += 1;
        feasible &= push(&mut sf, row, rhs, RowOrigin::Ineq(i));
    }
    for &(i, col, width) in &upper_rows {
        let mut row = vec![0.0; total];
        row[col] = 1.0;
        row[slack] = 1.0;
        slack += 1;
        feasible &= push(&mut sf, row, width, RowOrigin::Upper(i));
    }
    if !feasible {
        return Err(LpStatus::Infeasible);
    }
    sf.vars = vars;
    Ok(sf)
}

struct Tableau {
    t: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    obj: Vec<f64>,
    obj_rhs: f64,
    basis: Vec<usize>,
    ncols: usize,
    pivots: usize,
    degenerate: usize,
    bland_after: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.t[r][j];
        let width = self.t[r].len();
        for k in 0..width {
            self.t[r][k] /= piv;
        }
        self.rhs[r] /= piv;
        let prow = self.t[r].clone();
        let prhs = self.rhs[r];
        for i in 0..self.t.len() {
            if i == r {
                continue;
            }
            let f = self.t[i][j];
            if f != 0.0 {
                for (v, pv) in self.t[i].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                self.t[i][j] = 0.0;
                self.rhs[i] -= f * prhs;
                if self.rhs[i] < 0.0 && self.rhs[i] > -1e-12 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let f = self.obj[j];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.obj[j] = 0.0;
            self.obj_rhs -= f * prhs;
        }
        self.basis[r] = j;
        self.pivots += 1;
    }

    /// Runs simplex iterations on the current objective row; columns at or
    /// beyond `allowed` may not enter.
    fn run(&mut self, allowed: usize) -> Result<PhaseOutcome> {
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(FlexError::IterationLimit {
                    solver: "simplex",
                    limit: MAX_PIVOTS,
                });
            }
            let bland = self.degenerate >= self.bland_after;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..allowed {
                let d = self.obj[j];
                if d < -COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else {
                return Ok(PhaseOutcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][j];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[r].max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            let better = if tie {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    a > self.t[lr][j]
                                }
                            } else {
                                ratio < lratio
                            };
                            if better {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };
            if ratio <= 1e-12 {
                self.degenerate += 1;
            }
            self.pivot(r, j);
        }
    }

    fn set_objective(&mut self, c: &[f64]) {
        self.obj = c.to_vec();
        self.obj.resize(self.ncols, 0.0);
        self.obj_rhs = 0.0;
        for r in 0..self.t.len() {
            let cb = self.obj_cost(c, self.basis[r]);
            if cb != 0.0 {
                for (o, v) in self.obj.iter_mut().zip(&self.t[r]) {
                    *o -= cb * v;
                }
                self.obj_rhs -= cb * self.rhs[r];
            }
        }
    }

    fn obj_cost(&self, c: &[f64], j: usize) -> f64 {
        c.get(j).copied().unwrap_or(0.0)
    }
}

/// Solves a linear program with the two-phase dense simplex method.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let sf = match standard_form(p) {
        Ok(sf) => sf,
        Err(status) => return Ok(LpSolution::status_only(status, n, p, 0)),
    };
    let m = sf.a.len();
    let ns = sf.c.len();
    let ncols = ns + m;

    let mut t = Vec::with_capacity(m);
    for (r, row) in sf.a.iter().enumerate() {
        let mut full = row.clone();
        full.resize(ncols, 0.0);
        full[ns + r] = 1.0;
        t.push(full);
    }
    let mut tab = Tableau {
        t,
        rhs: sf.b.clone(),
        obj: Vec::new(),
        obj_rhs: 0.0,
        basis: (ns..ns + m).collect(),
        ncols,
        pivots: 0,
        degenerate: 0,
        bland_after: 5 * (m + ns),
    };

    // phase 1: minimize the sum of artificials
    let mut c1 = vec![0.0; ncols];
    c1[ns..].iter_mut().for_each(|v| *v = 1.0);
    tab.set_objective(&c1);
    tab.run(ns)?;
    let infeas = -tab.obj_rhs;
    let bscale = sf.b.iter().fold(1.0_f64, |mx, v| mx.max(v.abs()));
    if infeas > PHASE1_TOL * bscale {
        return Ok(LpSolution::status_only(
            LpStatus::Infeasible,
            n,
            p,
            tab.pivots,
        ));
    }
    // drive zero-level artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= ns {
            if let Some(j) = (0..ns).find(|&j| tab.t[r][j].abs() > PIVOT_TOL) {
                tab.pivot(r, j);
            }
        }
    }

    // phase 2
    tab.set_objective(&sf.c);
    if let PhaseOutcome::Unbounded = tab.run(ns)? {
        return Ok(LpSolution::status_only(
            LpStatus::Unbounded,
            n,
            p,
            tab.pivots,
        ));
    }

    let mut xs = vec![0.0; ns];
    for (r, &bv) in tab.basis.iter().enumerate() {
        if bv < ns {
            xs[bv] = tab.rhs[r];
        }
    }
    let x: Vec<f64> = sf
        .vars
        .iter()
        .map(|vm| match *vm {
            VarMap::Shift { col, offset } => offset + xs[col],
            VarMap::Mirror { col, offset } => offset - xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect();

    // standard-form duals y = c_Bᵀ B⁻¹; B⁻¹ sits in the artificial columns
    let mut y = vec![0.0; m];
    for (r, &bv) in tab.basis.iter().enumerate() {
        let cb = if bv < ns { sf.c[bv] } else { 0.0 };
        if cb != 0.0 {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += cb * tab.t[r][ns + k];
            }
        }
    }
    let sense = match p.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let dual_min = dot(&sf.b, &y) + sf.constant;

    let mut dual_eq = vec![0.0; p.eq.len()];
    let mut dual_ineq = vec![0.0; p.ineq.len()];
    let mut bound_dual = vec![0.0; n];
    for (r, origin) in sf.origin.iter().enumerate() {
        let mu = -sf.sign[r] * y[r];
        match *origin {
            RowOrigin::Eq(i) => dual_eq[i] = mu,
            RowOrigin::Ineq(i) => dual_ineq[i] = mu,
            RowOrigin::Upper(i) => bound_dual[i] += mu,
        }
    }
    // reduced costs of shifted/mirrored columns are the lower/upper bound duals
    let reduced = |col: usize| -> f64 {
        let mut d = sf.c[col];
        for r in 0..m {
            d -= sf.a[r][col] * y[r];
        }
        d
    };
    for (i, vm) in sf.vars.iter().enumerate() {
        match *vm {
            VarMap::Shift { col, .. } => bound_dual[i] -= reduced(col),
            VarMap::Mirror { col, .. } => bound_dual[i] += reduced(col),
            VarMap::Split { .. } => {}
        }
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: dot(&p.objective, &x),
        x,
        dual_eq,
        dual_ineq,
        bound_dual,
        dual_objective: sense * dual_min,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_strong_duality(s: &LpSolution) {
        let tol = 1e-7 * (1.0 + s.objective_value.abs());
        assert!(
            (s.objective_value - s.dual_objective).abs() <= tol,
            "primal {} dual {}",
            s.objective_value,
            s.dual_objective
        );
    }

    #[test]
    fn psi_of_simple_system_at_nominal() {
        // min u s.t. c_j ≤ u
        let mut p = LpProblem::new(Sense::Min, vec![1.0]);
        for c in [-5.0, -8.0, -4.0, -5.0] {
            p.add_ineq(&[-1.0], -c).unwrap();
        }
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.dual_ineq[2], 1.0, epsilon = 1e-12);
        assert_strong_duality(&s);
    }

    #[test]
    fn nonneg_bound_min_and_max() {
        let mut p = LpProblem::new(Sense::Min, vec![1.0]);
        p.add_ineq(&[-1.0], 0.0).unwrap();
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 0.0);

        p.sense = Sense::Max;
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_pair() {
        let mut p = LpProblem::new(Sense::Min, vec![0.0]);
        p.add_eq(&[1.0], 1.0).unwrap();
        p.add_eq(&[1.0], 2.0).unwrap();
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn empty_rows_are_presolved() {
        let mut p = LpProblem::new(Sense::Min, vec![1.0]);
        p.add_ineq(&[0.0], 1.0).unwrap();
        p.set_bounds(0, Some(2.0), None);
        let s = solve_lp(&p).unwrap();
        assert_abs_diff_eq!(s.x[0], 2.0);
        let mut q = LpProblem::new(Sense::Min, vec![1.0]);
        q.add_ineq(&[0.0], -1.0).unwrap();
        assert_eq!(solve_lp(&q).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn bounds_and_their_duals() {
        // max x + y s.t. x + 2y ≤ 4, 0 ≤ x ≤ 3, y ≤ 5 (y free below)
        let mut p = LpProblem::new(Sense::Max, vec![1.0, 1.0]);
        p.add_ineq(&[1.0, 2.0], 4.0).unwrap();
        p.set_bounds(0, Some(0.0), Some(3.0));
        p.set_bounds(1, None, Some(5.0));
        let s = solve_lp(&p).unwrap();
        assert_abs_diff_eq!(s.x[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, 3.5, epsilon = 1e-12);
        assert_strong_duality(&s);
        // -c + Aᵀy + r = 0
        let y = s.dual_ineq[0];
        assert_abs_diff_eq!(-1.0 + y + s.bound_dual[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(-1.0 + 2.0 * y + s.bound_dual[1], 0.0, epsilon = 1e-12);
        assert!(y >= 0.0 && s.bound_dual[0] > 0.0);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic cycling example (Beale) under Dantzig pricing
        let mut p = LpProblem::new(Sense::Min, vec![-0.75, 150.0, -0.02, 6.0]);
        p.add_ineq(&[0.25, -60.0, -0.04, 9.0], 0.0).unwrap();
        p.add_ineq(&[0.5, -90.0, -0.02, 3.0], 0.0).unwrap();
        p.add_ineq(&[0.0, 0.0, 1.0, 0.0], 1.0).unwrap();
        for i in 0..4 {
            p.set_bounds(i, Some(0.0), None);
        }
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, -0.05, epsilon = 1e-9);
        assert_strong_duality(&s);
    }

    #[test]
    fn deterministic() {
        let mut p = LpProblem::new(Sense::Min, vec![1.0, -2.0, 0.5]);
        p.add_ineq(&[1.0, 1.0, 1.0], 3.0).unwrap();
        p.add_ineq(&[-1.0, 2.0, 0.0], 2.0).unwrap();
        p.add_eq(&[0.0, 1.0, -1.0], 0.25).unwrap();
        for i in 0..3 {
            p.set_bounds(i, Some(-1.0), Some(4.0));
        }
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a, b);
        assert_strong_duality(&a);
    }

    fn bounded_problem(vals: &[f64], perm_seed: usize) -> LpProblem {
        // 3 vars, 5 random rows, box [-5, 5]
        let n = 3;
        let mut p = LpProblem::new(Sense::Min, vals[..n].to_vec());
        let mut rows = Vec::new();
        for r in 0..5 {
            let row = vals[n + r * n..n + (r + 1) * n].to_vec();
            rows.push((row, 1.0 + vals[n + 5 * n + r].abs()));
        }
        let k = perm_seed % rows.len();
        rows.rotate_left(k);
        for (row, b) in &rows {
            p.add_ineq(row, *b).unwrap();
        }
        for i in 0..n {
            p.add_ineq(&unit(n, i, 1.0), 5.0).unwrap();
            p.add_ineq(&unit(n, i, -1.0), 5.0).unwrap();
        }
        p
    }

    fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
        let mut u = vec![0.0; n];
        u[i] = v;
        u
    }

    proptest! {
        #[test]
        fn strong_duality_and_stationarity(vals in prop::collection::vec(-3.0f64..3.0, 30)) {
            let p = bounded_problem(&vals, 0);
            let s = solve_lp(&p).unwrap();
            prop_assert_eq!(s.status, LpStatus::Optimal);
            let tol = 1e-7 * (1.0 + s.objective_value.abs());
            prop_assert!((s.objective_value - s.dual_objective).abs() <= tol);
            // c + Aᵀy = 0 with y ≥ 0, and primal feasibility
            let aty = p.ineq.a.tr_matvec(&s.dual_ineq);
            for i in 0..3 {
                prop_assert!((p.objective[i] + aty[i]).abs() < 1e-8);
            }
            prop_assert!(s.dual_ineq.iter().all(|&y| y >= -1e-9));
            let ax = p.ineq.a.matvec(&s.x);
            for (v, b) in ax.iter().zip(&p.ineq.b) {
                prop_assert!(v - b <= 1e-8);
            }
        }

        #[test]
        fn row_permutation_invariance(vals in prop::collection::vec(-3.0f64..3.0, 30), k in 1usize..5) {
            let a = solve_lp(&bounded_problem(&vals, 0)).unwrap();
            let b = solve_lp(&bounded_problem(&vals, k)).unwrap();
            prop_assert!((a.objective_value - b.objective_value).abs() <= 1e-9 * (1.0 + a.objective_value.abs()));
        }

        #[test]
        fn row_scaling_invariance(vals in prop::collection::vec(-3.0f64..3.0, 30), r in 0usize..5) {
            let p = bounded_problem(&vals, 0);
            let mut q = p.clone();
            for v in q.ineq.a.row_mut(r) { *v *= 10.0; }
            q.ineq.b[r] *= 10.0;
            let a = solve_lp(&p).unwrap();
            let b = solve_lp(&q).unwrap();
            // optimal x can be non-unique; compare x only at a nondegenerate vertex
            prop_assert!((a.objective_value - b.objective_value).abs() <= 1e-9 * (1.0 + a.objective_value.abs()));
            let gap: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            let unique = a.dual_ineq.iter().filter(|&&y| y > 1e-7).count() == 3;
            if unique {
                prop_assert!(gap <= 1e-9, "gap {}", gap);
            }
        }
    }
}
