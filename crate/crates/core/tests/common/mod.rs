//! Independent reference solvers and model generators shared by the
//! integration tests.

#![allow(dead_code)]

use flexidx::linalg::Matrix;
use flexidx::lp::{solve_lp, LpProblem, LpStatus, Sense};
use flexidx::model::{parse_model, GaussianUncertainty, LinearConstraint, SystemModel};
use flexidx::qp::{solve_qp, QpProblem, QpStatus};
use flexidx::stats::Rng;
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use std::path::PathBuf;

pub const BUNDLED: [&str; 5] = [
    "simple_beta-1",
    "simple_beta0",
    "simple_beta1",
    "hx_beta0",
    "hx_beta5",
];

pub fn bundled(name: &str) -> SystemModel {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.json"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn uni(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Random model with `ψ(θ̄) < 0`. Recourse coefficients alternate in sign so
/// the feasibility function stays bounded.
pub fn random_model(rng: &mut Rng, nt: usize, nz: usize) -> SystemModel {
    let nc = nz + 3 + (rng.uniform() * 4.0) as usize;
    let mean: Vec<f64> = (0..nt).map(|_| uni(rng, -2.0, 2.0)).collect();
    let cons = (0..nc)
        .map(|j| {
            let a_theta: Vec<f64> = (0..nt).map(|_| uni(rng, -1.0, 1.0)).collect();
            let a_z = (0..nz)
                .map(|_| uni(rng, 0.3, 1.3) * if j % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let at_mean: f64 = a_theta.iter().zip(&mean).map(|(a, m)| a * m).sum();
            LinearConstraint {
                name: format!("g{j}"),
                a_z,
                a_theta,
                c: -at_mean - uni(rng, 0.5, 2.0),
            }
        })
        .collect();
    let mut l = Matrix::zeros(nt, nt);
    for i in 0..nt {
        l[(i, i)] = uni(rng, -0.7, 0.7).exp();
        for k in 0..i {
            l[(i, k)] = uni(rng, -0.8, 0.8);
        }
    }
    let v = l.matmul(&l.transpose()).unwrap();
    let unc = GaussianUncertainty::new(mean, v).unwrap();
    SystemModel::new("random", nz, cons, unc, None).unwrap()
}

/// `ψ(θ)` for `n_z ≤ 1` without any LP: the minimum of a convex piecewise
/// linear function of one variable sits at a breakpoint.
pub fn psi_oracle(model: &SystemModel, theta: &[f64]) -> f64 {
    let b: Vec<f64> = model
        .constraints
        .iter()
        .map(|c| c.a_theta.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + c.c)
        .collect();
    match model.n_z {
        0 => b.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        1 => {
            let a: Vec<f64> = model.constraints.iter().map(|c| c.a_z[0]).collect();
            let upper = |z: f64| {
                a.iter()
                    .zip(&b)
                    .map(|(a, b)| a * z + b)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let mut best = upper(0.0);
            for i in 0..a.len() {
                for k in i + 1..a.len() {
                    if (a[i] - a[k]).abs() > 1e-14 {
                        best = best.min(upper((b[k] - b[i]) / (a[i] - a[k])));
                    }
                }
            }
            best
        }
        _ => panic!("psi_oracle handles at most one recourse variable"),
    }
}

/// Ellipsoidal index of a 2-D model by scanning rays from the mean in
/// whitened coordinates: `δ = min_φ r(φ)²` with `ψ(θ̄ + r L d(φ)) = 0`.
pub fn boundary_scan_oracle(model: &SystemModel) -> f64 {
    assert_eq!(model.n_theta, 2);
    let l = model.uncertainty.chol();
    let mean = model.uncertainty.mean();
    let ray = |phi: f64| -> f64 {
        let d = l.mul_l(&[phi.cos(), phi.sin()]);
        let at = |t: f64| psi_oracle(model, &[mean[0] + t * d[0], mean[1] + t * d[1]]);
        let mut hi = 1.0;
        while at(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let n = 1440;
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let radii: Vec<f64> = (0..n).map(|k| ray(k as f64 * step)).collect();
    let mut best = f64::INFINITY;
    for k in 0..n {
        // refine around every local minimum of the grid
        let (prev, next) = (radii[(k + n - 1) % n], radii[(k + 1) % n]);
        if radii[k] <= prev && radii[k] <= next && radii[k].is_finite() {
            let (mut a, mut b) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (ray(c), ray(d));
            while b - a > 1e-12 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = ray(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = ray(d);
                }
            }
            best = best.min(fc.min(fd).min(radii[k]));
        }
    }
    best * best
}

pub struct RandomLp {
    pub lp: LpProblem,
    /// Every constraint as `row·x (≤ or =) rhs`, bounds included.
    pub rows: Vec<(Vec<f64>, f64, bool)>,
}

/// Small LP whose feasible set, when nonempty, is a polytope.
pub fn random_lp(rng: &mut Rng) -> RandomLp {
    let n = 2 + (rng.uniform() * 2.0) as usize;
    let m = 2 + (rng.uniform() * 5.0) as usize;
    let obj: Vec<f64> = (0..n).map(|_| uni(rng, -1.0, 1.0)).collect();
    let sense = if rng.uniform() < 0.5 {
        Sense::Min
    } else {
        Sense::Max
    };
    let mut lp = LpProblem::new(sense, obj);
    let mut rows = Vec::new();
    let n_eq = usize::from(rng.uniform() < 0.3);
    for i in 0..m {
        let row: Vec<f64> = (0..n).map(|_| uni(rng, -1.0, 1.0)).collect();
        let rhs = uni(rng, -0.5, 1.0);
        if i < n_eq {
            lp.add_eq(&row, rhs).unwrap();
            rows.push((row, rhs, true));
        } else {
            lp.add_ineq(&row, rhs).unwrap();
            rows.push((row, rhs, false));
        }
    }
    let as_bounds = rng.uniform() < 0.5;
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        if as_bounds {
            lp.set_bounds(i, Some(-5.0), Some(5.0));
        } else {
            lp.add_ineq(&e, 5.0).unwrap();
            lp.add_ineq(&neg, 5.0).unwrap();
        }
        rows.push((e, 5.0, false));
        rows.push((neg, 5.0, false));
    }
    RandomLp { lp, rows }
}

/// Optimal value by enumerating basic solutions; `None` when infeasible.
pub fn lp_vertex_oracle(p: &RandomLp) -> Option<f64> {
    let n = p.lp.num_vars();
    let eq: Vec<usize> = (0..p.rows.len()).filter(|&i| p.rows[i].2).collect();
    let ineq: Vec<usize> = (0..p.rows.len()).filter(|&i| !p.rows[i].2).collect();
    let sign = if p.lp.sense == Sense::Min { 1.0 } else { -1.0 };
    let mut best: Option<f64> = None;
    for pick in ineq.iter().copied().combinations(n - eq.len()) {
        let idx: Vec<usize> = eq.iter().copied().chain(pick).collect();
        let a = DMatrix::from_fn(n, n, |r, c| p.rows[idx[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| p.rows[idx[r]].1);
        if a.determinant().abs() < 1e-9 {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        let feasible = p.rows.iter().all(|(row, rhs, is_eq)| {
            let v: f64 = row.iter().zip(x.iter()).map(|(a, x)| a * x).sum();
            if *is_eq {
                (v - rhs).abs() <= 1e-9
            } else {
                v <= rhs + 1e-9
            }
        });
        if feasible {
            let obj: f64 =
                p.lp.objective
                    .iter()
                    .zip(x.iter())
                    .map(|(c, x)| c * x)
                    .sum();
            best = Some(match best {
                None => obj,
                Some(b) => {
                    if sign * obj < sign * b {
                        obj
                    } else {
                        b
                    }
                }
            });
        }
    }
    best
}

/// Compares [`solve_lp`] with the vertex oracle; returns the gap.
pub fn lp_gap(p: &RandomLp) -> f64 {
    let sol = solve_lp(&p.lp).unwrap();
    match (lp_vertex_oracle(p), sol.status) {
        (None, LpStatus::Infeasible) => 0.0,
        (Some(v), LpStatus::Optimal) => (v - sol.objective_value).abs(),
        _ => f64::INFINITY,
    }
}

/// Strictly convex QP with a known feasible point.
pub fn random_qp(rng: &mut Rng) -> QpProblem {
    let n = 2 + (rng.uniform() * 4.0) as usize;
    let m = 1 + (rng.uniform() * 6.0) as usize;
    let b =
        Matrix::from_row_major(n, n, (0..n * n).map(|_| uni(rng, -1.0, 1.0)).collect()).unwrap();
    let mut w = b.matmul(&b.transpose()).unwrap();
    for i in 0..n {
        w[(i, i)] += 0.5;
    }
    let q = (0..n).map(|_| uni(rng, -3.0, 3.0)).collect();
    let x0: Vec<f64> = (0..n).map(|_| uni(rng, -1.0, 1.0)).collect();
    let mut p = QpProblem::new(w, q);
    let n_eq = usize::from(rng.uniform() < 0.3);
    for i in 0..m {
        let row: Vec<f64> = (0..n).map(|_| uni(rng, -1.0, 1.0)).collect();
        let v: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        if i < n_eq && n > 1 {
            p.add_eq(&row, v).unwrap();
        } else {
            p.add_ineq(&row, v + uni(rng, 0.0, 1.0)).unwrap();
        }
    }
    p
}

/// Accelerated projected gradient ascent on the Lagrange dual with
/// gradient-based restarts. Returns the primal point recovered from the
/// final multipliers.
pub fn qp_dual_oracle(p: &QpProblem) -> Vec<f64> {
    let n = p.num_vars();
    let w = DMatrix::from_fn(n, n, |r, c| p.w[(r, c)]);
    let winv = w.try_inverse().expect("positive definite");
    let me = p.eq.len();
    let m = me + p.ineq.len();
    let a = DMatrix::from_fn(m, n, |r, c| {
        if r < me {
            p.eq.a[(r, c)]
        } else {
            p.ineq.a[(r - me, c)]
        }
    });
    let b = DVector::from_fn(m, |r, _| if r < me { p.eq.b[r] } else { p.ineq.b[r - me] });
    let q = DVector::from_column_slice(&p.q);
    let h = &a * &winv * a.transpose();
    let lip = h.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let primal = |y: &DVector<f64>| -(&winv * (&q + a.transpose() * y));
    let project = |y: &mut DVector<f64>| {
        for i in me..m {
            y[i] = y[i].max(0.0);
        }
    };
    let mut y = DVector::zeros(m);
    let mut v = y.clone();
    let mut t = 1.0f64;
    for _ in 0..400_000 {
        let x = primal(&v);
        let mut next = &v + (&a * &x - &b) / lip;
        project(&mut next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved = &next - &y;
        // restart when the momentum points against the ascent direction
        if (&next - &v).dot(&moved) < 0.0 {
            t = 1.0;
            v = y.clone();
            continue;
        }
        v = &next + &moved * ((t - 1.0) / t_next);
        let done = moved.amax() <= 1e-15 * (1.0 + y.amax());
        y = next;
        t = t_next;
        if done {
            break;
        }
    }
    primal(&y).as_slice().to_vec()
}

/// Objective gap between [`solve_qp`] and the dual oracle.
pub fn qp_gap(p: &QpProblem) -> f64 {
    let sol = solve_qp(p).unwrap();
    if sol.status != QpStatus::Optimal {
        return f64::INFINITY;
    }
    let x = qp_dual_oracle(p);
    (p.objective(&x) - sol.objective_value).abs()
}
