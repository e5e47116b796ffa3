//! Plot data for two-parameter models.
//!
//! The feasible region `{θ : ψ(θ) ≤ 0}` is the intersection of the
//! half-planes `Σ λ_j f_j(θ) ≤ 0`, one per candidate active set, so it is
//! traced by clipping a window around the mean with each of them.

use flexidx::activeset::enumerate_candidates;
use flexidx::model::{HyperboxSpec, SystemModel};
use flexidx::FlexError;
use std::fmt::Write;

/// `pᵀθ + q ≤ 0`
struct HalfPlane {
    p: [f64; 2],
    q: f64,
}

impl HalfPlane {
    fn eval(&self, t: [f64; 2]) -> f64 {
        self.p[0] * t[0] + self.p[1] * t[1] + self.q
    }
}

fn half_planes(model: &SystemModel) -> Result<Vec<HalfPlane>, FlexError> {
    let mut out = Vec::new();
    for cand in enumerate_candidates(model)? {
        let mut p = [0.0; 2];
        let mut q = 0.0;
        for (&j, l) in cand.indices.iter().zip(&cand.lambda) {
            let c = &model.constraints[j];
            p[0] += l * c.a_theta[0];
            p[1] += l * c.a_theta[1];
            q += l * c.c;
        }
        if p[0].abs() + p[1].abs() > 1e-12 {
            out.push(HalfPlane { p, q });
        }
    }
    Ok(out)
}

/// Sutherland–Hodgman step for a convex polygon.
fn clip(poly: &[[f64; 2]], h: &HalfPlane) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (fa, fb) = (h.eval(a), h.eval(b));
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn feasible_polygon(model: &SystemModel, window: [f64; 2]) -> Result<Vec<[f64; 2]>, FlexError> {
    let m = model.uncertainty.mean();
    let mut poly = vec![
        [m[0] - window[0], m[1] - window[1]],
        [m[0] + window[0], m[1] - window[1]],
        [m[0] + window[0], m[1] + window[1]],
        [m[0] - window[0], m[1] + window[1]],
    ];
    for h in half_planes(model)? {
        poly = clip(&poly, &h);
        if poly.is_empty() {
            break;
        }
    }
    Ok(poly)
}

fn ellipse(model: &SystemModel, delta: f64, resolution: usize) -> Vec<[f64; 2]> {
    let l = model.uncertainty.chol();
    let m = model.uncertainty.mean();
    let r = delta.sqrt();
    (0..resolution)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / resolution as f64;
            let t = l.mul_l(&[r * phi.cos(), r * phi.sin()]);
            [m[0] + t[0], m[1] + t[1]]
        })
        .collect()
}

fn push_block(out: &mut String, name: &str, pts: &[[f64; 2]]) {
    writeln!(out, "# block: {name}").unwrap();
    writeln!(out, "theta1,theta2").unwrap();
    for p in pts {
        writeln!(out, "{},{}", p[0], p[1]).unwrap();
    }
}

/// CSV with blocks `feasible_boundary` (closed polygon, clipped to a window
/// when the region is unbounded), `ellipse` and, when given, `hyperbox`
/// (corners of the box scaled by its index).
pub fn render(
    model: &SystemModel,
    delta_star: f64,
    hyperbox: Option<&(f64, HyperboxSpec)>,
    resolution: usize,
) -> Result<String, FlexError> {
    let v = model.uncertainty.covariance();
    let mut window = [0.0; 2];
    for (i, w) in window.iter_mut().enumerate() {
        *w = 10.0 * v[(i, i)].sqrt() * delta_star.sqrt().max(1.0);
        if let Some((_, h)) = hyperbox {
            *w = w.max(2.0 * h.delta_minus[i].max(h.delta_plus[i]));
        }
    }
    let mut poly = feasible_polygon(model, window)?;
    if let Some(first) = poly.first().copied() {
        poly.push(first);
    }
    let mut out = String::new();
    push_block(&mut out, "feasible_boundary", &poly);
    push_block(&mut out, "ellipse", &ellipse(model, delta_star, resolution));
    if let Some((f, h)) = hyperbox {
        let m = model.uncertainty.mean();
        let lo = [m[0] - f * h.delta_minus[0], m[1] - f * h.delta_minus[1]];
        let hi = [m[0] + f * h.delta_plus[0], m[1] + f * h.delta_plus[1]];
        let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        push_block(&mut out, "hyperbox", &corners);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use flexidx::linalg::Matrix;
    use flexidx::model::{GaussianUncertainty, LinearConstraint};

    fn square() -> SystemModel {
        let cons = [
            ([1.0, 0.0], -1.0),
            ([-1.0, 0.0], -1.0),
            ([0.0, 1.0], -1.0),
            ([0.0, -1.0], -1.0),
        ]
        .iter()
        .enumerate()
        .map(|(j, (a, c))| LinearConstraint {
            name: format!("s{j}"),
            a_z: vec![],
            a_theta: a.to_vec(),
            c: *c,
        })
        .collect();
        let unc = GaussianUncertainty::new(vec![0.0, 0.0], Matrix::identity(2)).unwrap();
        SystemModel::new("square", 0, cons, unc, None).unwrap()
    }

    #[test]
    fn unit_circle_points() {
        let pts = ellipse(&square(), 1.0, 4);
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (p, e) in pts.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn square_region() {
        let poly = feasible_polygon(&square(), [10.0, 10.0]).unwrap();
        assert_eq!(poly.len(), 4);
        for p in poly {
            assert_eq!(p[0].abs(), 1.0);
            assert_eq!(p[1].abs(), 1.0);
        }
    }
}
