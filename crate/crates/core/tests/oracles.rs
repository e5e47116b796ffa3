mod common;

use common::*;
use flexidx::flexindex::{flexibility_index, psi};
use flexidx::model::UncertaintySet;
use flexidx::stats::Rng;

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = Rng::new(101);
    let mut infeasible = 0;
    for case in 0..100 {
        let p = random_lp(&mut rng);
        if lp_vertex_oracle(&p).is_none() {
            infeasible += 1;
        }
        let gap = lp_gap(&p);
        assert!(gap <= 1e-7, "case {case}: gap {gap}");
    }
    assert!(infeasible < 100);
}

#[test]
fn qp_matches_dual_projected_gradient() {
    let mut rng = Rng::new(202);
    for case in 0..100 {
        let p = random_qp(&mut rng);
        let gap = qp_gap(&p);
        assert!(gap <= 1e-7, "case {case}: gap {gap}");
    }
}

#[test]
fn psi_matches_breakpoint_oracle() {
    let mut rng = Rng::new(303);
    for _ in 0..50 {
        let nz = (rng.uniform() * 2.0) as usize;
        let m = random_model(&mut rng, 3, nz);
        for _ in 0..20 {
            let theta: Vec<f64> = m
                .uncertainty
                .mean()
                .iter()
                .map(|v| v + 6.0 * (rng.uniform() - 0.5))
                .collect();
            let a = psi(&m, &theta).unwrap().u;
            let b = psi_oracle(&m, &theta);
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn ellipsoid_index_matches_boundary_scan() {
    let mut rng = Rng::new(404);
    let mut checked = 0;
    while checked < 25 {
        let nz = (rng.uniform() * 2.0) as usize;
        let m = random_model(&mut rng, 2, nz);
        let oracle = boundary_scan_oracle(&m);
        match flexibility_index(&m, &UncertaintySet::Ellipsoid) {
            Ok(r) => {
                assert!(
                    (r.delta_star - oracle).abs() <= 1e-4,
                    "{} vs {oracle}",
                    r.delta_star
                );
                checked += 1;
            }
            Err(flexidx::FlexError::UnboundedIndex) => assert!(oracle.is_infinite()),
            Err(e) => panic!("{e}"),
        }
    }
}
