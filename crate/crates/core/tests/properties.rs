#[path = "common/props.rs"]
mod props;

use proptest::prelude::*;
use strokelab::features::hci::convex_hull;
use strokelab::features::manifest::{category, Category};
use strokelab::features::{extract_features, ExtractConfig};
use strokelab::region::default_tree;

fn check(name: &str) {
    let (_, f, cases) = props::suite().into_iter().find(|(n, ..)| *n == name).unwrap();
    if let Err(e) = f(cases) {
        panic!("{name}: {e}");
    }
}

#[test]
fn stroke_count_conservation() {
    check("stroke-count conservation");
}

#[test]
fn drawing_ratio_identities() {
    check("drawing ratio identities");
}

#[test]
fn fdr_scale_invariance() {
    check("FDR scale invariance");
}

#[test]
fn smote_segment_property() {
    check("SMOTE segment property");
}

#[test]
fn split_and_fold_disjointness() {
    check("split/fold subject disjointness");
}

#[test]
fn ga_elitism_monotone() {
    check("GA elitism monotonicity");
}

#[test]
fn mlp_gradient_check() {
    check("MLP gradient check");
}

#[test]
fn smo_kkt_residual() {
    check("SMO KKT residual");
}

#[test]
fn stump_matches_exhaustive_search() {
    check("decision-stump oracle");
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    // Kinematic features depend on displacements only.
    #[test]
    fn kinematics_are_translation_invariant(plans in props::stroke_plans(), dx in -300.0..300.0f64, dy in -80.0..80.0f64) {
        let mask = default_tree();
        let a = props::build_session(&plans, false);
        let mut b = a.clone();
        for s in &mut b.samples {
            s.x += dx;
            s.y += dy;
        }
        prop_assume!(b.samples.iter().all(|s| s.x >= 0.0 && s.y >= 0.0));
        let cfg = ExtractConfig::default();
        let fa = extract_features(&a, &mask, &cfg).unwrap();
        let fb = extract_features(&b, &mask, &cfg).unwrap();
        for i in (0..114).filter(|&i| category(i) == Category::Kinematic) {
            let (u, v) = (fa.get(i), fb.get(i));
            prop_assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "feature {i}: {u} vs {v}");
        }
    }

    #[test]
    fn hull_contains_every_point(pts in prop::collection::vec((0i32..50, 0i32..50), 1..40)) {
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(x, y)| (f64::from(x), f64::from(y))).collect();
        let hull = convex_hull(&pts);
        for h in &hull {
            prop_assert!(pts.contains(h));
        }
        if hull.len() >= 3 {
            for i in 0..hull.len() {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                for &p in &pts {
                    prop_assert!(cross(a, b, p) >= 0.0, "{p:?} outside edge {a:?}-{b:?}");
                }
            }
        }
    }
}
