use std::f64::consts::PI;
use std::sync::Arc;

use capillary_core::deformation::{coalescence_path, first_variation_coalescence, CuspPairConfig};
use capillary_core::energy::{Piece, PieceConfig, Potential, Window};
use capillary_core::geometry::{Flat, GraphCoords, SurfacePatch};
use capillary_core::quadrature::{Interval, ParamDomain, Resolution};
use capillary_core::scenarios::{
    curvature_supremum, run_checks, scenario_delaunay_neck, scenario_sphere,
    scenario_touching_caps, scenario_triple_wedge, scenario_two_balls, Check, CheckRecord,
    Comparison, Scenario, ScenarioKind, SCENARIO_NAMES,
};
use capillary_core::Error;

fn only(mut s: Scenario, keep: &[&str]) -> Scenario {
    s.checks.retain(|c| keep.contains(&c.id()));
    assert!(!s.checks.is_empty(), "no checks left for {}", s.name());
    s
}

fn find<'a>(recs: &'a [CheckRecord], suffix: &str) -> &'a CheckRecord {
    recs.iter()
        .find(|r| r.check_id.ends_with(suffix))
        .unwrap_or_else(|| panic!("no record ending in {suffix}"))
}

#[test]
fn every_documented_scenario_builds_with_defaults() {
    for name in SCENARIO_NAMES {
        let kind = ScenarioKind::default_for(name).unwrap();
        assert_eq!(kind.name(), name);
        let s = Scenario::build(&kind).unwrap();
        assert!(!s.checks.is_empty());
        assert!(
            s.config
                .components()
                .iter()
                .all(|c| s.lambda.contains_key(c)),
            "{name}"
        );
    }
    assert!(ScenarioKind::default_for("lens").is_err());
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(scenario_sphere(0.0).is_err());
    assert!(scenario_two_balls(1.0, 1.0, -0.5).is_err());
    assert!(scenario_triple_wedge(-1.0, 2.0).is_err());
    let bad = ScenarioKind::TouchingCaps {
        alpha: 0.05,
        r_window: 1.0,
        shape: capillary_core::scenarios::CapShape::Sphere,
        r0_fractions: vec![0.6],
    };
    assert!(Scenario::build(&bad).is_err());
}

#[test]
fn zero_order_grid_is_a_resolution_error() {
    let s = scenario_sphere(1.0).unwrap();
    let err = run_checks(&s, &Resolution::with_order(2, 0), 0).unwrap_err();
    assert!(matches!(err.root(), Error::Resolution(_)), "{err}");
}

#[test]
fn sphere_with_wrong_multiplier_fails_stationarity() {
    let s = only(scenario_sphere(1.0).unwrap(), &["stationarity"]).with_lambda(0, 1.0);
    let recs = run_checks(&s, &Resolution::default(), 0).unwrap();
    let defect = find(&recs, "first_variation_defect");
    assert!(!defect.pass);
    // The residual H - (g - lambda) is off by one against a multiplier of 2.
    assert!(
        defect.measured > 0.1 && defect.measured < 1.0,
        "{}",
        defect.measured
    );
    assert!(!find(&recs, "lambda/0").pass);
    assert!(recs.iter().all(CheckRecord::is_consistent));
}

#[test]
fn run_checks_is_reproducible() {
    let s = only(
        scenario_two_balls(1.0, 1.0, 1.0).unwrap(),
        &["stationarity", "stability"],
    );
    let res = Resolution::new(1);
    let a = run_checks(&s, &res, 11).unwrap();
    let b = run_checks(&s, &res, 11).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let c = run_checks(&s, &res, 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn equal_drops_share_the_multiplier_two() {
    let s = only(
        scenario_two_balls(1.0, 1.0, 1.0).unwrap(),
        &["stationarity"],
    );
    let recs = run_checks(&s, &Resolution::default(), 0).unwrap();
    for c in 0..2 {
        let r = find(&recs, &format!("lambda/{c}"));
        assert!((r.measured - 2.0).abs() <= 1e-5, "{}", r.measured);
    }
}

#[test]
fn unequal_drops_under_one_constraint_lose_energy() {
    let s = only(
        scenario_two_balls(1.0, 2.0, 1.0).unwrap(),
        &["joint_constraint_control"],
    );
    let recs = run_checks(&s, &Resolution::default(), 0).unwrap();
    let r = find(&recs, "mass_transfer_first_variation");
    assert!(r.pass && r.measured < 0.0);
}

#[test]
fn triple_wedge_opening_angles_are_a_third_of_pi() {
    let s = only(scenario_triple_wedge(1.0, 2.0).unwrap(), &["wedge_angles"]);
    let recs = run_checks(&s, &Resolution::default(), 0).unwrap();
    let angles: Vec<_> = recs
        .iter()
        .filter(|r| r.check_id.contains("/angle/"))
        .collect();
    assert_eq!(angles.len(), 3);
    for r in angles {
        assert!((r.measured - PI / 3.0).abs() < 1e-9, "{}", r.measured);
    }
}

#[test]
fn delaunay_neck_has_constant_mean_curvature() {
    let s = only(
        scenario_delaunay_neck(0.5, 1.0, 3.0).unwrap(),
        &["mean_curvature_constancy"],
    );
    let recs = run_checks(&s, &Resolution::default(), 0).unwrap();
    let r = find(&recs, "max_deviation");
    assert!(r.pass && r.measured <= 1e-6, "{}", r.measured);
}

#[test]
fn thin_unduloid_neck_concentrates_curvature() {
    let s = scenario_delaunay_neck(0.05, 1.0, 3.0).unwrap();
    let (sup, at) =
        curvature_supremum(&s.config, &s.config.window, &Resolution::default()).unwrap();
    assert!(sup > 10.0 * 2f64.sqrt(), "sup {sup}");
    assert!(at.z.abs() <= 0.05, "attained at {at:?}");
    assert!(!s.checks.contains(&Check::Stationarity { fields: 20 }));
}

#[test]
fn curvature_supremum_of_sphere_and_disk() {
    let s = scenario_sphere(1.0).unwrap();
    let (sup, _) =
        curvature_supremum(&s.config, &Window::Everywhere, &Resolution::default()).unwrap();
    assert!((sup - 2f64.sqrt()).abs() < 1e-12);

    let disk = SurfacePatch::graph(
        "disk",
        Arc::new(Flat { c: 0.0 }),
        GraphCoords::Polar,
        ParamDomain::new(Interval::new(0.0, 1.0), Interval::periodic(0.0, 2.0 * PI)),
    );
    let cfg = PieceConfig::new("disk", vec![Piece::interface(disk, 0)], Window::Everywhere);
    let (sup, _) = curvature_supremum(&cfg, &Window::Everywhere, &Resolution::default()).unwrap();
    assert_eq!(sup, 0.0);
}

#[test]
fn coalescence_boundary_terms_are_minus_two_pi_t() {
    let cfg = CuspPairConfig::spherical_caps(0.05, 1.0, 0.2);
    let res = Resolution::new(1);
    let path = coalescence_path(&cfg, &Potential::Zero, &res).unwrap();
    for t in [0.01, 0.05, 0.1] {
        let fv = first_variation_coalescence(&path, &Potential::Zero, t, &res).unwrap();
        for b in [fv.lower.boundary, fv.upper.boundary] {
            assert!(
                (b + 2.0 * PI * t).abs() <= 1e-8 * 2.0 * PI * t,
                "t = {t}: {b}"
            );
        }
    }
}

#[test]
fn paraboloid_caps_still_coalesce_with_negative_second_variation() {
    let kind = ScenarioKind::TouchingCaps {
        alpha: 0.05,
        r_window: 1.0,
        shape: capillary_core::scenarios::CapShape::Paraboloid,
        r0_fractions: vec![1.0 / 12.0, 1.0 / 24.0],
    };
    let s = only(Scenario::build(&kind).unwrap(), &["coalescence"]);
    let recs = run_checks(&s, &Resolution::new(1), 0).unwrap();
    let totals: Vec<f64> = recs
        .iter()
        .filter(|r| r.check_id.ends_with("/second_variation_total"))
        .map(|r| r.measured)
        .collect();
    assert_eq!(totals.len(), 2);
    assert!(totals.iter().all(|t| *t < -3.0 * PI), "{totals:?}");
}

#[test]
fn comparison_semantics() {
    assert!(Comparison::Relative.holds(1.0 + 1e-9, 1.0, 1e-8));
    assert!(!Comparison::Relative.holds(1.1, 1.0, 1e-8));
    assert!(Comparison::AtMost.holds(0.5, 0.0, 1.0));
    assert!(Comparison::AtLeast.holds(-1e-5, 0.0, 1e-4));
    assert!(!Comparison::Below.holds(0.0, 0.0, 1.0));
    assert!(!Comparison::Absolute.holds(f64::NAN, 0.0, 1.0));
    assert!(Comparison::Report.holds(f64::NAN, 0.0, 0.0));
}

#[test]
fn touching_caps_constructor_matches_defaults() {
    let s = scenario_touching_caps(0.05, 1.0).unwrap();
    assert_eq!(s.kind, ScenarioKind::default_for("touching_caps").unwrap());
    assert_eq!(s.lambda[&0], 0.2);
}
