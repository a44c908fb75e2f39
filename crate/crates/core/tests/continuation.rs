use pulse_atlas::continuation::{
    branch_switch, classify_topology, continue_branch, detect_pitchfork_on_symmetric_branch, Branch, BranchPoint,
    ContinuationSettings, Direction, EventKind, FoldSide, OpenReason, SwitchSettings, SymmetryMode, Topology,
};
use pulse_atlas::lattice::{involution_u_to_one_minus_u, residual};
use pulse_atlas::linalg::norm_inf;
use pulse_atlas::pulse::{build_pulse, classify_symmetry, mirror_defect, PulseSpec, SymmetryClass};
use pulse_atlas::LatticeParams;

const D: f64 = 0.1;

fn start(lengths: &[usize]) -> BranchPoint {
    let p = build_pulse(&PulseSpec::new(lengths.to_vec()).unwrap(), LatticeParams { d: D, mu: 0.5 }, 150).unwrap();
    BranchPoint::new(p, 0.5)
}

fn run(lengths: &[usize], settings: &ContinuationSettings) -> Branch {
    continue_branch(&start(lengths), D, settings).unwrap()
}

fn switched(event: &pulse_atlas::continuation::Event, sign: f64) -> Branch {
    let s = branch_switch(event, D, &SwitchSettings { sign, ..Default::default() }).unwrap();
    let settings = ContinuationSettings {
        direction: Direction::Given,
        symmetry: SymmetryMode::Off,
        stop_at_branch_point: true,
        max_periods: 0,
        ..Default::default()
    };
    continue_branch(&s, D, &settings).unwrap()
}

#[test]
fn every_point_is_a_steady_state() {
    let b = run(&[5, 7, 5], &ContinuationSettings::default());
    for pt in &b.points {
        let r = norm_inf(&residual(&pt.profile, LatticeParams { d: D, mu: pt.mu }));
        assert!(r <= 1e-11, "residual {r:e} at s = {}", pt.s);
    }
    for w in b.points.windows(2) {
        let ip: f64 = w[0].tangent.iter().zip(&w[1].tangent).map(|(a, b)| a * b).sum();
        assert!(ip > 0.0);
    }
}

#[test]
fn single_pulse_snakes_with_growth_two() {
    let b = run(&[5], &ContinuationSettings { max_periods: 3, ..Default::default() });
    assert_eq!(b.topology, Topology::Snaking { p: 1, growth: 2 });
    let sigs: Vec<&str> = b.periods.iter().map(|p| p.signature.as_str()).collect();
    assert_eq!(sigs, ["7", "9", "11"]);
    let sides: Vec<FoldSide> = b.folds().map(|e| e.side.unwrap()).collect();
    assert!(sides.windows(2).all(|w| w[0] != w[1]), "folds alternate: {sides:?}");
    for e in b.folds() {
        assert!(e.refined);
        assert!(e.point.as_ref().unwrap().dmu_ds().abs() < 1e-8);
    }
}

#[test]
fn involution_image_has_mirrored_folds() {
    let b = run(&[5], &ContinuationSettings { max_periods: 2, ..Default::default() });
    let p0 = &b.points[0];
    let (img, params) = involution_u_to_one_minus_u(&p0.profile, LatticeParams { d: D, mu: p0.mu });
    let mut s = BranchPoint::new(img, params.mu);
    s.tangent = p0.tangent.iter().map(|v| -v).collect();
    let image = continue_branch(&s, D, &ContinuationSettings { direction: Direction::Given, max_periods: 2, ..Default::default() })
        .unwrap();
    let a = b.fold_mus();
    let m: Vec<f64> = image.fold_mus().iter().map(|v| 1.0 - v).collect();
    assert_eq!(a.len(), m.len());
    for (x, y) in a.iter().zip(&m) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn symmetric_two_pulse_isola() {
    let settings = ContinuationSettings::default();
    let b = run(&[5, 7, 5], &settings);
    assert_eq!(b.topology, Topology::Closed);
    assert!(b.closure_gap.unwrap() < 1e-6);
    assert_eq!(b.folds().count(), 4);
    assert_eq!(b.pitchforks().count(), 4);
    assert_eq!(classify_topology(&b, &settings), Topology::Closed);
    for e in b.pitchforks() {
        assert!(e.fold_gap.unwrap() < 1e-2);
        assert!(e.null_vector.is_some());
    }
}

#[test]
fn asymmetric_isola_has_only_folds() {
    let b = run(&[5, 7, 9], &ContinuationSettings::default());
    assert_eq!(b.topology, Topology::Closed);
    assert_eq!(b.folds().count(), 4);
    assert_eq!(b.pitchforks().count(), 0);
    assert!(b.center.is_none());
}

#[test]
fn switched_branches_are_mirror_images_and_end_at_pitchforks() {
    let b = run(&[5, 7, 5], &ContinuationSettings::default());
    let e = b.pitchforks().next().unwrap();
    let c = e.center.unwrap();
    let plus = branch_switch(e, D, &SwitchSettings { sign: 1.0, ..Default::default() }).unwrap();
    let minus = branch_switch(e, D, &SwitchSettings { sign: -1.0, ..Default::default() }).unwrap();
    assert_eq!(classify_symmetry(&plus.profile, 1e-8), SymmetryClass::Asymmetric);
    // Same mu, profiles exchanged by the reflection.
    assert!((plus.mu - minus.mu).abs() < 1e-9);
    assert!(plus.profile.reflect(c).unwrap().distance_inf(&minus.profile) < 1e-7);

    let own_side = |mu: f64| {
        b.folds().min_by(|x, y| (x.mu_at - mu).abs().total_cmp(&(y.mu_at - mu).abs())).unwrap().side.unwrap()
    };
    let start_side = own_side(e.mu_at);
    for sign in [1.0, -1.0] {
        let a = switched(e, sign);
        assert_eq!(a.topology, Topology::Open(OpenReason::BranchPoint));
        let end = a.events.iter().rev().find(|x| x.kind == EventKind::Pitchfork).unwrap();
        assert_ne!(own_side(end.mu_at), start_side);
        let last = &a.points.last().unwrap().profile;
        assert!(mirror_defect(last, c) < 1e-6);
    }
}

#[test]
fn leaving_the_interval_is_a_window_edge() {
    let b = run(&[5], &ContinuationSettings { mu_range: (0.48, 0.52), ..Default::default() });
    assert_eq!(b.topology, Topology::Open(OpenReason::WindowEdge));
    assert_eq!(b.events.last().unwrap().kind, EventKind::WindowEdge);
}

#[test]
fn step_budget_ends_the_branch() {
    let b = run(&[5], &ContinuationSettings { max_steps: 10, ..Default::default() });
    assert_eq!(b.topology, Topology::Open(OpenReason::MaxSteps));
    assert_eq!(b.points.len(), 10);
}

#[test]
fn pitchfork_scan_rejects_asymmetric_profiles() {
    let b = run(&[5, 7, 9], &ContinuationSettings { max_steps: 20, ..Default::default() });
    let c = pulse_atlas::Center::site(0);
    assert!(detect_pitchfork_on_symmetric_branch(&b.points[0], &b.points[1], D, c, &ContinuationSettings::default()).is_err());
}

#[test]
fn non_steady_start_is_rejected() {
    let mut s = start(&[5]);
    s.mu = 0.3;
    assert!(continue_branch(&s, D, &ContinuationSettings::default()).is_err());
}
