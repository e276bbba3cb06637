//! Connectivity, basin stability, rate windows and tipping verdicts.

use proptest::prelude::*;

use tipshift::bifurcation::{build_diagram, BifurcationDiagram, Kind};
use tipshift::dynamics::{ParameterShift, ScalarField, StateDomain};
use tipshift::models::{self, BumpConstants};
use tipshift::nonautonomous::{make_stable_path, ForwardLimit, RoutingPolicy};
use tipshift::tipping::{
    classify_tipping, energy_balance_report, find_rate_windows, find_rate_windows_against, foreign_basin_check,
    forward_basin_stable, lambda_connected, limit_at_rate, no_rtip_neighborhood, reachable_endpoints,
    reparametrization_witness, ClassifyConfig, ConnectivityGraph, EndTarget, MonotoneSweep, RateScanConfig, Verdict,
};

const BUMP_Y_PLUS: f64 = -1.537_102_430_352_083;

/// `-(x + 1)((x - 2 lambda)^2 - lambda)`: a stable line at -1 and a fold at
/// the origin whose stable arm `2 lambda + sqrt(lambda)` overtakes the
/// unstable arm's early values.
fn fold_field() -> ScalarField {
    ScalarField::new("fold", StateDomain::new(-3.0, 10.0).unwrap(), |x, l| -(x + 1.0) * ((x - 2.0 * l) * (x - 2.0 * l) - l))
}

fn fold_arm(l: f64) -> f64 {
    2.0 * l + l.sqrt()
}

fn changeover_graph() -> ConnectivityGraph {
    ConnectivityGraph::build(&build_diagram(&models::changeover(), (-2.0, 2.0), 400, 1000).unwrap())
}

fn endpoint_xs(graph: &ConnectivityGraph, levels: &[f64]) -> Vec<f64> {
    let sweep = MonotoneSweep::from_levels(levels).unwrap();
    reachable_endpoints(graph, &sweep, 0.0).unwrap().endpoints.iter().map(|e| e.x.round()).collect()
}

fn bump_start() -> f64 {
    BumpConstants::default().bump_branch(-1.0)
}

fn fixed_b() -> ScalarField {
    models::energy_balance_linear(2.5, 2.5, 0.8, 1.2)
}

fn consistent(report: &tipshift::tipping::TippingReport) {
    assert!(report.predicates.bifurcation_consistent, "{:?}", report.verdicts);
    if report.is_b_tipping() {
        assert_eq!(report.predicates.bifurcation_on_start_branch, Some(true));
    }
}

#[test]
fn changeover_reachable_endpoints() {
    let g = changeover_graph();
    assert_eq!(endpoint_xs(&g, &[-2.0, 2.0]), vec![-1.0, 1.0]);
    assert_eq!(endpoint_xs(&g, &[-2.0, 1.5, -1.5, 2.0]), vec![-3.0, -1.0, 1.0, 3.0]);
}

#[test]
fn energy_balance_connectivity() {
    let d = build_diagram(&fixed_b(), (0.0, 1.0), 200, 1000).unwrap();
    let g = ConnectivityGraph::build(&d);
    let sweep = MonotoneSweep::from_levels(&[0.0, 1.0]).unwrap();
    let (xs0, _) = models::energy_balance_branches(2.5, 0.8).unwrap();
    let (xs1, xu1) = models::energy_balance_branches(2.5, 1.2).unwrap();
    assert!(lambda_connected(&g, &sweep, (xs0, 0.0), (xs1, 1.0)).unwrap());
    assert!(lambda_connected(&g, &sweep, (xs0, 0.0), (xu1, 1.0)).is_err());
}

#[test]
fn forward_basin_stability_examples() {
    let d = build_diagram(&fixed_b(), (0.0, 1.0), 200, 1000).unwrap();
    let shift = ParameterShift::tanh(0.0, 1.0).unwrap();
    let xs0 = models::energy_balance_branches(2.5, 0.8).unwrap().0;
    let path = make_stable_path(&d, &shift, xs0, RoutingPolicy::default()).unwrap();
    assert!(forward_basin_stable(&d, &path, 800).stable);

    let d = build_diagram(&models::bump(BumpConstants::default()), (-1.0, 1.0), 400, 1000).unwrap();
    let shift = ParameterShift::logistic(-1.0, 1.0).unwrap();
    let path = make_stable_path(&d, &shift, bump_start(), RoutingPolicy::default()).unwrap();
    let rep = forward_basin_stable(&d, &path, 800);
    let w = rep.witness.expect("witness");
    assert!(!rep.stable && w.u < w.v && w.x_u <= w.basin.0, "{w:?}");

    let flat = ScalarField::new("relax", StateDomain::new(-3.0, 3.0).unwrap(), |x, _| 1.0 - x);
    let d = build_diagram(&flat, (0.0, 1.0), 100, 1000).unwrap();
    let path = make_stable_path(&d, &shift_on(0.0, 1.0), 1.0, RoutingPolicy::default()).unwrap();
    assert!(forward_basin_stable(&d, &path, 400).stable);
}

fn shift_on(lm: f64, lp: f64) -> ParameterShift {
    ParameterShift::tanh(lm, lp).unwrap()
}

#[test]
fn bump_window_is_bracketed_by_different_limits() {
    let f = models::bump(BumpConstants::default());
    let shift = ParameterShift::logistic(-1.0, 1.0).unwrap();
    let cfg = RateScanConfig::default();
    let res = find_rate_windows(&f, &shift, bump_start(), 0.01, 10.0, &cfg).unwrap();
    assert_eq!(res.windows.len(), 1);
    assert!(res.unresolved.is_empty());
    let w = &res.windows[0];
    assert!(0.0 < w.r_lo && w.r_lo < w.r_hi && w.r_hi < 10.0);
    let tol = 1e-6 * (f.domain().width());
    for edge in [w.r_lo, w.r_hi] {
        let below = limit_at_rate(&f, &shift, bump_start(), edge * (1.0 - 2.0 * res.bisect_tol), &cfg).unwrap();
        let above = limit_at_rate(&f, &shift, bump_start(), edge * (1.0 + 2.0 * res.bisect_tol), &cfg).unwrap();
        assert!(!below.same_as(&above, tol), "edge {edge}: {below:?} vs {above:?}");
    }
    assert!(w.limit.equilibrium().is_some_and(|e| (e.x - BUMP_Y_PLUS).abs() < 1e-4));
}

#[test]
fn changeover_and_fixed_b_have_no_windows() {
    let f = models::changeover();
    let res = find_rate_windows(&f, &shift_on(-2.0, 2.0), 0.0, 0.01, 10.0, &RateScanConfig::default()).unwrap();
    assert!(res.windows.is_empty());
    assert!(res.grid.iter().all(|s| s.limit.equilibrium().is_some_and(|e| e.x == 0.0)));
    let xs0 = models::energy_balance_branches(2.5, 0.8).unwrap().0;
    let res = find_rate_windows(&fixed_b(), &shift_on(0.0, 1.0), xs0, 0.01, 10.0, &RateScanConfig::default()).unwrap();
    assert!(res.windows.is_empty());
}

#[test]
fn classify_changeover_limits_on_the_invariant_line() {
    let rep = classify_tipping(&models::changeover(), &shift_on(-2.0, 2.0), 0.0, &ClassifyConfig::default()).unwrap();
    consistent(&rep);
    match rep.small_rate_verdict() {
        Verdict::UnstableLimit { limit, .. } => {
            let e = limit.equilibrium().unwrap();
            assert!(e.x == 0.0 && e.kind == Kind::Unstable);
        }
        v => panic!("{v:?}"),
    }
    assert!(rep.windows().is_empty());
}

#[test]
fn classify_fixed_b_tracks_at_every_rate() {
    let xs0 = models::energy_balance_branches(2.5, 0.8).unwrap().0;
    let rep = classify_tipping(&fixed_b(), &shift_on(0.0, 1.0), xs0, &ClassifyConfig::default()).unwrap();
    consistent(&rep);
    assert!(matches!(rep.small_rate_verdict(), Verdict::EndpointTracks { .. }));
    assert!(rep.windows().is_empty());
    assert!(rep.predicates.forward_basin_stable.as_ref().unwrap().stable);
    assert!(rep.predicates.reparametrization_witness.is_none());
}

#[test]
fn classify_bump_tracks_then_tips_in_one_window() {
    let f = models::bump(BumpConstants::default());
    let shift = ParameterShift::logistic(-1.0, 1.0).unwrap();
    let rep = classify_tipping(&f, &shift, bump_start(), &ClassifyConfig::default()).unwrap();
    consistent(&rep);
    assert!(matches!(rep.small_rate_verdict(), Verdict::EndpointTracks { .. }));
    assert_eq!(rep.windows().len(), 1);
}

#[test]
fn vanishing_branches_tip_for_every_shift() {
    // b falls from 3 to 0.8 with c = 1: the branches meet where b = 2
    let f = models::energy_balance_linear(3.0, 0.8, 1.0, 1.0);
    let xs0 = models::energy_balance_branches(3.0, 1.0).unwrap().0;
    let wiggle = ParameterShift::user(
        0.0,
        1.0,
        |s: f64| 0.5 + 0.5 * s.tanh() + 0.1 * (-s * s).exp() * s,
        |s: f64| 0.5 / s.cosh().powi(2) + 0.1 * (-s * s).exp() * (1.0 - 2.0 * s * s),
    )
    .unwrap();
    let cfg = ClassifyConfig { skip_scan: true, ..ClassifyConfig::default() };
    for shift in [shift_on(0.0, 1.0), ParameterShift::logistic(0.0, 1.0).unwrap(), wiggle] {
        let rep = classify_tipping(&f, &shift, xs0, &cfg).unwrap();
        consistent(&rep);
        assert!(rep.is_b_tipping(), "{:?}", rep.verdicts);
    }
}

#[test]
fn reparametrized_bump_shift_tips_at_small_rates() {
    let f = models::bump(BumpConstants::default());
    let shift = ParameterShift::logistic(-1.0, 1.0).unwrap();
    let d = build_diagram(&f, (-1.0, 1.0), 400, 1000).unwrap();
    let path = make_stable_path(&d, &shift, bump_start(), RoutingPolicy::default()).unwrap();
    let w = reparametrization_witness(&d, &path, 1e3, 0.01).unwrap().expect("witness");
    assert!(w.u < w.v && (w.y_plus - BUMP_Y_PLUS).abs() < 1e-6, "{w:?}");
    let x_plus = d
        .equilibria_at(1.0)
        .into_iter()
        .find(|e| (e.x - BumpConstants::default().bump_branch(1.0)).abs() < 1e-6)
        .unwrap();
    let mut cfg = RateScanConfig { n_scan: 16, bisect_tol: 1e-2, ..RateScanConfig::default() };
    // horizons reach 1e6 at the slowest rates; accuracy is set by the tolerances
    cfg.pullback.integrator.max_step = 50.0;
    let res =
        find_rate_windows_against(&f, &w.shift, bump_start(), 2e-5, 10.0, &cfg, &ForwardLimit::Converged(x_plus)).unwrap();
    assert!(!res.windows.is_empty(), "{:?}", res.grid);
    assert!(res.windows[0].limit.equilibrium().is_some_and(|e| (e.x - BUMP_Y_PLUS).abs() < 1e-4));
}

#[test]
fn no_witness_on_a_basin_stable_path() {
    let d = build_diagram(&fixed_b(), (0.0, 1.0), 200, 1000).unwrap();
    let xs0 = models::energy_balance_branches(2.5, 0.8).unwrap().0;
    let path = make_stable_path(&d, &shift_on(0.0, 1.0), xs0, RoutingPolicy::default()).unwrap();
    assert!(reparametrization_witness(&d, &path, 1e3, 0.01).unwrap().is_none());
}

#[test]
fn fold_diagram_predicates_by_range() {
    let f = fold_field();
    let wit = |lm: f64, lp: f64| {
        let d = build_diagram(&f, (lm, lp), 300, 1500).unwrap();
        let path = make_stable_path(&d, &shift_on(lm, lp), fold_arm(lm), RoutingPolicy::default()).unwrap();
        reparametrization_witness(&d, &path, 1e3, 0.01).unwrap()
    };
    let w = wit(0.05, 1.5).expect("witness on the middle range");
    assert!(w.x_u <= w.basin.1 && (w.y_plus + 1.0).abs() < 1e-6, "{w:?}");
    assert!(wit(0.01, 0.2).is_none());
    assert!(wit(3.0, 3.5).is_none());

    let d = build_diagram(&f, (0.05, 1.5), 300, 1500).unwrap();
    let rep = foreign_basin_check(&d, &shift_on(0.05, 1.5), fold_arm(0.05)).unwrap();
    assert!(rep.holds && rep.single_branch);
    assert!(matches!(rep.targets[0].target, EndTarget::Equilibrium { x, .. } if (x + 1.0).abs() < 1e-6));
}

#[test]
fn fold_certified_neighbourhood_shrinks_towards_the_witness() {
    let d = build_diagram(&fold_field(), (0.01, 3.5), 700, 1500).unwrap();
    let mut last = f64::INFINITY;
    for lm in [0.3, 0.2, 0.1, 0.05, 0.02] {
        let nt = no_rtip_neighborhood(&d, fold_arm(lm), lm).unwrap();
        assert!(nt.nu > 0.0 && nt.nu < 1.45 && nt.witness.is_some(), "{lm}: {nt:?}");
        assert!(nt.nu <= last, "{lm}: {} after {last}", nt.nu);
        last = nt.nu;
    }
}

#[test]
fn fixed_b_is_certified_over_the_whole_range() {
    let d = build_diagram(&fixed_b(), (0.0, 1.0), 200, 1000).unwrap();
    let xs0 = models::energy_balance_branches(2.5, 0.8).unwrap().0;
    let nt = no_rtip_neighborhood(&d, xs0, 0.0).unwrap();
    assert!((nt.nu - 1.0).abs() < 1e-12 && nt.witness.is_none(), "{nt:?}");
}

#[test]
fn energy_balance_report_examples() {
    let rep = energy_balance_report(|_| 2.5, |l| 0.8 + 0.4 * l, 1001).unwrap();
    assert!(rep.two_branches.holds && rep.separated.holds && rep.no_rate_tipping());
    let rep = energy_balance_report(|l| 3.0 - 0.8 * l, |_| 1.0, 1001).unwrap();
    assert!(rep.two_branches.holds && rep.separated.holds && rep.no_rate_tipping());
    let rep = energy_balance_report(|l| 3.0 - 2.2 * l, |_| 1.0, 1001).unwrap();
    assert!(rep.vanishes.holds && !rep.two_branches.holds);
    // stable start 1 + sqrt(1/2) under the final unstable value 3 - sqrt(1/2)
    let b = |l: f64| 2.0 + 4.0 * l;
    let rep = energy_balance_report(b, move |l| (b(l) * b(l) - 2.0) / 4.0, 1001).unwrap();
    assert!(rep.ends_overtaken.holds && rep.overtaken.holds && !rep.separated.holds);
}

/// Alternating levels on the changeover range: start at -2, turns, end at 2.
fn sweep_levels(turns: &[(f64, f64)]) -> Vec<f64> {
    let mut levels = vec![-2.0];
    for &(a, b) in turns {
        let (hi, lo) = (a.max(b), a.min(b));
        let last = *levels.last().unwrap();
        if hi > last && hi > lo {
            levels.push(hi);
            levels.push(lo);
        }
    }
    levels.push(2.0);
    levels
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn an_extra_excursion_never_loses_endpoints(
        turns in prop::collection::vec((-1.95f64..1.95, -1.95f64..1.95), 0..3),
        extra in (-1.95f64..1.95, -1.95f64..1.95),
    ) {
        let g = changeover_graph();
        let base = sweep_levels(&turns);
        let mut more = turns.clone();
        more.push(extra);
        let richer = sweep_levels(&more);
        let a = endpoint_xs(&g, &base);
        let b = endpoint_xs(&g, &richer);
        prop_assert!(a.iter().all(|x| b.contains(x)), "{:?} -> {:?}, {:?} -> {:?}", base, a, richer, b);
    }
}

/// Energy-balance diagrams with two branches on all of `[0, 1]`.
fn admissible_pair() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (2.0f64..3.5, 2.0f64..3.5, 0.05f64..0.95, 0.05f64..0.95)
        .prop_map(|(b0, b1, u0, u1)| (b0, b1, 0.2 + u0 * (b0 * b0 / 4.0 - 0.4), 0.2 + u1 * (b1 * b1 / 4.0 - 0.4)))
        .prop_filter("two branches throughout", |&(b0, b1, c0, c1)| {
            (0..=100).all(|i| {
                let l = i as f64 / 100.0;
                let (b, c) = (b0 + (b1 - b0) * l, c0 + (c1 - c0) * l);
                b * b - 4.0 * c > 0.05
            })
        })
}

fn basin_stable_from_start(d: &BifurcationDiagram, shift: &ParameterShift, x0: f64) -> bool {
    make_stable_path(d, shift, x0, RoutingPolicy::default()).is_ok_and(|p| forward_basin_stable(d, &p, 800).stable)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn basin_stable_paths_have_no_rate_windows((b0, b1, c0, c1) in admissible_pair()) {
        let f = models::energy_balance_linear(b0, b1, c0, c1);
        let shift = shift_on(0.0, 1.0);
        let d = build_diagram(&f, (0.0, 1.0), 200, 1000).unwrap();
        let x0 = models::energy_balance_branches(b0, c0).unwrap().0;
        if basin_stable_from_start(&d, &shift, x0) {
            let res = find_rate_windows(&f, &shift, x0, 0.01, 100.0, &RateScanConfig::default()).unwrap();
            prop_assert!(res.windows.is_empty(), "({}, {}, {}, {}): {:?}", b0, b1, c0, c1, res.windows);
        }
    }
}
