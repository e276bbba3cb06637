//! Acceptance criteria, one pass/fail line each. Exits nonzero on any failure.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use tipshift::bifurcation::{basin, build_diagram_with, check_bifurcation_equivalence, find_equilibria, DiagramConfig, Kind};
use tipshift::dynamics::{integrate, ParameterShift, ScalarField};
use tipshift::models::{self, BumpConstants};
use tipshift::nonautonomous::{
    compute_pullback, construct_pseudo_orbit, eps_close_tracks, make_stable_path, verify_pseudo_orbit, ForwardLimit,
    PseudoOrbitConfig, PullbackConfig, RoutingPolicy,
};
use tipshift::tipping::{
    classify_tipping, find_rate_windows, forward_basin_stable, reachable_endpoints, ClassifyConfig, ConnectivityGraph,
    MonotoneSweep, RateScanConfig,
};

/// Critical rates of the bump window, frozen from the first verified scan.
const BUMP_R1: f64 = 0.100_273_5;
const BUMP_R2: f64 = 0.149_575_7;
const BASELINE_REL: f64 = 1e-3;
/// Lower stable equilibrium of the bump model at `lambda = 1`.
const BUMP_Y_PLUS: f64 = -1.537_102_430_352_083;
const LIMIT_TOL: f64 = 1e-4;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn bump_start() -> f64 {
    BumpConstants::default().bump_branch(-1.0)
}

fn rng() -> StdRng {
    StdRng::seed_from_u64(0x7469_7073)
}

fn bump_window() -> Outcome {
    let t0 = Instant::now();
    let field = models::bump(BumpConstants::default());
    let shift = ParameterShift::logistic(-1.0, 1.0).map_err(|e| e.to_string())?;
    let res = find_rate_windows(&field, &shift, bump_start(), 0.01, 10.0, &RateScanConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    if res.windows.len() != 1 {
        return Err(format!("{} windows", res.windows.len()));
    }
    let w = &res.windows[0];
    let x_plus = BumpConstants::default().bump_branch(1.0);
    let frozen = find_equilibria(&field, 1.0, 1000);
    let at = |target: f64| frozen.iter().any(|e| (e.x - target).abs() < LIMIT_TOL);
    let near = |l: &ForwardLimit, target: f64| l.equilibrium().is_some_and(|e| (e.x - target).abs() < LIMIT_TOL);
    let mut misplaced = 0;
    for s in res.sorted_samples() {
        let inside = s.r >= w.lo_bracket.1 && s.r <= w.hi_bracket.0;
        let outside = s.r <= w.lo_bracket.0 || s.r >= w.hi_bracket.1;
        if (inside && !near(&s.limit, BUMP_Y_PLUS)) || (outside && !near(&s.limit, x_plus)) {
            misplaced += 1;
        }
    }
    let d1 = (w.r_lo / BUMP_R1 - 1.0).abs();
    let d2 = (w.r_hi / BUMP_R2 - 1.0).abs();
    check(
        0.0 < w.r_lo
            && w.r_lo < w.r_hi
            && d1 < BASELINE_REL
            && d2 < BASELINE_REL
            && misplaced == 0
            && at(BUMP_Y_PLUS)
            && at(x_plus)
            && within_budget(elapsed, 120.0),
        format!("r1 = {:.7}, r2 = {:.7}, misplaced limits {misplaced}, {:.1} s", w.r_lo, w.r_hi, elapsed.as_secs_f64()),
    )
}

fn changeover_invariance() -> Outcome {
    let t0 = Instant::now();
    let field = models::changeover();
    let shift = ParameterShift::tanh(-2.0, 2.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for r in [0.01, 0.1, 1.0, 10.0] {
        let pb = compute_pullback(&field, &shift, r, 0.0, &PullbackConfig::default()).map_err(|e| e.to_string())?;
        worst = pb.trajectory.x.iter().fold(worst, |m, x| m.max(x.abs()));
    }
    let d = build_diagram_with(&field, (-2.0, 2.0), &DiagramConfig::default()).map_err(|e| e.to_string())?;
    let graph = ConnectivityGraph::build(&d);
    let ends = |levels: &[f64]| -> Result<Vec<f64>, String> {
        let sweep = MonotoneSweep::from_levels(levels).map_err(|e| e.to_string())?;
        let reach = reachable_endpoints(&graph, &sweep, 0.0).map_err(|e| e.to_string())?;
        Ok(reach.endpoints.iter().map(|e| e.x).collect())
    };
    let mono = ends(&[-2.0, 2.0])?;
    let three = ends(&[-2.0, 1.5, -1.5, 2.0])?;
    let matches = |got: &[f64], want: &[f64]| got.len() == want.len() && got.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-6);
    let elapsed = t0.elapsed();
    check(
        worst < 1e-9 && matches(&mono, &[-1.0, 1.0]) && matches(&three, &[-3.0, -1.0, 1.0, 3.0]) && within_budget(elapsed, 10.0),
        format!("sup |x| = {worst:.1e}, endpoints {mono:?} and {three:?}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn basin_stable_no_windows(field: &ScalarField, x_minus: f64) -> Result<(bool, usize), String> {
    let shift = ParameterShift::logistic(0.0, 1.0).map_err(|e| e.to_string())?;
    let d = build_diagram_with(field, (0.0, 1.0), &DiagramConfig::default()).map_err(|e| e.to_string())?;
    let path = make_stable_path(&d, &shift, x_minus, RoutingPolicy::default()).map_err(|e| e.to_string())?;
    let stable = forward_basin_stable(&d, &path, 800).stable;
    let res = find_rate_windows(field, &shift, x_minus, 0.01, 100.0, &RateScanConfig::default()).map_err(|e| e.to_string())?;
    Ok((stable, res.windows.len()))
}

fn energy_balance_no_rate_tipping() -> Outcome {
    let t0 = Instant::now();
    let fixed_b = basin_stable_no_windows(&models::energy_balance_linear(2.5, 2.5, 0.8, 1.2), models::energy_balance_branches(2.5, 0.8).unwrap().0)?;
    let fixed_c = basin_stable_no_windows(&models::energy_balance_linear(3.0, 2.2, 1.0, 1.0), models::energy_balance_branches(3.0, 1.0).unwrap().0)?;
    let elapsed = t0.elapsed();
    check(
        fixed_b == (true, 0) && fixed_c == (true, 0) && within_budget(elapsed, 60.0),
        format!("fixed b {fixed_b:?}, fixed c {fixed_c:?} (basin stable, windows), {:.1} s", elapsed.as_secs_f64()),
    )
}

fn energy_balance_b_tipping() -> Outcome {
    let t0 = Instant::now();
    // b(0) = 3, c(0) = 1; b(1/2)^2 = 4 < 4 c(1/2) = 6
    let field = models::energy_balance_linear(3.0, 1.0, 1.0, 2.0);
    let x_minus = models::energy_balance_branches(3.0, 1.0).unwrap().0;
    let mut all = true;
    let mut notes = Vec::new();
    for shift in [ParameterShift::tanh(0.0, 1.0), ParameterShift::logistic(0.0, 1.0)] {
        let shift = shift.map_err(|e| e.to_string())?;
        let rep = classify_tipping(&field, &shift, x_minus, &ClassifyConfig::default()).map_err(|e| e.to_string())?;
        let ok = rep.is_b_tipping() && rep.predicates.bifurcation_consistent && rep.predicates.bifurcation_on_start_branch == Some(true);
        all &= ok;
        notes.push(format!("{:?}: b-tipping {}, consistent {}", shift.family(), rep.is_b_tipping(), rep.predicates.bifurcation_consistent));
    }
    let elapsed = t0.elapsed();
    check(all && within_budget(elapsed, 30.0), format!("{}, {:.1} s", notes.join("; "), elapsed.as_secs_f64()))
}

struct Builtin {
    field: ScalarField,
    shift: ParameterShift,
    x_minus: f64,
}

fn builtins() -> Vec<Builtin> {
    vec![
        Builtin { field: models::changeover(), shift: ParameterShift::tanh(-2.0, 2.0).unwrap(), x_minus: 0.0 },
        Builtin {
            field: models::bump(BumpConstants::default()),
            shift: ParameterShift::logistic(-1.0, 1.0).unwrap(),
            x_minus: bump_start(),
        },
        Builtin {
            field: models::energy_balance(|_| 2.5, |l| 0.8 + 0.4 * l),
            shift: ParameterShift::logistic(0.0, 1.0).unwrap(),
            x_minus: models::energy_balance_branches(2.5, 0.8).unwrap().0,
        },
    ]
}

fn pullback_uniqueness() -> Outcome {
    let cfg = PullbackConfig::default();
    let (mut spread, mut change) = (0.0_f64, 0.0_f64);
    for m in builtins() {
        let (lm, lp) = m.shift.range();
        let d = build_diagram_with(&m.field, (lm, lp), &DiagramConfig::default()).map_err(|e| e.to_string())?;
        let eq = d.equilibria_at(lm).into_iter().find(|e| (e.x - m.x_minus).abs() < 1e-6).ok_or("start is not an equilibrium")?;
        let b = basin(&d, &eq).map_err(|e| e.to_string())?;
        let dom = m.field.domain();
        let radius = 0.1 * (b.hi.min(dom.hi) - b.lo.max(dom.lo));
        for r in [0.05, 0.5, 5.0] {
            let pb = compute_pullback(&m.field, &m.shift, r, m.x_minus, &cfg).map_err(|e| e.to_string())?;
            change = change.max(pb.convergence);
            let ends: Vec<f64> = (0..10)
                .map(|k| {
                    let x0 = m.x_minus + radius * (2.0 * k as f64 / 9.0 - 1.0) * 0.999;
                    integrate(&m.field, &m.shift, r, x0, -pb.horizon, -0.5 * pb.horizon, &cfg.integrator).map(|tr| tr.last().1)
                })
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let (lo, hi) = ends.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            spread = spread.max(hi - lo);
        }
    }
    check(spread < 1e-6 && change < 1e-7, format!("collapse spread {spread:.1e}, doubling change {change:.1e}"))
}

fn small_rate_tracking() -> Outcome {
    // upper branch alone, before the lower pair appears
    let field = models::bump(BumpConstants::default());
    let shift = ParameterShift::logistic(-1.0, -0.5).map_err(|e| e.to_string())?;
    let d = build_diagram_with(&field, (-1.0, -0.5), &DiagramConfig::default()).map_err(|e| e.to_string())?;
    let path = make_stable_path(&d, &shift, bump_start(), RoutingPolicy::default()).map_err(|e| e.to_string())?;
    let mut devs = Vec::new();
    for r in [0.2, 0.1, 0.05, 0.025, 0.0125] {
        let pb = compute_pullback(&field, &shift, r, bump_start(), &PullbackConfig::default()).map_err(|e| e.to_string())?;
        devs.push(eps_close_tracks(&pb, &path, 0.01).sup_deviation);
    }
    let monotone = devs.windows(2).all(|w| w[1] <= w[0]);
    check(
        d.branches.len() == 1 && monotone && *devs.last().unwrap() < 0.01,
        format!("sup deviations {:?}", devs.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()),
    )
}

fn pseudo_orbit_tracking() -> Outcome {
    let (eps, r) = (0.05, 1e-3);
    let field = models::changeover();
    let shift = ParameterShift::tanh(-2.0, 2.0).map_err(|e| e.to_string())?;
    let d = build_diagram_with(&field, (-2.0, 2.0), &DiagramConfig::default()).map_err(|e| e.to_string())?;
    let path = make_stable_path(&d, &shift, 0.0, RoutingPolicy::StableUpper).map_err(|e| e.to_string())?;
    let po = construct_pseudo_orbit(&field, &shift, r, &path, eps, &PseudoOrbitConfig::default()).map_err(|e| e.to_string())?;
    let rep = verify_pseudo_orbit(&po, &field, &shift, &path, eps);
    let pb = compute_pullback(&field, &shift, r, 0.0, &PullbackConfig::default()).map_err(|e| e.to_string())?;
    let true_dev = eps_close_tracks(&pb, &path, eps).sup_deviation;
    check(
        rep.passed && rep.max_jump < eps && rep.min_gap > 1.0 && rep.sup_deviation < eps && true_dev >= 0.5,
        format!(
            "{} jumps, max jump {:.3}, min gap {:.2}, pseudo-orbit deviation {:.3}, true orbit deviation {:.3}",
            rep.n_jumps, rep.max_jump, rep.min_gap, rep.sup_deviation, true_dev
        ),
    )
}

/// Roots of `g` on `n + 1` equispaced nodes of `[lo, hi]` by sign changes and bisection.
fn brute_force_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let node = |i: usize| lo + (hi - lo) * i as f64 / n as f64;
    let mut roots = Vec::new();
    let mut prev = (node(0), g(node(0)));
    if prev.1 == 0.0 {
        roots.push(prev.0);
    }
    for i in 1..=n {
        let cur = (node(i), g(node(i)));
        if cur.1 == 0.0 {
            roots.push(cur.0);
        } else if prev.1 != 0.0 && (prev.1 < 0.0) != (cur.1 < 0.0) {
            let (mut a, mut b, fa) = (prev.0, cur.0, prev.1);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if (g(m) < 0.0) == (fa < 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    roots
}

fn property_suites() -> Outcome {
    let mut rng = rng();
    let mut oracle_fail = 0;
    let mut notes = Vec::new();
    for m in builtins() {
        let (lm, lp) = m.shift.range();
        let dom = m.field.domain();
        for _ in 0..20 {
            let l = rng.random_range(lm..lp);
            let got: Vec<f64> = find_equilibria(&m.field, l, 1000).iter().map(|e| e.x).collect();
            let want = brute_force_roots(|x| m.field.value(x, l), dom.lo, dom.hi, 100_000);
            if got.len() != want.len() || got.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-6) {
                oracle_fail += 1;
            }
        }
    }
    notes.push(format!("oracle mismatches {oracle_fail}"));

    let mut scaling_fail = 0;
    for _ in 0..20 {
        let (a, w, p) = (rng.random_range(-1.5..1.5), rng.random_range(0.1..3.0), rng.random_range(0.0..6.0));
        let rho = move |x: f64| (a * (w * x + p).sin()).exp();
        for m in builtins() {
            let (lm, lp) = m.shift.range();
            let l = rng.random_range(lm..lp);
            if !check_bifurcation_equivalence(&m.field, rho, l, 1000).is_ok_and(|r| r.equivalent) {
                scaling_fail += 1;
            }
        }
    }
    notes.push(format!("scaling mismatches {scaling_fail}"));

    let mut case1_fail = 0;
    let mut case1_checked = 0;
    let mut cases: Vec<Builtin> = builtins();
    while cases.len() < 8 {
        let (b0, b1) = (rng.random_range(2.0..3.5), rng.random_range(2.0..3.5));
        let (c0, c1) = (rng.random_range(0.2..b0 * b0 / 4.0 - 0.2), rng.random_range(0.2..b1 * b1 / 4.0 - 0.2));
        // admissible: two branches on the whole segment
        if (0..=100).any(|i| {
            let l = i as f64 / 100.0;
            let (b, c) = (b0 + (b1 - b0) * l, c0 + (c1 - c0) * l);
            b * b - 4.0 * c < 0.1
        }) {
            continue;
        }
        cases.push(Builtin {
            field: models::energy_balance_linear(b0, b1, c0, c1),
            shift: ParameterShift::logistic(0.0, 1.0).unwrap(),
            x_minus: models::energy_balance_branches(b0, c0).unwrap().0,
        });
    }
    for m in &cases {
        let d = build_diagram_with(&m.field, m.shift.range(), &DiagramConfig::default()).map_err(|e| e.to_string())?;
        let Ok(path) = make_stable_path(&d, &m.shift, m.x_minus, RoutingPolicy::default()) else {
            continue;
        };
        if !path.kind.iter().all(|k| *k == Kind::Stable) || !forward_basin_stable(&d, &path, 800).stable {
            continue;
        }
        case1_checked += 1;
        let res = find_rate_windows(&m.field, &m.shift, m.x_minus, 0.01, 100.0, &RateScanConfig::default()).map_err(|e| e.to_string())?;
        if !res.windows.is_empty() {
            case1_fail += 1;
        }
    }
    notes.push(format!("basin-stable paths with windows {case1_fail} of {case1_checked}"));
    check(oracle_fail == 0 && scaling_fail == 0 && case1_fail == 0 && case1_checked > 0, notes.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 bump rate-induced tipping window", bump_window),
        ("2 changeover invariance and reachable endpoints", changeover_invariance),
        ("3 energy-balance no rate-induced tipping", energy_balance_no_rate_tipping),
        ("4 energy-balance bifurcation-induced tipping", energy_balance_b_tipping),
        ("5 pullback uniqueness and convergence", pullback_uniqueness),
        ("6 small-rate tracking", small_rate_tracking),
        ("7 pseudo-orbit tracking", pseudo_orbit_tracking),
        ("8 property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
