//! Equilibria, diagrams, basins and time rescaling.

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use tipshift::bifurcation::{
    basin, build_diagram, check_bifurcation_equivalence, classify, find_equilibria, BifurcationClass,
    BifurcationDiagram, Kind, RootTolerances,
};
use tipshift::dynamics::{integrate, IntegratorConfig, ParameterShift, ScalarField, StateDomain};
use tipshift::models::{self, BumpConstants};

fn builtins() -> Vec<(ScalarField, (f64, f64))> {
    vec![
        (models::changeover(), (-2.0, 2.0)),
        (models::bump(BumpConstants::default()), (-1.0, 1.0)),
        (models::energy_balance_linear(2.5, 2.5, 0.8, 1.2), (0.0, 1.0)),
    ]
}

/// Sign changes of `g` on an `n`-cell grid, bisected to machine precision.
fn sign_change_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
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
            let (mut a, mut b) = (prev.0, cur.0);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if (g(m) < 0.0) == (prev.1 < 0.0) {
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

/// The field with `lambda` held at `l`.
fn frozen(f: &ScalarField, l: f64) -> ScalarField {
    let g = f.clone();
    ScalarField::new("frozen", f.domain(), move |x, _| g.value(x, l))
}

fn any_shift() -> ParameterShift {
    ParameterShift::tanh(0.0, 1.0).unwrap()
}

#[test]
fn changeover_equilibria_are_the_integers() {
    let eqs = find_equilibria(&models::changeover(), -2.0, 1000);
    assert_eq!(eqs.len(), 9);
    for (e, n) in eqs.iter().zip(-4..=4) {
        assert!((e.x - n as f64).abs() < 1e-12);
        let want = if n % 2 == 0 { Kind::Stable } else { Kind::Unstable };
        assert_eq!(e.kind, want, "x = {n}");
    }
}

#[test]
fn energy_balance_equilibria() {
    let eqs = find_equilibria(&models::energy_balance(|_| 2.5, |_| 1.0), 0.0, 1000);
    let got: Vec<(f64, Kind)> = eqs.iter().map(|e| (e.x, e.kind)).collect();
    assert_eq!(got.len(), 2);
    assert!((got[0].0 - 0.5).abs() < 1e-10 && got[0].1 == Kind::Unstable);
    assert!((got[1].0 - 2.0).abs() < 1e-10 && got[1].1 == Kind::Stable);
    assert!((eqs[0].df - 1.5).abs() < 1e-9 && (eqs[1].df + 1.5).abs() < 1e-9);
    assert!(find_equilibria(&models::energy_balance(|_| 2.0, |_| 1.5), 0.0, 1000).is_empty());
}

#[test]
fn classification_examples() {
    let tols = RootTolerances::default();
    let f = models::changeover();
    assert_eq!(classify(&f, 0.0, -2.0, &tols).unwrap(), Kind::Stable);
    assert_eq!(classify(&f, 0.0, -1.0, &tols).unwrap(), Kind::Bifurcation);
    let fold = models::energy_balance(|_| 2.0, |_| 1.0);
    assert_eq!(classify(&fold, 1.0, 0.0, &tols).unwrap(), Kind::Bifurcation);
    assert_eq!(classify(&f, 0.5, -2.0, &tols).unwrap_err().kind(), "not-an-equilibrium");
}

#[test]
fn bump_diagram_shape() {
    let k = BumpConstants::default();
    let d = build_diagram(&models::bump(k), (-1.0, 1.0), 400, 1000).unwrap();
    let upper = d.branch_near(2.0, 0.0, 1e-6).expect("branch through (0, 2)");
    assert!(d.branch(upper).is_stable());
    let pair = |l: f64| {
        let h = (0.4 * (l + 0.3).tanh()).sqrt();
        (0.25 - 1.2 * l - h, 0.25 - 1.2 * l + h)
    };
    for l in [-0.2, 0.0, 0.5, 0.9] {
        let xs: Vec<f64> = d.equilibria_at(l).iter().map(|e| e.x).collect();
        let (lo, hi) = pair(l);
        for want in [lo, hi] {
            assert!(xs.iter().any(|x| (x - want).abs() < 1e-6), "lambda {l}: {want} not in {xs:?}");
        }
    }
    for l in [-0.9, -0.5, -0.35] {
        assert_eq!(d.equilibria_at(l).len(), 1, "lambda {l}");
    }
    let birth = d.bif_points.iter().find(|p| p.class == BifurcationClass::SaddleNode).unwrap();
    assert!((birth.lambda + 0.3).abs() < 1e-6, "{birth:?}");
}

#[test]
fn constant_energy_balance_has_two_plain_branches() {
    let d = build_diagram(&models::energy_balance(|_| 2.5, |_| 1.0), (0.0, 1.0), 100, 1000).unwrap();
    assert_eq!(d.branches.len(), 2);
    assert!(d.bif_points.is_empty());
}

#[test]
fn changeover_exchanges_stability_at_unit_parameters() {
    let d = build_diagram(&models::changeover(), (-2.0, 2.0), 400, 1000).unwrap();
    assert!(!d.bif_points.is_empty());
    for p in &d.bif_points {
        assert_eq!(p.class, BifurcationClass::ExchangeCrossing);
        assert!((p.lambda.abs() - 1.0).abs() < 1e-6, "{p:?}");
        assert!((p.x - p.x.round()).abs() < 1e-6);
    }
}

#[test]
fn basin_examples() {
    let d = build_diagram(&models::energy_balance(|_| 2.5, |_| 1.0), (0.0, 1.0), 100, 1000).unwrap();
    let eq = d.equilibria_at(0.5).into_iter().find(|e| e.kind == Kind::Stable).unwrap();
    let b = basin(&d, &eq).unwrap();
    assert!((b.lo - 0.5).abs() < 1e-9 && b.hi == 5.0 && b.hi_unbounded && !b.lo_unbounded);

    let d = build_diagram(&models::changeover(), (-2.0, 2.0), 400, 1000).unwrap();
    let at = |l: f64, x: f64| d.equilibria_at(l).into_iter().find(|e| (e.x - x).abs() < 1e-9).unwrap();
    let b = basin(&d, &at(-2.0, 0.0)).unwrap();
    assert!((b.lo + 1.0).abs() < 1e-9 && (b.hi - 1.0).abs() < 1e-9);
    let b = basin(&d, &at(0.0, 0.5)).unwrap();
    assert!(b.lo.abs() < 1e-9 && (b.hi - 1.0).abs() < 1e-9);
    assert_eq!(basin(&d, &at(-2.0, 1.0)).unwrap_err().kind(), "invalid-argument");
}

#[test]
fn rescaling_examples() {
    let (a, tau) = (0.7, 3.0);
    let ebm = models::energy_balance_on(|_| 2.5, |_| 1.0, StateDomain::new(0.1, 5.0).unwrap());
    let rep = check_bifurcation_equivalence(&ebm, move |x| 2.0 * a * x.sqrt() / tau, 0.0, 1000).unwrap();
    assert!(rep.equivalent && rep.n_original == 2, "{rep:?}");
    let rep = check_bifurcation_equivalence(&models::changeover(), |_| 1.0, 0.3, 1000).unwrap();
    assert!(rep.equivalent && rep.max_position_error == 0.0);
    let decay = ScalarField::new("decay", StateDomain::new(-2.0, 2.0).unwrap(), |x, _| -x);
    let rep = check_bifurcation_equivalence(&decay, |x| 1.0 + x * x, 0.0, 1000).unwrap();
    assert!(rep.equivalent && rep.n_scaled == 1);
    assert!(check_bifurcation_equivalence(&decay, |x| x, 0.0, 1000).is_err());
}

#[test]
fn branches_are_continuous_and_stable_under_refinement() {
    for (f, range) in builtins() {
        let coarse = build_diagram(&f, range, 200, 1000).unwrap();
        let fine = build_diagram(&f, range, 400, 1000).unwrap();
        for d in [&coarse, &fine] {
            let tol = d.config.branch_jump_tol_rel * f.domain().width();
            for br in &d.branches {
                for w in br.samples.windows(2) {
                    assert!((w[1].x - w[0].x).abs() < tol, "{}: branch {}", f.name(), br.id);
                }
            }
        }
        assert_eq!(coarse.branches.len(), fine.branches.len(), "{}", f.name());
        assert_eq!(coarse.bif_points.len(), fine.bif_points.len(), "{}", f.name());
        let spacing = (range.1 - range.0) / 199.0;
        for (p, q) in coarse.bif_points.iter().zip(&fine.bif_points) {
            assert!((p.lambda - q.lambda).abs() < spacing, "{}: {p:?} vs {q:?}", f.name());
        }
    }
}

fn basin_points_converge(d: &BifurcationDiagram, l: f64, rng: &mut StdRng) {
    let f = d.field();
    for eq in d.equilibria_at(l).into_iter().filter(|e| e.kind == Kind::Stable) {
        let b = basin(d, &eq).unwrap();
        let g = frozen(f, l);
        let t_end = 100.0 / eq.df.abs();
        let pad = 0.02 * b.width();
        for _ in 0..10 {
            let x0 = rng.random_range(b.lo + pad..b.hi - pad);
            let x = integrate(&g, &any_shift(), 1.0, x0, 0.0, t_end, &IntegratorConfig::default()).unwrap().last().1;
            assert!((x - eq.x).abs() < 1e-6, "{} at {l}: {x0} -> {x}, attractor {}", f.name(), eq.x);
        }
    }
}

#[test]
fn basin_points_converge_to_their_attractor() {
    let mut rng = StdRng::seed_from_u64(21);
    for (f, (lo, hi)) in builtins() {
        let d = build_diagram(&f, (lo, hi), 200, 1000).unwrap();
        for i in 0..8 {
            let l = lo + (hi - lo) * (i as f64 + 0.37) / 8.0;
            basin_points_converge(&d, l, &mut rng);
        }
    }
}

fn builtin_index() -> impl Strategy<Value = usize> {
    0usize..3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn equilibria_match_a_fine_sign_change_scan(m in builtin_index(), u in 0.0f64..1.0) {
        let (f, (lo, hi)) = builtins().swap_remove(m);
        let l = lo + (hi - lo) * u;
        let d = f.domain();
        let got: Vec<f64> = find_equilibria(&f, l, 1000).iter().map(|e| e.x).collect();
        let want = sign_change_roots(|x| f.value(x, l), d.lo, d.hi, 100_000);
        prop_assert_eq!(got.len(), want.len(), "{} at {}: {:?} vs {:?}", f.name(), l, got, want);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn positive_rescaling_keeps_every_kind(
        m in builtin_index(),
        u in 0.0f64..1.0,
        a in -1.5f64..1.5,
        w in 0.1f64..3.0,
        p in 0.0f64..6.3,
    ) {
        let (f, (lo, hi)) = builtins().swap_remove(m);
        let l = lo + (hi - lo) * u;
        let scaled = f.scaled(move |x| (a * (w * x + p).sin()).exp());
        let tols = RootTolerances::default();
        for e in find_equilibria(&f, l, 1000) {
            if e.kind == Kind::Bifurcation {
                continue;
            }
            prop_assert_eq!(classify(&scaled, e.x, l, &tols).unwrap(), e.kind, "{} at ({}, {})", f.name(), e.x, l);
        }
    }
}
