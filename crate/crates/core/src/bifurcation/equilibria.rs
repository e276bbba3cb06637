use serde::{Deserialize, Serialize};

use crate::dynamics::field::ScalarField;
use crate::error::{Error, Result};

/// Linear stability of an equilibrium, from the sign of `df/dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Stable,
    Unstable,
    Bifurcation,
}

impl Kind {
    pub fn from_df(df: f64, bif_tol: f64) -> Kind {
        if df < -bif_tol {
            Kind::Stable
        } else if df > bif_tol {
            Kind::Unstable
        } else {
            Kind::Bifurcation
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Stable => "stable",
            Kind::Unstable => "unstable",
            Kind::Bifurcation => "bifurcation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub x: f64,
    pub lambda: f64,
    pub df: f64,
    pub kind: Kind,
}

/// Acceptance thresholds for roots and for the stability classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootTolerances {
    /// `|f| < root_tol * max(1, |x|)` at an accepted root.
    pub root_tol: f64,
    /// `|df| <= bif_tol` marks a bifurcation equilibrium.
    pub bif_tol: f64,
}

impl Default for RootTolerances {
    fn default() -> Self {
        Self { root_tol: 1e-9, bif_tol: 1e-8 }
    }
}

impl RootTolerances {
    pub fn accepts(&self, residual: f64, x: f64) -> bool {
        residual.abs() < self.root_tol * x.abs().max(1.0)
    }
}

/// Classify an equilibrium of the frozen system.
pub fn classify(field: &ScalarField, x: f64, lambda: f64, tols: &RootTolerances) -> Result<Kind> {
    let residual = field.eval(x, lambda)?;
    if !tols.accepts(residual, x) {
        return Err(Error::NotAnEquilibrium { x, lambda, residual });
    }
    Ok(Kind::from_df(field.eval_dx(x, lambda)?, tols.bif_tol))
}

pub(crate) fn make_equilibrium(field: &ScalarField, x: f64, lambda: f64, bif_tol: f64) -> Equilibrium {
    let df = field.dx_value(x, lambda);
    Equilibrium { x, lambda, df, kind: Kind::from_df(df, bif_tol) }
}

fn resolution(x: f64) -> f64 {
    4.0 * f64::EPSILON * x.abs().max(1.0)
}

/// Root of `g` in `[a, b]` given `g(a) g(b) < 0`, by Illinois steps with a
/// bisection safeguard. Returns the bracket end with the smaller residual.
pub(crate) fn bracket_root<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    let mut side = 0i8;
    for it in 0..300 {
        let width = (b - a).abs();
        if width <= resolution(a.abs().max(b.abs())) {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        // every third step, or on a bad secant, bisect
        if it % 3 == 2 || !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = g(c);
        if fc == 0.0 {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if g(a).abs() <= g(b).abs() {
        a
    } else {
        b
    }
}

/// Sign-change bisection of `g` on `[a, b]` with `g(a) g(b) < 0`.
pub(crate) fn bisect_sign<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, ga: f64) -> f64 {
    let pos_a = ga > 0.0;
    while (b - a).abs() > resolution(a.abs().max(b.abs())) {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == pos_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// All equilibria of the frozen field at `lambda` inside its state domain,
/// with default tolerances.
pub fn find_equilibria(field: &ScalarField, lambda: f64, n_scan: usize) -> Vec<Equilibrium> {
    find_equilibria_with(field, lambda, n_scan, &RootTolerances::default())
}

/// Scan `n_scan` cells for sign changes of `f`; cells without one are
/// searched for an interior extremum of `f` that touches or crosses zero.
pub fn find_equilibria_with(field: &ScalarField, lambda: f64, n_scan: usize, tols: &RootTolerances) -> Vec<Equilibrium> {
    let dom = field.domain();
    roots_in(field, lambda, dom.lo, dom.hi, n_scan.max(10), tols)
        .into_iter()
        .map(|x| make_equilibrium(field, x, lambda, tols.bif_tol))
        .collect()
}

/// A sign-change cell whose end values exceed this multiple of the linear
/// estimate `|df(root)| * width` may hide further roots. It is rescanned
/// together with its neighbours, since a cluster can straddle a node.
const CURVATURE_RATIO: f64 = 2.0;
/// Likewise when `|df|` at a cell end exceeds this multiple of `|df(root)|`.
const SLOPE_RATIO: f64 = 4.0;
const REFINE_CELLS: usize = 16;
const MAX_REFINE_DEPTH: usize = 6;

/// A sign-change cell sampled at `REFINE_CELLS - 1` interior points changes
/// sign more than once.
fn extra_sign_change<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, fa: f64, fb: f64) -> bool {
    let interior = (1..REFINE_CELLS).map(|k| g(a + (b - a) * k as f64 / REFINE_CELLS as f64));
    let mut prev = fa;
    let mut changes = 0;
    for v in interior.chain(std::iter::once(fb)) {
        if v != 0.0 && (v < 0.0) != (prev < 0.0) {
            changes += 1;
            prev = v;
        }
    }
    changes > 1
}

/// Sorted roots of `f(., lambda)` on `[lo, hi]` from an `n`-cell scan.
pub(crate) fn roots_in(field: &ScalarField, lambda: f64, lo: f64, hi: f64, n: usize, tols: &RootTolerances) -> Vec<f64> {
    let mut roots = scan_cells(field, lambda, lo, hi, n, tols, 0);
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * a.abs().max(1.0));
    roots
}

fn scan_cells(field: &ScalarField, lambda: f64, lo: f64, hi: f64, n: usize, tols: &RootTolerances, depth: usize) -> Vec<f64> {
    let node = |i: usize| {
        if i == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / n as f64
        }
    };
    let xs: Vec<f64> = (0..=n).map(node).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| field.value(x, lambda)).collect();
    let g = |x: f64| field.value(x, lambda);
    let dg = |x: f64| field.dx_value(x, lambda);
    let crosses = |i: usize| {
        let (fa, fb) = (fs[i], fs[i + 1]);
        fa.is_finite() && fb.is_finite() && fa != 0.0 && fb != 0.0 && (fa < 0.0) != (fb < 0.0)
    };
    let mut bracketed: Vec<Option<f64>> = vec![None; n];
    let mut refine = vec![false; n];
    for i in (0..n).filter(|&i| crosses(i)) {
        let (a, b, fa, fb) = (xs[i], xs[i + 1], fs[i], fs[i + 1]);
        let r = bracket_root(g, a, b, fa, fb);
        bracketed[i] = Some(r);
        // an odd cluster, e.g. just past a pitchfork, looks like one root
        let slope = dg(r).abs();
        let curved = !(fa.abs() + fb.abs() <= CURVATURE_RATIO * slope * (b - a));
        let steeper_ends = !(dg(a).abs().max(dg(b).abs()) <= SLOPE_RATIO * slope);
        if depth < MAX_REFINE_DEPTH && (curved || steeper_ends || extra_sign_change(&g, a, b, fa, fb)) {
            refine[i.saturating_sub(1)..=(i + 1).min(n - 1)].fill(true);
        }
    }
    let mut roots = Vec::new();
    let mut dfs: Vec<Option<f64>> = vec![None; n + 1];
    let mut df_at = |i: usize| *dfs[i].get_or_insert_with(|| dg(xs[i]));
    let mut i = 0;
    while i <= n {
        if fs[i] == 0.0 {
            roots.push(xs[i]);
        }
        if i == n {
            break;
        }
        if refine[i] {
            let j = (i..n).find(|&j| !refine[j]).unwrap_or(n);
            roots.extend(scan_cells(field, lambda, xs[i], xs[j], REFINE_CELLS * (j - i), tols, depth + 1));
            i = j;
            continue;
        }
        let (a, b, fa, fb) = (xs[i], xs[i + 1], fs[i], fs[i + 1]);
        i += 1;
        if let Some(r) = bracketed[i - 1] {
            roots.push(r);
            continue;
        }
        if !(fa.is_finite() && fb.is_finite()) || (fa == 0.0 && fb == 0.0) {
            continue;
        }
        let (da, db) = (df_at(i - 1), df_at(i));
        if !(da.is_finite() && db.is_finite()) || da == 0.0 || db == 0.0 || (da > 0.0) == (db > 0.0) {
            continue;
        }
        if fa == 0.0 {
            // leaves zero against the sign it must end with
            if (da > 0.0) != (fb > 0.0) {
                let ext = bisect_sign(dg, a, b, da);
                let fe = g(ext);
                if fe.is_finite() && fe != 0.0 && (fe > 0.0) != (fb > 0.0) {
                    roots.push(bracket_root(g, ext, b, fe, fb));
                }
            }
            continue;
        }
        if fb == 0.0 {
            if (db > 0.0) == (fa > 0.0) {
                let ext = bisect_sign(dg, a, b, da);
                let fe = g(ext);
                if fe.is_finite() && fe != 0.0 && (fe > 0.0) != (fa > 0.0) {
                    roots.push(bracket_root(g, a, ext, fa, fe));
                }
            }
            continue;
        }
        // same sign at both ends: a hidden pair needs an extremum pointing at zero
        let toward_zero_at_a = (fa > 0.0) == (da < 0.0);
        if !toward_zero_at_a {
            continue;
        }
        let ext = bisect_sign(dg, a, b, da);
        let fe = g(ext);
        if !fe.is_finite() {
            continue;
        }
        if fe == 0.0 || tols.accepts(fe, ext) && (fe > 0.0) == (fa > 0.0) {
            roots.push(ext);
        } else if (fe > 0.0) != (fa > 0.0) {
            roots.push(bracket_root(g, a, ext, fa, fe));
            roots.push(bracket_root(g, ext, b, fe, fb));
        }
    }
    roots
}
