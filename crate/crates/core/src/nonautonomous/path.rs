use serde::{Deserialize, Serialize};

use crate::bifurcation::diagram::{polish_root, BifurcationDiagram, Side};
use crate::bifurcation::equilibria::{make_equilibrium, Equilibrium, Kind};
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};

/// How a stable path continues through a bifurcation point with more than
/// one stable continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingPolicy {
    /// Take the stable continuation with the largest `x`.
    #[default]
    StableUpper,
    /// Take the stable continuation with the smallest `x`.
    StableLower,
    /// Refuse to choose.
    Strict,
}

/// One branch traversed over `s_from <= s <= s_to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub branch: usize,
    pub s_from: f64,
    pub s_to: f64,
}

/// The path meets bifurcation point `point` at `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCrossing {
    pub s: f64,
    pub point: usize,
}

/// `X(s)`: a curve in the closure of the stable equilibria over `Lambda(s)`.
/// The outer segments extend to `s = -inf` and `s = +inf`.
#[derive(Debug, Clone, Serialize)]
pub struct StablePath {
    #[serde(skip)]
    diagram: BifurcationDiagram,
    #[serde(skip)]
    shift: ParameterShift,
    pub s_grid: Vec<f64>,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kind: Vec<Kind>,
    pub segments: Vec<PathSegment>,
    pub crossings: Vec<PathCrossing>,
    pub x_minus: f64,
    pub x_plus: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub routing: RoutingPolicy,
}

/// Samples per unit of `s` on the path grid, before the floor below.
const GRID_PER_UNIT_S: f64 = 100.0;
const MIN_GRID: usize = 2001;

impl StablePath {
    pub fn diagram(&self) -> &BifurcationDiagram {
        &self.diagram
    }

    pub fn shift(&self) -> &ParameterShift {
        &self.shift
    }

    /// Index of the segment holding `s`.
    fn segment_at(&self, s: f64) -> &PathSegment {
        let i = self.segments.partition_point(|seg| seg.s_to < s);
        &self.segments[i.min(self.segments.len() - 1)]
    }

    /// The path equilibrium at `s`, polished onto the zero set.
    pub fn equilibrium_at(&self, s: f64) -> Equilibrium {
        let seg = self.segment_at(s);
        branch_point(&self.diagram, seg.branch, self.shift.value(s))
    }

    pub fn x_at(&self, s: f64) -> f64 {
        self.equilibrium_at(s).x
    }

    /// `X(r t)`.
    pub fn x_at_time(&self, t: f64, r: f64) -> f64 {
        self.x_at(r * t)
    }

    /// Largest step between consecutive grid samples.
    pub fn max_jump(&self) -> f64 {
        self.x.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    /// Every sample is stable or a bifurcation equilibrium.
    pub fn in_stable_closure(&self) -> bool {
        self.kind.iter().all(|k| *k != Kind::Unstable)
    }

    /// Branch ids in traversal order.
    pub fn branch_ids(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.branch).collect()
    }
}

/// Equilibrium on `branch` at `lambda`, clamped to the branch's range.
pub(crate) fn branch_point(diagram: &BifurcationDiagram, branch: usize, lambda: f64) -> Equilibrium {
    let br = diagram.branch(branch);
    let (lo, hi) = br.lambda_range();
    let l = lambda.clamp(lo, hi);
    let guess = br.x_at(l).expect("clamped lambda lies in range");
    let field = diagram.field();
    let x = polish_root(field, guess, l, diagram.match_tol()).unwrap_or(guess);
    make_equilibrium(field, x, l, diagram.config.tols.bif_tol)
}

/// Stable branch through `(x, lambda)` on the diagram.
pub(crate) fn stable_branch_at(diagram: &BifurcationDiagram, x: f64, lambda: f64) -> Result<usize> {
    let id = diagram.branch_near(x, lambda, diagram.match_tol()).ok_or_else(|| {
        Error::InvalidArgument(format!("({x}, {lambda}) lies on no branch of the diagram"))
    })?;
    let e = branch_point(diagram, id, lambda);
    if e.kind != Kind::Stable {
        return Err(Error::NotStable { x: e.x, lambda, df: e.df });
    }
    Ok(id)
}

/// Sample of an incident branch one step away from its bifurcation end.
fn departure_x(diagram: &BifurcationDiagram, branch: usize, side: Side) -> f64 {
    let s = &diagram.branch(branch).samples;
    let k = match side {
        Side::Above => 1.min(s.len() - 1),
        Side::Below => s.len().saturating_sub(2),
    };
    s[k].x
}

/// Choose the continuation of a path leaving `branch` towards larger
/// (`upward`) or smaller `lambda`.
pub(crate) fn continuations(
    diagram: &BifurcationDiagram,
    branch: usize,
    upward: bool,
) -> Result<(usize, Vec<usize>)> {
    let br = diagram.branch(branch);
    let (lo, hi) = br.lambda_range();
    let end = if upward { br.end } else { br.start };
    let at = if upward { hi } else { lo };
    let point = end.ok_or_else(|| Error::PathBroken {
        lambda: at,
        reason: format!("branch {branch} ends without a bifurcation point"),
    })?;
    let side = if upward { Side::Above } else { Side::Below };
    let p = diagram.point(point);
    let cands = p
        .incident
        .iter()
        .filter(|inc| inc.side == side && inc.branch != branch && diagram.branch(inc.branch).is_stable())
        .map(|inc| inc.branch)
        .collect();
    Ok((point, cands))
}

fn route(diagram: &BifurcationDiagram, point: usize, cands: &[usize], upward: bool, policy: RoutingPolicy) -> Result<usize> {
    let p = diagram.point(point);
    if cands.is_empty() {
        return Err(Error::DeadEnd { point, x: p.x, lambda: p.lambda });
    }
    if cands.len() > 1 && policy == RoutingPolicy::Strict {
        return Err(Error::AmbiguousRouting { point, candidates: cands.len() });
    }
    let side = if upward { Side::Above } else { Side::Below };
    let key = |b: &usize| departure_x(diagram, *b, side);
    let pick = match policy {
        RoutingPolicy::StableLower => cands.iter().min_by(|a, b| key(a).total_cmp(&key(b))),
        _ => cands.iter().max_by(|a, b| key(a).total_cmp(&key(b))),
    };
    Ok(*pick.expect("nonempty"))
}

/// `s` in `[a, b]` where `Lambda(s) = level`, given a crossing in between.
fn cross_time(shift: &ParameterShift, a: f64, b: f64, level: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    let above_a = shift.value(a) > level;
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (shift.value(m) > level) == above_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Follow the stable branch through `(x_minus, lambda_minus)` along the shift,
/// routing through bifurcation points with `routing`.
pub fn make_stable_path(
    diagram: &BifurcationDiagram,
    shift: &ParameterShift,
    x_minus: f64,
    routing: RoutingPolicy,
) -> Result<StablePath> {
    let (dl, dh) = diagram.lambda_range;
    let (lm, lp) = shift.range();
    let slack = 1e-12 * (dh - dl);
    if lm < dl - slack || lp > dh + slack {
        return Err(Error::InvalidArgument(format!(
            "shift range [{lm}, {lp}] exceeds the diagram range [{dl}, {dh}]"
        )));
    }
    let s_sup = shift.s_support();
    let n = ((2.0 * s_sup * GRID_PER_UNIT_S) as usize).max(MIN_GRID);
    let s_grid: Vec<f64> = (0..n).map(|i| -s_sup + 2.0 * s_sup * i as f64 / (n - 1) as f64).collect();
    let lambda: Vec<f64> = s_grid.iter().map(|&s| shift.value(s)).collect();

    let mut cur = stable_branch_at(diagram, x_minus, lm)?;
    let mut segments = vec![PathSegment { branch: cur, s_from: f64::NEG_INFINITY, s_to: f64::INFINITY }];
    let mut crossings = Vec::new();
    for i in 1..n {
        let l = lambda[i];
        loop {
            let (lo, hi) = diagram.branch(cur).lambda_range();
            if l >= lo && l <= hi {
                break;
            }
            let upward = l > hi;
            let (point, cands) = continuations(diagram, cur, upward)?;
            let next = route(diagram, point, &cands, upward, routing)?;
            let s = cross_time(shift, s_grid[i - 1], s_grid[i], diagram.point(point).lambda);
            segments.last_mut().unwrap().s_to = s;
            segments.push(PathSegment { branch: next, s_from: s, s_to: f64::INFINITY });
            crossings.push(PathCrossing { s, point });
            cur = next;
        }
    }

    let mut path = StablePath {
        diagram: diagram.clone(),
        shift: shift.clone(),
        s_grid,
        x: Vec::new(),
        lambda,
        kind: Vec::new(),
        segments,
        crossings,
        x_minus: 0.0,
        x_plus: 0.0,
        lambda_minus: lm,
        lambda_plus: lp,
        routing,
    };
    let eqs: Vec<Equilibrium> = path.s_grid.iter().map(|&s| path.equilibrium_at(s)).collect();
    path.x = eqs.iter().map(|e| e.x).collect();
    path.kind = eqs.iter().map(|e| e.kind).collect();
    let first = path.segments[0].branch;
    let last = path.segments[path.segments.len() - 1].branch;
    path.x_minus = branch_point(diagram, first, lm).x;
    path.x_plus = branch_point(diagram, last, lp).x;
    Ok(path)
}
