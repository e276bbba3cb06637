use std::sync::Arc;

use serde::Serialize;

use crate::bifurcation::basin::{basin_at, BasinInterval};
use crate::bifurcation::diagram::{BifurcationClass, BifurcationDiagram};
use crate::bifurcation::equilibria::{Equilibrium, Kind};
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};
use crate::nonautonomous::path::{branch_point, make_stable_path, stable_branch_at, RoutingPolicy, StablePath};
use crate::tipping::connectivity::{reachable_endpoints, ConnectivityGraph};
use crate::tipping::sweep::sweep_decompose;

/// Basin membership keeps this many match tolerances clear of bounded ends.
pub const BASIN_MARGIN_MATCH_TOLS: f64 = 2.0;
/// Default slope of the fast middle of a reparametrization.
pub const REPARAM_SLOPE: f64 = 1e3;
/// Default ramp width of a reparametrization, as a fraction of `v - u`.
pub const REPARAM_RAMP_REL: f64 = 1e-2;

const SWEEP_PROBES: usize = 4000;
const WITNESS_GRID: usize = 600;

fn margin(d: &BifurcationDiagram) -> f64 {
    BASIN_MARGIN_MATCH_TOLS * d.match_tol()
}

fn basin_of(d: &BifurcationDiagram, e: &Equilibrium) -> Result<BasinInterval> {
    basin_at(d.field(), e.x, e.lambda, d.config.n_scan, &d.config.tols, d.match_tol())
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Earlier path position outside the basin of the current one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasinWitness {
    pub u: f64,
    pub v: f64,
    pub x_u: f64,
    pub x_v: f64,
    pub lambda_v: f64,
    pub basin: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasinStability {
    pub stable: bool,
    pub witness: Option<BasinWitness>,
    /// Grid values `v` checked and those skipped at non-stable path points.
    pub checked: usize,
    pub skipped: usize,
}

/// Whether every earlier path position stays in the basin of the current
/// one, on `n_s` values of `s` over the shift's support. The running
/// extremes of `X(u)` are compared with the basin at `(X(v), Lambda(v))`.
pub fn forward_basin_stable(diagram: &BifurcationDiagram, path: &StablePath, n_s: usize) -> BasinStability {
    let s_sup = path.shift().s_support();
    let m = margin(diagram);
    let x0 = path.x_minus;
    let (mut lo, mut hi) = ((x0, -s_sup), (x0, -s_sup));
    let (mut checked, mut skipped) = (0, 0);
    for v in grid(-s_sup, s_sup, n_s.max(2)) {
        let e = path.equilibrium_at(v);
        if e.x < lo.0 {
            lo = (e.x, v);
        }
        if e.x > hi.0 {
            hi = (e.x, v);
        }
        if e.kind != Kind::Stable {
            skipped += 1;
            continue;
        }
        let Ok(b) = basin_of(diagram, &e) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        let bad = [lo, hi].into_iter().find(|&(x, _)| !b.contains_with_margin(x, m));
        if let Some((x_u, u)) = bad {
            let w = BasinWitness { u, v, x_u, x_v: e.x, lambda_v: e.lambda, basin: (b.lo, b.hi) };
            return BasinStability { stable: false, witness: Some(w), checked, skipped };
        }
    }
    BasinStability { stable: true, witness: None, checked, skipped }
}

/// `X(u)` lies in the basin of the other stable branch `branch` at `Lambda(v)`.
#[derive(Debug, Clone, Serialize)]
pub struct ReparamWitness {
    pub u: f64,
    pub v: f64,
    pub branch: usize,
    pub x_u: f64,
    pub lambda_v: f64,
    pub y_v: f64,
    pub basin: (f64, f64),
    /// Limit of the other branch at `lambda_plus`.
    pub y_plus: f64,
    pub slope: f64,
    pub ramp: f64,
    /// The original shift run through `u` to `v` at slope `slope`.
    #[serde(skip)]
    pub shift: ParameterShift,
}

/// Monotone `C^2` map equal to `s` before `u`, with slope `m` while its value
/// lies in `(u + eta, v - eta)`, and `s + const` once its value passes `v`.
/// Returns `(sigma, sigma', s-length of the fast part)`.
pub fn fast_middle(u: f64, v: f64, m: f64, eta: f64) -> Result<(Arc<dyn Fn(f64) -> f64 + Send + Sync>, Arc<dyn Fn(f64) -> f64 + Send + Sync>, f64)> {
    if !(u < v && m >= 1.0 && eta > 0.0 && 2.0 * eta < v - u) {
        return Err(Error::InvalidArgument(format!(
            "need u < v, slope >= 1 and 0 < 2 eta < v - u; got u = {u}, v = {v}, slope = {m}, eta = {eta}"
        )));
    }
    // quintic smoothstep and its integral
    let step = |z: f64| z * z * z * (10.0 + z * (-15.0 + 6.0 * z));
    let step_int = |z: f64| z.powi(4) * (2.5 + z * (-3.0 + z));
    let a = 2.0 * eta / (m + 1.0);
    let p = (v - u - 2.0 * eta) / m;
    let len = 2.0 * a + p;
    let sigma = move |s: f64| {
        let d = s - u;
        if d <= 0.0 {
            s
        } else if d < a {
            let z = d / a;
            u + a * (z + (m - 1.0) * step_int(z))
        } else if d < a + p {
            u + eta + m * (d - a)
        } else if d < len {
            let z = (d - a - p) / a;
            v - eta + a * (z + (m - 1.0) * (z - step_int(z)))
        } else {
            v + (d - len)
        }
    };
    let sigma_ds = move |s: f64| {
        let d = s - u;
        if d <= 0.0 || d >= len {
            1.0
        } else if d < a {
            1.0 + (m - 1.0) * step(d / a)
        } else if d < a + p {
            m
        } else {
            1.0 + (m - 1.0) * (1.0 - step((d - a - p) / a))
        }
    };
    Ok((Arc::new(sigma), Arc::new(sigma_ds), len))
}

/// Search `u < v` with `X(u)` inside the basin of another stable branch at
/// `Lambda(v)`, ordered by `v` then `u`. The witness carries the shift that
/// crosses from `u` to `v` at slope `slope` (ramps `ramp_rel (v - u)` wide).
/// `None` when no other stable branch reaches `lambda_plus` or no pair fits.
pub fn reparametrization_witness(
    diagram: &BifurcationDiagram,
    path: &StablePath,
    slope: f64,
    ramp_rel: f64,
) -> Result<Option<ReparamWitness>> {
    if path.segments.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "the witness search needs a path on a single stable branch; this one crosses {} bifurcation point(s)",
            path.crossings.len()
        )));
    }
    let own = path.segments[0].branch;
    let lp = path.lambda_plus;
    let others: Vec<usize> = diagram
        .branches
        .iter()
        .filter(|b| b.id != own && b.is_stable() && b.covers(lp))
        .map(|b| b.id)
        .collect();
    if others.is_empty() {
        return Ok(None);
    }
    let shift = path.shift();
    let s_sup = shift.s_support();
    let s: Vec<f64> = grid(-s_sup, s_sup, WITNESS_GRID).collect();
    let xs: Vec<f64> = s.iter().map(|&si| path.x_at(si)).collect();
    let m = margin(diagram);
    for (j, &v) in s.iter().enumerate().skip(1) {
        let lv = shift.value(v);
        for &y in &others {
            if !diagram.branch(y).covers(lv) {
                continue;
            }
            let ye = branch_point(diagram, y, lv);
            if ye.kind != Kind::Stable {
                continue;
            }
            let Ok(b) = basin_of(diagram, &ye) else { continue };
            let Some(i) = (0..j).find(|&i| b.contains_with_margin(xs[i], m)) else { continue };
            let u = s[i];
            let eta = ramp_rel * (v - u);
            let (sigma, sigma_ds, _) = fast_middle(u, v, slope, eta)?;
            let fast = shift.reparametrized(move |t| sigma(t), move |t| sigma_ds(t), s_sup);
            return Ok(Some(ReparamWitness {
                u,
                v,
                branch: y,
                x_u: xs[i],
                lambda_v: lv,
                y_v: ye.x,
                basin: (b.lo, b.hi),
                y_plus: branch_point(diagram, y, lp).x,
                slope,
                ramp: eta,
                shift: fast,
            }));
        }
    }
    Ok(None)
}

/// Where a solution started at `x_minus` ends up in the future system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EndTarget {
    Equilibrium { branch: usize, x: f64 },
    /// Leaves the state domain downward (`direction = -1`) or upward.
    Escape { direction: i8 },
}

/// A future attractor whose frozen basin holds `x_minus`, not connected to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForeignBasin {
    pub target: EndTarget,
    pub basin: (f64, f64),
    /// `2 M K / eps`: rates above this tip on the given shift.
    pub rate_bound: Option<f64>,
    pub eps: f64,
    pub k: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForeignBasinReport {
    pub holds: bool,
    /// The path from `x_minus` stays on one stable branch.
    pub single_branch: bool,
    pub targets: Vec<ForeignBasin>,
}

impl ForeignBasinReport {
    /// Smallest sufficient rate over all targets.
    pub fn rate_bound(&self) -> Option<f64> {
        self.targets.iter().filter_map(|t| t.rate_bound).min_by(f64::total_cmp)
    }
}

/// Attractor basins of the frozen system at `lambda`, escape directions included.
fn attractors_at(d: &BifurcationDiagram, lambda: f64) -> Vec<(EndTarget, (f64, f64))> {
    let f = d.field();
    let eqs = d.equilibria_at(lambda);
    let w = f.domain().width();
    let mut out = Vec::new();
    let below = eqs.first().map_or(f.domain().lo, |e| e.x) - 1e-2 * w;
    if f.value(below, lambda) < 0.0 {
        out.push((EndTarget::Escape { direction: -1 }, (f64::NEG_INFINITY, eqs.first().map_or(f64::INFINITY, |e| e.x))));
    }
    let above = eqs.last().map_or(f.domain().hi, |e| e.x) + 1e-2 * w;
    if f.value(above, lambda) > 0.0 {
        out.push((EndTarget::Escape { direction: 1 }, (eqs.last().map_or(f64::NEG_INFINITY, |e| e.x), f64::INFINITY)));
    }
    for e in eqs.iter().filter(|e| e.kind == Kind::Stable) {
        let Some(branch) = d.branch_near(e.x, lambda, d.match_tol()) else { continue };
        if let Ok(b) = basin_of(d, e) {
            let lo = if b.lo_unbounded { f64::NEG_INFINITY } else { b.lo };
            let hi = if b.hi_unbounded { f64::INFINITY } else { b.hi };
            out.push((EndTarget::Equilibrium { branch, x: e.x }, (lo, hi)));
        }
    }
    out
}

/// Basin of `target` at `lambda`, following its branch back from `lambda_plus`.
fn target_basin_at(d: &BifurcationDiagram, target: &EndTarget, lambda: f64) -> Option<(f64, f64)> {
    match *target {
        EndTarget::Equilibrium { branch, .. } => {
            if !d.branch(branch).covers(lambda) {
                return None;
            }
            let e = branch_point(d, branch, lambda);
            attractors_at(d, lambda)
                .into_iter()
                .find(|(t, _)| matches!(t, EndTarget::Equilibrium { x, .. } if (x - e.x).abs() <= d.match_tol()))
                .map(|(_, b)| b)
        }
        EndTarget::Escape { direction } => attractors_at(d, lambda)
            .into_iter()
            .find(|(t, _)| matches!(t, EndTarget::Escape { direction: dd } if *dd == direction))
            .map(|(_, b)| b),
    }
}

/// Stable equilibria (or escape directions) at `lambda_plus` not connected to
/// `x_minus` over the shift's sweep whose frozen basin contains `x_minus`.
/// Each carries the rate `2 M K / eps` above which the pullback attractor
/// is guaranteed to end there.
pub fn foreign_basin_check(
    diagram: &BifurcationDiagram,
    shift: &ParameterShift,
    x_minus: f64,
) -> Result<ForeignBasinReport> {
    let path = match make_stable_path(diagram, shift, x_minus, RoutingPolicy::default()) {
        Ok(p) => p,
        Err(e @ (Error::NotStable { .. } | Error::InvalidArgument(_))) => return Err(e),
        Err(_) => return Ok(ForeignBasinReport { holds: false, single_branch: false, targets: vec![] }),
    };
    if path.segments.len() != 1 {
        return Ok(ForeignBasinReport { holds: false, single_branch: false, targets: vec![] });
    }
    let graph = ConnectivityGraph::build(diagram);
    let reach = reachable_endpoints(&graph, &sweep_decompose(shift, SWEEP_PROBES), x_minus)?;
    let m_tol = diagram.match_tol();
    let (lm, lp) = shift.range();
    let mut targets = Vec::new();
    for (target, basin) in attractors_at(diagram, lp) {
        if let EndTarget::Equilibrium { x, .. } = target {
            if reach.endpoints.iter().any(|e| (e.x - x).abs() <= m_tol) {
                continue;
            }
        }
        let margin = margin(diagram);
        if !(basin.0 + margin < x_minus && x_minus < basin.1 - margin) {
            continue;
        }
        let eps = (x_minus - basin.0).min(basin.1 - x_minus) / 3.0;
        let (k, m) = sufficient_rate_parts(diagram, shift, &path, &target, eps, (lm, lp));
        let rate_bound = k.map(|k| 2.0 * m * k.max(f64::MIN_POSITIVE) / eps);
        targets.push(ForeignBasin { target, basin, rate_bound, eps, k: k.unwrap_or(f64::NAN), m });
    }
    Ok(ForeignBasinReport { holds: !targets.is_empty(), single_branch: true, targets })
}

/// Smallest grid `K` with `X(u)` within `eps` of `x_minus` for `u < -K` and
/// `[x_minus - 2 eps, x_minus + 2 eps]` in the target's basin for `v > K`,
/// and `M = max |f|` over `[x_minus - eps, x_minus + eps] x [lambda_minus, lambda_plus]`.
fn sufficient_rate_parts(
    d: &BifurcationDiagram,
    shift: &ParameterShift,
    path: &StablePath,
    target: &EndTarget,
    eps: f64,
    (lm, lp): (f64, f64),
) -> (Option<f64>, f64) {
    let n = 401;
    let s_sup = shift.s_support();
    let x0 = path.x_minus;
    let ks: Vec<f64> = grid(0.0, s_sup, n).collect();
    let ok_past: Vec<bool> = ks.iter().map(|&k| (path.x_at(-k) - x0).abs() <= eps).collect();
    let ok_future: Vec<bool> = ks
        .iter()
        .map(|&k| {
            target_basin_at(d, target, shift.value(k)).is_some_and(|(lo, hi)| lo < x0 - 2.0 * eps && x0 + 2.0 * eps < hi)
        })
        .collect();
    let mut k = None;
    for j in (0..n).rev() {
        if !(ok_past[j] && ok_future[j]) {
            break;
        }
        k = Some(ks[j]);
    }
    let f = d.field();
    let m = grid(x0 - eps, x0 + eps, 41)
        .flat_map(|x| grid(lm, lp, 201).map(move |l| (x, l)))
        .map(|(x, l)| f.value(x, l).abs())
        .fold(0.0, f64::max);
    (k, m)
}

/// Post-fold interval on which a stable branch born at a saddle-node lies
/// strictly between every value of the neighbouring unstable branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldInterval {
    pub point: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub stable_branch: usize,
    pub partner_branch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoTipNeighborhood {
    /// Width of `[lambda_minus, lambda_minus + nu]` certified free of
    /// rate-induced tipping for every monotone shift.
    pub nu: f64,
    pub branch: usize,
    /// First failing pair `(lambda_u, lambda_v)`.
    pub witness: Option<(f64, f64)>,
    pub fold: Option<FoldInterval>,
}

/// Certify how far above `lambda_minus` the stable branch through
/// `x_minus` stays forward basin stable, on the branch's own samples.
/// Separately certify the post-fold interval when that branch starts at a
/// saddle-node.
pub fn no_rtip_neighborhood(diagram: &BifurcationDiagram, x_minus: f64, lambda_minus: f64) -> Result<NoTipNeighborhood> {
    let id = stable_branch_at(diagram, x_minus, lambda_minus)?;
    let br = diagram.branch(id);
    let (_, hi) = br.lambda_range();
    let m = margin(diagram);
    let start = branch_point(diagram, id, lambda_minus);
    let (mut lo_x, mut hi_x) = ((start.x, lambda_minus), (start.x, lambda_minus));
    let mut certified = lambda_minus;
    let mut witness = None;
    let lambdas = br.samples.iter().map(|e| e.lambda).filter(|&l| l > lambda_minus);
    for l in lambdas {
        let e = branch_point(diagram, id, l);
        if e.kind != Kind::Stable {
            break;
        }
        lo_x = if e.x < lo_x.0 { (e.x, l) } else { lo_x };
        hi_x = if e.x > hi_x.0 { (e.x, l) } else { hi_x };
        let Ok(b) = basin_of(diagram, &e) else { break };
        if let Some(&(_, lu)) = [lo_x, hi_x].iter().find(|(x, _)| !b.contains_with_margin(*x, m)) {
            witness = Some((lu, l));
            break;
        }
        certified = l;
    }
    if witness.is_none() && certified >= br.samples.last().map_or(hi, |e| e.lambda) {
        certified = hi;
    }
    Ok(NoTipNeighborhood { nu: certified - lambda_minus, branch: id, witness, fold: fold_interval(diagram, id) })
}

/// Largest `lambda1` with the stable branch `id`, born at a saddle-node at
/// `lambda0`, separated from its fold partner and from the nearest unstable
/// branch on its other side over all of `(lambda0, lambda1)`.
fn fold_interval(d: &BifurcationDiagram, id: usize) -> Option<FoldInterval> {
    let br = d.branch(id);
    let pid = br.start?;
    let p = d.point(pid);
    if p.class != BifurcationClass::SaddleNode {
        return None;
    }
    let partner = p.incident.iter().map(|i| i.branch).find(|&b| b != id && !d.branch(b).is_stable())?;
    let pb = d.branch(partner);
    let samples: Vec<&Equilibrium> = br.samples.iter().filter(|e| e.lambda > p.lambda).collect();
    let first = samples.first()?;
    let partner_below = pb.x_at(first.lambda).is_some_and(|px| px < first.x);
    let (mut s_lo, mut s_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut near_max, mut far_min) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut lambda1 = None;
    for e in samples {
        let l = e.lambda;
        if e.kind != Kind::Stable {
            break;
        }
        let Some(px) = pb.x_at(l) else { break };
        s_lo = s_lo.min(e.x);
        s_hi = s_hi.max(e.x);
        // the partner on one side, the nearest other unstable equilibrium on the other
        let other = d
            .equilibria_at(l)
            .into_iter()
            .filter(|q| q.kind == Kind::Unstable && (q.x - px).abs() > d.match_tol())
            .filter(|q| if partner_below { q.x > e.x } else { q.x < e.x })
            .map(|q| q.x)
            .min_by(|a, b| (a - e.x).abs().total_cmp(&(b - e.x).abs()));
        let (near, far) = if partner_below { (px, other.unwrap_or(f64::INFINITY)) } else { (-px, -other.unwrap_or(f64::NEG_INFINITY)) };
        near_max = near_max.max(near);
        far_min = far_min.min(far);
        let (a, b) = if partner_below { (s_lo, s_hi) } else { (-s_hi, -s_lo) };
        if !(near_max < a && b < far_min) {
            break;
        }
        lambda1 = Some(l);
    }
    Some(FoldInterval { point: pid, lambda0: p.lambda, lambda1: lambda1?, stable_branch: id, partner_branch: partner })
}

/// A bifurcation point ends the stable branch through `x_minus` strictly
/// inside `(lambda_minus, lambda_plus)`.
pub fn bifurcation_on_start_branch(diagram: &BifurcationDiagram, x_minus: f64, range: (f64, f64)) -> Result<bool> {
    let id = stable_branch_at(diagram, x_minus, range.0)?;
    Ok(diagram
        .points_on_branch(id)
        .into_iter()
        .any(|p| diagram.point(p).lambda > range.0 && diagram.point(p).lambda < range.1))
}
