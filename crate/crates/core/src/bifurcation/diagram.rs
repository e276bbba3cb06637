//! Branch assembly over a parameter grid.
//!
//! Columns of sorted equilibria are compared pairwise. A pair of columns is
//! *regular* when the equilibria correspond one-to-one in order with equal
//! kinds, bounded jumps and no predicted change of order. Irregular grid
//! intervals are bisected down to `event_tol_rel * (lambda_plus - lambda_minus)`
//! and the bracketing columns are matched greedily to find what changed.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifurcation::equilibria::{
    bisect_sign, bracket_root, find_equilibria_with, make_equilibrium, roots_in, Equilibrium, Kind, RootTolerances,
};
use crate::dynamics::field::ScalarField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BifurcationClass {
    SaddleNode,
    ExchangeCrossing,
    Other,
}

impl BifurcationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BifurcationClass::SaddleNode => "saddle-node",
            BifurcationClass::ExchangeCrossing => "exchange-crossing",
            BifurcationClass::Other => "other",
        }
    }
}

/// Which side of the bifurcation value an incident branch lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Incidence {
    pub branch: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub id: usize,
    pub x: f64,
    pub lambda: f64,
    pub class: BifurcationClass,
    pub incident: Vec<Incidence>,
}

/// A maximal smooth curve of hyperbolic equilibria, sampled at increasing `lambda`.
/// End samples may be bifurcation points; interior samples never are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub samples: Vec<Equilibrium>,
    pub stability: Kind,
    /// Bifurcation point at the low-`lambda` end.
    pub start: Option<usize>,
    /// Bifurcation point at the high-`lambda` end.
    pub end: Option<usize>,
}

impl Branch {
    pub fn lambda_range(&self) -> (f64, f64) {
        (self.samples[0].lambda, self.samples[self.samples.len() - 1].lambda)
    }

    pub fn covers(&self, lambda: f64) -> bool {
        let (a, b) = self.lambda_range();
        a <= lambda && lambda <= b
    }

    pub fn is_stable(&self) -> bool {
        self.stability == Kind::Stable
    }

    /// Linear interpolation of the sampled curve; `None` outside its range.
    pub fn x_at(&self, lambda: f64) -> Option<f64> {
        if !self.covers(lambda) {
            return None;
        }
        let i = self.samples.partition_point(|e| e.lambda <= lambda);
        if i == 0 {
            return Some(self.samples[0].x);
        }
        if i == self.samples.len() {
            return Some(self.samples[i - 1].x);
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let w = (lambda - a.lambda) / (b.lambda - a.lambda);
        Some(a.x + w * (b.x - a.x))
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.x), hi.max(e.x)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagramConfig {
    pub n_lambda: usize,
    pub n_scan: usize,
    pub tols: RootTolerances,
    /// More bifurcation points than this is treated as accumulation.
    pub max_bif: usize,
    /// Event localization width, relative to `lambda_plus - lambda_minus`.
    pub event_tol_rel: f64,
    /// Matching radius across an event, relative to the state-domain width.
    pub persist_tol_rel: f64,
    /// Roots this close to the domain edge may enter or leave without a bifurcation.
    pub edge_tol_rel: f64,
    /// Items of one event closer than this form one bifurcation point.
    pub cluster_gap_rel: f64,
    /// Largest admissible jump between neighbouring samples of a branch.
    pub branch_jump_tol_rel: f64,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        Self {
            n_lambda: 400,
            n_scan: 1000,
            tols: RootTolerances::default(),
            max_bif: 256,
            event_tol_rel: 1e-8,
            persist_tol_rel: 1e-5,
            edge_tol_rel: 1e-4,
            cluster_gap_rel: 1e-2,
            branch_jump_tol_rel: 0.1,
        }
    }
}

impl DiagramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda < 50 {
            return Err(Error::InvalidArgument(format!("n_lambda must be at least 50, got {}", self.n_lambda)));
        }
        if self.n_scan < 10 {
            return Err(Error::InvalidArgument(format!("n_scan must be at least 10, got {}", self.n_scan)));
        }
        let pos = [
            self.tols.root_tol,
            self.tols.bif_tol,
            self.event_tol_rel,
            self.persist_tol_rel,
            self.edge_tol_rel,
            self.cluster_gap_rel,
            self.branch_jump_tol_rel,
        ];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("diagram tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Equilibrium set of a field over `[lambda_minus, lambda_plus]`.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcationDiagram {
    #[serde(skip)]
    field: ScalarField,
    pub lambda_range: (f64, f64),
    pub config: DiagramConfig,
    pub branches: Vec<Branch>,
    pub bif_points: Vec<BifurcationPoint>,
}

#[derive(Debug, Clone)]
struct Column {
    lambda: f64,
    eqs: Vec<Equilibrium>,
    /// `dx/dlambda` along each equilibrium.
    slopes: Vec<f64>,
}

impl Column {
    fn degenerate(&self) -> bool {
        self.eqs.iter().any(|e| e.kind == Kind::Bifurcation)
    }
}

struct Builder<'a> {
    field: &'a ScalarField,
    cfg: &'a DiagramConfig,
    lambda_range: (f64, f64),
    width: f64,
}

/// Cluster of changed items at an event, with its resolved point.
struct Cluster {
    point: (f64, f64, BifurcationClass),
}

struct Event {
    a: Column,
    b: Column,
    /// `left_match[i] = Some(j)`: equilibrium `i` of `a` continues as `j` of `b`.
    left_match: Vec<Option<usize>>,
    left_cluster: Vec<Option<usize>>,
    right_cluster: Vec<Option<usize>>,
    clusters: Vec<Cluster>,
}

enum Step {
    Regular(Column),
    Event(Box<Event>),
}

impl<'a> Builder<'a> {
    fn column(&self, lambda: f64) -> Column {
        let eqs = find_equilibria_with(self.field, lambda, self.cfg.n_scan, &self.cfg.tols);
        let h = 1e-6 * lambda.abs().max(1.0);
        let slopes = eqs
            .iter()
            .map(|e| {
                let fl = (self.field.value(e.x, lambda + h) - self.field.value(e.x, lambda - h)) / (2.0 * h);
                -fl / e.df
            })
            .collect();
        Column { lambda, eqs, slopes }
    }

    fn event_tol(&self) -> f64 {
        self.cfg.event_tol_rel * (self.lambda_range.1 - self.lambda_range.0)
    }

    /// Column at `lambda`, moved right within `(lambda, limit)` if it sits
    /// exactly on a bifurcation.
    fn nudged_column(&self, lambda: f64, limit: f64) -> Column {
        let c = self.column(lambda);
        if !c.degenerate() {
            return c;
        }
        let room = limit - lambda;
        for k in 1..=6 {
            let step = (10.0 * self.event_tol() * 3f64.powi(k - 1)).min(room * 0.1 * k as f64);
            let c = self.column(lambda + step);
            if !c.degenerate() {
                return c;
            }
        }
        c
    }

    fn regular(&self, a: &Column, b: &Column) -> bool {
        if a.eqs.len() != b.eqs.len() || a.degenerate() || b.degenerate() {
            return false;
        }
        let jump = self.cfg.branch_jump_tol_rel * self.width;
        let dl = b.lambda - a.lambda;
        for i in 0..a.eqs.len() {
            if a.eqs[i].kind != b.eqs[i].kind || (a.eqs[i].x - b.eqs[i].x).abs() > jump {
                return false;
            }
        }
        for i in 1..a.eqs.len() {
            let fwd = (a.eqs[i - 1].x + a.slopes[i - 1] * dl, a.eqs[i].x + a.slopes[i] * dl);
            let bwd = (b.eqs[i - 1].x - b.slopes[i - 1] * dl, b.eqs[i].x - b.slopes[i] * dl);
            for (p, q) in [fwd, bwd] {
                if p.is_finite() && q.is_finite() && p >= q {
                    return false;
                }
            }
        }
        true
    }

    /// Shrink an irregular interval onto its first event. The right end is
    /// pushed past any nonhyperbolic zone so both returned columns are clean;
    /// the last degenerate column met is returned alongside.
    fn localize(&self, mut a: Column, mut b: Column) -> Result<(Column, Column, Option<Column>)> {
        let tol = self.event_tol();
        let mut degenerate = None;
        while b.lambda - a.lambda > tol {
            let m = self.column(0.5 * (a.lambda + b.lambda));
            if m.degenerate() {
                degenerate = Some(m.clone());
                b = m;
            } else if self.regular(&a, &m) {
                a = m;
            } else {
                b = m;
            }
        }
        if b.degenerate() {
            degenerate = Some(b.clone());
            let lp = self.lambda_range.1;
            let mut step = tol;
            loop {
                let l = (b.lambda + step).min(lp);
                let c = self.column(l);
                if !c.degenerate() {
                    b = c;
                    break;
                }
                if l >= lp {
                    return Err(Error::DiagramIrregular(format!(
                        "nonhyperbolic equilibria persist up to lambda_plus = {lp}"
                    )));
                }
                step *= 2.0;
            }
        }
        Ok((a, b, degenerate))
    }

    /// Point of smallest `|df|` along the root near `x` over `[la, lb]`.
    fn least_hyperbolic(&self, x: f64, la: f64, lb: f64) -> (f64, f64) {
        let score = |l: f64| {
            self.local_root(x, l)
                .map(|r| (r, self.field.dx_value(r, l).abs()))
                .unwrap_or((x, f64::INFINITY))
        };
        let n = 64;
        let (mut best_l, mut best) = (la, score(la));
        for k in 1..=n {
            let l = la + (lb - la) * k as f64 / n as f64;
            let s = score(l);
            if s.1 < best.1 {
                best = s;
                best_l = l;
            }
        }
        // golden-section refinement around the best sample
        let h = (lb - la) / n as f64;
        let (mut lo, mut hi) = ((best_l - h).max(la), (best_l + h).min(lb));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let l1 = hi - g * (hi - lo);
            let l2 = lo + g * (hi - lo);
            if score(l1).1 <= score(l2).1 {
                hi = l2;
            } else {
                lo = l1;
            }
        }
        let l = 0.5 * (lo + hi);
        (score(l).0, l)
    }

    fn near_edge(&self, x: f64) -> bool {
        let dom = self.field.domain();
        let tol = self.cfg.edge_tol_rel * self.width;
        (x - dom.lo).abs() <= tol || (x - dom.hi).abs() <= tol
    }

    fn process_event(&self, a: Column, b: Column, forced: &[(f64, f64)]) -> Event {
        let persist = self.cfg.persist_tol_rel * self.width;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, ea) in a.eqs.iter().enumerate() {
            for (j, eb) in b.eqs.iter().enumerate() {
                let d = (ea.x - eb.x).abs();
                if d <= persist {
                    pairs.push((d, i, j));
                }
            }
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut left_match = vec![None; a.eqs.len()];
        let mut right_taken = vec![false; b.eqs.len()];
        for (_, i, j) in pairs {
            if left_match[i].is_none() && !right_taken[j] {
                left_match[i] = Some(j);
                right_taken[j] = true;
            }
        }
        let gap = self.cfg.cluster_gap_rel * self.width;
        let is_forced = |x: f64| forced.iter().any(|&(fx, _)| (x - fx).abs() < gap);
        // (x, side: 0 left / 1 right, index)
        let mut items: Vec<(f64, u8, usize)> = Vec::new();
        for (i, ea) in a.eqs.iter().enumerate() {
            let active = match left_match[i] {
                Some(j) => b.eqs[j].kind != ea.kind || is_forced(ea.x),
                None => !self.near_edge(ea.x),
            };
            if active {
                items.push((ea.x, 0, i));
                if let Some(j) = left_match[i] {
                    items.push((b.eqs[j].x, 1, j));
                }
            }
        }
        for (j, eb) in b.eqs.iter().enumerate() {
            if !right_taken[j] && !self.near_edge(eb.x) {
                items.push((eb.x, 1, j));
            }
        }
        items.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut groups: Vec<Vec<(f64, u8, usize)>> = Vec::new();
        for it in items {
            match groups.last_mut() {
                Some(g) if it.0 - g.last().unwrap().0 <= gap => g.push(it),
                _ => groups.push(vec![it]),
            }
        }
        let mut left_cluster = vec![None; a.eqs.len()];
        let mut right_cluster = vec![None; b.eqs.len()];
        let mut clusters = Vec::new();
        for (k, g) in groups.into_iter().enumerate() {
            let left: Vec<usize> = g.iter().filter(|it| it.1 == 0).map(|it| it.2).collect();
            let right: Vec<usize> = g.iter().filter(|it| it.1 == 1).map(|it| it.2).collect();
            for &i in &left {
                left_cluster[i] = Some(k);
            }
            for &j in &right {
                right_cluster[j] = Some(k);
            }
            let point = self.resolve_cluster(&a, &b, &left, &right, &left_match, forced);
            clusters.push(Cluster { point });
        }
        Event { a, b, left_match, left_cluster, right_cluster, clusters }
    }

    fn resolve_cluster(
        &self,
        a: &Column,
        b: &Column,
        left: &[usize],
        right: &[usize],
        left_match: &[Option<usize>],
        forced: &[(f64, f64)],
    ) -> (f64, f64, BifurcationClass) {
        let mean_x = {
            let xs: Vec<f64> = left.iter().map(|&i| a.eqs[i].x).chain(right.iter().map(|&j| b.eqs[j].x)).collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        let mid = 0.5 * (a.lambda + b.lambda);
        let gap = self.cfg.cluster_gap_rel * self.width;
        if let Some(&(fx, fl)) = forced.iter().find(|&&(fx, _)| (fx - mean_x).abs() < gap) {
            return (fx, fl, BifurcationClass::Other);
        }
        let changed: Vec<(usize, usize)> = left
            .iter()
            .filter_map(|&i| left_match[i].map(|j| (i, j)))
            .filter(|&(i, j)| a.eqs[i].kind != b.eqs[j].kind)
            .collect();
        if let Some(&(i, j)) = changed
            .iter()
            .min_by(|p, q| (a.eqs[p.0].x - b.eqs[p.1].x).abs().total_cmp(&(a.eqs[q.0].x - b.eqs[q.1].x).abs()))
        {
            let (x, l) = self.polish_crossing(a, b, a.eqs[i].x, b.eqs[j].x);
            return (x, l, BifurcationClass::ExchangeCrossing);
        }
        let unmatched_left = left.iter().filter(|&&i| left_match[i].is_none()).count();
        let unmatched_right = right.len() - left.iter().filter(|&&i| left_match[i].is_some()).count();
        if (unmatched_left == 2 && unmatched_right == 0) || (unmatched_left == 0 && unmatched_right == 2) {
            if let Some((x, l)) = self.polish_fold(mean_x, mid, a.lambda, b.lambda) {
                return (x, l, BifurcationClass::SaddleNode);
            }
            return (mean_x, mid, BifurcationClass::SaddleNode);
        }
        (mean_x, mid, BifurcationClass::Other)
    }

    /// Root of the frozen field nearest `x0` within the matching radius.
    fn local_root(&self, x0: f64, lambda: f64) -> Option<f64> {
        let w = self.cfg.persist_tol_rel * self.width;
        roots_in(self.field, lambda, x0 - w, x0 + w, 32, &self.cfg.tols)
            .into_iter()
            .min_by(|p, q| (p - x0).abs().total_cmp(&(q - x0).abs()))
    }

    /// Bisect on the sign of `df` along the persisting root.
    fn polish_crossing(&self, a: &Column, b: &Column, xa: f64, xb: f64) -> (f64, f64) {
        let fallback = (0.5 * (xa + xb), 0.5 * (a.lambda + b.lambda));
        let df_at = |l: f64, x0: f64| self.local_root(x0, l).map(|x| (x, self.field.dx_value(x, l)));
        let (Some((_, dfa)), Some((_, dfb))) = (df_at(a.lambda, xa), df_at(b.lambda, xb)) else {
            return fallback;
        };
        if dfa == 0.0 {
            return (xa, a.lambda);
        }
        if (dfa > 0.0) == (dfb > 0.0) {
            return fallback;
        }
        let (mut la, mut lb, mut x) = (a.lambda, b.lambda, xa);
        for _ in 0..80 {
            if lb - la <= 4.0 * f64::EPSILON * la.abs().max(1.0) {
                break;
            }
            let lm = 0.5 * (la + lb);
            let Some((xm, dm)) = df_at(lm, x) else { break };
            x = xm;
            if dm == 0.0 {
                return (xm, lm);
            }
            if (dm > 0.0) == (dfa > 0.0) {
                la = lm;
            } else {
                lb = lm;
            }
        }
        let l = 0.5 * (la + lb);
        (self.local_root(x, l).unwrap_or(x), l)
    }

    /// Newton on `(f, df/dx) = 0` in `(x, lambda)` with difference Jacobian.
    fn polish_fold(&self, x0: f64, l0: f64, la: f64, lb: f64) -> Option<(f64, f64)> {
        let f = |x: f64, l: f64| self.field.value(x, l);
        let fx = |x: f64, l: f64| self.field.dx_value(x, l);
        let (mut x, mut l) = (x0, l0);
        let slack = 10.0 * (lb - la).max(self.event_tol());
        for _ in 0..40 {
            let (r1, r2) = (f(x, l), fx(x, l));
            let hx = 1e-5 * x.abs().max(1.0);
            let hl = 1e-5 * l.abs().max(1.0);
            let j11 = r2;
            let j12 = (f(x, l + hl) - f(x, l - hl)) / (2.0 * hl);
            let j21 = (fx(x + hx, l) - fx(x - hx, l)) / (2.0 * hx);
            let j22 = (fx(x, l + hl) - fx(x, l - hl)) / (2.0 * hl);
            let det = j11 * j22 - j12 * j21;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let dx = (r1 * j22 - r2 * j12) / det;
            let dl = (j11 * r2 - j21 * r1) / det;
            x -= dx;
            l -= dl;
            if !(x.is_finite() && l.is_finite()) || l < la - slack || l > lb + slack {
                return None;
            }
            if dx.abs() <= 1e-14 * x.abs().max(1.0) && dl.abs() <= 1e-14 * l.abs().max(1.0) {
                break;
            }
        }
        let ok = self.cfg.tols.accepts(f(x, l), x) && fx(x, l).abs() <= self.cfg.tols.bif_tol.max(1e-6);
        ok.then_some((x, l))
    }
}

/// Build the diagram with default settings and the given grid sizes.
pub fn build_diagram(field: &ScalarField, lambda_range: (f64, f64), n_lambda: usize, n_scan: usize) -> Result<BifurcationDiagram> {
    let cfg = DiagramConfig { n_lambda, n_scan, ..DiagramConfig::default() };
    build_diagram_with(field, lambda_range, &cfg)
}

pub fn build_diagram_with(field: &ScalarField, lambda_range: (f64, f64), cfg: &DiagramConfig) -> Result<BifurcationDiagram> {
    cfg.validate()?;
    let (lm, lp) = lambda_range;
    if !(lm.is_finite() && lp.is_finite() && lm < lp) {
        return Err(Error::InvalidArgument(format!("need lambda_minus < lambda_plus, got ({lm}, {lp})")));
    }
    let bld = Builder { field, cfg, lambda_range, width: field.domain().width() };
    let n = cfg.n_lambda;
    let grid: Vec<f64> = (0..=n).map(|i| if i == n { lp } else { lm + (lp - lm) * i as f64 / n as f64 }).collect();
    let spacing = (lp - lm) / n as f64;
    let columns: Vec<Column> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &l)| if i == 0 || i == n { bld.column(l) } else { bld.nudged_column(l, l + spacing) })
        .collect();
    for (c, name) in [(&columns[0], "lambda_minus"), (&columns[n], "lambda_plus")] {
        if let Some(e) = c.eqs.iter().find(|e| e.kind == Kind::Bifurcation) {
            return Err(Error::DiagramIrregular(format!(
                "bifurcation equilibrium at {name} = {} (x = {})",
                c.lambda, e.x
            )));
        }
    }
    let tol = bld.event_tol();
    let gap = cfg.cluster_gap_rel * bld.width;
    let max_events = 16 * cfg.max_bif.max(16);
    let mut steps: Vec<Step> = Vec::new();
    let first = columns[0].clone();
    let mut current = columns[0].clone();
    let mut n_events = 0;
    let mut idx = 1;
    while idx <= n {
        let next = &columns[idx];
        if next.lambda <= current.lambda {
            idx += 1;
            continue;
        }
        if bld.regular(&current, next) {
            steps.push(Step::Regular(next.clone()));
            current = next.clone();
            idx += 1;
            continue;
        }
        n_events += 1;
        if n_events > max_events {
            return Err(Error::DiagramIrregular("too many irregular parameter intervals".into()));
        }
        let (a, b, degenerate) = bld.localize(current.clone(), next.clone())?;
        if a.lambda > current.lambda {
            steps.push(Step::Regular(a.clone()));
        }
        let mut ev = bld.process_event(a, b.clone(), &[]);
        if let Some(dc) = degenerate {
            // nonhyperbolic equilibria that explain no visible change
            let forced: Vec<(f64, f64)> = dc
                .eqs
                .iter()
                .filter(|e| e.kind == Kind::Bifurcation)
                .filter(|e| !ev.clusters.iter().any(|c| (c.point.0 - e.x).abs() < gap))
                .map(|e| bld.least_hyperbolic(e.x, ev.a.lambda, ev.b.lambda))
                .collect();
            if !forced.is_empty() {
                let Event { a, b, .. } = ev;
                ev = bld.process_event(a, b, &forced);
            }
        }
        steps.push(Step::Event(Box::new(ev)));
        current = b;
    }
    merge_close_events(&bld, &mut steps, 2.0 * tol);
    assemble(field.clone(), lambda_range, cfg, steps, first)
}

/// Consecutive events separated by less than `min_sep` are re-processed as one.
fn merge_close_events(bld: &Builder<'_>, steps: &mut Vec<Step>, min_sep: f64) {
    let mut out: Vec<Step> = Vec::with_capacity(steps.len());
    for st in steps.drain(..) {
        match (out.last_mut(), st) {
            (Some(Step::Event(prev)), Step::Event(cur)) if cur.b.lambda - prev.a.lambda < min_sep => {
                let forced: Vec<(f64, f64)> = prev
                    .clusters
                    .iter()
                    .chain(cur.clusters.iter())
                    .filter(|c| c.point.2 == BifurcationClass::Other)
                    .map(|c| (c.point.0, c.point.1))
                    .collect();
                let a = prev.a.clone();
                **prev = bld.process_event(a, cur.b, &forced);
            }
            (_, st) => out.push(st),
        }
    }
    *steps = out;
}

fn assemble(
    field: ScalarField,
    lambda_range: (f64, f64),
    cfg: &DiagramConfig,
    steps: Vec<Step>,
    first: Column,
) -> Result<BifurcationDiagram> {
    let bif_tol = cfg.tols.bif_tol;
    let mut branches: Vec<Branch> = Vec::new();
    let mut points: Vec<BifurcationPoint> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let new_branch = |branches: &mut Vec<Branch>, first: Vec<Equilibrium>, start: Option<usize>| {
        let id = branches.len();
        branches.push(Branch { id, samples: first, stability: Kind::Bifurcation, start, end: None });
        id
    };
    for e in &first.eqs {
        open.push(new_branch(&mut branches, vec![*e], None));
    }
    for st in steps {
        match st {
            Step::Regular(col) => {
                for (k, e) in col.eqs.iter().enumerate() {
                    branches[open[k]].samples.push(*e);
                }
            }
            Step::Event(ev) => {
                let Event { a: _, b, left_match, left_cluster, right_cluster, clusters } = *ev;
                let ids: Vec<usize> = clusters
                    .iter()
                    .map(|c| {
                        let id = points.len();
                        let (x, l, class) = c.point;
                        points.push(BifurcationPoint { id, x, lambda: l, class, incident: Vec::new() });
                        id
                    })
                    .collect();
                let mut next_open = vec![usize::MAX; b.eqs.len()];
                for (i, &bid) in open.iter().enumerate() {
                    match (left_cluster[i], left_match[i]) {
                        (None, Some(j)) => {
                            branches[bid].samples.push(b.eqs[j]);
                            next_open[j] = bid;
                        }
                        (Some(k), _) => {
                            let p = &mut points[ids[k]];
                            let br = &mut branches[bid];
                            if p.lambda > br.samples.last().unwrap().lambda {
                                br.samples.push(make_equilibrium(&field, p.x, p.lambda, bif_tol));
                            }
                            br.end = Some(p.id);
                            p.incident.push(Incidence { branch: bid, side: Side::Below });
                        }
                        (None, None) => {}
                    }
                }
                for (j, e) in b.eqs.iter().enumerate() {
                    if next_open[j] != usize::MAX {
                        continue;
                    }
                    let (start, mut samples) = match right_cluster[j] {
                        Some(k) => {
                            let p = &points[ids[k]];
                            let mut s = Vec::new();
                            if p.lambda < e.lambda {
                                s.push(make_equilibrium(&field, p.x, p.lambda, bif_tol));
                            }
                            (Some(p.id), s)
                        }
                        None => (None, Vec::new()),
                    };
                    samples.push(*e);
                    let bid = new_branch(&mut branches, samples, start);
                    if let Some(k) = right_cluster[j] {
                        points[ids[k]].incident.push(Incidence { branch: bid, side: Side::Above });
                    }
                    next_open[j] = bid;
                }
                open = next_open;
            }
        }
    }
    // points with no incident branch carry no information
    let mut remap = vec![None; points.len()];
    let mut kept = Vec::new();
    for p in points.into_iter() {
        if p.incident.is_empty() {
            continue;
        }
        remap[p.id] = Some(kept.len());
        kept.push(BifurcationPoint { id: kept.len(), ..p });
    }
    for br in &mut branches {
        br.start = br.start.and_then(|i| remap[i]);
        br.end = br.end.and_then(|i| remap[i]);
        br.stability = br
            .samples
            .iter()
            .map(|e| e.kind)
            .find(|k| *k != Kind::Bifurcation)
            .unwrap_or(Kind::Bifurcation);
    }
    let (lm, lp) = lambda_range;
    let tol = cfg.event_tol_rel * (lp - lm);
    if let Some(p) = kept.iter().find(|p| p.lambda <= lm + tol || p.lambda >= lp - tol) {
        return Err(Error::DiagramIrregular(format!(
            "bifurcation point at the end of the parameter range (x = {}, lambda = {})",
            p.x, p.lambda
        )));
    }
    if kept.len() > cfg.max_bif {
        return Err(Error::DiagramIrregular(format!(
            "{} bifurcation points exceed the limit of {}",
            kept.len(),
            cfg.max_bif
        )));
    }
    Ok(BifurcationDiagram { field, lambda_range, config: cfg.clone(), branches, bif_points: kept })
}

impl BifurcationDiagram {
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn branch(&self, id: usize) -> &Branch {
        &self.branches[id]
    }

    pub fn point(&self, id: usize) -> &BifurcationPoint {
        &self.bif_points[id]
    }

    /// Equilibria of the frozen field at `lambda`, using the diagram's scan settings.
    pub fn equilibria_at(&self, lambda: f64) -> Vec<Equilibrium> {
        find_equilibria_with(&self.field, lambda, self.config.n_scan, &self.config.tols)
    }

    /// Matching radius for identifying equilibria with branch samples.
    pub fn match_tol(&self) -> f64 {
        1e-4 * self.field.domain().width()
    }

    /// The branch passing closest to `(x, lambda)`, if one lies within `tol`.
    pub fn branch_near(&self, x: f64, lambda: f64, tol: f64) -> Option<usize> {
        self.branches
            .iter()
            .filter_map(|b| b.x_at(lambda).map(|bx| (b.id, (bx - x).abs())))
            .filter(|&(_, d)| d <= tol)
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .map(|(id, _)| id)
    }

    /// Equilibrium on branch `id` at `lambda`, polished onto the zero set.
    pub fn branch_equilibrium(&self, id: usize, lambda: f64) -> Option<Equilibrium> {
        let br = &self.branches[id];
        let guess = br.x_at(lambda)?;
        let x = polish_root(&self.field, guess, lambda, 1e-3 * self.field.domain().width()).unwrap_or(guess);
        Some(make_equilibrium(&self.field, x, lambda, self.config.tols.bif_tol))
    }

    /// Bifurcation points lying on branch `id` (its end links).
    pub fn points_on_branch(&self, id: usize) -> Vec<usize> {
        let br = &self.branches[id];
        br.start.into_iter().chain(br.end).collect()
    }

    /// CSV `branch_id,lambda,x,df,kind`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "branch_id,lambda,x,df,kind")?;
        for b in &self.branches {
            for e in &b.samples {
                writeln!(w, "{},{:.16e},{:.16e},{:.16e},{}", b.id, e.lambda, e.x, e.df, e.kind.as_str())?;
            }
        }
        Ok(())
    }

    /// JSON list of bifurcation points `{x, lambda, class, incident}`.
    pub fn points_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.bif_points).expect("bifurcation points serialize")
    }
}

/// Root of `f(., lambda)` near `guess`: Newton first, then a bracketing search
/// over `guess +- radius`.
pub(crate) fn polish_root(field: &ScalarField, guess: f64, lambda: f64, radius: f64) -> Option<f64> {
    let g = |x: f64| field.value(x, lambda);
    let mut x = guess;
    for _ in 0..30 {
        let fx = g(x);
        if fx == 0.0 {
            return Some(x);
        }
        let d = field.dx_value(x, lambda);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = fx / d;
        x -= step;
        if !x.is_finite() || (x - guess).abs() > radius {
            break;
        }
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            return Some(x);
        }
    }
    if x.is_finite() && (x - guess).abs() <= radius && g(x).abs() <= 1e-12 * x.abs().max(1.0) {
        return Some(x);
    }
    let n = 64;
    let mut best: Option<f64> = None;
    let mut xp = guess - radius;
    let mut fp = g(xp);
    for k in 1..=n {
        let xq = guess - radius + 2.0 * radius * k as f64 / n as f64;
        let fq = g(xq);
        let cand = if fp == 0.0 {
            Some(xp)
        } else if fq != 0.0 && (fp > 0.0) != (fq > 0.0) {
            Some(bracket_root(g, xp, xq, fp, fq))
        } else {
            None
        };
        if let Some(c) = cand {
            if best.is_none_or(|b| (c - guess).abs() < (b - guess).abs()) {
                best = Some(c);
            }
        }
        xp = xq;
        fp = fq;
    }
    best.or_else(|| {
        // a tangency: locate the extremum of f nearest the guess
        let d = |x: f64| field.dx_value(x, lambda);
        let (a, b) = (guess - radius, guess + radius);
        let (da, db) = (d(a), d(b));
        ((da > 0.0) != (db > 0.0)).then(|| bisect_sign(d, a, b, da))
    })
}
