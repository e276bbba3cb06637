use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bifurcation::diagram::{BifurcationClass, BifurcationDiagram, Side};
use crate::bifurcation::equilibria::{Equilibrium, Kind};
use crate::error::{Error, Result};
use crate::nonautonomous::path::{branch_point, stable_branch_at};
use crate::tipping::sweep::MonotoneSweep;

/// A stable branch of the diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub branch: usize,
    pub lambda_range: (f64, f64),
    pub samples: Vec<Equilibrium>,
}

/// A path on `from` may continue on `to` through `point` when the parameter
/// passes `lambda` upward (`upward`) or downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub point: usize,
    pub lambda: f64,
    pub x: f64,
    pub from: usize,
    pub to: usize,
    pub upward: bool,
    pub class: BifurcationClass,
}

/// Stable branches joined through bifurcation points.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectivityGraph {
    #[serde(skip)]
    diagram: BifurcationDiagram,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// A route that reached `point` on `branch` with no stable way on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteEnd {
    pub branch: usize,
    pub point: Option<usize>,
    pub lambda: f64,
}

/// Stable equilibria at the end of a sweep reachable from a start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reachability {
    pub branches: Vec<usize>,
    /// One equilibrium per reachable branch, sorted by `x`.
    pub endpoints: Vec<Equilibrium>,
    pub dead_ends: Vec<RouteEnd>,
}

impl ConnectivityGraph {
    pub fn build(diagram: &BifurcationDiagram) -> Self {
        let nodes = diagram
            .branches
            .iter()
            .filter(|b| b.is_stable())
            .map(|b| GraphNode { branch: b.id, lambda_range: b.lambda_range(), samples: b.samples.clone() })
            .collect::<Vec<_>>();
        let mut edges = Vec::new();
        for n in &nodes {
            let br = diagram.branch(n.branch);
            for (end, upward, side) in [(br.end, true, Side::Above), (br.start, false, Side::Below)] {
                let Some(pid) = end else { continue };
                let p = diagram.point(pid);
                for inc in &p.incident {
                    if inc.side == side && inc.branch != n.branch && diagram.branch(inc.branch).is_stable() {
                        edges.push(GraphEdge {
                            point: pid,
                            lambda: p.lambda,
                            x: p.x,
                            from: n.branch,
                            to: inc.branch,
                            upward,
                            class: p.class,
                        });
                    }
                }
            }
        }
        Self { diagram: diagram.clone(), nodes, edges }
    }

    pub fn diagram(&self) -> &BifurcationDiagram {
        &self.diagram
    }

    fn node(&self, branch: usize) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.branch == branch)
    }

    /// Continue every branch of `set` over the monotone segment `(a, b)`.
    fn advance(&self, set: &BTreeSet<usize>, (a, b): (f64, f64), dead: &mut Vec<RouteEnd>) -> Result<BTreeSet<usize>> {
        let upward = b > a;
        let tol = 1e-9 * (self.diagram.lambda_range.1 - self.diagram.lambda_range.0);
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let (lo, hi) = self.node(id).map(|n| n.lambda_range).expect("reachable branches are stable");
            let covers = if upward { hi >= b - tol } else { lo <= b + tol };
            if covers {
                out.insert(id);
                continue;
            }
            let br = self.diagram.branch(id);
            let end = if upward { br.end } else { br.start };
            let at = if upward { hi } else { lo };
            let Some(pid) = end else {
                dead.push(RouteEnd { branch: id, point: None, lambda: at });
                continue;
            };
            if self.diagram.point(pid).class == BifurcationClass::Other {
                return Err(Error::NeedsManualRouting { point: pid });
            }
            let next: Vec<usize> =
                self.edges.iter().filter(|e| e.from == id && e.point == pid && e.upward == upward).map(|e| e.to).collect();
            if next.is_empty() {
                dead.push(RouteEnd { branch: id, point: Some(pid), lambda: at });
            }
            stack.extend(next);
        }
        Ok(out)
    }
}

/// Stable equilibria at the end of `sweep` joined to `(x_minus, lambda_minus)`
/// by a stable path over the sweep, where `lambda_minus` is the sweep's start.
/// Branches switch only at bifurcation points the sweep passes through in the
/// direction they are approachable from.
pub fn reachable_endpoints(graph: &ConnectivityGraph, sweep: &MonotoneSweep, x_minus: f64) -> Result<Reachability> {
    let d = &graph.diagram;
    let (l0, l1) = (sweep.segments[0].0, sweep.segments.last().expect("nonempty sweep").1);
    let start = stable_branch_at(d, x_minus, l0)?;
    let mut set = BTreeSet::from([start]);
    let mut dead_ends = Vec::new();
    for &seg in &sweep.segments {
        set = graph.advance(&set, seg, &mut dead_ends)?;
    }
    let mut endpoints: Vec<Equilibrium> = set.iter().map(|&b| branch_point(d, b, l1)).collect();
    endpoints.sort_by(|a, b| a.x.total_cmp(&b.x));
    endpoints.dedup_by(|a, b| (a.x - b.x).abs() <= d.match_tol());
    Ok(Reachability { branches: set.into_iter().collect(), endpoints, dead_ends })
}

/// Whether the stable equilibria `from` (at the sweep's start) and `to` (at
/// its end) lie on a common stable path over `sweep`.
pub fn lambda_connected(
    graph: &ConnectivityGraph,
    sweep: &MonotoneSweep,
    from: (f64, f64),
    to: (f64, f64),
) -> Result<bool> {
    let d = &graph.diagram;
    let (l0, l1) = (sweep.segments[0].0, sweep.segments.last().expect("nonempty sweep").1);
    let tol = 1e-9 * (d.lambda_range.1 - d.lambda_range.0).max(1.0);
    if (from.1 - l0).abs() > tol || (to.1 - l1).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "endpoints must sit at the sweep's ends {l0} and {l1}, got {} and {}",
            from.1, to.1
        )));
    }
    let id = d
        .branch_near(to.0, to.1, d.match_tol())
        .ok_or_else(|| Error::InvalidArgument(format!("({}, {}) lies on no branch of the diagram", to.0, to.1)))?;
    let target = branch_point(d, id, to.1);
    if target.kind != Kind::Stable {
        return Err(Error::NotStable { x: target.x, lambda: target.lambda, df: target.df });
    }
    let reach = reachable_endpoints(graph, sweep, from.0)?;
    Ok(reach.endpoints.iter().any(|e| (e.x - target.x).abs() <= d.match_tol()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::build_diagram;
    use crate::models;

    fn xs(r: &Reachability) -> Vec<f64> {
        r.endpoints.iter().map(|e| (e.x * 1e6).round() / 1e6).collect()
    }

    #[test]
    fn changeover_endpoints() {
        let d = build_diagram(&models::changeover(), (-2.0, 2.0), 400, 900).unwrap();
        let g = ConnectivityGraph::build(&d);
        let mono = MonotoneSweep::from_levels(&[-2.0, 2.0]).unwrap();
        assert_eq!(xs(&reachable_endpoints(&g, &mono, 0.0).unwrap()), vec![-1.0, 1.0]);
        let three = MonotoneSweep::from_levels(&[-2.0, 1.5, -1.5, 2.0]).unwrap();
        assert_eq!(xs(&reachable_endpoints(&g, &three, 0.0).unwrap()), vec![-3.0, -1.0, 1.0, 3.0]);
        assert!(lambda_connected(&g, &three, (0.0, -2.0), (3.0, 2.0)).unwrap());
        assert!(!lambda_connected(&g, &mono, (0.0, -2.0), (3.0, 2.0)).unwrap());
        assert!(matches!(lambda_connected(&g, &mono, (0.0, -2.0), (0.0, 2.0)), Err(Error::NotStable { .. })));
    }

    #[test]
    fn energy_balance_single_branch() {
        let f = models::energy_balance_linear(3.0, 3.0, 0.8, 1.2);
        let d = build_diagram(&f, (0.0, 1.0), 200, 600).unwrap();
        let g = ConnectivityGraph::build(&d);
        let sw = MonotoneSweep::from_levels(&[0.0, 1.0]).unwrap();
        let (xs0, _) = models::energy_balance_branches(3.0, 0.8).unwrap();
        let (xs1, xu1) = models::energy_balance_branches(3.0, 1.2).unwrap();
        assert!(lambda_connected(&g, &sw, (xs0, 0.0), (xs1, 1.0)).unwrap());
        assert!(matches!(lambda_connected(&g, &sw, (xs0, 0.0), (xu1, 1.0)), Err(Error::NotStable { .. })));
    }

    #[test]
    fn fold_is_a_dead_end() {
        let f = models::energy_balance_linear(2.0, 2.0, 0.5, 1.5);
        let d = build_diagram(&f, (0.0, 1.5), 300, 600).unwrap();
        let g = ConnectivityGraph::build(&d);
        let sw = MonotoneSweep::from_levels(&[0.0, 1.5]).unwrap();
        let r = reachable_endpoints(&g, &sw, 1.0 + 0.5_f64.sqrt()).unwrap();
        assert!(r.endpoints.is_empty());
        assert_eq!(r.dead_ends.len(), 1);
    }
}
