use serde::{Deserialize, Serialize};

use crate::bifurcation::diagram::{build_diagram_with, DiagramConfig};
use crate::bifurcation::equilibria::Kind;
use crate::dynamics::field::ScalarField;
use crate::dynamics::shift::{ParameterShift, ShiftFamily};
use crate::error::{Error, Result};
use crate::nonautonomous::path::{make_stable_path, RoutingPolicy};
use crate::nonautonomous::pullback::ForwardLimit;
use crate::tipping::connectivity::{reachable_endpoints, ConnectivityGraph};
use crate::tipping::predicates::{
    bifurcation_on_start_branch, foreign_basin_check, forward_basin_stable, no_rtip_neighborhood,
    reparametrization_witness, BasinStability, ForeignBasinReport, NoTipNeighborhood, ReparamWitness,
    BASIN_MARGIN_MATCH_TOLS, REPARAM_RAMP_REL, REPARAM_SLOPE,
};
use crate::tipping::rates::{find_rate_windows_against, limit_at_rate, RateScanConfig, RateScanResult, RateWindow};
use crate::tipping::sweep::{sweep_decompose, SWEEP_AMPLITUDE_REL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub scan: RateScanConfig,
    /// Rate range searched for windows.
    pub r_lo: f64,
    pub r_hi: f64,
    /// First rate of the small-rate search; halved until two limits agree.
    pub r_start: f64,
    pub max_halvings: usize,
    pub diagram: DiagramConfig,
    /// Grid size of the forward basin stability check.
    pub n_basin: usize,
    /// Probe count for locating the shift's turning points.
    pub n_probe: usize,
    /// Skip the rate scan and report only the small-rate verdict.
    pub skip_scan: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            scan: RateScanConfig::default(),
            r_lo: 0.01,
            r_hi: 10.0,
            r_start: 0.1,
            max_halvings: 8,
            diagram: DiagramConfig { n_lambda: 400, n_scan: 1000, ..DiagramConfig::default() },
            n_basin: 800,
            n_probe: 4000,
            skip_scan: false,
        }
    }
}

/// Outcome at one rate or over a window of rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    /// The small-rate limit is connected to the start by a stable path.
    EndpointTracks { r: f64, limit: ForwardLimit },
    /// The small-rate limit is not connected to the start.
    BTipping { r: f64, limit: ForwardLimit },
    /// The small-rate limit is an equilibrium that is not stable.
    UnstableLimit { r: f64, limit: ForwardLimit },
    /// Rates whose limit differs from the small-rate limit.
    RTippingWindow { window: RateWindow },
    Unresolved { r: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftSummary {
    pub family: ShiftFamily,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub s_support: f64,
}

impl ShiftSummary {
    pub fn of(shift: &ParameterShift) -> Self {
        Self {
            family: shift.family(),
            lambda_minus: shift.lambda_minus(),
            lambda_plus: shift.lambda_plus(),
            s_support: shift.s_support(),
        }
    }
}

/// Sufficient conditions evaluated on the stable path from the start.
/// Entries are absent when the path or check could not be formed.
#[derive(Debug, Clone, Serialize)]
pub struct Predicates {
    pub forward_basin_stable: Option<BasinStability>,
    pub reparametrization_witness: Option<ReparamWitness>,
    pub foreign_basin: Option<ForeignBasinReport>,
    pub no_tip_neighborhood: Option<NoTipNeighborhood>,
    /// A bifurcation point ends the starting branch inside the range.
    pub bifurcation_on_start_branch: Option<bool>,
    /// Every bifurcation-tipping verdict has such a point.
    pub bifurcation_consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub match_tol: f64,
    pub limit_delta: f64,
    pub basin_margin: f64,
    pub pullback_tol: f64,
    pub bisect_tol: f64,
    pub root_tol: f64,
    pub bif_tol: f64,
    pub r_start: f64,
    pub halvings_used: usize,
    pub reparam_slope: f64,
    pub reparam_ramp_rel: f64,
    pub sweep_amplitude_rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TippingReport {
    pub model: String,
    pub shift: ShiftSummary,
    pub x_minus: f64,
    /// Stable equilibria at `lambda_plus` connected to the start.
    pub connected_endpoints: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    pub scan: Option<RateScanResult>,
    pub predicates: Predicates,
    pub tolerances: Tolerances,
}

impl TippingReport {
    pub fn windows(&self) -> Vec<&RateWindow> {
        self.verdicts
            .iter()
            .filter_map(|v| match v {
                Verdict::RTippingWindow { window } => Some(window),
                _ => None,
            })
            .collect()
    }

    pub fn small_rate_verdict(&self) -> &Verdict {
        &self.verdicts[0]
    }

    pub fn is_b_tipping(&self) -> bool {
        matches!(self.verdicts[0], Verdict::BTipping { .. })
    }
}

/// Small-rate limit: halve `r` from `r_start` until two successive decided
/// limits agree.
fn small_rate_limit(
    field: &ScalarField,
    shift: &ParameterShift,
    x_minus: f64,
    cfg: &ClassifyConfig,
    match_tol: f64,
) -> Result<(f64, std::result::Result<ForwardLimit, String>, usize)> {
    let mut r = cfg.r_start;
    let mut prev = limit_at_rate(field, shift, x_minus, r, &cfg.scan)?;
    for k in 1..=cfg.max_halvings {
        r *= 0.5;
        let cur = limit_at_rate(field, shift, x_minus, r, &cfg.scan)?;
        if !matches!(cur, ForwardLimit::Undecided { .. }) && cur.same_as(&prev, match_tol) {
            return Ok((r, Ok(cur), k));
        }
        prev = cur;
    }
    Ok((r, Err(format!("limits disagree after {} halvings", cfg.max_halvings)), cfg.max_halvings))
}

/// Classify the pullback attractor from `x_minus` on `shift`: its small-rate
/// limit decides tracking, bifurcation tipping or an unstable limit; a rate
/// scan against that limit finds rate-induced tipping windows.
pub fn classify_tipping(
    field: &ScalarField,
    shift: &ParameterShift,
    x_minus: f64,
    cfg: &ClassifyConfig,
) -> Result<TippingReport> {
    if !(cfg.r_start > 0.0 && cfg.r_lo > 0.0 && cfg.r_hi > cfg.r_lo) {
        return Err(Error::InvalidArgument("rates must satisfy 0 < r_lo < r_hi and r_start > 0".into()));
    }
    let range = shift.range();
    let diagram = build_diagram_with(field, range, &cfg.diagram)?;
    let match_tol = diagram.match_tol();
    let limit_delta = cfg.scan.delta_rel * field.domain().width();

    let graph = ConnectivityGraph::build(&diagram);
    let sweep = sweep_decompose(shift, cfg.n_probe);
    let reach = reachable_endpoints(&graph, &sweep, x_minus);
    let connected_endpoints = reach.as_ref().map(|r| r.endpoints.iter().map(|e| e.x).collect()).unwrap_or_default();

    let (r_small, small, halvings) = small_rate_limit(field, shift, x_minus, cfg, limit_delta)?;
    let first = match (&small, &reach) {
        (Err(reason), _) => Verdict::Unresolved { r: r_small, reason: reason.clone() },
        (Ok(_), Err(e)) => Verdict::Unresolved { r: r_small, reason: e.to_string() },
        (Ok(limit), Ok(reach)) => {
            let limit = *limit;
            match limit {
                ForwardLimit::Converged(e) if e.kind == Kind::Stable => {
                    if reach.endpoints.iter().any(|p| (p.x - e.x).abs() <= match_tol) {
                        Verdict::EndpointTracks { r: r_small, limit }
                    } else {
                        Verdict::BTipping { r: r_small, limit }
                    }
                }
                ForwardLimit::Converged(_) => Verdict::UnstableLimit { r: r_small, limit },
                ForwardLimit::Diverged(_) => Verdict::BTipping { r: r_small, limit },
                ForwardLimit::Undecided { .. } => unreachable!("small-rate limits are decided"),
            }
        }
    };

    let mut verdicts = vec![first];
    let mut scan = None;
    let reference = match &verdicts[0] {
        Verdict::EndpointTracks { limit, .. } | Verdict::UnstableLimit { limit, .. } => Some(*limit),
        _ => None,
    };
    if let (Some(reference), false) = (reference, cfg.skip_scan) {
        let res = find_rate_windows_against(field, shift, x_minus, cfg.r_lo, cfg.r_hi, &cfg.scan, &reference)?;
        verdicts.extend(res.windows.iter().map(|w| Verdict::RTippingWindow { window: w.clone() }));
        verdicts.extend(
            res.unresolved
                .iter()
                .map(|&r| Verdict::Unresolved { r, reason: "forward limit undecided after horizon extensions".into() }),
        );
        scan = Some(res);
    }

    let path = make_stable_path(&diagram, shift, x_minus, RoutingPolicy::default()).ok();
    let fbs = path.as_ref().map(|p| forward_basin_stable(&diagram, p, cfg.n_basin));
    let witness = path
        .as_ref()
        .filter(|p| p.segments.len() == 1)
        .and_then(|p| reparametrization_witness(&diagram, p, REPARAM_SLOPE, REPARAM_RAMP_REL).ok().flatten());
    let foreign = foreign_basin_check(&diagram, shift, x_minus).ok();
    let no_tip = no_rtip_neighborhood(&diagram, x_minus, range.0).ok();
    let on_branch = bifurcation_on_start_branch(&diagram, x_minus, range).ok();
    let b_tip = matches!(verdicts[0], Verdict::BTipping { .. });
    let predicates = Predicates {
        forward_basin_stable: fbs,
        reparametrization_witness: witness,
        foreign_basin: foreign,
        no_tip_neighborhood: no_tip,
        bifurcation_on_start_branch: on_branch,
        bifurcation_consistent: !b_tip || on_branch == Some(true),
    };

    let tolerances = Tolerances {
        match_tol,
        limit_delta,
        basin_margin: BASIN_MARGIN_MATCH_TOLS * match_tol,
        pullback_tol: cfg.scan.pullback.pullback_tol,
        bisect_tol: cfg.scan.bisect_tol,
        root_tol: cfg.diagram.tols.root_tol,
        bif_tol: cfg.diagram.tols.bif_tol,
        r_start: cfg.r_start,
        halvings_used: halvings,
        reparam_slope: REPARAM_SLOPE,
        reparam_ramp_rel: REPARAM_RAMP_REL,
        sweep_amplitude_rel: SWEEP_AMPLITUDE_REL,
    };
    Ok(TippingReport {
        model: field.name().to_string(),
        shift: ShiftSummary::of(shift),
        x_minus,
        connected_endpoints,
        verdicts,
        scan,
        predicates,
        tolerances,
    })
}
