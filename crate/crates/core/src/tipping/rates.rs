use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::field::ScalarField;
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};
use crate::nonautonomous::pullback::{compute_pullback, forward_limit, ForwardLimit, PullbackConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateScanConfig {
    /// Log-spaced grid size.
    pub n_scan: usize,
    /// Relative width `r_hi / r_lo - 1` at which a bracket is refined enough.
    pub bisect_tol: f64,
    pub pullback: PullbackConfig,
    /// Forward-horizon extensions tried before a limit counts as unresolved.
    pub max_extensions: usize,
    /// Ball radius for forward limits, relative to the state-domain width.
    pub delta_rel: f64,
}

impl Default for RateScanConfig {
    fn default() -> Self {
        Self {
            n_scan: 32,
            bisect_tol: 1e-6,
            pullback: PullbackConfig { strict: false, ..PullbackConfig::default() },
            max_extensions: 4,
            delta_rel: 1e-4,
        }
    }
}

/// A contiguous range of rates whose limit differs from the reference limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateWindow {
    pub id: usize,
    /// Lower critical rate (geometric centre of its final bracket).
    pub r_lo: f64,
    pub r_hi: f64,
    pub lo_bracket: (f64, f64),
    pub hi_bracket: (f64, f64),
    /// The window reaches the end of the scanned range on that side.
    pub open_lo: bool,
    pub open_hi: bool,
    pub limit: ForwardLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub r: f64,
    pub limit: ForwardLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateScanResult {
    /// Log-spaced grid samples in rate order.
    pub grid: Vec<RateSample>,
    /// Bisection samples, grouped by bracket.
    pub refinements: Vec<RateSample>,
    /// Limit that windows differ from.
    pub reference: Option<ForwardLimit>,
    pub windows: Vec<RateWindow>,
    /// Rates whose limit stayed undecided.
    pub unresolved: Vec<f64>,
    pub bisect_tol: f64,
}

impl RateScanResult {
    pub fn sorted_samples(&self) -> Vec<RateSample> {
        let mut all: Vec<RateSample> = self.grid.iter().chain(&self.refinements).cloned().collect();
        all.sort_by(|a, b| a.r.total_cmp(&b.r));
        all
    }

    /// Window containing `r`, by its refined boundaries.
    pub fn window_of(&self, r: f64) -> Option<usize> {
        self.windows.iter().find(|w| w.r_lo <= r && r <= w.r_hi).map(|w| w.id)
    }

    /// CSV `r,limit_x,limit_kind,window_id` in rate order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,limit_x,limit_kind,window_id")?;
        for s in self.sorted_samples() {
            let (x, kind) = limit_columns(&s.limit);
            let win = self.window_of(s.r).map(|i| i.to_string()).unwrap_or_default();
            writeln!(w, "{:.16e},{},{},{}", s.r, x, kind, win)?;
        }
        Ok(())
    }
}

pub(crate) fn limit_columns(l: &ForwardLimit) -> (String, &'static str) {
    match l {
        ForwardLimit::Converged(e) => (format!("{:.16e}", e.x), e.kind.as_str()),
        ForwardLimit::Diverged(e) => (format!("{:.16e}", e.x), "diverged"),
        ForwardLimit::Undecided { x, .. } => (format!("{x:.16e}"), "unresolved"),
    }
}

/// Forward limit of the pullback attractor at rate `r`, extending the forward
/// horizon while undecided.
pub fn limit_at_rate(
    field: &ScalarField,
    shift: &ParameterShift,
    x_minus: f64,
    r: f64,
    cfg: &RateScanConfig,
) -> Result<ForwardLimit> {
    let delta = cfg.delta_rel * field.domain().width();
    let mut pcfg = cfg.pullback.clone();
    let mut extra: Option<f64> = None;
    for k in 0.. {
        let pb = compute_pullback(field, shift, r, x_minus, &pcfg)?;
        let lim = forward_limit(&pb, field, shift.lambda_plus(), delta, None);
        if decided(&lim) || k == cfg.max_extensions {
            return Ok(lim);
        }
        let relax = pb.t_forward - shift.s_support() / r;
        let add = extra.map_or(relax.max(1.0), |e| 2.0 * e);
        extra = Some(add);
        pcfg.t_forward = Some(pb.t_forward + add);
    }
    unreachable!("the loop returns once the extensions are spent")
}

fn decided(l: &ForwardLimit) -> bool {
    !matches!(l, ForwardLimit::Undecided { .. })
}

/// Refine a bracket `(a, b)` with different limits until `b / a - 1 <= tol`.
/// Stops early if a midpoint matches neither side.
fn bisect_bracket(
    field: &ScalarField,
    shift: &ParameterShift,
    x_minus: f64,
    cfg: &RateScanConfig,
    (mut a, mut la): (f64, ForwardLimit),
    (mut b, mut lb): (f64, ForwardLimit),
    match_tol: f64,
) -> Result<((f64, f64), Vec<RateSample>)> {
    let mut samples = Vec::new();
    while b / a - 1.0 > cfg.bisect_tol {
        let m = (a * b).sqrt();
        if !(m > a && m < b) {
            break;
        }
        let lm = limit_at_rate(field, shift, x_minus, m, cfg)?;
        samples.push(RateSample { r: m, limit: lm });
        if lm.same_as(&la, match_tol) {
            a = m;
            la = lm;
        } else if lm.same_as(&lb, match_tol) {
            b = m;
            lb = lm;
        } else {
            break;
        }
    }
    Ok(((a, b), samples))
}

/// Scan `n_scan` log-spaced rates over `[r_lo, r_hi]` for changes of the
/// pullback attractor's forward limit and refine each change by bisection.
/// Windows are runs whose limit differs from the one at the smallest
/// decided rate.
pub fn find_rate_windows(
    field: &ScalarField,
    shift: &ParameterShift,
    x_minus: f64,
    r_lo: f64,
    r_hi: f64,
    cfg: &RateScanConfig,
) -> Result<RateScanResult> {
    scan(field, shift, x_minus, (r_lo, r_hi), cfg, None)
}

/// [`find_rate_windows`] with windows taken against a given `reference` limit.
pub fn find_rate_windows_against(
    field: &ScalarField,
    shift: &ParameterShift,
    x_minus: f64,
    r_lo: f64,
    r_hi: f64,
    cfg: &RateScanConfig,
    reference: &ForwardLimit,
) -> Result<RateScanResult> {
    scan(field, shift, x_minus, (r_lo, r_hi), cfg, Some(*reference))
}

fn scan(
    field: &ScalarField,
    shift: &ParameterShift,
    x_minus: f64,
    (r_lo, r_hi): (f64, f64),
    cfg: &RateScanConfig,
    reference: Option<ForwardLimit>,
) -> Result<RateScanResult> {
    if !(r_lo > 0.0 && r_hi > r_lo && r_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < r_lo < r_hi, got [{r_lo}, {r_hi}]")));
    }
    if cfg.n_scan < 16 {
        return Err(Error::InvalidArgument(format!("n_scan must be at least 16, got {}", cfg.n_scan)));
    }
    if !(cfg.bisect_tol > 0.0) {
        return Err(Error::InvalidArgument("bisect_tol must be positive".into()));
    }
    let n = cfg.n_scan;
    let ratio = (r_hi / r_lo).ln();
    let rates: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { r_hi } else { r_lo * (ratio * i as f64 / (n - 1) as f64).exp() })
        .collect();
    let limits: Vec<ForwardLimit> = rates
        .par_iter()
        .map(|&r| limit_at_rate(field, shift, x_minus, r, cfg))
        .collect::<Result<_>>()?;
    let grid: Vec<RateSample> = rates.iter().zip(&limits).map(|(&r, &limit)| RateSample { r, limit }).collect();
    let match_tol = cfg.delta_rel * field.domain().width();
    let unresolved: Vec<f64> = grid.iter().filter(|s| !decided(&s.limit)).map(|s| s.r).collect();
    let resolved: Vec<&RateSample> = grid.iter().filter(|s| decided(&s.limit)).collect();
    let reference = reference.or_else(|| resolved.first().map(|s| s.limit));

    // runs of equal limits among decided samples
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (k, s) in resolved.iter().enumerate() {
        match runs.last_mut() {
            Some((_, end)) if resolved[*end].limit.same_as(&s.limit, match_tol) => *end = k,
            _ => runs.push((k, k)),
        }
    }
    let brackets: Vec<(usize, usize)> = runs.windows(2).map(|w| (w[0].1, w[1].0)).collect();
    let refined: Vec<((f64, f64), Vec<RateSample>)> = brackets
        .par_iter()
        .map(|&(i, j)| {
            bisect_bracket(
                field,
                shift,
                x_minus,
                cfg,
                (resolved[i].r, resolved[i].limit),
                (resolved[j].r, resolved[j].limit),
                match_tol,
            )
        })
        .collect::<Result<_>>()?;

    let mut windows = Vec::new();
    if let Some(reference) = reference {
        for (k, &(first, last)) in runs.iter().enumerate() {
            let limit = resolved[first].limit;
            if limit.same_as(&reference, match_tol) {
                continue;
            }
            let lo_bracket = if k > 0 { refined[k - 1].0 } else { (resolved[first].r, resolved[first].r) };
            let hi_bracket = if k + 1 < runs.len() { refined[k].0 } else { (resolved[last].r, resolved[last].r) };
            windows.push(RateWindow {
                id: windows.len(),
                r_lo: (lo_bracket.0 * lo_bracket.1).sqrt(),
                r_hi: (hi_bracket.0 * hi_bracket.1).sqrt(),
                lo_bracket,
                hi_bracket,
                open_lo: k == 0,
                open_hi: k + 1 == runs.len(),
                limit,
            });
        }
    }
    let refinements = refined.into_iter().flat_map(|(_, s)| s).collect();
    Ok(RateScanResult { grid, refinements, reference, windows, unresolved, bisect_tol: cfg.bisect_tol })
}
