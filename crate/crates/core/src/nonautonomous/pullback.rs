use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bifurcation::diagram::{polish_root, BifurcationDiagram};
use crate::bifurcation::equilibria::{find_equilibria, Equilibrium, Kind};
use crate::dynamics::field::{ScalarField, StateDomain};
use crate::dynamics::integrate::{integrate_until_escape, Escape, IntegratorConfig, Trajectory};
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};
use crate::nonautonomous::path::StablePath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PullbackConfig {
    pub integrator: IntegratorConfig,
    /// Largest sup-norm change allowed when the backward horizon doubles.
    pub pullback_tol: f64,
    pub max_retries: usize,
    /// Horizons are at least `settle / |df|` at the past equilibrium.
    pub settle: f64,
    /// Forward end time; by default `S / r + settle / |df|`.
    pub t_forward: Option<f64>,
    /// Return the longest run instead of failing when retries run out.
    pub strict: bool,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            pullback_tol: 1e-7,
            max_retries: 6,
            settle: 40.0,
            t_forward: None,
            strict: true,
        }
    }
}

/// Numerical pullback attractor: the solution started at `x_minus` at
/// `t = -horizon`, checked against the run started at `-2 horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackAttractor {
    pub trajectory: Trajectory,
    pub x_minus: f64,
    pub r: f64,
    pub horizon: f64,
    pub t_forward: f64,
    /// Sup deviation from the doubled-horizon run over the common interval.
    pub convergence: f64,
    pub retries: usize,
    /// Set when the solution left the escape bound.
    pub escape: Option<Escape>,
}

impl PullbackAttractor {
    /// Final state, or the escape point.
    pub fn end(&self) -> (f64, f64) {
        self.trajectory.last()
    }

    /// CSV `t,x,lambda,path_x,deviation`; the last two columns are empty
    /// without a path.
    pub fn write_csv<W: Write>(&self, mut w: W, path: Option<&StablePath>) -> Result<()> {
        writeln!(w, "t,x,lambda,path_x,deviation")?;
        let tr = &self.trajectory;
        for i in 0..tr.len() {
            write!(w, "{:.16e},{:.16e},{:.16e},", tr.t[i], tr.x[i], tr.lambda[i])?;
            match path {
                Some(p) => {
                    let px = p.x_at_time(tr.t[i], self.r);
                    writeln!(w, "{:.16e},{:.16e}", px, (tr.x[i] - px).abs())?;
                }
                None => writeln!(w, ",")?,
            }
        }
        Ok(())
    }
}

/// Polish `x` onto a stable equilibrium at `lambda` and return it.
pub(crate) fn stable_start(field: &ScalarField, x: f64, lambda: f64) -> Result<Equilibrium> {
    let w = field.domain().width();
    let x0 = polish_root(field, x, lambda, 1e-3 * w).unwrap_or(x);
    let residual = field.value(x0, lambda);
    let tols = crate::bifurcation::equilibria::RootTolerances::default();
    if !tols.accepts(residual, x0) {
        return Err(Error::NotAnEquilibrium { x, lambda, residual });
    }
    let df = field.dx_value(x0, lambda);
    if Kind::from_df(df, tols.bif_tol) != Kind::Stable {
        return Err(Error::NotStable { x: x0, lambda, df });
    }
    Ok(Equilibrium { x: x0, lambda, df, kind: Kind::Stable })
}

/// Sup of `|a(t) - b(t)|` over the samples of `a` inside `b`'s time span,
/// up to the first time `a` leaves the state domain.
fn overlap_deviation(a: &Trajectory, b: &Trajectory, domain: StateDomain) -> f64 {
    let (b0, b1) = (b.t[0], b.t[b.len() - 1]);
    a.t.iter()
        .zip(&a.x)
        .take_while(|(_, x)| domain.contains(**x))
        .filter(|(t, _)| **t >= b0 && **t <= b1)
        .map(|(t, x)| (x - b.x_at(*t)).abs())
        .fold(0.0, f64::max)
}

const ESCAPE_STEP: f64 = 1e-3;

/// Pullback attractor of the stable equilibrium `x_minus` of the past system.
pub fn compute_pullback(
    field: &ScalarField,
    shift: &ParameterShift,
    r: f64,
    x_minus: f64,
    cfg: &PullbackConfig,
) -> Result<PullbackAttractor> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {r}")));
    }
    if !(cfg.pullback_tol > 0.0 && cfg.settle > 0.0) {
        return Err(Error::InvalidArgument("pullback tolerances must be positive".into()));
    }
    let start = stable_start(field, x_minus, shift.lambda_minus())?;
    let relax = cfg.settle / start.df.abs();
    let t_fwd = cfg.t_forward.unwrap_or(shift.s_support() / r + relax);
    let mut horizon = (shift.s_support() / r).max(relax);
    let run = |h: f64| integrate_until_escape(field, shift, r, start.x, -h, t_fwd, &cfg.integrator);
    if !(t_fwd > -horizon) {
        return Err(Error::InvalidArgument(format!("forward end {t_fwd} precedes the horizon")));
    }
    let mut near = run(horizon)?;
    for retries in 0..=cfg.max_retries {
        let far = run(2.0 * horizon)?;
        let convergence = overlap_deviation(&near.0, &far.0, field.domain());
        // blow-up amplifies integration error without bound, so escaping
        // runs are compared by their escape times, known to within the
        // final step (at most ESCAPE_STEP)
        let done = match (near.1, far.1) {
            (None, None) => convergence < cfg.pullback_tol,
            (Some(a), Some(b)) => (a.t - b.t).abs() <= 2.0 * ESCAPE_STEP * a.t.abs().max(1.0),
            _ => false,
        };
        if done || retries == cfg.max_retries {
            if !done && cfg.strict {
                return Err(Error::PullbackUnresolved { retries, deviation: convergence });
            }
            // the longer run is the better approximation once they disagree
            let (traj, escape, h) = if done { (near.0, near.1, horizon) } else { (far.0, far.1, 2.0 * horizon) };
            return Ok(PullbackAttractor {
                trajectory: traj,
                x_minus: start.x,
                r,
                horizon: h,
                t_forward: t_fwd,
                convergence,
                retries,
                escape,
            });
        }
        horizon *= 2.0;
        near = far;
    }
    unreachable!("the final retry returns")
}

/// Where a pullback attractor ends up at the future parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ForwardLimit {
    /// Settled at an equilibrium of the future system, of any kind.
    Converged(Equilibrium),
    Diverged(Escape),
    Undecided { t: f64, x: f64 },
}

impl ForwardLimit {
    pub fn equilibrium(&self) -> Option<Equilibrium> {
        match self {
            ForwardLimit::Converged(e) => Some(*e),
            _ => None,
        }
    }

    /// Same outcome: equal equilibria to within `tol`, or both diverged
    /// in the same direction.
    pub fn same_as(&self, other: &ForwardLimit, tol: f64) -> bool {
        match (self, other) {
            (ForwardLimit::Converged(a), ForwardLimit::Converged(b)) => (a.x - b.x).abs() <= tol,
            (ForwardLimit::Diverged(a), ForwardLimit::Diverged(b)) => (a.x > 0.0) == (b.x > 0.0),
            _ => false,
        }
    }
}

/// Classify the end of `pb` against the equilibria at `lambda_plus`: it must
/// stay within `delta` of one for at least `dwell` (default `20 / |df|`) with
/// `|f(x, lambda_plus)|` not growing.
pub fn forward_limit(pb: &PullbackAttractor, field: &ScalarField, lambda_plus: f64, delta: f64, dwell: Option<f64>) -> ForwardLimit {
    if let Some(e) = pb.escape {
        return ForwardLimit::Diverged(e);
    }
    let tr = &pb.trajectory;
    let (t_end, x_end) = tr.last();
    let undecided = ForwardLimit::Undecided { t: t_end, x: x_end };
    let eqs = find_equilibria(field, lambda_plus, 1000);
    let Some(e) = eqs.iter().min_by(|a, b| (a.x - x_end).abs().total_cmp(&(b.x - x_end).abs())) else {
        return undecided;
    };
    let need = dwell.unwrap_or_else(|| 20.0 / e.df.abs());
    // first sample of the final run inside the ball
    let mut k = tr.len();
    while k > 0 && (tr.x[k - 1] - e.x).abs() < delta {
        k -= 1;
    }
    if k == tr.len() || !(t_end - tr.t[k] >= need) {
        return undecided;
    }
    let f_entry = field.value(tr.x[k], lambda_plus).abs();
    let f_end = field.value(x_end, lambda_plus).abs();
    if f_end > f_entry + 1e-12 {
        return undecided;
    }
    ForwardLimit::Converged(*e)
}

/// [`forward_limit`] against a diagram, with the default ball radius
/// `1e-4` of the state-domain width.
pub fn forward_limit_on(pb: &PullbackAttractor, diagram: &BifurcationDiagram, lambda_plus: f64) -> ForwardLimit {
    let delta = 1e-4 * diagram.field().domain().width();
    forward_limit(pb, diagram.field(), lambda_plus, delta, None)
}

/// Outcome of an epsilon-close tracking test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub tracks: bool,
    pub sup_deviation: f64,
    /// Time of the largest deviation.
    pub t_worst: f64,
    pub eps: f64,
}

/// `sup_t |x(t) - X(r t)|` over the samples of the pullback attractor.
pub fn eps_close_tracks(pb: &PullbackAttractor, path: &StablePath, eps: f64) -> TrackingReport {
    let tr = &pb.trajectory;
    let (mut sup, mut t_worst) = (0.0_f64, tr.t[0]);
    for (t, x) in tr.t.iter().zip(&tr.x) {
        let d = (x - path.x_at_time(*t, pb.r)).abs();
        if d > sup {
            sup = d;
            t_worst = *t;
        }
    }
    if pb.escape.is_some() {
        sup = f64::INFINITY;
    }
    TrackingReport { tracks: sup < eps, sup_deviation: sup, t_worst, eps }
}
