use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::field::ScalarField;
use crate::dynamics::integrate::{IntegratorConfig, IntegratorStats, Stepper, Trajectory};
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};
use crate::nonautonomous::path::StablePath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PseudoOrbitConfig {
    pub integrator: IntegratorConfig,
    /// Interior samples stored per accepted step.
    pub samples_per_step: usize,
    /// Spacing of the scheduled restarts near a crossing, in `[1, 2]`.
    pub restart_period: f64,
    /// Scheduled restarts cover `|t - s_j / r| <= crossing_halfwidth`.
    pub crossing_halfwidth: f64,
    /// Jumps are more than this far apart in time.
    pub min_gap: f64,
}

impl Default for PseudoOrbitConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig { max_step: 0.25, ..IntegratorConfig::default() },
            samples_per_step: 4,
            restart_period: 1.5,
            crossing_halfwidth: 20.0,
            min_gap: 1.0,
        }
    }
}

/// A discontinuity of the pseudo-orbit at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub t: f64,
    pub x_left: f64,
    pub x_restart: f64,
    pub size: f64,
}

/// Solution pieces joined by jumps; piece `i + 1` starts where jump `i` lands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit {
    pub pieces: Vec<Trajectory>,
    pub jumps: Vec<Jump>,
    pub eps: f64,
    pub min_gap: f64,
    pub r: f64,
}

impl PseudoOrbit {
    /// CSV `piece,t,x,lambda`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "piece,t,x,lambda")?;
        for (k, p) in self.pieces.iter().enumerate() {
            for i in 0..p.len() {
                writeln!(w, "{},{:.16e},{:.16e},{:.16e}", k, p.t[i], p.x[i], p.lambda[i])?;
            }
        }
        Ok(())
    }

    /// JSON list of jumps `{t, x_left, x_restart, size}`.
    pub fn jumps_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.jumps).expect("jumps serialize")
    }

    /// Value at `t`; at a jump time the restart value.
    pub fn x_at(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.t <= t);
        self.pieces[k.min(self.pieces.len() - 1)].x_at(t)
    }
}

struct Piece {
    t: Vec<f64>,
    x: Vec<f64>,
}

impl Piece {
    fn new(t: f64, x: f64) -> Self {
        Self { t: vec![t], x: vec![x] }
    }

    fn push(&mut self, t: f64, x: f64) {
        if t > *self.t.last().unwrap() {
            self.t.push(t);
            self.x.push(x);
        }
    }

    fn finish(self, shift: &ParameterShift, r: f64) -> Trajectory {
        let lambda = self.t.iter().map(|&t| shift.value(r * t)).collect();
        Trajectory { t: self.t, x: self.x, lambda, r, stats: IntegratorStats::default() }
    }
}

/// Scheduled restart times near the path's crossings, sorted.
fn schedule(path: &StablePath, r: f64, cfg: &PseudoOrbitConfig, t0: f64, t1: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for c in &path.crossings {
        let centre = c.s / r;
        let (a, b) = ((centre - cfg.crossing_halfwidth).max(t0), (centre + cfg.crossing_halfwidth).min(t1));
        let mut t = a;
        while t <= b {
            if t > t0 && t < t1 {
                out.push(t);
            }
            t += cfg.restart_period;
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Build an `eps`-pseudo-orbit shadowing `path` at rate `r`: genuine solution
/// pieces restarted on the path when they drift `eps / 2` away, and on a fixed
/// schedule near each crossing of a bifurcation point.
pub fn construct_pseudo_orbit(
    field: &ScalarField,
    shift: &ParameterShift,
    r: f64,
    path: &StablePath,
    eps: f64,
    cfg: &PseudoOrbitConfig,
) -> Result<PseudoOrbit> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if !(cfg.restart_period > cfg.min_gap && cfg.min_gap > 0.0) {
        return Err(Error::InvalidArgument("restart period must exceed the minimum gap".into()));
    }
    let s_sup = shift.s_support();
    let (t0, t1) = (-s_sup / r, s_sup / r);
    let x0 = path.x_at_time(t0, r);
    let mut stepper = Stepper::new(field, shift, r, t0, x0, &cfg.integrator)?;
    let sched = schedule(path, r, cfg, t0, t1);
    let mut next_sched = 0;
    let mut pieces = Vec::new();
    let mut jumps: Vec<Jump> = Vec::new();
    let mut piece = Piece::new(t0, x0);
    let mut t_last = f64::NEG_INFINITY;
    let dev = |t: f64, x: f64| (x - path.x_at_time(t, r)).abs();
    let n_in = cfg.samples_per_step;

    while stepper.t() < t1 {
        while next_sched < sched.len() && sched[next_sched] <= stepper.t() {
            next_sched += 1;
        }
        let target = sched.get(next_sched).copied().unwrap_or(t1).min(t1);
        let st = stepper.step(target)?;
        let mut restart_at = None;
        for j in 1..=n_in + 1 {
            let tj = st.t0 + st.h() * j as f64 / (n_in + 1) as f64;
            let xj = if j == n_in + 1 { st.x1 } else { st.eval(tj) };
            let d = dev(tj, xj);
            let may_jump = tj > t_last + cfg.min_gap;
            if d >= eps {
                return Err(Error::ConstructionFailure {
                    s: r * tj,
                    reason: format!("drift {d:e} reached eps = {eps} before a restart was allowed"),
                });
            }
            piece.push(tj, xj);
            if d >= 0.5 * eps && may_jump {
                restart_at = Some((tj, xj));
                break;
            }
        }
        let scheduled = st.t1 == target && target < t1 && next_sched < sched.len();
        if restart_at.is_none() && scheduled && st.t1 > t_last + cfg.min_gap {
            restart_at = Some((st.t1, st.x1));
        }
        if let Some((tj, xj)) = restart_at {
            let xr = path.x_at_time(tj, r);
            if xr != xj {
                jumps.push(Jump { t: tj, x_left: xj, x_restart: xr, size: (xr - xj).abs() });
                pieces.push(std::mem::replace(&mut piece, Piece::new(tj, xr)).finish(shift, r));
                t_last = tj;
            }
            stepper.restart(tj, xr)?;
        }
    }
    pieces.push(piece.finish(shift, r));
    Ok(PseudoOrbit { pieces, jumps, eps, min_gap: cfg.min_gap, r })
}

/// Itemized check of the pseudo-orbit conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbitReport {
    pub n_jumps: usize,
    pub max_jump: f64,
    pub jumps_ok: bool,
    /// Smallest time between consecutive jumps (infinite with fewer than two).
    pub min_gap: f64,
    pub gaps_ok: bool,
    /// Pieces and jump records agree at every jump.
    pub joins_ok: bool,
    pub max_residual: f64,
    pub residual_ok: bool,
    pub sup_deviation: f64,
    pub tracking_ok: bool,
    pub passed: bool,
}

/// Relative ODE residual accepted on the stored pieces.
pub const RESIDUAL_TOL: f64 = 1e-6;

pub fn verify_pseudo_orbit(
    po: &PseudoOrbit,
    field: &ScalarField,
    shift: &ParameterShift,
    path: &StablePath,
    eps: f64,
) -> PseudoOrbitReport {
    let max_jump = po.jumps.iter().map(|j| j.size).fold(0.0, f64::max);
    let min_gap = po.jumps.windows(2).map(|w| w[1].t - w[0].t).fold(f64::INFINITY, f64::min);
    let joins_ok = po.pieces.len() == po.jumps.len() + 1
        && po.jumps.iter().enumerate().all(|(i, j)| {
            let (tl, xl) = po.pieces[i].last();
            let (tr, xr) = po.pieces[i + 1].first();
            tl == j.t && tr == j.t && xl == j.x_left && xr == j.x_restart && j.size == (j.x_restart - j.x_left).abs()
        });
    let max_residual = po.pieces.iter().map(|p| p.max_residual(field, shift)).fold(0.0, f64::max);
    let sup_deviation = po
        .pieces
        .iter()
        .flat_map(|p| p.t.iter().zip(&p.x))
        .map(|(t, x)| (x - path.x_at_time(*t, po.r)).abs())
        .fold(0.0, f64::max);
    let jumps_ok = max_jump < eps;
    let gaps_ok = min_gap > po.min_gap;
    let residual_ok = max_residual < RESIDUAL_TOL;
    let tracking_ok = sup_deviation < eps;
    PseudoOrbitReport {
        n_jumps: po.jumps.len(),
        max_jump,
        jumps_ok,
        min_gap,
        gaps_ok,
        joins_ok,
        max_residual,
        residual_ok,
        sup_deviation,
        tracking_ok,
        passed: jumps_ok && gaps_ok && joins_ok && residual_ok && tracking_ok,
    }
}
