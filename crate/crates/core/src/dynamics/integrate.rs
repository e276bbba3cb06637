//! Adaptive Dormand–Prince 5(4) integration of `dx/dt = f(x, Lambda(r t))`.
//!
//! The stepper is exposed directly so that callers needing per-step control
//! (event location, restarts) can drive it; [`integrate`] wraps it with the
//! usual sampling policies.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::field::ScalarField;
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Embedded 5(4) pair with FSAL and a fourth-order continuous extension.
    #[default]
    DormandPrince45,
}

/// Which points of the solution end up in a [`Trajectory`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Accepted step endpoints only.
    Steps,
    /// Step endpoints plus interior dense-output points, enough that linear
    /// interpolation between samples stays within 10x the tolerance.
    #[default]
    Dense,
    /// Exactly these times (sorted, inside `[t0, t1]`), from dense output.
    At(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// `|x|` above this is a divergence; `None` uses the field's domain default.
    pub escape_bound: Option<f64>,
    pub sampling: Sampling,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_step: 1.0,
            max_steps: 5_000_000,
            escape_bound: None,
            sampling: Sampling::Dense,
            method: Method::DormandPrince45,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.max_step > 0.0
            && self.abs_tol.is_finite()
            && self.rel_tol.is_finite()
            && self.max_step.is_finite()
            && self.max_steps > 0
            && self.escape_bound.is_none_or(|b| b > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad integrator config {self:?}")))
        }
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.rel_tol = tol;
        self
    }

    /// Error scale at state `x`.
    pub fn scale(&self, x: f64) -> f64 {
        self.abs_tol + self.rel_tol * x.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest scaled local error estimate among accepted steps (<= 1).
    pub max_error_estimate: f64,
}

/// Sampled solution of the nonautonomous IVP. `lambda[i] = Lambda(r t[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub r: f64,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn first(&self) -> (f64, f64) {
        (self.t[0], self.x[0])
    }

    pub fn last(&self) -> (f64, f64) {
        let n = self.t.len() - 1;
        (self.t[n], self.x[n])
    }

    /// Linear interpolation, clamped to the sampled interval.
    pub fn x_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.x[0];
        }
        if t >= self.t[n - 1] {
            return self.x[n - 1];
        }
        let i = self.t.partition_point(|&ti| ti <= t);
        let (ta, tb) = (self.t[i - 1], self.t[i]);
        let w = (t - ta) / (tb - ta);
        self.x[i - 1] + w * (self.x[i] - self.x[i - 1])
    }

    /// Worst `|dx/dt - f(x_mid, Lambda(r t_mid))|` over consecutive samples,
    /// relative to `1 + |f|`.
    pub fn max_residual(&self, field: &ScalarField, shift: &ParameterShift) -> f64 {
        let mut worst = 0.0_f64;
        for i in 1..self.t.len() {
            let dt = self.t[i] - self.t[i - 1];
            let slope = (self.x[i] - self.x[i - 1]) / dt;
            let tm = 0.5 * (self.t[i] + self.t[i - 1]);
            let xm = 0.5 * (self.x[i] + self.x[i - 1]);
            let f = field.value(xm, shift.value(self.r * tm));
            worst = worst.max((slope - f).abs() / (1.0 + f.abs()));
        }
        worst
    }

    /// CSV with header `t,x,lambda`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,lambda")?;
        for i in 0..self.t.len() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", self.t[i], self.x[i], self.lambda[i])?;
        }
        Ok(())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
    /// Right-hand side at the two ends.
    pub f0: f64,
    pub f1: f64,
    coeffs: [f64; 5],
}

impl DenseStep {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Fourth-order interpolant, valid for `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let th = (t - self.t0) / self.h();
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = self.coeffs;
        r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
    }
}

/// Step-by-step driver. Holds the FSAL stage and the controller state.
pub struct Stepper<'a> {
    field: &'a ScalarField,
    shift: &'a ParameterShift,
    r: f64,
    cfg: IntegratorConfig,
    bound: f64,
    t: f64,
    x: f64,
    f: f64,
    h: f64,
    err_old: f64,
    last_rejected: bool,
    stats: IntegratorStats,
}

impl<'a> Stepper<'a> {
    pub fn new(
        field: &'a ScalarField,
        shift: &'a ParameterShift,
        r: f64,
        t0: f64,
        x0: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("rate must be positive, got {r}")));
        }
        if !(x0.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidArgument("initial condition must be finite".into()));
        }
        let bound = cfg.escape_bound.unwrap_or_else(|| field.domain().escape_bound());
        let mut s = Self {
            field,
            shift,
            r,
            cfg: cfg.clone(),
            bound,
            t: t0,
            x: x0,
            f: 0.0,
            h: 0.0,
            err_old: 1e-4,
            last_rejected: false,
            stats: IntegratorStats::default(),
        };
        s.f = s.rhs(t0, x0)?;
        s.h = s.initial_step();
        Ok(s)
    }

    fn rhs(&mut self, t: f64, x: f64) -> Result<f64> {
        self.stats.rhs_evals += 1;
        let lambda = self.shift.value(self.r * t);
        let v = self.field.value(x, lambda);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DomainViolation { x, lambda })
        }
    }

    fn initial_step(&mut self) -> f64 {
        let sc = self.cfg.scale(self.x);
        let d0 = self.x.abs() / sc;
        let d1 = self.f.abs() / sc;
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.cfg.max_step);
        let x1 = self.x + h0 * self.f;
        let d2 = match self.rhs(self.t + h0, x1) {
            Ok(f1) => (f1 - self.f).abs() / sc / h0,
            Err(_) => return h0,
        };
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.cfg.max_step)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Restart from a new state at the current time, keeping the step size.
    pub fn reset_state(&mut self, x: f64) -> Result<()> {
        self.x = x;
        self.f = self.rhs(self.t, x)?;
        self.err_old = 1e-4;
        self.last_rejected = false;
        Ok(())
    }

    /// Restart from `(t, x)`, keeping the step size.
    pub fn restart(&mut self, t: f64, x: f64) -> Result<()> {
        if !(t.is_finite() && x.is_finite()) {
            return Err(Error::InvalidArgument("restart state must be finite".into()));
        }
        self.t = t;
        self.reset_state(x)
    }

    /// Take one accepted step, never passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<DenseStep> {
        if t_end <= self.t {
            return Err(Error::InvalidArgument(format!(
                "step target {t_end} not after current time {}",
                self.t
            )));
        }
        loop {
            if self.stats.accepted + self.stats.rejected >= self.cfg.max_steps {
                return Err(Error::StepLimit { t: self.t, max_steps: self.cfg.max_steps });
            }
            let mut h = self.h.min(self.cfg.max_step);
            let remaining = t_end - self.t;
            // land exactly on t_end rather than leaving a sliver
            if h >= remaining || remaining - h < 1e-10 * h {
                h = remaining;
            }
            if h <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                return Err(Error::Stiffness { t: self.t, h });
            }
            let (t, x, k1) = (self.t, self.x, self.f);
            let k2 = self.rhs(t + C2 * h, x + h * A21 * k1)?;
            let k3 = self.rhs(t + C3 * h, x + h * (A31 * k1 + A32 * k2))?;
            let k4 = self.rhs(t + C4 * h, x + h * (A41 * k1 + A42 * k2 + A43 * k3))?;
            let k5 = self.rhs(t + C5 * h, x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))?;
            let k6 = self.rhs(
                t + h,
                x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
            )?;
            let x_new = x + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            if !x_new.is_finite() || x_new.abs() > self.bound {
                // shrink first; only a step that is already tiny is a true escape
                if h > 1e-3 && x.abs() <= self.bound {
                    self.h = 0.25 * h;
                    self.stats.rejected += 1;
                    continue;
                }
                return Err(Error::Divergence { t: t + h, x: x_new, bound: self.bound });
            }
            let t_new = if h == remaining { t_end } else { t + h };
            let k7 = self.rhs(t_new, x_new)?;
            let err_abs = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * x.abs().max(x_new.abs());
            let err = (err_abs / sc).abs();
            if err <= 1.0 {
                let mut fac = 0.9 * err.max(1e-10).powf(-0.17) * self.err_old.powf(0.04);
                fac = fac.clamp(0.2, 10.0);
                if self.last_rejected {
                    fac = fac.min(1.0);
                }
                self.err_old = err.max(1e-4);
                self.last_rejected = false;
                self.h = h * fac;
                self.stats.accepted += 1;
                self.stats.max_error_estimate = self.stats.max_error_estimate.max(err);
                let ydiff = x_new - x;
                let bspl = h * k1 - ydiff;
                let coeffs = [
                    x,
                    ydiff,
                    bspl,
                    ydiff - h * k7 - bspl,
                    h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                ];
                self.t = t_new;
                self.x = x_new;
                self.f = k7;
                return Ok(DenseStep { t0: t, t1: t_new, x0: x, x1: x_new, f0: k1, f1: k7, coeffs });
            }
            self.stats.rejected += 1;
            self.last_rejected = true;
            self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
}

const MAX_DENSE_PER_STEP: usize = 10_000;

/// Interior dense samples per step needed for linear interpolation to stay
/// within `10 * scale`.
fn dense_count(step: &DenseStep, scale: f64) -> usize {
    let k = (step.h() * (step.f1 - step.f0).abs() / (80.0 * scale)).sqrt().ceil();
    if k.is_finite() {
        (k as usize).min(MAX_DENSE_PER_STEP)
    } else {
        MAX_DENSE_PER_STEP
    }
}

/// Integrate `dx/dt = f(x, Lambda(r t))` from `(t0, x0)` to `t1`.
pub fn integrate(
    field: &ScalarField,
    shift: &ParameterShift,
    r: f64,
    x0: f64,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let (traj, outcome) = run(field, shift, r, x0, t0, t1, cfg)?;
    outcome.map(|()| traj)
}

/// Where a solution left the escape bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub t: f64,
    pub x: f64,
}

/// As [`integrate`], but an escape ends the run early and is returned with the
/// samples taken before it.
pub fn integrate_until_escape(
    field: &ScalarField,
    shift: &ParameterShift,
    r: f64,
    x0: f64,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, Option<Escape>)> {
    let (traj, outcome) = run(field, shift, r, x0, t0, t1, cfg)?;
    match outcome {
        Ok(()) => Ok((traj, None)),
        Err(Error::Divergence { t, x, .. }) => Ok((traj, Some(Escape { t, x }))),
        Err(e) => Err(e),
    }
}

/// Argument errors go in the outer result; failures during stepping go in the
/// inner one, alongside the samples accepted so far.
fn run(
    field: &ScalarField,
    shift: &ParameterShift,
    r: f64,
    x0: f64,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, Result<()>)> {
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    if let Sampling::At(times) = &cfg.sampling {
        if times.is_empty() {
            return Err(Error::InvalidArgument("empty sample time list".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
        }
        if times[0] < t0 || *times.last().unwrap() > t1 {
            return Err(Error::InvalidArgument("sample times must lie inside [t0, t1]".into()));
        }
    }
    let mut stepper = Stepper::new(field, shift, r, t0, x0, cfg)?;
    let mut t = Vec::new();
    let mut x = Vec::new();
    let outcome = fill(&mut stepper, cfg, t0, x0, t1, &mut t, &mut x);
    let lambda = t.iter().map(|&ti| shift.value(r * ti)).collect();
    Ok((Trajectory { t, x, lambda, r, stats: stepper.stats() }, outcome))
}

fn fill(
    stepper: &mut Stepper<'_>,
    cfg: &IntegratorConfig,
    t0: f64,
    x0: f64,
    t1: f64,
    t: &mut Vec<f64>,
    x: &mut Vec<f64>,
) -> Result<()> {
    match &cfg.sampling {
        Sampling::Steps | Sampling::Dense => {
            let dense = cfg.sampling == Sampling::Dense;
            t.push(t0);
            x.push(x0);
            while stepper.t() < t1 {
                let st = stepper.step(t1)?;
                if dense {
                    let k = dense_count(&st, cfg.scale(st.x0.abs().max(st.x1.abs())));
                    for j in 1..=k {
                        let tj = st.t0 + st.h() * j as f64 / (k + 1) as f64;
                        if tj > *t.last().unwrap() {
                            t.push(tj);
                            x.push(st.eval(tj));
                        }
                    }
                }
                t.push(st.t1);
                x.push(st.x1);
            }
        }
        Sampling::At(times) => {
            let mut idx = 0;
            while idx < times.len() && times[idx] == t0 {
                t.push(t0);
                x.push(x0);
                idx += 1;
            }
            let t_stop = *times.last().unwrap();
            while idx < times.len() {
                let st = stepper.step(t_stop)?;
                while idx < times.len() && times[idx] <= st.t1 {
                    let ti = times[idx];
                    t.push(ti);
                    x.push(if ti == st.t1 { st.x1 } else { st.eval(ti) });
                    idx += 1;
                }
            }
        }
    }
    Ok(())
}
