use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closure `(x, lambda) -> value`.
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Closed state interval `[lo, hi]` on which equilibrium searches run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDomain {
    pub lo: f64,
    pub hi: f64,
}

impl StateDomain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "state domain [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Default escape bound for integration, `10 (|lo| + |hi|)`.
    pub fn escape_bound(&self) -> f64 {
        10.0 * (self.lo.abs() + self.hi.abs()).max(1.0)
    }
}

/// Finite-difference step used when no analytic derivative is available.
pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// The autonomous right-hand side `f(x, lambda)` of the frozen system.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    rhs: FieldFn,
    rhs_dx: Option<FieldFn>,
    domain: StateDomain,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("analytic_dx", &self.rhs_dx.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(name: impl Into<String>, domain: StateDomain, rhs: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            rhs: Arc::new(rhs),
            rhs_dx: None,
            domain,
        }
    }

    /// Attach an analytic `df/dx`.
    pub fn with_dx<F>(mut self, dx: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.rhs_dx = Some(Arc::new(dx));
        self
    }

    pub fn with_domain(mut self, domain: StateDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> StateDomain {
        self.domain
    }

    pub fn has_analytic_dx(&self) -> bool {
        self.rhs_dx.is_some()
    }

    /// Unchecked evaluation for inner loops.
    #[inline]
    pub fn value(&self, x: f64, lambda: f64) -> f64 {
        (self.rhs)(x, lambda)
    }

    /// Unchecked derivative: analytic if supplied, else a central difference.
    #[inline]
    pub fn dx_value(&self, x: f64, lambda: f64) -> f64 {
        match &self.rhs_dx {
            Some(dx) => dx(x, lambda),
            None => {
                let h = fd_step(x);
                ((self.rhs)(x + h, lambda) - (self.rhs)(x - h, lambda)) / (2.0 * h)
            }
        }
    }

    /// `f(x, lambda)`, rejecting non-finite results.
    pub fn eval(&self, x: f64, lambda: f64) -> Result<f64> {
        let v = self.value(x, lambda);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DomainViolation { x, lambda })
        }
    }

    /// `df/dx(x, lambda)`, rejecting non-finite results.
    pub fn eval_dx(&self, x: f64, lambda: f64) -> Result<f64> {
        let v = self.dx_value(x, lambda);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DomainViolation { x, lambda })
        }
    }

    /// The field `rho(x) f(x, lambda)`, differentiated by finite differences.
    pub fn scaled<R>(&self, rho: R) -> ScalarField
    where
        R: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let rhs = self.rhs.clone();
        ScalarField {
            name: format!("{}*rho", self.name),
            rhs: Arc::new(move |x, l| rho(x) * rhs(x, l)),
            rhs_dx: None,
            domain: self.domain,
        }
    }

    /// Compare the analytic derivative with a central difference on an
    /// `n x n` grid over `domain x [lambda_lo, lambda_hi]`. Returns the worst
    /// relative mismatch; fields without an analytic derivative return 0.
    pub fn derivative_mismatch(&self, lambda_lo: f64, lambda_hi: f64, n: usize) -> f64 {
        let Some(dx) = &self.rhs_dx else {
            return 0.0;
        };
        let n = n.max(2);
        let mut worst = 0.0_f64;
        for i in 0..n {
            let x = self.domain.lo + self.domain.width() * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let l = lambda_lo + (lambda_hi - lambda_lo) * j as f64 / (n - 1) as f64;
                worst = worst.max(relative_mismatch(dx(x, l), self, x, l));
            }
        }
        worst
    }
}

/// Relative disagreement between `analytic` and a central difference of `f`
/// at `(x, lambda)`, floored so that near-zero derivatives compare absolutely.
pub(crate) fn relative_mismatch(analytic: f64, field: &ScalarField, x: f64, lambda: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    let fd = (field.value(x + h, lambda) - field.value(x - h, lambda)) / (2.0 * h);
    let scale = analytic.abs().max(fd.abs()).max(1e-2);
    (analytic - fd).abs() / scale
}
