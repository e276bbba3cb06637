use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closure `s -> value`.
pub type ShiftFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance used to pick the default support bound:
/// `|Lambda(+-S) - lambda_pm| < 1e-6 (lambda_plus - lambda_minus)`.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftFamily {
    /// `mid + (w/2) tanh(s)`.
    Tanh,
    /// Solution of `dL/ds = -(L - lambda_minus)(L - lambda_plus)` centred at `s = 0`.
    LogisticOde,
    User,
}

/// A smooth parameter shift `Lambda(s)` between asymptotic values
/// `lambda_minus < lambda_plus`. The rate is kept separate: the
/// nonautonomous system sees `Lambda(r t)`.
#[derive(Clone)]
pub struct ParameterShift {
    family: ShiftFamily,
    shape: ShiftFn,
    shape_ds: ShiftFn,
    lambda_minus: f64,
    lambda_plus: f64,
    s_support: f64,
}

impl fmt::Debug for ParameterShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterShift")
            .field("family", &self.family)
            .field("lambda_minus", &self.lambda_minus)
            .field("lambda_plus", &self.lambda_plus)
            .field("s_support", &self.s_support)
            .finish()
    }
}

fn check_limits(lambda_minus: f64, lambda_plus: f64) -> Result<()> {
    if !(lambda_minus.is_finite() && lambda_plus.is_finite() && lambda_minus < lambda_plus) {
        return Err(Error::InvalidArgument(format!(
            "parameter shift needs finite lambda_minus < lambda_plus, got ({lambda_minus}, {lambda_plus})"
        )));
    }
    Ok(())
}

impl ParameterShift {
    /// `Lambda(s) = mid + (w/2) tanh(s)`.
    pub fn tanh(lambda_minus: f64, lambda_plus: f64) -> Result<Self> {
        Self::scaled_tanh(ShiftFamily::Tanh, lambda_minus, lambda_plus, 1.0)
    }

    /// Logistic shift: `Lambda(s) = mid + (w/2) tanh(w s / 2)`, which solves
    /// `dLambda/ds = -(Lambda - lambda_minus)(Lambda - lambda_plus)` with `Lambda(0) = mid`.
    pub fn logistic(lambda_minus: f64, lambda_plus: f64) -> Result<Self> {
        let k = (lambda_plus - lambda_minus) / 2.0;
        Self::scaled_tanh(ShiftFamily::LogisticOde, lambda_minus, lambda_plus, k)
    }

    fn scaled_tanh(family: ShiftFamily, lambda_minus: f64, lambda_plus: f64, k: f64) -> Result<Self> {
        check_limits(lambda_minus, lambda_plus)?;
        let mid = 0.5 * (lambda_minus + lambda_plus);
        let half = 0.5 * (lambda_plus - lambda_minus);
        // (w/2)(1 - tanh(kS)) < tol * w  <=>  tanh(kS) > 1 - 2 tol
        let s_support = (1.0 - 2.0 * DEFAULT_SUPPORT_TOL).atanh() / k;
        Ok(Self {
            family,
            shape: Arc::new(move |s| mid + half * (k * s).tanh()),
            shape_ds: Arc::new(move |s| {
                let c = (k * s).cosh();
                half * k / (c * c)
            }),
            lambda_minus,
            lambda_plus,
            s_support,
        })
    }

    /// A user-supplied shape with analytic derivative. The support bound is
    /// searched for so that both the value and slope are within
    /// `1e-6 (lambda_plus - lambda_minus)` of their limits.
    pub fn user<F, D>(lambda_minus: f64, lambda_plus: f64, shape: F, shape_ds: D) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_limits(lambda_minus, lambda_plus)?;
        let mut shift = Self {
            family: ShiftFamily::User,
            shape: Arc::new(shape),
            shape_ds: Arc::new(shape_ds),
            lambda_minus,
            lambda_plus,
            s_support: 1.0,
        };
        shift.s_support = shift.search_support(DEFAULT_SUPPORT_TOL * (lambda_plus - lambda_minus))?;
        Ok(shift)
    }

    /// A user-supplied shape differentiated by central differences.
    pub fn user_fd<F>(lambda_minus: f64, lambda_plus: f64, shape: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let shape: ShiftFn = Arc::new(shape);
        let inner = shape.clone();
        Self::user(
            lambda_minus,
            lambda_plus,
            move |s| shape(s),
            move |s| {
                let h = 1e-6 * s.abs().max(1.0);
                (inner(s + h) - inner(s - h)) / (2.0 * h)
            },
        )
    }

    /// Override the support bound `S`.
    pub fn with_support(mut self, s_support: f64) -> Result<Self> {
        if !(s_support.is_finite() && s_support > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "support bound must be positive, got {s_support}"
            )));
        }
        self.s_support = s_support;
        Ok(self)
    }

    fn search_support(&self, tol: f64) -> Result<f64> {
        let mut s = 1.0;
        while s < 1e7 {
            if self.tails_within(s, tol) {
                return Ok(s);
            }
            s *= 1.25;
        }
        Err(Error::InvalidArgument(
            "shift does not approach its declared limits".into(),
        ))
    }

    fn tails_within(&self, s: f64, tol: f64) -> bool {
        (self.value(-s) - self.lambda_minus).abs() < tol
            && (self.value(s) - self.lambda_plus).abs() < tol
            && self.slope(-s).abs() < tol
            && self.slope(s).abs() < tol
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        (self.shape)(s)
    }

    #[inline]
    pub fn slope(&self, s: f64) -> f64 {
        (self.shape_ds)(s)
    }

    pub fn family(&self) -> ShiftFamily {
        self.family
    }

    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lambda_minus, self.lambda_plus)
    }

    /// The support bound `S` standing in for `s = +-infinity`.
    pub fn s_support(&self) -> f64 {
        self.s_support
    }

    /// The shift translated in `s`: `s -> Lambda(s + offset)`.
    pub fn translated(&self, offset: f64) -> ParameterShift {
        let shape = self.shape.clone();
        let ds = self.shape_ds.clone();
        ParameterShift {
            family: ShiftFamily::User,
            shape: Arc::new(move |s| shape(s + offset)),
            shape_ds: Arc::new(move |s| ds(s + offset)),
            lambda_minus: self.lambda_minus,
            lambda_plus: self.lambda_plus,
            s_support: self.s_support + offset.abs(),
        }
    }

    /// `s -> Lambda(sigma(s))` for a monotone reparametrization with derivative `sigma_ds`.
    pub fn reparametrized<F, D>(&self, sigma: F, sigma_ds: D, s_support: f64) -> ParameterShift
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let sigma: ShiftFn = Arc::new(sigma);
        let sigma2 = sigma.clone();
        let shape = self.shape.clone();
        let ds = self.shape_ds.clone();
        ParameterShift {
            family: ShiftFamily::User,
            shape: Arc::new(move |s| shape(sigma(s))),
            shape_ds: Arc::new(move |s| ds(sigma2(s)) * sigma_ds(s)),
            lambda_minus: self.lambda_minus,
            lambda_plus: self.lambda_plus,
            s_support,
        }
    }
}

/// Outcome of [`validate_shift`]. Failures are entries, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftValidation {
    pub n_probe: usize,
    pub s_support: f64,
    /// First probe point where `lambda_minus < Lambda(s) < lambda_plus` fails.
    pub containment_violation: Option<(f64, f64)>,
    pub minus_limit_error: f64,
    pub plus_limit_error: f64,
    pub minus_slope: f64,
    pub plus_slope: f64,
    pub asymptotic_tol: f64,
    /// Worst relative disagreement between `shape_ds` and a central difference.
    pub derivative_mismatch: f64,
    pub passed: bool,
}

/// Check membership of `shift` in the admissible class on `n_probe` points over `[-S, S]`.
pub fn validate_shift(shift: &ParameterShift, n_probe: usize, asymptotic_tol: f64) -> Result<ShiftValidation> {
    if n_probe < 2 {
        return Err(Error::InvalidArgument("n_probe must be at least 2".into()));
    }
    let big_s = shift.s_support;
    let (lm, lp) = shift.range();
    let mut containment_violation = None;
    let mut derivative_mismatch = 0.0_f64;
    for i in 0..n_probe {
        let s = -big_s + 2.0 * big_s * i as f64 / (n_probe - 1) as f64;
        let l = shift.value(s);
        if containment_violation.is_none() && !(lm < l && l < lp) {
            containment_violation = Some((s, l));
        }
        let h = 1e-5 * s.abs().max(1.0);
        let fd = (shift.value(s + h) - shift.value(s - h)) / (2.0 * h);
        let a = shift.slope(s);
        let scale = a.abs().max(fd.abs()).max(1e-3 * (lp - lm));
        derivative_mismatch = derivative_mismatch.max((a - fd).abs() / scale);
    }
    let minus_limit_error = (shift.value(-big_s) - lm).abs();
    let plus_limit_error = (shift.value(big_s) - lp).abs();
    let minus_slope = shift.slope(-big_s).abs();
    let plus_slope = shift.slope(big_s).abs();
    let passed = containment_violation.is_none()
        && minus_limit_error < asymptotic_tol
        && plus_limit_error < asymptotic_tol
        && minus_slope < asymptotic_tol
        && plus_slope < asymptotic_tol
        && derivative_mismatch < 1e-5;
    Ok(ShiftValidation {
        n_probe,
        s_support: big_s,
        containment_violation,
        minus_limit_error,
        plus_limit_error,
        minus_slope,
        plus_slope,
        asymptotic_tol,
        derivative_mismatch,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_on_unit_interval_is_tanh() {
        let sh = ParameterShift::logistic(-1.0, 1.0).unwrap();
        assert_eq!(sh.value(0.0), 0.0);
        assert!((sh.value(8.0) - 0.999_999_774_929_1).abs() < 1e-12);
        // 1 - tanh^2(8)
        assert!((sh.slope(8.0) - 4.501_406e-7).abs() < 1e-12);
        // satisfies dL/ds = -(L+1)(L-1)
        for s in [-3.0, -0.4, 0.0, 1.3, 5.0] {
            let l = sh.value(s);
            assert!((sh.slope(s) + (l + 1.0) * (l - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn logistic_solves_its_ode_off_the_unit_interval() {
        let sh = ParameterShift::logistic(0.5, 3.0).unwrap();
        for s in [-2.0, -0.1, 0.7, 2.5] {
            let l = sh.value(s);
            assert!((sh.slope(s) + (l - 0.5) * (l - 3.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn tanh_family_is_odd() {
        let sh = ParameterShift::tanh(-2.0, 2.0).unwrap();
        assert_eq!(sh.value(0.0), 0.0);
        assert!((sh.value(1.1) + sh.value(-1.1)).abs() < 1e-15);
    }

    #[test]
    fn default_support_meets_tolerance() {
        let sh = ParameterShift::tanh(-2.0, 2.0).unwrap();
        let s = sh.s_support();
        assert!((sh.value(s) - 2.0).abs() < 4e-6);
        assert!((sh.value(-s) + 2.0).abs() < 4e-6);
    }

    #[test]
    fn validate_accepts_tanh_with_support_ten() {
        let sh = ParameterShift::tanh(-2.0, 2.0).unwrap().with_support(10.0).unwrap();
        let rep = validate_shift(&sh, 201, 1e-3).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.plus_limit_error < 1e-7);
    }

    #[test]
    fn validate_rejects_overshoot() {
        let sh = ParameterShift::user(-2.0, 2.0, |s| 2.5 * s.tanh(), |s| 2.5 / s.cosh().powi(2));
        // the support search itself fails: the limits are never approached
        assert!(sh.is_err());
        let over = ParameterShift {
            shape: Arc::new(|s: f64| 2.5 * s.tanh()),
            shape_ds: Arc::new(|s: f64| 2.5 / s.cosh().powi(2)),
            ..ParameterShift::tanh(-2.0, 2.0).unwrap()
        }
        .with_support(10.0)
        .unwrap();
        let rep = validate_shift(&over, 201, 1e-3).unwrap();
        assert!(!rep.passed);
        assert!(rep.containment_violation.is_some());
    }

    #[test]
    fn validate_rejects_constant_shape() {
        let tanh = ParameterShift::tanh(-2.0, 2.0).unwrap();
        let flat = ParameterShift {
            shape: Arc::new(|_| 0.0),
            shape_ds: Arc::new(|_| 0.0),
            ..tanh
        };
        let rep = validate_shift(&flat, 101, 1e-3).unwrap();
        assert!(rep.containment_violation.is_none());
        assert!(!rep.passed);
        assert!((rep.minus_limit_error - 2.0).abs() < 1e-15);
    }

    #[test]
    fn n_probe_lower_bound() {
        let sh = ParameterShift::tanh(0.0, 1.0).unwrap();
        assert!(validate_shift(&sh, 1, 1e-3).is_err());
    }

    #[test]
    fn reversed_limits_rejected() {
        assert!(ParameterShift::tanh(1.0, -1.0).is_err());
    }
}
