//! Built-in scalar fields.
//!
//! Each constructor returns a [`ScalarField`] with an analytic `df/dx`.

use serde::{Deserialize, Serialize};

use crate::dynamics::field::{ScalarField, StateDomain};
use std::f64::consts::PI;

pub const CHANGEOVER: &str = "changeover";
pub const BUMP: &str = "bump";
pub const ENERGY_BALANCE: &str = "energy-balance";

/// `sin(pi x) (lambda + cos(pi x))` on `[-4.5, 4.5]`.
///
/// Integer lines are invariant. Even integers are stable for `lambda < -1`,
/// odd integers for `lambda > 1`, and the curve `cos(pi x) = -lambda` is
/// stable where it exists.
pub fn changeover() -> ScalarField {
    changeover_on(StateDomain { lo: -4.5, hi: 4.5 })
}

pub fn changeover_on(domain: StateDomain) -> ScalarField {
    ScalarField::new(CHANGEOVER, domain, |x, l| (PI * x).sin() * (l + (PI * x).cos())).with_dx(|x, l| {
        let (s, c) = (PI * x).sin_cos();
        PI * c * (l + c) - PI * s * s
    })
}

/// Constants of the bump model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub k: f64,
}

impl Default for BumpConstants {
    fn default() -> Self {
        Self { a: -0.25, b: 1.2, c: -0.4, d: -0.3, e: 3.0, k: 2.0 }
    }
}

impl BumpConstants {
    /// The isolated branch `x = K / cosh(e lambda)`.
    pub fn bump_branch(&self, lambda: f64) -> f64 {
        self.k / (self.e * lambda).cosh()
    }
}

/// `-((x + a + b lambda)^2 + c tanh(lambda - d)) (x - K / cosh(e lambda))` on `[-3, 3]`.
pub fn bump(k: BumpConstants) -> ScalarField {
    bump_on(k, StateDomain { lo: -3.0, hi: 3.0 })
}

pub fn bump_on(k: BumpConstants, domain: StateDomain) -> ScalarField {
    ScalarField::new(BUMP, domain, move |x, l| {
        let u = x + k.a + k.b * l;
        -(u * u + k.c * (l - k.d).tanh()) * (x - k.bump_branch(l))
    })
    .with_dx(move |x, l| {
        let u = x + k.a + k.b * l;
        -2.0 * u * (x - k.bump_branch(l)) - (u * u + k.c * (l - k.d).tanh())
    })
}

/// Reduced energy-balance field `-X^2 + b(lambda) X - c(lambda)` on `[0, 5]`.
pub fn energy_balance<B, C>(b: B, c: C) -> ScalarField
where
    B: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
    C: Fn(f64) -> f64 + Send + Sync + 'static,
{
    energy_balance_on(b, c, StateDomain { lo: 0.0, hi: 5.0 })
}

pub fn energy_balance_on<B, C>(b: B, c: C, domain: StateDomain) -> ScalarField
where
    B: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
    C: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let bx = b.clone();
    ScalarField::new(ENERGY_BALANCE, domain, move |x, l| -x * x + b(l) * x - c(l))
        .with_dx(move |x, l| -2.0 * x + bx(l))
}

/// Energy-balance field with `b`, `c` linear in `lambda` between their values at 0 and 1.
pub fn energy_balance_linear(b0: f64, b1: f64, c0: f64, c1: f64) -> ScalarField {
    energy_balance(move |l| b0 + (b1 - b0) * l, move |l| c0 + (c1 - c0) * l)
}

/// Stable and unstable equilibria `b/2 +- sqrt(b^2 - 4c)/2`, if real.
pub fn energy_balance_branches(b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * c;
    (disc >= 0.0).then(|| {
        let h = 0.5 * disc.sqrt();
        (0.5 * b + h, 0.5 * b - h)
    })
}

/// Catalogue entry for listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub formula: String,
    pub constants: Vec<(String, f64)>,
    pub state_domain: StateDomain,
    pub description: String,
}

pub fn catalog() -> Vec<ModelInfo> {
    let k = BumpConstants::default();
    vec![
        ModelInfo {
            name: CHANGEOVER.into(),
            formula: "sin(pi*x)*(lambda + cos(pi*x))".into(),
            constants: vec![],
            state_domain: changeover().domain(),
            description: "Invariant integer lines whose stability is exchanged through pitchforks at lambda = -1 and lambda = 1".into(),
        },
        ModelInfo {
            name: BUMP.into(),
            formula: "-((x + a + b*lambda)^2 + c*tanh(lambda - d))*(x - k/cosh(e*lambda))".into(),
            constants: vec![
                ("a".into(), k.a),
                ("b".into(), k.b),
                ("c".into(), k.c),
                ("d".into(), k.d),
                ("e".into(), k.e),
                ("k".into(), k.k),
            ],
            state_domain: bump(k).domain(),
            description: "Isolated stable branch next to a saddle-node pair; R-tips for an intermediate band of rates".into(),
        },
        ModelInfo {
            name: ENERGY_BALANCE.into(),
            formula: "-x^2 + b(lambda)*x - c(lambda)".into(),
            constants: vec![],
            state_domain: StateDomain { lo: 0.0, hi: 5.0 },
            description: "Reduced global energy-balance model with user-supplied coefficient functions b and c".into(),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn changeover_values() {
        let f = changeover();
        assert_eq!(f.eval(0.0, -2.0).unwrap(), 0.0);
        assert!((f.eval_dx(0.0, -2.0).unwrap() + PI).abs() < 1e-14);
        assert!((f.eval_dx(1.0, -2.0).unwrap() - 3.0 * PI).abs() < 1e-12);
        assert!(f.derivative_mismatch(-2.0, 2.0, 41) < 1e-5);
    }

    #[test]
    fn bump_values() {
        let f = bump(BumpConstants::default());
        assert_eq!(f.eval(2.0, 0.0).unwrap(), 0.0);
        assert!(f.derivative_mismatch(-1.0, 1.0, 41) < 1e-5);
    }

    #[test]
    fn energy_balance_values() {
        let f = energy_balance(|_| 2.5, |_| 1.0);
        assert_eq!(f.eval(2.0, 0.3).unwrap(), 0.0);
        assert_eq!(f.eval_dx(2.0, 0.3).unwrap(), -1.5);
        assert_eq!(energy_balance_branches(2.5, 1.0), Some((2.0, 0.5)));
        assert_eq!(energy_balance_branches(2.0, 1.5), None);
        assert!(energy_balance_linear(3.0, 2.2, 1.0, 1.0).derivative_mismatch(0.0, 1.0, 21) < 1e-5);
    }

    #[test]
    fn catalog_lists_all_builtins() {
        let names: Vec<_> = catalog().into_iter().map(|m| m.name).collect();
        assert_eq!(names, [CHANGEOVER, BUMP, ENERGY_BALANCE]);
    }
}
