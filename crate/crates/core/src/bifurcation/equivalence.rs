use serde::{Deserialize, Serialize};

use crate::bifurcation::equilibria::{find_equilibria, Kind};
use crate::dynamics::field::ScalarField;
use crate::error::{Error, Result};

/// Comparison of the equilibria of `f` and `rho * f` at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub lambda: f64,
    pub n_original: usize,
    pub n_scaled: usize,
    pub max_position_error: f64,
    pub mismatches: Vec<String>,
    pub equivalent: bool,
}

/// Check that a positive state-dependent time rescaling preserves the
/// equilibria and their stability at `lambda`.
pub fn check_bifurcation_equivalence<R>(field: &ScalarField, rho: R, lambda: f64, n_scan: usize) -> Result<EquivalenceReport>
where
    R: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
{
    let dom = field.domain();
    for i in 0..=n_scan {
        let x = dom.lo + dom.width() * i as f64 / n_scan as f64;
        let v = rho(x);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("rescaling must be positive; rho({x}) = {v}")));
        }
    }
    let scaled = field.scaled(rho);
    let a = find_equilibria(field, lambda, n_scan);
    let b = find_equilibria(&scaled, lambda, n_scan);
    let mut mismatches = Vec::new();
    let mut max_position_error = 0.0_f64;
    if a.len() != b.len() {
        mismatches.push(format!("{} equilibria versus {} after rescaling", a.len(), b.len()));
    }
    for (ea, eb) in a.iter().zip(&b) {
        let d = (ea.x - eb.x).abs();
        max_position_error = max_position_error.max(d);
        if d > 1e-8 * ea.x.abs().max(1.0) {
            mismatches.push(format!("equilibrium {} moved to {}", ea.x, eb.x));
        }
        // hyperbolic kinds must agree; a degenerate root may read either way
        if ea.kind != eb.kind && ea.kind != Kind::Bifurcation && eb.kind != Kind::Bifurcation {
            mismatches.push(format!("equilibrium {} is {} but {} after rescaling", ea.x, ea.kind.as_str(), eb.kind.as_str()));
        }
    }
    Ok(EquivalenceReport {
        lambda,
        n_original: a.len(),
        n_scaled: b.len(),
        max_position_error,
        equivalent: mismatches.is_empty(),
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::field::StateDomain;
    use crate::models;

    #[test]
    fn square_root_rescaling_of_energy_balance() {
        let f = models::energy_balance_on(|_| 2.5, |_| 1.0, StateDomain::new(0.1, 5.0).unwrap());
        let (a, tau) = (0.7, 3.0);
        let rep = check_bifurcation_equivalence(&f, move |x: f64| 2.0 * a * x.sqrt() / tau, 0.0, 500).unwrap();
        assert!(rep.equivalent, "{rep:?}");
        assert_eq!(rep.n_original, 2);
    }

    #[test]
    fn identity_and_quadratic_rescaling() {
        let f = models::changeover();
        assert!(check_bifurcation_equivalence(&f, |_| 1.0, 0.3, 900).unwrap().equivalent);
        let lin = ScalarField::new("lin", StateDomain::new(-1.0, 1.0).unwrap(), |x, _| -x);
        let rep = check_bifurcation_equivalence(&lin, |x: f64| 1.0 + x * x, 0.0, 100).unwrap();
        assert!(rep.equivalent && rep.n_scaled == 1);
    }

    #[test]
    fn nonpositive_rescaling_rejected() {
        let f = models::changeover();
        assert!(check_bifurcation_equivalence(&f, |x: f64| x, 0.0, 100).is_err());
    }
}
