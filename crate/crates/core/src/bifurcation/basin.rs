use serde::{Deserialize, Serialize};

use crate::bifurcation::diagram::BifurcationDiagram;
use crate::bifurcation::equilibria::{find_equilibria_with, Equilibrium, Kind, RootTolerances};
use crate::dynamics::field::ScalarField;
use crate::error::{Error, Result};

/// Basin of a stable equilibrium of the frozen system: the open interval
/// between its neighbouring equilibria, or the domain edge when there is none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinInterval {
    pub attractor: Equilibrium,
    pub lo: f64,
    pub hi: f64,
    pub lo_boundary: Option<Equilibrium>,
    pub hi_boundary: Option<Equilibrium>,
    /// `lo` is the domain edge, not an equilibrium.
    pub lo_unbounded: bool,
    pub hi_unbounded: bool,
}

impl BasinInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// Membership with `margin` kept clear of bounded ends.
    pub fn contains_with_margin(&self, x: f64, margin: f64) -> bool {
        let lo = if self.lo_unbounded { f64::NEG_INFINITY } else { self.lo + margin };
        let hi = if self.hi_unbounded { f64::INFINITY } else { self.hi - margin };
        lo < x && x < hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Basin of the stable equilibrium `attractor` on the diagram's field.
pub fn basin(diagram: &BifurcationDiagram, attractor: &Equilibrium) -> Result<BasinInterval> {
    basin_at(
        diagram.field(),
        attractor.x,
        attractor.lambda,
        diagram.config.n_scan,
        &diagram.config.tols,
        diagram.match_tol(),
    )
}

/// Basin of the stable equilibrium nearest `x` (within `match_tol`) at `lambda`.
pub fn basin_at(
    field: &ScalarField,
    x: f64,
    lambda: f64,
    n_scan: usize,
    tols: &RootTolerances,
    match_tol: f64,
) -> Result<BasinInterval> {
    let eqs = find_equilibria_with(field, lambda, n_scan, tols);
    let k = eqs
        .iter()
        .enumerate()
        .min_by(|p, q| (p.1.x - x).abs().total_cmp(&(q.1.x - x).abs()))
        .map(|(k, _)| k)
        .filter(|&k| (eqs[k].x - x).abs() <= match_tol)
        .ok_or_else(|| Error::InvalidArgument(format!("no equilibrium near x = {x} at lambda = {lambda}")))?;
    let att = eqs[k];
    if att.kind != Kind::Stable {
        return Err(Error::InvalidArgument(format!(
            "basin requires a stable equilibrium; ({}, {}) is {}",
            att.x,
            att.lambda,
            att.kind.as_str()
        )));
    }
    let dom = field.domain();
    let lo_boundary = k.checked_sub(1).map(|i| eqs[i]);
    let hi_boundary = eqs.get(k + 1).copied();
    let b = BasinInterval {
        attractor: att,
        lo: lo_boundary.map_or(dom.lo, |e| e.x),
        hi: hi_boundary.map_or(dom.hi, |e| e.x),
        lo_boundary,
        hi_boundary,
        lo_unbounded: lo_boundary.is_none(),
        hi_unbounded: hi_boundary.is_none(),
    };
    verify_signs(field, &b)?;
    Ok(b)
}

fn verify_signs(field: &ScalarField, b: &BasinInterval) -> Result<()> {
    let n = 32;
    let x0 = b.attractor.x;
    let l = b.attractor.lambda;
    for (from, to, positive) in [(b.lo, x0, true), (x0, b.hi, false)] {
        if to <= from {
            continue;
        }
        for i in 1..n {
            let x = from + (to - from) * i as f64 / n as f64;
            let v = field.value(x, l);
            if (v > 0.0) != positive || v == 0.0 {
                return Err(Error::BasinSign {
                    x,
                    reason: format!(
                        "f = {v:e} at lambda = {l}; expected {} between {from} and {to}",
                        if positive { "f > 0" } else { "f < 0" }
                    ),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn basin_of(field: &ScalarField, x: f64, lambda: f64) -> Result<BasinInterval> {
        basin_at(field, x, lambda, 900, &RootTolerances::default(), 1e-6)
    }

    #[test]
    fn energy_balance_half_line() {
        let b = basin_of(&models::energy_balance(|_| 2.5, |_| 1.0), 2.0, 0.0).unwrap();
        assert!((b.lo - 0.5).abs() < 1e-12);
        assert_eq!(b.hi, 5.0);
        assert!(b.hi_unbounded && !b.lo_unbounded);
    }

    #[test]
    fn changeover_basins() {
        let f = models::changeover();
        let b = basin_of(&f, 0.0, -2.0).unwrap();
        assert!((b.lo + 1.0).abs() < 1e-12 && (b.hi - 1.0).abs() < 1e-12);
        let b = basin_of(&f, 0.5, 0.0).unwrap();
        assert!(b.lo.abs() < 1e-12 && (b.hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_attractor_rejected() {
        let f = models::changeover();
        assert!(matches!(basin_of(&f, 1.0, -2.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn margin_respects_unbounded_ends() {
        let b = basin_of(&models::energy_balance(|_| 2.5, |_| 1.0), 2.0, 0.0).unwrap();
        assert!(b.contains_with_margin(7.0, 0.1));
        assert!(!b.contains_with_margin(0.55, 0.1));
    }
}
