use serde::Serialize;

use crate::error::{Error, Result};

/// One condition on `-X^2 + b X - c` over `lambda in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyCase {
    pub holds: bool,
    /// Parameter values that realize (or come closest to violating) the condition.
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    /// Margin by which the condition holds; negative when it fails.
    pub margin: f64,
}

/// Conditions on the stable branch `b/2 + sqrt(b^2 - 4c)/2` and the unstable
/// branch `b/2 - sqrt(b^2 - 4c)/2` of the reduced energy-balance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBalanceReport {
    pub n_grid: usize,
    /// Two branches throughout: no bifurcation-induced tipping.
    pub two_branches: EnergyCase,
    /// Every stable value above every unstable value: no rate-induced tipping.
    pub separated: EnergyCase,
    /// Some earlier stable value below a later unstable value: some shift tips.
    pub overtaken: EnergyCase,
    /// Initial stable value below the final unstable value: a monotone shift tips.
    pub ends_overtaken: EnergyCase,
    /// Branches vanish inside the range: every shift tips by bifurcation.
    pub vanishes: EnergyCase,
}

impl EnergyBalanceReport {
    /// Rate-induced tipping is excluded.
    pub fn no_rate_tipping(&self) -> bool {
        self.two_branches.holds && self.separated.holds
    }
}

/// Evaluate the branch conditions for `b(lambda)`, `c(lambda)` on `n_grid`
/// points of `[0, 1]`.
pub fn energy_balance_report<B, C>(b: B, c: C, n_grid: usize) -> Result<EnergyBalanceReport>
where
    B: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    if n_grid < 3 {
        return Err(Error::InvalidArgument(format!("n_grid must be at least 3, got {n_grid}")));
    }
    let l: Vec<f64> = (0..n_grid).map(|i| i as f64 / (n_grid - 1) as f64).collect();
    let bs: Vec<f64> = l.iter().map(|&x| b(x)).collect();
    let disc: Vec<f64> = l.iter().zip(&bs).map(|(&x, &bv)| bv * bv - 4.0 * c(x)).collect();
    if bs.iter().chain(&disc).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("b and c must be finite on [0, 1]".into()));
    }
    let argmin = |v: &[f64]| (0..v.len()).min_by(|&i, &j| v[i].total_cmp(&v[j])).expect("nonempty");
    let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).expect("nonempty");

    let k = argmin(&disc);
    let two_branches = EnergyCase { holds: disc[k] > 0.0, mu: Some(l[k]), nu: None, margin: disc[k] };

    let h: Vec<f64> = disc.iter().map(|d| 0.5 * d.max(0.0).sqrt()).collect();
    let xs: Vec<f64> = bs.iter().zip(&h).map(|(bv, hv)| 0.5 * bv + hv).collect();
    let xu: Vec<f64> = bs.iter().zip(&h).map(|(bv, hv)| 0.5 * bv - hv).collect();

    let (i, j) = (argmin(&xs), argmax(&xu));
    let gap = xs[i] - xu[j];
    let separated = EnergyCase { holds: two_branches.holds && gap > 0.0, mu: Some(l[i]), nu: Some(l[j]), margin: gap };

    // largest Xu(nu) - min_{mu < nu} Xs(mu) over interior pairs
    let mut best = (f64::NEG_INFINITY, 0, 0);
    let mut run = (f64::INFINITY, 0);
    for q in 1..n_grid - 1 {
        if xu[q] - run.0 > best.0 {
            best = (xu[q] - run.0, run.1, q);
        }
        if xs[q] < run.0 {
            run = (xs[q], q);
        }
    }
    let overtaken = EnergyCase {
        holds: two_branches.holds && best.0 > 0.0,
        mu: Some(l[best.1]),
        nu: Some(l[best.2]),
        margin: best.0,
    };

    let n = n_grid - 1;
    let ends_overtaken =
        EnergyCase { holds: two_branches.holds && xs[0] < xu[n], mu: Some(0.0), nu: Some(1.0), margin: xu[n] - xs[0] };

    let first_neg = (1..n).find(|&q| disc[q] < 0.0);
    let vanishes = EnergyCase {
        holds: disc[0] > 0.0 && first_neg.is_some(),
        mu: first_neg.map(|q| l[q]),
        nu: None,
        margin: first_neg.map_or(disc[k], |q| -disc[q]),
    };

    Ok(EnergyBalanceReport { n_grid, two_branches, separated, overtaken, ends_overtaken, vanishes })
}
