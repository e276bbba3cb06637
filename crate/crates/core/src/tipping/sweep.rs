use serde::{Deserialize, Serialize};

use crate::bifurcation::equilibria::bisect_sign;
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};

/// Reversals smaller than this fraction of `|lambda_plus - lambda_minus|`
/// are treated as noise.
pub const SWEEP_AMPLITUDE_REL: f64 = 1e-6;

/// The parameter values a shift visits, as alternating monotone segments
/// `(lambda_from, lambda_to)` from `lambda_minus` to `lambda_plus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSweep {
    pub segments: Vec<(f64, f64)>,
    /// `s` of each interior turning point.
    pub turns: Vec<f64>,
}

impl MonotoneSweep {
    /// Sweep through the given levels. Consecutive levels must differ and
    /// alternate direction.
    pub fn from_levels(levels: &[f64]) -> Result<Self> {
        if levels.len() < 2 || levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument("a sweep needs at least two finite levels".into()));
        }
        let segments: Vec<(f64, f64)> = levels.windows(2).map(|w| (w[0], w[1])).collect();
        for w in segments.windows(2) {
            if (w[0].1 > w[0].0) == (w[1].1 > w[1].0) {
                return Err(Error::InvalidArgument("sweep segments must alternate direction".into()));
            }
        }
        if segments.iter().any(|(a, b)| a == b) {
            return Err(Error::InvalidArgument("sweep segments must be nondegenerate".into()));
        }
        Ok(Self { segments, turns: Vec::new() })
    }

    pub fn is_monotone(&self) -> bool {
        self.segments.len() == 1
    }

    /// Levels `lambda_minus, turning values..., lambda_plus`.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = vec![self.segments[0].0];
        out.extend(self.segments.iter().map(|s| s.1));
        out
    }
}

/// Split `shift` into monotone segments. Extrema are located from sign
/// changes of the slope on `n_probe` points over the support and refined by
/// bisection; reversals below the amplitude threshold are dropped.
pub fn sweep_decompose(shift: &ParameterShift, n_probe: usize) -> MonotoneSweep {
    let (lm, lp) = shift.range();
    let thr = SWEEP_AMPLITUDE_REL * (lp - lm);
    let n = n_probe.max(16);
    let s_sup = shift.s_support();
    let s: Vec<f64> = (0..n).map(|i| -s_sup + 2.0 * s_sup * i as f64 / (n - 1) as f64).collect();
    let v: Vec<f64> = s.iter().map(|&si| shift.value(si)).collect();

    // zigzag filter: a reversal counts once it retreats `thr` from the extreme
    let mut turns_idx: Vec<usize> = Vec::new();
    let mut dir = 0.0_f64;
    let mut ext = 0usize;
    let anchor = v[0];
    for i in 1..n {
        if dir == 0.0 {
            if (v[i] - anchor).abs() > thr {
                dir = (v[i] - anchor).signum();
                ext = i;
            }
            continue;
        }
        if (v[i] - v[ext]) * dir > 0.0 {
            ext = i;
        } else if (v[ext] - v[i]) * dir > thr {
            turns_idx.push(ext);
            dir = -dir;
            ext = i;
        }
    }

    let turns: Vec<f64> = turns_idx.iter().map(|&k| refine_extremum(shift, &s, k)).collect();
    let mut levels = vec![lm];
    levels.extend(turns.iter().map(|&t| shift.value(t)));
    levels.push(lp);
    let segments = levels.windows(2).map(|w| (w[0], w[1])).collect();
    MonotoneSweep { segments, turns }
}

/// Zero of the slope near probe index `k`, or the probe itself when the
/// slope does not change sign across the neighbouring probes.
fn refine_extremum(shift: &ParameterShift, s: &[f64], k: usize) -> f64 {
    let a = s[k.saturating_sub(1)];
    let b = s[(k + 1).min(s.len() - 1)];
    let (ga, gb) = (shift.slope(a), shift.slope(b));
    if ga == 0.0 {
        return a;
    }
    if ga * gb < 0.0 {
        bisect_sign(|t| shift.slope(t), a, b, ga)
    } else {
        s[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_is_one_segment() {
        let sw = sweep_decompose(&ParameterShift::tanh(-2.0, 2.0).unwrap(), 2000);
        assert_eq!(sw.segments, vec![(-2.0, 2.0)]);
    }

    #[test]
    fn rise_dip_rise_is_three_segments() {
        // 0.6 tanh(s + 4) + 0.4 tanh(s - 4) - 0.9 exp(-s^2) + 1 on (0, 2)
        let f = |s: f64| 0.6 * (s + 4.0).tanh() + 0.4 * (s - 4.0).tanh() - 0.9 * (-s * s).exp() + 1.0;
        let shift = ParameterShift::user_fd(0.0, 2.0, f).unwrap();
        let sw = sweep_decompose(&shift, 4000);
        assert_eq!(sw.segments.len(), 3);
        let (m, dip) = (sw.segments[0].1, sw.segments[1].1);
        assert!(m > dip && m < 2.0 && dip > 0.0);
        for &t in &sw.turns {
            assert!(shift.slope(t).abs() < 1e-6);
        }
    }

    #[test]
    fn tiny_wiggle_is_ignored() {
        let f = |s: f64| s.tanh() + 1e-9 * (-(s - 1.0) * (s - 1.0)).exp() * (20.0 * s).sin();
        let shift = ParameterShift::user_fd(-1.0, 1.0, f).unwrap();
        assert_eq!(sweep_decompose(&shift, 4000).segments.len(), 1);
    }

    #[test]
    fn levels_must_alternate() {
        assert!(MonotoneSweep::from_levels(&[-2.0, 1.5, -1.5, 2.0]).is_ok());
        assert!(MonotoneSweep::from_levels(&[-2.0, 0.0, 2.0]).is_err());
    }
}
