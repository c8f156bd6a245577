//! One-dimensional logistic fluctuation: solve the weighted score
//! sum_i w_i H_i (y_i - expit(offset_i + eps * H_i)) = 0 in eps.

use crate::learners::expit;

#[derive(Debug, Clone, Copy)]
pub struct Fluctuation {
    pub epsilon: f64,
    pub converged: bool,
    /// Residual score at the returned epsilon.
    pub score: f64,
}

const EPS_RANGE: f64 = 50.0;

/// Newton iteration with a bisection safeguard. The score is strictly
/// decreasing in eps wherever any clever covariate is nonzero, so a sign
/// change over [-50, 50] brackets the root; outside that range the
/// fluctuation is saturated and the nearest endpoint is returned flagged.
pub fn fluctuate_logistic(
    offset_logit: &[f64],
    clever: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
) -> Fluctuation {
    let n = y.len();
    debug_assert_eq!(offset_logit.len(), n);
    debug_assert_eq!(clever.len(), n);
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);

    let scale: f64 = (0..n).map(|i| (weight(i) * clever[i]).abs()).sum::<f64>();
    if scale == 0.0 {
        return Fluctuation {
            epsilon: 0.0,
            converged: true,
            score: 0.0,
        };
    }
    let tol = 1e-13 * scale.max(1.0);

    let score_and_deriv = |eps: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut d = 0.0;
        for i in 0..n {
            let h = clever[i];
            if h == 0.0 {
                continue;
            }
            let p = expit(offset_logit[i] + eps * h);
            let w = weight(i);
            s += w * h * (y[i] - p);
            d -= w * h * h * p * (1.0 - p);
        }
        (s, d)
    };

    let (s_lo, _) = score_and_deriv(-EPS_RANGE);
    let (s_hi, _) = score_and_deriv(EPS_RANGE);
    // Decreasing score: root exists iff s(-50) >= 0 >= s(50).
    if s_lo < 0.0 {
        return Fluctuation {
            epsilon: -EPS_RANGE,
            converged: false,
            score: s_lo,
        };
    }
    if s_hi > 0.0 {
        return Fluctuation {
            epsilon: EPS_RANGE,
            converged: false,
            score: s_hi,
        };
    }

    let (mut lo, mut hi) = (-EPS_RANGE, EPS_RANGE);
    let mut eps = 0.0;
    for _ in 0..200 {
        let (s, d) = score_and_deriv(eps);
        if s.abs() < tol {
            return Fluctuation {
                epsilon: eps,
                converged: true,
                score: s,
            };
        }
        if s > 0.0 {
            lo = eps;
        } else {
            hi = eps;
        }
        let newton = if d < 0.0 { eps - s / d } else { f64::NAN };
        eps = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            break;
        }
    }
    let (s, _) = score_and_deriv(eps);
    Fluctuation {
        epsilon: eps,
        converged: s.abs() < tol * 10.0,
        score: s,
    }
}
