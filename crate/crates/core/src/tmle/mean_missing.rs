//! TMLE for a mean outcome subject to missingness: initial outcome
//! regression, measurement mechanism, logistic fluctuation with the
//! inverse-probability clever covariate.

use super::{bound_propensity, fluctuate_logistic, LearnerSpec, TmleDiagnostics, TmleFit};
use crate::error::{Error, Result};
use crate::learners::{logit, DesignMatrix, PRED_BOUNDS};

/// Rows of (W, measured indicator, outcome-when-measured).
pub struct MissingnessData<'a> {
    pub w: &'a DesignMatrix,
    /// Delta: 1 when the outcome was measured.
    pub measured: &'a [f64],
    /// Outcome in [0,1]; only rows with measured = 1 are used.
    pub y: &'a [f64],
}

impl MissingnessData<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.w.n_rows();
        if self.measured.len() != n || self.y.len() != n {
            return Err(Error::estimation("row count mismatch in TMLE inputs"));
        }
        if !self.measured.iter().any(|d| *d == 1.0) {
            return Err(Error::estimation(
                "no measured outcomes: mean not estimable",
            ));
        }
        for (d, y) in self.measured.iter().zip(self.y) {
            if *d != 0.0 && *d != 1.0 {
                return Err(Error::estimation("measurement indicator must be 0/1"));
            }
            if *d == 1.0 && !(0.0..=1.0).contains(y) {
                return Err(Error::estimation("outcomes must lie in [0,1]"));
            }
        }
        Ok(())
    }
}

/// Point estimate of E[Y] adjusting for covariate-dependent missingness.
pub fn tmle_mean_missing(data: &MissingnessData<'_>, learners: &LearnerSpec) -> Result<TmleFit> {
    data.validate()?;
    let n = data.w.n_rows();
    let measured_idx: Vec<usize> = (0..n).filter(|&i| data.measured[i] == 1.0).collect();

    // Initial outcome regression on measured rows, predicted everywhere.
    let w_measured = data.w.select_rows(&measured_idx);
    let y_measured: Vec<f64> = measured_idx.iter().map(|&i| data.y[i]).collect();
    let q_model = learners.fit(&w_measured, &y_measured)?;
    let q_init = q_model.predict(data.w);

    // Measurement mechanism, bounded.
    let g_model = learners.fit(data.w, data.measured)?;
    let g_raw = g_model.predict(data.w);
    let mut g_truncated = 0usize;
    let g: Vec<f64> = g_raw
        .iter()
        .map(|p| {
            let b = bound_propensity(*p);
            if b != *p {
                g_truncated += 1;
            }
            b
        })
        .collect();

    // Fluctuate with clever covariate Delta/g.
    let offset: Vec<f64> = q_init.iter().map(|q| logit(*q)).collect();
    let clever_obs: Vec<f64> = (0..n).map(|i| data.measured[i] / g[i]).collect();
    let fluct = fluctuate_logistic(&offset, &clever_obs, data.y, None);

    // Updated predictions use the covariate at measured = 1.
    let q_star: Vec<f64> = (0..n)
        .map(|i| crate::learners::expit(offset[i] + fluct.epsilon / g[i]))
        .collect();
    let estimate = q_star.iter().sum::<f64>() / n as f64;

    let ic: Vec<f64> = (0..n)
        .map(|i| {
            let resid = if data.measured[i] == 1.0 {
                (data.y[i] - q_star[i]) / g[i]
            } else {
                0.0
            };
            resid + q_star[i] - estimate
        })
        .collect();

    let g_min = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(TmleFit {
        estimate,
        ic,
        epsilon: fluct.epsilon,
        diagnostics: TmleDiagnostics {
            g_min,
            g_max,
            g_truncated,
            fluctuation_converged: fluct.converged,
        },
    })
}

/// Scale a continuous outcome into [0,1] for the fluctuation and report the
/// transform, so callers can back-map estimates and influence values.
pub fn unit_scale(values: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if hi <= lo {
        return Err(Error::estimation("invalid outcome scaling range"));
    }
    Ok(values
        .iter()
        .map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
        .collect())
}

/// Keep scaled outcomes off the exact 0/1 boundary so logits stay finite.
pub fn nudge_off_bounds(p: f64) -> f64 {
    p.clamp(PRED_BOUNDS.0, PRED_BOUNDS.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::DesignBuilder;
    use approx::assert_abs_diff_eq;

    fn intercept_data(n: usize) -> DesignMatrix {
        DesignMatrix::intercept_only(n)
    }

    #[test]
    fn full_measurement_equals_empirical_mean_exactly() {
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let measured = [1.0; 10];
        let x = intercept_data(10);
        let data = MissingnessData {
            w: &x,
            measured: &measured,
            y: &y,
        };
        let fit = tmle_mean_missing(&data, &LearnerSpec::mean_only(1)).unwrap();
        assert_abs_diff_eq!(fit.estimate, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.ic_mean(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_missingness_with_mean_learner_recovers_complete_case_mean() {
        // Clever covariate constant => intercept fluctuation recovers the
        // complete-case mean (algebraic oracle).
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        let measured = [1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let complete_case: f64 = {
            let pairs: Vec<f64> = (0..8)
                .filter(|&i| measured[i] == 1.0)
                .map(|i| y[i])
                .collect();
            pairs.iter().sum::<f64>() / pairs.len() as f64
        };
        let x = intercept_data(8);
        let data = MissingnessData {
            w: &x,
            measured: &measured,
            y: &y,
        };
        let fit = tmle_mean_missing(&data, &LearnerSpec::mean_only(1)).unwrap();
        assert_abs_diff_eq!(fit.estimate, complete_case, epsilon = 1e-10);
    }

    #[test]
    fn stratified_missingness_matches_standardization_oracle() {
        // 40-row table, W binary; measured 100% when W=1, 50% when W=0.
        let mut w_vals = Vec::new();
        let mut measured = Vec::new();
        let mut y = Vec::new();
        // W=1 stratum: 20 rows, all measured, 12 successes.
        for i in 0..20 {
            w_vals.push(1.0);
            measured.push(1.0);
            y.push(if i < 12 { 1.0 } else { 0.0 });
        }
        // W=0 stratum: 20 rows, 10 measured with 3 successes.
        for i in 0..20 {
            w_vals.push(0.0);
            measured.push(if i < 10 { 1.0 } else { 0.0 });
            y.push(if i < 3 { 1.0 } else { 0.0 });
        }
        // Brute-force direct standardization over the table:
        // P(W=1)*mean(Y|measured,W=1) + P(W=0)*mean(Y|measured,W=0).
        let oracle = 0.5 * (12.0 / 20.0) + 0.5 * (3.0 / 10.0);

        let mut b = DesignBuilder::new(40);
        b.binary("w", &w_vals);
        let x = b.build().unwrap();
        let data = MissingnessData {
            w: &x,
            measured: &measured,
            y: &y,
        };
        let fit = tmle_mean_missing(&data, &LearnerSpec::glm_only(1)).unwrap();
        assert_abs_diff_eq!(fit.estimate, oracle, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.ic_mean(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn no_measured_rows_is_an_error() {
        let x = intercept_data(4);
        let data = MissingnessData {
            w: &x,
            measured: &[0.0; 4],
            y: &[0.0; 4],
        };
        assert!(tmle_mean_missing(&data, &LearnerSpec::mean_only(1)).is_err());
    }

    #[test]
    fn estimate_invariant_to_row_order() {
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let measured = [1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let w_vals = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let build = |ord: &[usize]| {
            let mut b = DesignBuilder::new(6);
            let wv: Vec<f64> = ord.iter().map(|&i| w_vals[i]).collect();
            b.binary("w", &wv);
            let x = b.build().unwrap();
            let m: Vec<f64> = ord.iter().map(|&i| measured[i]).collect();
            let yy: Vec<f64> = ord.iter().map(|&i| y[i]).collect();
            tmle_mean_missing(
                &MissingnessData {
                    w: &x,
                    measured: &m,
                    y: &yy,
                },
                &LearnerSpec::glm_only(1),
            )
            .unwrap()
            .estimate
        };
        let a = build(&[0, 1, 2, 3, 4, 5]);
        let b = build(&[5, 3, 1, 0, 2, 4]);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn clever_covariate_bounded_by_40() {
        // Extreme missingness: g truncation caps the weight at 1/0.025.
        let n = 60;
        let mut w_vals = vec![0.0; n];
        let mut measured = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            w_vals[i] = if i % 2 == 0 { 1.0 } else { 0.0 };
            // W=1 rows nearly never measured.
            measured[i] = if i % 2 == 0 {
                if i == 0 { 1.0 } else { 0.0 }
            } else {
                1.0
            };
            y[i] = if i % 3 == 0 { 1.0 } else { 0.0 };
        }
        let mut b = DesignBuilder::new(n);
        b.binary("w", &w_vals);
        let x = b.build().unwrap();
        let fit = tmle_mean_missing(
            &MissingnessData {
                w: &x,
                measured: &measured,
                y: &y,
            },
            &LearnerSpec::glm_only(1),
        )
        .unwrap();
        assert!(fit.diagnostics.g_min >= 0.025);
        assert!(fit.diagnostics.g_truncated > 0);
        assert!((0.0..=1.0).contains(&fit.estimate));
    }
}
