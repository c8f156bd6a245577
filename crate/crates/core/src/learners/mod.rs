//! Base prediction learners (logistic GLM via IRLS, spline GAM, mean) and
//! the cross-validated super-learner ensemble used inside the TMLE steps.

pub mod design;
mod linalg;
mod super_learner;

pub use design::{DesignBuilder, DesignMatrix, SplineBasis, SplineExpansion};
pub use super_learner::{super_learner, EnsembleMode, EnsembleModel};

use ndarray::Array2;

use crate::error::{Error, Result};

/// All learner predictions are bounded to this range; the TMLE clever
/// covariates rely on it.
pub const PRED_BOUNDS: (f64, f64) = (0.005, 0.995);

/// IRLS declares convergence when the largest coefficient change drops
/// below this.
pub const IRLS_TOL: f64 = 1e-8;
pub const IRLS_MAX_ITER: usize = 100;
/// Ridge penalty applied on separation fallback and inside the GAM.
pub const FALLBACK_RIDGE: f64 = 1e-4;

pub fn bound_probability(p: f64) -> f64 {
    p.clamp(PRED_BOUNDS.0, PRED_BOUNDS.1)
}

pub fn expit(x: f64) -> f64 {
    let x = x.clamp(-30.0, 30.0);
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Candidate learner specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CandidateSpec {
    Glm { ridge: f64 },
    Gam { spline_knots: usize },
    Mean,
}

impl CandidateSpec {
    pub fn glm() -> CandidateSpec {
        CandidateSpec::Glm { ridge: 0.0 }
    }

    pub fn gam() -> CandidateSpec {
        CandidateSpec::Gam { spline_knots: 4 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CandidateSpec::Glm { .. } => "glm",
            CandidateSpec::Gam { .. } => "gam",
            CandidateSpec::Mean => "mean",
        }
    }

    pub fn fit(&self, x: &DesignMatrix, y: &[f64]) -> Result<FittedLearner> {
        match *self {
            CandidateSpec::Glm { ridge } => fit_glm(x, y, ridge),
            CandidateSpec::Gam { spline_knots } => fit_gam(x, y, spline_knots),
            CandidateSpec::Mean => fit_mean(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Glm,
    Gam,
    Mean,
}

/// Training diagnostics attached to every fit.
#[derive(Debug, Clone, Default)]
pub struct FitMeta {
    pub iterations: usize,
    pub converged: bool,
    pub ridge: f64,
    /// IRLS hit separation and was refit with a ridge penalty.
    pub separation_fallback: bool,
    /// Spline knot count was reduced for lack of distinct values.
    pub reduced_knots: bool,
    /// Outcome was constant; intercept-only fit at the bounded logit.
    pub constant_outcome: bool,
}

/// A fitted learner; predictions are bounded to [`PRED_BOUNDS`].
#[derive(Debug, Clone)]
pub struct FittedLearner {
    pub kind: LearnerKind,
    pub coefficients: Vec<f64>,
    pub coefficient_names: Vec<String>,
    pub meta: FitMeta,
    expansion: Option<SplineExpansion>,
}

impl FittedLearner {
    /// Predicted probabilities for rows of a design with the same base
    /// columns as the training design.
    pub fn predict(&self, x: &DesignMatrix) -> Vec<f64> {
        match self.kind {
            LearnerKind::Mean => vec![bound_probability(expit(self.coefficients[0])); x.n_rows()],
            LearnerKind::Glm => predict_linear(x.data(), &self.coefficients),
            LearnerKind::Gam => {
                let expanded = self
                    .expansion
                    .as_ref()
                    .expect("gam carries its expansion")
                    .apply(x);
                predict_linear(&expanded, &self.coefficients)
            }
        }
    }
}

fn predict_linear(data: &Array2<f64>, coef: &[f64]) -> Vec<f64> {
    let eta = design::linear_predictor(data, coef);
    eta.iter().map(|&e| bound_probability(expit(e))).collect()
}

/// Negative Bernoulli log-likelihood, the CV loss throughout.
pub fn bernoulli_nll(y: f64, p: f64) -> f64 {
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn constant_outcome_fit(x_cols: usize, names: &[String], y_mean: f64) -> FittedLearner {
    let mut coefficients = vec![0.0; x_cols];
    coefficients[0] = logit(bound_probability(y_mean));
    FittedLearner {
        kind: LearnerKind::Glm,
        coefficients,
        coefficient_names: names.to_vec(),
        meta: FitMeta {
            converged: true,
            constant_outcome: true,
            ..FitMeta::default()
        },
        expansion: None,
    }
}

/// Logistic regression by iteratively reweighted least squares.
///
/// `ridge > 0` penalizes all non-intercept coefficients. A fit that fails to
/// converge or runs off to separation is refit with ridge 1e-4 and flagged.
pub fn fit_glm(x: &DesignMatrix, y: &[f64], ridge: f64) -> Result<FittedLearner> {
    check_outcomes(x, y)?;
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        return Ok(constant_outcome_fit(x.n_cols(), x.names(), first));
    }
    match irls(x.data(), y, ridge) {
        IrlsOutcome::Converged(coefficients, iterations) => Ok(FittedLearner {
            kind: LearnerKind::Glm,
            coefficients,
            coefficient_names: x.names().to_vec(),
            meta: FitMeta {
                iterations,
                converged: true,
                ridge,
                ..FitMeta::default()
            },
            expansion: None,
        }),
        IrlsOutcome::Unstable => {
            let ridge = if ridge > 0.0 { ridge * 100.0 } else { FALLBACK_RIDGE };
            match irls(x.data(), y, ridge) {
                IrlsOutcome::Converged(coefficients, iterations) => Ok(FittedLearner {
                    kind: LearnerKind::Glm,
                    coefficients,
                    coefficient_names: x.names().to_vec(),
                    meta: FitMeta {
                        iterations,
                        converged: true,
                        ridge,
                        separation_fallback: true,
                        ..FitMeta::default()
                    },
                    expansion: None,
                }),
                IrlsOutcome::Unstable => Err(Error::estimation(
                    "logistic fit failed to converge even with ridge fallback",
                )),
            }
        }
    }
}

/// GAM: natural cubic spline expansion of every numeric covariate (knots at
/// quantiles), then ridge-penalized logistic regression. With no numeric
/// covariates this reduces to `fit_glm`.
pub fn fit_gam(x: &DesignMatrix, y: &[f64], spline_knots: usize) -> Result<FittedLearner> {
    check_outcomes(x, y)?;
    if x.numeric_cols().is_empty() {
        return fit_glm(x, y, 0.0);
    }
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        return Ok(constant_outcome_fit(x.n_cols(), x.names(), first));
    }
    let expansion = SplineExpansion::fit(x, spline_knots);
    if expansion.n_extra_cols() == 0 {
        // Degenerate numerics: nothing beyond the linear terms.
        let mut fit = fit_glm(x, y, FALLBACK_RIDGE)?;
        fit.meta.reduced_knots = true;
        return Ok(fit);
    }
    let expanded = expansion.apply(x);
    let names = expansion.expanded_names(x);
    match irls(&expanded, y, FALLBACK_RIDGE) {
        IrlsOutcome::Converged(coefficients, iterations) => Ok(FittedLearner {
            kind: LearnerKind::Gam,
            coefficients,
            coefficient_names: names,
            meta: FitMeta {
                iterations,
                converged: true,
                ridge: FALLBACK_RIDGE,
                reduced_knots: expansion.any_reduced(),
                ..FitMeta::default()
            },
            expansion: Some(expansion),
        }),
        IrlsOutcome::Unstable => Err(Error::estimation("gam fit failed to converge")),
    }
}

/// Predicts the bounded empirical mean for every row.
pub fn fit_mean(y: &[f64]) -> Result<FittedLearner> {
    if y.is_empty() {
        return Err(Error::estimation("mean learner requires >= 1 observation"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    Ok(FittedLearner {
        kind: LearnerKind::Mean,
        coefficients: vec![logit(bound_probability(mean))],
        coefficient_names: vec!["intercept".to_string()],
        meta: FitMeta {
            converged: true,
            ..FitMeta::default()
        },
        expansion: None,
    })
}

fn check_outcomes(x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::estimation("learner requires >= 1 observation"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::estimation(format!(
            "outcome length {} does not match design rows {}",
            y.len(),
            x.n_rows()
        )));
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::estimation("outcomes must lie in [0,1]"));
    }
    Ok(())
}

enum IrlsOutcome {
    Converged(Vec<f64>, usize),
    Unstable,
}

fn irls(data: &Array2<f64>, y: &[f64], ridge: f64) -> IrlsOutcome {
    let n = data.nrows();
    let p = data.ncols();
    let mut beta = vec![0.0f64; p];
    let mut a = Array2::<f64>::zeros((p, p));
    let mut rhs = vec![0.0f64; p];

    for iter in 1..=IRLS_MAX_ITER {
        a.fill(0.0);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let row = data.row(i);
            let mut eta = 0.0;
            for j in 0..p {
                eta += row[j] * beta[j];
            }
            let mu = expit(eta);
            let w = (mu * (1.0 - mu)).max(1e-10);
            // Working response contribution: w * z = w*eta + (y - mu).
            let wz = w * eta + (y[i] - mu);
            for j in 0..p {
                let xj = row[j];
                rhs[j] += xj * wz;
                for k in 0..=j {
                    a[(j, k)] += w * xj * row[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                a[(k, j)] = a[(j, k)];
            }
        }
        if ridge > 0.0 {
            // Intercept stays unpenalized.
            for j in 1..p {
                a[(j, j)] += ridge;
            }
        }
        let new_beta = match linalg::solve_spd(&a, &rhs) {
            Some(b) => b,
            None => return IrlsOutcome::Unstable,
        };
        let max_change = new_beta
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let max_coef = new_beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        beta = new_beta;
        if !max_coef.is_finite() || max_coef > 1e3 {
            return IrlsOutcome::Unstable;
        }
        if max_change < IRLS_TOL {
            return IrlsOutcome::Converged(beta, iter);
        }
    }
    IrlsOutcome::Unstable
}
