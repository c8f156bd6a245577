//! Targeted minimum loss-based estimators: means under missingness, pooled
//! individual-level treatment effects with cluster-robust influence curves,
//! and a two-time-point sequential variant for post-baseline outmigration.

mod effect;
mod fluctuate;
mod mean_missing;
mod sequential;

pub use effect::{tmle_effect_individual, EffectData, Propensity};
pub use fluctuate::{fluctuate_logistic, Fluctuation};
pub use mean_missing::{tmle_mean_missing, MissingnessData};
pub use sequential::{tmle_sequential, SequentialData};

use crate::data::ParticipantRecord;
use crate::error::{Error, Result};
use crate::learners::{
    super_learner, CandidateSpec, DesignBuilder, DesignMatrix, EnsembleMode, EnsembleModel,
};

/// Estimated propensities (measurement or exposure mechanisms) are truncated
/// to this range, so no clever covariate exceeds 1/0.025 = 40 in magnitude.
pub const PROPENSITY_BOUNDS: (f64, f64) = (0.025, 0.975);

pub fn bound_propensity(p: f64) -> f64 {
    p.clamp(PROPENSITY_BOUNDS.0, PROPENSITY_BOUNDS.1)
}

/// Which learners back the nuisance regressions inside a TMLE.
#[derive(Debug, Clone)]
pub struct LearnerSpec {
    pub candidates: Vec<CandidateSpec>,
    pub folds: usize,
    pub seed: u64,
    pub mode: EnsembleMode,
}

impl LearnerSpec {
    /// Full ensemble: logistic GLM, spline GAM, and the mean.
    pub fn ensemble(seed: u64) -> LearnerSpec {
        LearnerSpec {
            candidates: vec![CandidateSpec::glm(), CandidateSpec::gam(), CandidateSpec::Mean],
            folds: 10,
            seed,
            mode: EnsembleMode::Convex,
        }
    }

    /// Plain logistic regression; the fast default inside simulations.
    pub fn glm_only(seed: u64) -> LearnerSpec {
        LearnerSpec {
            candidates: vec![CandidateSpec::glm()],
            folds: 10,
            seed,
            mode: EnsembleMode::Convex,
        }
    }

    pub fn mean_only(seed: u64) -> LearnerSpec {
        LearnerSpec {
            candidates: vec![CandidateSpec::Mean],
            folds: 10,
            seed,
            mode: EnsembleMode::Convex,
        }
    }

    /// Fit the configured learners. A single candidate skips the CV pass and
    /// is fit directly on the full data with weight one.
    pub fn fit(&self, x: &DesignMatrix, y: &[f64]) -> Result<EnsembleModel> {
        if self.candidates.len() == 1 {
            let fit = self.candidates[0].fit(x, y)?;
            return Ok(EnsembleModel {
                specs: self.candidates.clone(),
                candidates: vec![fit],
                weights: vec![1.0],
                cv_risk: vec![f64::NAN],
                ensemble_cv_risk: f64::NAN,
                folds: self.folds,
                seed: self.seed,
                mode: self.mode,
            });
        }
        super_learner(x, y, &self.candidates, self.folds, self.seed, self.mode)
    }
}

/// Prespecified individual-level adjustment variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AdjustmentVar {
    Age,
    Sex,
    BaselineSuppressed,
    /// Post-baseline indicator, used by the sequential estimator.
    Outmigration,
}

impl AdjustmentVar {
    pub fn label(self) -> &'static str {
        match self {
            AdjustmentVar::Age => "age",
            AdjustmentVar::Sex => "sex",
            AdjustmentVar::BaselineSuppressed => "baseline_suppressed",
            AdjustmentVar::Outmigration => "outmigration",
        }
    }
}

/// A duplicate-free subset of the prespecified adjustment dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjustmentSet(Vec<AdjustmentVar>);

impl AdjustmentSet {
    pub fn new(vars: Vec<AdjustmentVar>) -> Result<AdjustmentSet> {
        let mut seen = vars.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != vars.len() {
            return Err(Error::config("duplicate variable in adjustment set"));
        }
        Ok(AdjustmentSet(vars))
    }

    pub fn empty() -> AdjustmentSet {
        AdjustmentSet(vec![])
    }

    /// Age, sex, and baseline viral suppression status.
    pub fn standard() -> AdjustmentSet {
        AdjustmentSet(vec![
            AdjustmentVar::Age,
            AdjustmentVar::Sex,
            AdjustmentVar::BaselineSuppressed,
        ])
    }

    /// Standard set plus the post-baseline outmigration indicator.
    pub fn with_outmigration() -> AdjustmentSet {
        AdjustmentSet(vec![
            AdjustmentVar::Age,
            AdjustmentVar::Sex,
            AdjustmentVar::BaselineSuppressed,
            AdjustmentVar::Outmigration,
        ])
    }

    pub fn vars(&self) -> &[AdjustmentVar] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn label(&self) -> String {
        if self.0.is_empty() {
            "none".to_string()
        } else {
            self.0
                .iter()
                .map(|v| v.label())
                .collect::<Vec<_>>()
                .join("+")
        }
    }
}

/// Encode an adjustment set over participants into a design matrix. Missing
/// baseline suppression is imputed to the mode with a missingness indicator.
pub fn adjustment_design(
    participants: &[&ParticipantRecord],
    adjustment: &AdjustmentSet,
) -> Result<DesignMatrix> {
    let n = participants.len();
    let mut builder = DesignBuilder::new(n);
    for var in adjustment.vars() {
        match var {
            AdjustmentVar::Age => {
                let ages: Vec<f64> = participants.iter().map(|p| p.age as f64).collect();
                builder.numeric("age", &ages);
            }
            AdjustmentVar::Sex => {
                let male: Vec<f64> = participants
                    .iter()
                    .map(|p| match p.sex {
                        crate::data::Sex::Male => 1.0,
                        crate::data::Sex::Female => 0.0,
                    })
                    .collect();
                builder.binary("sex_male", &male);
            }
            AdjustmentVar::BaselineSuppressed => {
                let observed: Vec<bool> = participants
                    .iter()
                    .filter_map(|p| p.baseline_suppressed)
                    .collect();
                let n_true = observed.iter().filter(|b| **b).count();
                let mode = n_true * 2 >= observed.len();
                let mut any_missing = false;
                let vals: Vec<f64> = participants
                    .iter()
                    .map(|p| match p.baseline_suppressed {
                        Some(b) => b as u8 as f64,
                        None => {
                            any_missing = true;
                            mode as u8 as f64
                        }
                    })
                    .collect();
                builder.binary("baseline_suppressed", &vals);
                if any_missing {
                    let miss: Vec<f64> = participants
                        .iter()
                        .map(|p| p.baseline_suppressed.is_none() as u8 as f64)
                        .collect();
                    builder.binary("baseline_suppressed_missing", &miss);
                }
            }
            AdjustmentVar::Outmigration => {
                let vals: Vec<f64> = participants
                    .iter()
                    .map(|p| p.outmigration_date.is_some() as u8 as f64)
                    .collect();
                builder.binary("outmigrated", &vals);
            }
        }
    }
    builder.build()
}

/// A targeted fit: point estimate, influence-curve values, fluctuation, and
/// nuisance diagnostics.
#[derive(Debug, Clone)]
pub struct TmleFit {
    pub estimate: f64,
    /// One influence value per input row (mean zero).
    pub ic: Vec<f64>,
    pub epsilon: f64,
    pub diagnostics: TmleDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct TmleDiagnostics {
    /// Bounded measurement/exposure probabilities observed in the fit.
    pub g_min: f64,
    pub g_max: f64,
    /// How many propensities the truncation bounds clipped.
    pub g_truncated: usize,
    pub fluctuation_converged: bool,
}

impl TmleFit {
    /// SE of the estimate from the iid influence curve.
    pub fn se(&self) -> Result<f64> {
        Ok(crate::inference::ic_se(&self.ic)?.se)
    }

    pub fn ic_mean(&self) -> f64 {
        self.ic.iter().sum::<f64>() / self.ic.len() as f64
    }
}

/// Sum influence values within clusters and rescale so the generic
/// sd/sqrt(J) formula applies to the per-cluster values.
pub fn cluster_aggregate_ic(ic: &[f64], cluster_of: &[usize], n_clusters: usize) -> Vec<f64> {
    debug_assert_eq!(ic.len(), cluster_of.len());
    let mut sums = vec![0.0f64; n_clusters];
    for (v, &c) in ic.iter().zip(cluster_of) {
        sums[c] += v;
    }
    let scale = n_clusters as f64 / ic.len() as f64;
    sums.iter_mut().for_each(|s| *s *= scale);
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjustment_set_rejects_duplicates() {
        assert!(AdjustmentSet::new(vec![AdjustmentVar::Age, AdjustmentVar::Age]).is_err());
        assert!(AdjustmentSet::new(vec![AdjustmentVar::Age, AdjustmentVar::Sex]).is_ok());
    }

    #[test]
    fn labels() {
        assert_eq!(AdjustmentSet::empty().label(), "none");
        assert_eq!(
            AdjustmentSet::standard().label(),
            "age+sex+baseline_suppressed"
        );
    }

    #[test]
    fn cluster_aggregation_preserves_mean_zero() {
        let ic = [1.0, -1.0, 2.0, -2.0, 0.5, -0.5];
        let clusters = [0, 0, 1, 1, 2, 2];
        let agg = cluster_aggregate_ic(&ic, &clusters, 3);
        assert_eq!(agg.len(), 3);
        assert!(agg.iter().sum::<f64>().abs() < 1e-12);
    }
}
