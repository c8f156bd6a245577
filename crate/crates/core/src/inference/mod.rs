//! Influence-curve standard errors, t-distribution tests and intervals,
//! and effect-scale transforms shared by every estimator in the crate.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale on which a between-arm effect is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectScale {
    RiskRatio,
    RiskDifference,
    MeanDifference,
}

impl EffectScale {
    /// Null value of the effect on its reporting scale.
    pub fn null_value(self) -> f64 {
        match self {
            EffectScale::RiskRatio => 1.0,
            EffectScale::RiskDifference | EffectScale::MeanDifference => 0.0,
        }
    }

    pub fn is_ratio(self) -> bool {
        matches!(self, EffectScale::RiskRatio)
    }
}

impl std::fmt::Display for EffectScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EffectScale::RiskRatio => "risk_ratio",
            EffectScale::RiskDifference => "risk_difference",
            EffectScale::MeanDifference => "mean_difference",
        };
        f.write_str(s)
    }
}

/// Direction in which the intervention is hypothesized to help.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenefitDirection {
    Increase,
    Decrease,
}

/// Sidedness of a t test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    OneUpper,
    Two,
}

/// Influence-curve standard error: sample standard deviation over sqrt(n).
#[derive(Debug, Clone, Copy)]
pub struct IcSe {
    pub se: f64,
    /// All influence values identical; inference from this SE is degenerate.
    pub degenerate: bool,
}

pub fn ic_se(ic_values: &[f64]) -> Result<IcSe> {
    let n = ic_values.len();
    if n < 2 {
        return Err(Error::estimation(
            "influence-curve SE requires at least 2 values",
        ));
    }
    let nf = n as f64;
    let mean = ic_values.iter().sum::<f64>() / nf;
    let ss = ic_values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let sd = (ss / (nf - 1.0)).sqrt();
    let se = sd / nf.sqrt();
    Ok(IcSe {
        se,
        degenerate: se == 0.0,
    })
}

/// Result of a t-based test and interval.
#[derive(Debug, Clone, Copy)]
pub struct TInference {
    pub ci: (f64, f64),
    pub p: f64,
    /// Critical value used for the interval.
    pub critical: f64,
    pub degenerate: bool,
}

/// Two-sided interval at `level` and p-value (one-sided upper or two-sided)
/// for `estimate` against a null of zero, using the t distribution on `df`
/// degrees of freedom. CI and p come from the same quantile routine, so
/// `p_two < 1 - level` exactly when the interval excludes zero.
pub fn t_inference(estimate: f64, se: f64, df: usize, sided: Sided, level: f64) -> Result<TInference> {
    if se < 0.0 {
        return Err(Error::estimation("standard error must be nonnegative"));
    }
    if df < 1 {
        return Err(Error::estimation("t inference requires df >= 1"));
    }
    let dff = df as f64;
    let crit = special::t_quantile(1.0 - (1.0 - level) / 2.0, dff);
    if se == 0.0 {
        let p = match sided {
            Sided::OneUpper => {
                if estimate > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Sided::Two => {
                if estimate != 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
        };
        return Ok(TInference {
            ci: (estimate, estimate),
            p,
            critical: crit,
            degenerate: true,
        });
    }
    let t = estimate / se;
    let p = match sided {
        Sided::OneUpper => 1.0 - special::t_cdf(t, dff),
        Sided::Two => 2.0 * (1.0 - special::t_cdf(t.abs(), dff)),
    };
    Ok(TInference {
        ci: (estimate - crit * se, estimate + crit * se),
        p,
        critical: crit,
        degenerate: false,
    })
}

/// Effect and per-unit influence values on the analysis scale
/// (log scale for ratios).
#[derive(Debug, Clone)]
pub struct ScaledEffect {
    pub effect: f64,
    /// Effect mapped to the scale inference runs on: log(RR) for ratios,
    /// the effect itself otherwise.
    pub analysis_effect: f64,
    pub analysis_ic: Vec<f64>,
    pub se: f64,
    pub degenerate: bool,
}

/// Combine arm-specific estimates and influence curves into an effect on the
/// requested scale. Ratios are analyzed on the log scale with the delta
/// method: IC = ic1/psi1 - ic0/psi0.
pub fn transform_scale(
    psi1: f64,
    psi0: f64,
    ic1: &[f64],
    ic0: &[f64],
    scale: EffectScale,
) -> Result<ScaledEffect> {
    if ic1.len() != ic0.len() {
        return Err(Error::estimation(
            "arm influence curves must have equal length",
        ));
    }
    let (effect, analysis_effect, ic): (f64, f64, Vec<f64>) = match scale {
        EffectScale::RiskDifference | EffectScale::MeanDifference => {
            let eff = psi1 - psi0;
            let ic = ic1.iter().zip(ic0).map(|(a, b)| a - b).collect();
            (eff, eff, ic)
        }
        EffectScale::RiskRatio => {
            if psi0 <= 0.0 {
                return Err(Error::estimation(
                    "risk ratio undefined: control-arm estimate is zero; use the difference scale",
                ));
            }
            if psi1 <= 0.0 {
                return Err(Error::estimation(
                    "risk ratio undefined: intervention-arm estimate is zero; use the difference scale",
                ));
            }
            let eff = psi1 / psi0;
            let ic = ic1
                .iter()
                .zip(ic0)
                .map(|(a, b)| a / psi1 - b / psi0)
                .collect();
            (eff, eff.ln(), ic)
        }
    };
    let IcSe { se, degenerate } = ic_se(&ic)?;
    Ok(ScaledEffect {
        effect,
        analysis_effect,
        analysis_ic: ic,
        se,
        degenerate,
    })
}

/// A fully assembled effect estimate: arm means, contrast, interval, p-values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub psi1: f64,
    pub psi0: f64,
    pub psi1_ci: (f64, f64),
    pub psi0_ci: (f64, f64),
    pub effect: f64,
    pub scale: EffectScale,
    /// Standard error on the analysis scale (log scale for ratios).
    pub se: f64,
    pub df: usize,
    /// Two-sided 95% interval on the effect's reporting scale.
    pub ci: (f64, f64),
    pub p_one_sided: f64,
    pub p_two_sided: f64,
    pub direction: BenefitDirection,
    /// Label of the adjustment set the estimator actually used.
    pub adjustment: String,
    /// Label of the weighting scheme ("equal", "size", "individual").
    pub weight_scheme: String,
    pub degenerate: bool,
}

/// Inputs for assembling an [`EffectEstimate`] from arm-specific fits.
pub struct ArmSummaries<'a> {
    pub psi1: f64,
    pub psi0: f64,
    pub ic1: &'a [f64],
    pub ic0: &'a [f64],
    pub df: usize,
    pub scale: EffectScale,
    pub direction: BenefitDirection,
    pub adjustment: String,
    pub weight_scheme: String,
}

impl EffectEstimate {
    /// Build the full estimate: scale transform, arm-specific intervals, and
    /// one- and two-sided p-values oriented by the benefit direction.
    pub fn from_arms(inp: ArmSummaries<'_>) -> Result<EffectEstimate> {
        let scaled = transform_scale(inp.psi1, inp.psi0, inp.ic1, inp.ic0, inp.scale)?;
        let two = t_inference(scaled.analysis_effect, scaled.se, inp.df, Sided::Two, 0.95)?;
        let oriented = match inp.direction {
            BenefitDirection::Increase => scaled.analysis_effect,
            BenefitDirection::Decrease => -scaled.analysis_effect,
        };
        // Ratios are tested against log(1) = 0, differences against 0, so the
        // analysis-scale estimate is already centered on the null.
        let one = t_inference(oriented, scaled.se, inp.df, Sided::OneUpper, 0.95)?;
        let ci = if inp.scale.is_ratio() {
            (two.ci.0.exp(), two.ci.1.exp())
        } else {
            two.ci
        };
        let arm_ci = |psi: f64, ic: &[f64]| -> Result<(f64, f64)> {
            let se = ic_se(ic)?.se;
            let t = t_inference(psi, se, inp.df, Sided::Two, 0.95)?;
            Ok(t.ci)
        };
        Ok(EffectEstimate {
            psi1: inp.psi1,
            psi0: inp.psi0,
            psi1_ci: arm_ci(inp.psi1, inp.ic1)?,
            psi0_ci: arm_ci(inp.psi0, inp.ic0)?,
            effect: scaled.effect,
            scale: inp.scale,
            se: scaled.se,
            df: inp.df,
            ci,
            p_one_sided: one.p,
            p_two_sided: two.p,
            direction: inp.direction,
            adjustment: inp.adjustment,
            weight_scheme: inp.weight_scheme,
            degenerate: scaled.degenerate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ic_se_hand_values() {
        let r = ic_se(&[-1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r.se, 1.0, epsilon = 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn ic_se_constant_is_degenerate() {
        let r = ic_se(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.se, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn ic_se_scales_linearly() {
        let vals = [0.3, -1.2, 0.9, 2.4, -0.7];
        let base = ic_se(&vals).unwrap().se;
        let scaled: Vec<f64> = vals.iter().map(|v| v * -3.5).collect();
        assert_abs_diff_eq!(ic_se(&scaled).unwrap().se, 3.5 * base, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_p_at_zero_statistic() {
        let r = t_inference(0.0, 1.0, 26, Sided::OneUpper, 0.95).unwrap();
        assert_eq!(r.p, 0.5);
    }

    #[test]
    fn zero_se_is_flagged() {
        let r = t_inference(0.4, 0.0, 10, Sided::OneUpper, 0.95).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 0.0);
        let r = t_inference(-0.4, 0.0, 10, Sided::OneUpper, 0.95).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn transform_ratio_hand_values() {
        let ic1 = vec![0.1, -0.1, 0.05, -0.05];
        let ic0 = vec![0.02, -0.02, 0.01, -0.01];
        let s = transform_scale(0.7, 0.5, &ic1, &ic0, EffectScale::RiskRatio).unwrap();
        assert_abs_diff_eq!(s.effect, 1.4, epsilon = 1e-12);
        assert_abs_diff_eq!(s.analysis_effect, 0.33647, epsilon = 1e-5);
    }

    #[test]
    fn transform_null_effects() {
        let ic = vec![0.1, -0.1, 0.2, -0.2];
        let s = transform_scale(0.5, 0.5, &ic, &ic, EffectScale::RiskDifference).unwrap();
        assert_eq!(s.effect, 0.0);
        let s = transform_scale(0.5, 0.5, &ic, &ic, EffectScale::RiskRatio).unwrap();
        assert_eq!(s.effect, 1.0);
    }

    #[test]
    fn ratio_with_zero_control_errors() {
        let ic = vec![0.0, 0.0];
        assert!(transform_scale(0.5, 0.0, &ic, &ic, EffectScale::RiskRatio).is_err());
    }

    #[test]
    fn p_and_ci_agree_on_null_exclusion() {
        // By-construction equivalence: two-sided p < 0.05 iff the 95% CI
        // excludes the null, checked on a grid of estimates.
        for i in 0..40 {
            let est = -1.0 + 0.05 * i as f64;
            let r = t_inference(est, 0.31, 26, Sided::Two, 0.95).unwrap();
            let excludes = r.ci.0 > 0.0 || r.ci.1 < 0.0;
            assert_eq!(r.p < 0.05, excludes, "estimate {est}");
        }
    }

    #[test]
    fn one_sided_is_half_two_sided_on_favorable_side() {
        let est = 0.4;
        let one = t_inference(est, 0.3, 26, Sided::OneUpper, 0.95).unwrap();
        let two = t_inference(est, 0.3, 26, Sided::Two, 0.95).unwrap();
        assert_abs_diff_eq!(one.p, two.p / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn difference_ci_is_shift_equivariant() {
        let ic1 = vec![0.1, -0.3, 0.2, 0.0];
        let ic0 = vec![-0.1, 0.1, 0.0, 0.0];
        let mk = |p1: f64, p0: f64| {
            EffectEstimate::from_arms(ArmSummaries {
                psi1: p1,
                psi0: p0,
                ic1: &ic1,
                ic0: &ic0,
                df: 26,
                scale: EffectScale::MeanDifference,
                direction: BenefitDirection::Increase,
                adjustment: "none".into(),
                weight_scheme: "equal".into(),
            })
            .unwrap()
        };
        let a = mk(0.6, 0.4);
        let b = mk(0.7, 0.5);
        assert_abs_diff_eq!(a.ci.0, b.ci.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.ci.1, b.ci.1, epsilon = 1e-12);
        assert_abs_diff_eq!(a.effect, b.effect, epsilon = 1e-12);
    }
}
