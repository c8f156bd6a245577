//! Cross-validated ensemble over the candidate learners: V-fold CV risks,
//! simplex weights by coordinate descent, candidates refit on full data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{bernoulli_nll, CandidateSpec, DesignMatrix, FittedLearner};
use crate::error::{Error, Result};

/// Convex combination (default) or discrete selection of the single best
/// candidate by CV risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleMode {
    Convex,
    Discrete,
}

/// Fitted ensemble: full-data candidate fits plus simplex weights.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub specs: Vec<CandidateSpec>,
    pub candidates: Vec<FittedLearner>,
    pub weights: Vec<f64>,
    /// Held-out risk per candidate (mean negative Bernoulli log-likelihood).
    pub cv_risk: Vec<f64>,
    /// Held-out risk of the weighted combination.
    pub ensemble_cv_risk: f64,
    pub folds: usize,
    pub seed: u64,
    pub mode: EnsembleMode,
}

impl EnsembleModel {
    pub fn predict(&self, x: &DesignMatrix) -> Vec<f64> {
        let mut out = vec![0.0; x.n_rows()];
        for (w, cand) in self.weights.iter().zip(&self.candidates) {
            if *w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(cand.predict(x)) {
                *o += w * p;
            }
        }
        out
    }

    /// Label of the dominant candidate, for diagnostics.
    pub fn dominant_label(&self) -> &'static str {
        let (idx, _) = self
            .weights
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, w)| {
                if *w > acc.1 {
                    (i, *w)
                } else {
                    acc
                }
            });
        self.specs[idx].label()
    }
}

/// Seeded fold assignment, stratified by outcome (binary split at 0.5 covers
/// fractional outcomes too). Returns fold index per row.
fn assign_folds(y: &[f64], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; y.len()];
    let mut next = 0usize;
    for stratum in [true, false] {
        let mut idx: Vec<usize> = (0..y.len())
            .filter(|&i| (y[i] >= 0.5) == stratum)
            .collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

fn mean_nll(y: &[f64], p: &[f64]) -> f64 {
    y.iter()
        .zip(p)
        .map(|(yi, pi)| bernoulli_nll(*yi, *pi))
        .sum::<f64>()
        / y.len() as f64
}

/// V-fold cross-validated super learner.
///
/// Falls back to leave-one-out when n < V; a single candidate gets weight 1.
/// In convex mode the simplex weights start at the best candidate vertex and
/// descend pairwise, so the ensemble CV risk never exceeds the best
/// candidate's risk.
pub fn super_learner(
    x: &DesignMatrix,
    y: &[f64],
    specs: &[CandidateSpec],
    folds: usize,
    seed: u64,
    mode: EnsembleMode,
) -> Result<EnsembleModel> {
    if specs.is_empty() {
        return Err(Error::estimation("super learner requires >= 1 candidate"));
    }
    if folds < 2 {
        return Err(Error::estimation("super learner requires V >= 2 folds"));
    }
    let n = y.len();
    if n != x.n_rows() {
        return Err(Error::estimation("outcome/design length mismatch"));
    }
    if n < 2 {
        return Err(Error::estimation("super learner requires >= 2 observations"));
    }
    let folds = folds.min(n);
    let assignment = assign_folds(y, folds, seed);

    // Held-out prediction matrix, candidates in columns.
    let k = specs.len();
    let mut heldout = vec![vec![0.0f64; n]; k];
    for v in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| assignment[*i] != v).collect();
        let test: Vec<usize> = (0..n).filter(|i| assignment[*i] == v).collect();
        if test.is_empty() {
            continue;
        }
        let x_train = x.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let x_test = x.select_rows(&test);
        for (c, spec) in specs.iter().enumerate() {
            let fit = spec.fit(&x_train, &y_train)?;
            for (p, &i) in fit.predict(&x_test).iter().zip(&test) {
                heldout[c][i] = *p;
            }
        }
    }

    let cv_risk: Vec<f64> = heldout.iter().map(|p| mean_nll(y, p)).collect();

    let weights = match (k, mode) {
        (1, _) => vec![1.0],
        (_, EnsembleMode::Discrete) => {
            let best = argmin(&cv_risk);
            let mut w = vec![0.0; k];
            w[best] = 1.0;
            w
        }
        (_, EnsembleMode::Convex) => simplex_descent(&heldout, y, &cv_risk),
    };

    // Ensemble held-out risk at the chosen weights.
    let combo: Vec<f64> = (0..n)
        .map(|i| weights.iter().zip(&heldout).map(|(w, p)| w * p[i]).sum())
        .collect();
    let ensemble_cv_risk = mean_nll(y, &combo);

    let candidates: Result<Vec<FittedLearner>> = specs.iter().map(|s| s.fit(x, y)).collect();
    Ok(EnsembleModel {
        specs: specs.to_vec(),
        candidates: candidates?,
        weights,
        cv_risk,
        ensemble_cv_risk,
        folds,
        seed,
        mode,
    })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Pairwise coordinate descent over the simplex, starting from the best
/// vertex. Each move shifts mass between two coordinates along the line
/// minimizing the convex held-out risk; sweeps stop when a full pass
/// improves the risk by less than 1e-8.
fn simplex_descent(heldout: &[Vec<f64>], y: &[f64], cv_risk: &[f64]) -> Vec<f64> {
    let k = heldout.len();
    let n = y.len();
    let mut w = vec![0.0f64; k];
    w[argmin(cv_risk)] = 1.0;

    // Current combined prediction, updated incrementally.
    let mut combo: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|c| w[c] * heldout[c][i]).sum())
        .collect();
    let mut risk = mean_nll(y, &combo);

    for _sweep in 0..200 {
        let sweep_start = risk;
        for from in 0..k {
            for to in 0..k {
                if from == to || w[from] == 0.0 && w[to] == 0.0 {
                    continue;
                }
                // Move t in [-w[to], w[from]] of mass from `from` to `to`.
                let lo = -w[to];
                let hi = w[from];
                if hi - lo < 1e-14 {
                    continue;
                }
                let deriv = |t: f64| -> f64 {
                    let mut d = 0.0;
                    for i in 0..n {
                        let delta = heldout[to][i] - heldout[from][i];
                        let p = combo[i] + t * delta;
                        d += (p - y[i]) / (p * (1.0 - p)) * delta;
                    }
                    d / n as f64
                };
                let t = if deriv(lo) >= 0.0 {
                    lo
                } else if deriv(hi) <= 0.0 {
                    hi
                } else {
                    let (mut a, mut b) = (lo, hi);
                    for _ in 0..70 {
                        let m = 0.5 * (a + b);
                        if deriv(m) <= 0.0 {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    0.5 * (a + b)
                };
                if t == 0.0 {
                    continue;
                }
                let mut new_combo = combo.clone();
                for i in 0..n {
                    new_combo[i] += t * (heldout[to][i] - heldout[from][i]);
                }
                let new_risk = mean_nll(y, &new_combo);
                if new_risk < risk {
                    w[from] -= t;
                    w[to] += t;
                    // Clean tiny negatives from float error and renormalize.
                    for v in w.iter_mut() {
                        *v = v.max(0.0);
                    }
                    let total: f64 = w.iter().sum();
                    for v in w.iter_mut() {
                        *v /= total;
                    }
                    combo = new_combo;
                    risk = new_risk;
                }
            }
        }
        if sweep_start - risk < 1e-8 {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{DesignBuilder, EnsembleMode};
    use approx::assert_abs_diff_eq;

    fn logistic_data(n: usize, seed: u64, beta: f64) -> (DesignMatrix, Vec<f64>) {
        let mut state = seed.max(1);
        let mut next_unit = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut xv = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x = next_unit() * 2.0 - 1.0;
            let p = crate::learners::expit(-0.3 + beta * x);
            y.push(if next_unit() < p { 1.0 } else { 0.0 });
            xv.push(x);
        }
        let mut b = DesignBuilder::new(n);
        b.numeric("x", &xv);
        (b.build().unwrap(), y)
    }

    #[test]
    fn single_candidate_gets_weight_one() {
        let (x, y) = logistic_data(50, 3, 1.0);
        let ens = super_learner(&x, &y, &[CandidateSpec::glm()], 10, 1, EnsembleMode::Convex)
            .unwrap();
        assert_eq!(ens.weights, vec![1.0]);
    }

    #[test]
    fn ensemble_risk_never_worse_than_best_candidate() {
        let (x, y) = logistic_data(500, 11, 1.5);
        let ens = super_learner(
            &x,
            &y,
            &[CandidateSpec::Mean, CandidateSpec::glm()],
            10,
            5,
            EnsembleMode::Convex,
        )
        .unwrap();
        let min_candidate = ens.cv_risk.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(ens.ensemble_cv_risk <= min_candidate + 1e-10);
        // Weights live on the simplex.
        assert_abs_diff_eq!(ens.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(ens.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn glm_dominates_on_strong_signal() {
        let (x, y) = logistic_data(500, 11, 2.0);
        let ens = super_learner(
            &x,
            &y,
            &[CandidateSpec::Mean, CandidateSpec::glm()],
            10,
            5,
            EnsembleMode::Convex,
        )
        .unwrap();
        assert!(ens.weights[1] > 0.8, "glm weight {}", ens.weights[1]);
    }

    #[test]
    fn independent_outcome_favors_mean_learner() {
        // Monte Carlo over 100 seeds: with y independent of x the mean
        // learner should carry at least half the weight on average.
        let mut total = 0.0;
        for seed in 0..100u64 {
            let (x, y) = logistic_data(200, 1000 + seed, 0.0);
            let ens = super_learner(
                &x,
                &y,
                &[CandidateSpec::Mean, CandidateSpec::glm()],
                10,
                seed,
                EnsembleMode::Convex,
            )
            .unwrap();
            total += ens.weights[0];
        }
        let mean_weight = total / 100.0;
        assert!(mean_weight >= 0.5, "mean learner weight {mean_weight}");
    }

    #[test]
    fn discrete_mode_selects_single_best() {
        let (x, y) = logistic_data(300, 17, 1.5);
        let ens = super_learner(
            &x,
            &y,
            &[CandidateSpec::Mean, CandidateSpec::glm()],
            10,
            5,
            EnsembleMode::Discrete,
        )
        .unwrap();
        assert_eq!(ens.weights.iter().filter(|w| **w > 0.0).count(), 1);
        assert_eq!(ens.dominant_label(), "glm");
    }

    #[test]
    fn loo_fallback_when_n_below_folds() {
        let (x, y) = logistic_data(6, 21, 1.0);
        let ens = super_learner(
            &x,
            &y,
            &[CandidateSpec::Mean, CandidateSpec::glm()],
            10,
            5,
            EnsembleMode::Convex,
        )
        .unwrap();
        assert_eq!(ens.folds, 6);
    }

    #[test]
    fn determinism_same_seed_identical_weights() {
        let (x, y) = logistic_data(200, 31, 1.0);
        let specs = [CandidateSpec::Mean, CandidateSpec::glm(), CandidateSpec::gam()];
        let a = super_learner(&x, &y, &specs, 10, 9, EnsembleMode::Convex).unwrap();
        let b = super_learner(&x, &y, &specs, 10, 9, EnsembleMode::Convex).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.cv_risk, b.cv_risk);
        let c = super_learner(&x, &y, &specs, 10, 10, EnsembleMode::Convex).unwrap();
        assert!(a.cv_risk != c.cv_risk || a.weights != c.weights);
    }
}
