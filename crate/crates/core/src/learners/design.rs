//! Design-matrix construction: intercept, one-hot categoricals, standardized
//! numerics, and natural cubic spline expansion for the GAM learner.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Encoded covariate matrix with an intercept in column 0.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    data: Array2<f64>,
    names: Vec<String>,
    /// Columns eligible for spline expansion (standardized numerics).
    numeric_cols: Vec<usize>,
    /// Names of constant columns dropped during encoding.
    dropped: Vec<String>,
}

impl DesignMatrix {
    /// Intercept-only design.
    pub fn intercept_only(n: usize) -> DesignMatrix {
        DesignMatrix {
            data: Array2::ones((n, 1)),
            names: vec!["intercept".to_string()],
            numeric_cols: vec![],
            dropped: vec![],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn numeric_cols(&self) -> &[usize] {
        &self.numeric_cols
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// New design containing the given rows, preserving encoding metadata.
    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            data: self.data.select(Axis(0), idx),
            names: self.names.clone(),
            numeric_cols: self.numeric_cols.clone(),
            dropped: self.dropped.clone(),
        }
    }

    /// Copy with one column overwritten by a constant (counterfactual arm).
    pub fn with_column_set(&self, name: &str, value: f64) -> Result<DesignMatrix> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::estimation(format!("design has no column `{name}`")))?;
        let mut out = self.clone();
        out.data.column_mut(idx).fill(value);
        Ok(out)
    }
}

/// Incremental builder; encoding decisions are made from the supplied data.
pub struct DesignBuilder {
    n: usize,
    columns: Vec<(String, Vec<f64>, bool)>,
    dropped: Vec<String>,
}

impl DesignBuilder {
    pub fn new(n: usize) -> DesignBuilder {
        DesignBuilder {
            n,
            columns: Vec::new(),
            dropped: Vec::new(),
        }
    }

    fn push(&mut self, name: String, values: Vec<f64>, numeric: bool) -> &mut Self {
        assert_eq!(values.len(), self.n, "column `{name}` length mismatch");
        let first = values.first().copied().unwrap_or(0.0);
        if values.iter().all(|v| *v == first) {
            self.dropped.push(name);
        } else {
            self.columns.push((name, values, numeric));
        }
        self
    }

    /// Standardized numeric covariate, eligible for spline expansion.
    pub fn numeric(&mut self, name: &str, values: &[f64]) -> &mut Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let std: Vec<f64> = if sd > 0.0 {
            values.iter().map(|v| (v - mean) / sd).collect()
        } else {
            values.to_vec()
        };
        self.push(name.to_string(), std, true)
    }

    /// 0/1 covariate kept on its natural scale.
    pub fn binary(&mut self, name: &str, values: &[f64]) -> &mut Self {
        self.push(name.to_string(), values.to_vec(), false)
    }

    /// One-hot encoding with the first (sorted) level as reference.
    pub fn categorical(&mut self, name: &str, values: &[&str]) -> &mut Self {
        let mut levels: Vec<&str> = values.to_vec();
        levels.sort();
        levels.dedup();
        for level in levels.iter().skip(1) {
            let col: Vec<f64> = values
                .iter()
                .map(|v| if v == level { 1.0 } else { 0.0 })
                .collect();
            self.push(format!("{name}={level}"), col, false);
        }
        self
    }

    pub fn build(&self) -> Result<DesignMatrix> {
        let p = self.columns.len() + 1;
        let mut data = Array2::ones((self.n, p));
        let mut names = vec!["intercept".to_string()];
        let mut numeric_cols = vec![];
        for (j, (name, values, numeric)) in self.columns.iter().enumerate() {
            for (i, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::data(format!(
                        "non-finite value in design column `{name}` row {i}"
                    )));
                }
                data[(i, j + 1)] = *v;
            }
            names.push(name.clone());
            if *numeric {
                numeric_cols.push(j + 1);
            }
        }
        Ok(DesignMatrix {
            data,
            names,
            numeric_cols,
            dropped: self.dropped.clone(),
        })
    }
}

/// Natural cubic spline basis for one covariate: N_1(x) = x plus K-2
/// curvature terms from K knots, linear beyond the boundary knots.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    pub knots: Vec<f64>,
    /// Requested knot count could not be honored (too few distinct values).
    pub reduced: bool,
}

impl SplineBasis {
    /// Knots at evenly spaced quantiles of the observed values. Duplicate
    /// knots are collapsed; fewer distinct values than requested knots
    /// reduces the knot count with a flag.
    pub fn from_quantiles(values: &[f64], n_knots: usize) -> SplineBasis {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| -> f64 {
            let h = (sorted.len() as f64 - 1.0) * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        let mut knots: Vec<f64> = (1..=n_knots)
            .map(|k| q(k as f64 / (n_knots as f64 + 1.0)))
            .collect();
        knots.dedup();
        let reduced = knots.len() < n_knots;
        SplineBasis { knots, reduced }
    }

    /// Number of basis columns beyond the linear term.
    pub fn n_nonlinear(&self) -> usize {
        self.knots.len().saturating_sub(2)
    }

    /// Evaluate the nonlinear basis terms at x.
    pub fn eval_nonlinear(&self, x: f64, out: &mut Vec<f64>) {
        let k = self.knots.len();
        if k < 3 {
            return;
        }
        let cube = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
        let last = self.knots[k - 1];
        let d = |j: usize| -> f64 {
            (cube(x - self.knots[j]) - cube(x - last)) / (last - self.knots[j])
        };
        let d_km1 = d(k - 2);
        for j in 0..k - 2 {
            out.push(d(j) - d_km1);
        }
    }
}

/// Expansion recipe: per numeric column, the spline basis fit on training
/// data. Applying it to a matrix with the same base columns appends the
/// nonlinear terms after the original columns.
#[derive(Debug, Clone)]
pub struct SplineExpansion {
    pub per_column: Vec<(usize, SplineBasis)>,
}

impl SplineExpansion {
    pub fn fit(x: &DesignMatrix, n_knots: usize) -> SplineExpansion {
        let per_column = x
            .numeric_cols()
            .iter()
            .map(|&col| {
                let values: Vec<f64> = x.data().column(col).to_vec();
                (col, SplineBasis::from_quantiles(&values, n_knots))
            })
            .collect();
        SplineExpansion { per_column }
    }

    pub fn any_reduced(&self) -> bool {
        self.per_column.iter().any(|(_, b)| b.reduced)
    }

    pub fn n_extra_cols(&self) -> usize {
        self.per_column.iter().map(|(_, b)| b.n_nonlinear()).sum()
    }

    /// Expanded data matrix: original columns then spline terms.
    pub fn apply(&self, x: &DesignMatrix) -> Array2<f64> {
        let n = x.n_rows();
        let extra = self.n_extra_cols();
        let mut out = Array2::zeros((n, x.n_cols() + extra));
        out.slice_mut(ndarray::s![.., ..x.n_cols()])
            .assign(x.data());
        let mut buf = Vec::new();
        for i in 0..n {
            buf.clear();
            for (col, basis) in &self.per_column {
                basis.eval_nonlinear(x.data()[(i, *col)], &mut buf);
            }
            for (j, v) in buf.iter().enumerate() {
                out[(i, x.n_cols() + j)] = *v;
            }
        }
        out
    }

    pub fn expanded_names(&self, x: &DesignMatrix) -> Vec<String> {
        let mut names = x.names().to_vec();
        for (col, basis) in &self.per_column {
            for j in 0..basis.n_nonlinear() {
                names.push(format!("{}_ns{}", x.names()[*col], j + 1));
            }
        }
        names
    }
}

/// Row-wise prediction vector as an owned Array1.
pub fn linear_predictor(data: &Array2<f64>, coef: &[f64]) -> Array1<f64> {
    debug_assert_eq!(data.ncols(), coef.len());
    let coef = Array1::from_vec(coef.to_vec());
    data.dot(&coef)
}
