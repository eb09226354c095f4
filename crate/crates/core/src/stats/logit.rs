//! Binary logistic regression fitted by Newton-Raphson (IRLS).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{normal_two_sided, StatsError};
use crate::diag::Warning;

pub const INTERCEPT: &str = "(intercept)";

const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-8;
const SEPARATION_BOUND: f64 = 15.0;
const RIDGE: f64 = 1e-8;
/// Reciprocal condition number below which XᵀX is treated as rank deficient.
const RANK_RCOND: f64 = 1e-12;

/// Named design matrix. The first column is expected to be the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
}

impl DesignMatrix {
    /// Builds a design from covariate rows, prepending an intercept column.
    pub fn with_intercept(names: &[&str], rows: &[Vec<f64>]) -> Self {
        let k = names.len() + 1;
        let mut data = DMatrix::zeros(rows.len(), k);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), names.len(), "row {i} has the wrong width");
            data[(i, 0)] = 1.0;
            for (j, v) in r.iter().enumerate() {
                data[(i, j + 1)] = *v;
            }
        }
        let mut all = vec![INTERCEPT.to_string()];
        all.extend(names.iter().map(|s| s.to_string()));
        Self { names: all, data }
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub covariates: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub z_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub pseudo_r2: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub n_obs: usize,
    /// Max-norm of Xᵀ(y − σ(Xβ)) at the returned coefficients.
    pub score_max_norm: f64,
    pub ridge_applied: bool,
    pub warnings: Vec<Warning>,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c == name)
    }

    /// σ(Xβ) for every row of `design`.
    pub fn predict(&self, design: &DesignMatrix) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (&design.data * beta).iter().map(|&eta| sigmoid(eta)).collect()
    }
}

/// McFadden's pseudo-R²: `1 − LL_model / LL_null`.
pub fn mcfadden_r2(ll_model: f64, ll_null: f64) -> Result<f64, StatsError> {
    if ll_null == 0.0 {
        return Err(StatsError::ZeroNullLikelihood);
    }
    Ok(1.0 - ll_model / ll_null)
}

pub fn logit_fit(design: &DesignMatrix, y: &[bool]) -> Result<RegressionFit, StatsError> {
    let (n, k) = (design.nrows(), design.ncols());
    if y.len() != n {
        return Err(StatsError::OutcomeLength { outcomes: y.len(), rows: n });
    }
    if n == 0 {
        return Err(StatsError::NoObservations);
    }
    if n < k {
        return Err(StatsError::TooFewRows { rows: n, cols: k });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(StatsError::Separation {
            covariates: vec![INTERCEPT.to_string()],
        });
    }

    let x = &design.data;
    let yv = DVector::from_iterator(n, y.iter().map(|&v| if v { 1.0 } else { 0.0 }));

    let gram = x.transpose() * x;
    if reciprocal_condition(&gram) < RANK_RCOND {
        return Err(StatsError::RankDeficient);
    }

    let mut warnings = Vec::new();
    let mut ridge = false;
    let mut beta = DVector::zeros(k);
    let mut ll = log_likelihood(x, &yv, &beta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (score, info) = score_and_information(x, &yv, &beta);
        let step = match solve(&info, &score, &mut ridge, &mut warnings) {
            Some(s) => s,
            None if max_abs(&beta) > SEPARATION_BOUND => {
                return Err(separation(design, &beta));
            }
            None => return Err(StatsError::RankDeficient),
        };

        // step halving keeps the likelihood monotone
        let mut t = 1.0;
        let mut candidate = &beta + &step * t;
        let mut cand_ll = log_likelihood(x, &yv, &candidate);
        while cand_ll < ll - 1e-12 * ll.abs().max(1.0) && t > 1e-10 {
            t *= 0.5;
            candidate = &beta + &step * t;
            cand_ll = log_likelihood(x, &yv, &candidate);
        }
        let change = max_abs(&(&candidate - &beta));
        beta = candidate;
        ll = cand_ll;
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }

    if !converged && max_abs(&beta) > SEPARATION_BOUND {
        return Err(separation(design, &beta));
    }
    if !converged {
        warnings.push(Warning::new(
            "logit-not-converged",
            format!("Newton iterations stopped after {MAX_ITERATIONS} without converging"),
        ));
    }

    let (score, info) = score_and_information(x, &yv, &beta);
    let covariance = invert(&info, &mut ridge, &mut warnings).ok_or(StatsError::RankDeficient)?;
    let standard_errors: Vec<f64> = (0..k).map(|i| covariance[(i, i)].sqrt()).collect();
    let z_values: Vec<f64> = beta.iter().zip(&standard_errors).map(|(b, se)| b / se).collect();
    let p_values: Vec<f64> = z_values.iter().map(|&z| normal_two_sided(z)).collect();

    let p_bar = positives as f64 / n as f64;
    let null_ll = n as f64 * (p_bar * p_bar.ln() + (1.0 - p_bar) * (1.0 - p_bar).ln());
    let pseudo_r2 = mcfadden_r2(ll, null_ll)?;

    Ok(RegressionFit {
        covariates: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        z_values,
        p_values,
        log_likelihood: ll,
        null_log_likelihood: null_ll,
        pseudo_r2,
        n_iterations: iterations,
        converged,
        n_obs: n,
        score_max_norm: max_abs(&score),
        ridge_applied: ridge,
        warnings,
    })
}

fn separation(design: &DesignMatrix, beta: &DVector<f64>) -> StatsError {
    let covariates = design
        .names
        .iter()
        .zip(beta.iter())
        .filter(|(_, b)| b.abs() > SEPARATION_BOUND)
        .map(|(n, _)| n.clone())
        .collect();
    StatsError::Separation { covariates }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^η) without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(&e, &yi)| yi * e - softplus(e)).sum()
}

fn score_and_information(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let eta = x * beta;
    let p = eta.map(sigmoid);
    let residual = y - &p;
    let score = x.transpose() * residual;
    let mut weighted = x.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= p[i] * (1.0 - p[i]);
    }
    let info = x.transpose() * weighted;
    (score, info)
}

fn solve(
    info: &DMatrix<f64>,
    rhs: &DVector<f64>,
    ridge: &mut bool,
    warnings: &mut Vec<Warning>,
) -> Option<DVector<f64>> {
    factor(info, ridge, warnings).map(|c| c.solve(rhs))
}

fn invert(info: &DMatrix<f64>, ridge: &mut bool, warnings: &mut Vec<Warning>) -> Option<DMatrix<f64>> {
    factor(info, ridge, warnings).map(|c| c.inverse())
}

fn factor(
    info: &DMatrix<f64>,
    ridge: &mut bool,
    warnings: &mut Vec<Warning>,
) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut m = info.clone();
    if *ridge {
        add_ridge(&mut m);
    }
    if !*ridge && reciprocal_condition(&m) < RANK_RCOND {
        *ridge = true;
        warnings.push(Warning::new(
            "logit-ridge",
            format!("information matrix numerically singular; added {RIDGE:e} to its diagonal"),
        ));
        add_ridge(&mut m);
    }
    if reciprocal_condition(&m) < RANK_RCOND {
        return None;
    }
    m.cholesky()
}

fn add_ridge(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        m[(i, i)] += RIDGE;
    }
}

fn reciprocal_condition(sym: &DMatrix<f64>) -> f64 {
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}
