//! Propensity scores from a logistic regression of treatment on covariates,
//! fitted by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dataset::Dataset;

/// Scores are kept inside `[SCORE_EPSILON, 1 - SCORE_EPSILON]` so logits stay finite.
pub const SCORE_EPSILON: f64 = 1e-12;

const MAX_ITERATIONS: usize = 100;
const COEF_TOLERANCE: f64 = 1e-8;
const LOGLIK_TOLERANCE: f64 = 1e-10;
const SEPARATION_BOUND: f64 = 30.0;
const RANK_TOLERANCE: f64 = 1e-9;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum PropensityError {
    #[error("design matrix is rank deficient: column '{0}' is collinear with earlier columns")]
    RankDeficient(String),
    #[error("quasi-complete separation detected ({0}); scores would be 0 or 1")]
    SeparationDetected(String),
    #[error("expected {expected} covariate values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A fitted logistic propensity model.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    /// Term names, `(Intercept)` first, then one per covariate.
    pub terms: Vec<String>,
    /// Intercept first, then one slope per covariate.
    pub coefficients: Vec<f64>,
    /// Fitted probability of treatment for every unit, clamped.
    pub scores: Vec<f64>,
    /// `ln(score / (1 - score))` for every unit.
    pub logits: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl PropensityModel {
    pub fn n_covariates(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64, PropensityError> {
        if x.len() != self.n_covariates() {
            return Err(PropensityError::DimensionMismatch {
                expected: self.n_covariates(),
                found: x.len(),
            });
        }
        Ok(self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>())
    }
}

/// Predicted propensity score for one covariate vector.
pub fn predict(model: &PropensityModel, x: &[f64]) -> Result<f64, PropensityError> {
    model.linear_predictor(x).map(clamped_score)
}

/// Inverse logit, evaluated without overflow for large `|eta|`.
pub fn inverse_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn clamped_score(eta: f64) -> f64 {
    inverse_logit(eta).clamp(SCORE_EPSILON, 1.0 - SCORE_EPSILON)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| yi * e - softplus(e))
        .sum()
}

/// Fits the propensity model on the dataset's estimation covariates.
pub fn fit_logistic(ds: &Dataset) -> Result<PropensityModel, PropensityError> {
    let n = ds.len();
    let covariates = ds.covariates();
    let p = covariates.len() + 1;

    let mut terms = vec!["(Intercept)".to_string()];
    terms.extend(covariates.iter().map(|c| c.name.clone()));
    let x = DMatrix::from_fn(n, p, |i, j| {
        if j == 0 {
            1.0
        } else {
            covariates[j - 1].values[i]
        }
    });
    let y = DVector::from_iterator(n, ds.treatment().iter().map(|&t| f64::from(t)));

    check_rank(&x, &terms)?;

    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(&x, &y, &beta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let eta = &x * &beta;
        let mu = eta.map(inverse_logit);
        let w = mu.map(|m| m * (1.0 - m));
        let gradient = x.transpose() * (&y - &mu);

        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let row = x.row(i);
            info.ger(w[i], &row.transpose(), &row.transpose(), 1.0);
        }
        let step = info.cholesky().map(|c| c.solve(&gradient)).ok_or_else(|| {
            PropensityError::SeparationDetected(
                "information matrix lost positive definiteness".into(),
            )
        })?;

        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut candidate_ll = log_likelihood(&x, &y, &candidate);
        let mut halvings = 0;
        while candidate_ll < ll && halvings < MAX_HALVINGS {
            scale *= 0.5;
            candidate = &beta + &step * scale;
            candidate_ll = log_likelihood(&x, &y, &candidate);
            halvings += 1;
        }

        if let Some((j, b)) = candidate
            .iter()
            .enumerate()
            .find(|(_, b)| b.abs() > SEPARATION_BOUND || !b.is_finite())
        {
            return Err(PropensityError::SeparationDetected(format!(
                "coefficient for '{}' reached {b:.3}",
                terms[j]
            )));
        }

        let max_change = (&candidate - &beta).amax();
        let rel_ll_change = ((candidate_ll - ll) / ll.abs().max(f64::MIN_POSITIVE)).abs();
        beta = candidate;
        ll = candidate_ll;
        if max_change < COEF_TOLERANCE || rel_ll_change < LOGLIK_TOLERANCE {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(PropensityError::SeparationDetected(format!(
            "no convergence after {MAX_ITERATIONS} iterations"
        )));
    }

    let eta = &x * &beta;
    let scores: Vec<f64> = eta.iter().map(|&e| clamped_score(e)).collect();
    let logits = scores.iter().map(|&s| logit(s)).collect();
    Ok(PropensityModel {
        terms,
        coefficients: beta.iter().copied().collect(),
        scores,
        logits,
        converged,
        iterations,
        log_likelihood: ll,
    })
}

/// Modified Gram–Schmidt over the design columns in order; the first column
/// whose residual is negligible relative to its own norm is reported.
fn check_rank(x: &DMatrix<f64>, terms: &[String]) -> Result<(), PropensityError> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(x.ncols());
    for (j, term) in terms.iter().enumerate() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut residual = col;
        for q in &basis {
            let proj = q.dot(&residual);
            residual.axpy(-proj, q, 1.0);
        }
        let rnorm = residual.norm();
        if norm == 0.0 || rnorm <= RANK_TOLERANCE * norm {
            return Err(PropensityError::RankDeficient(term.clone()));
        }
        basis.push(residual / rnorm);
    }
    Ok(())
}
