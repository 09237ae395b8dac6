//! Synthetic confounded observational data.
//!
//! Covariates are multivariate normal (Cholesky factor of the correlation
//! matrix, scaled by the SDs); treatment is Bernoulli with a logistic
//! selection model; the outcome is linear in the covariates plus `effect *
//! treatment` plus standard-normal noise.
//!
//! Draw order per unit, all from one [`SplitMix64`] stream seeded with
//! `seed`: one normal per covariate, one uniform for treatment (treated when
//! `u < p`), one normal for the outcome noise.

use nalgebra::{Cholesky, DMatrix};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::dataset::{format_g17, Column, Dataset, DatasetError};
use crate::propensity::inverse_logit;
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("correlation matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulated data is not a valid dataset: {0}")]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub n: usize,
    pub seed: u64,
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Row-major correlation matrix.
    pub correlation: Vec<Vec<f64>>,
    pub selection_intercept: f64,
    pub selection: Vec<f64>,
    pub outcome_intercept: f64,
    pub outcome: Vec<f64>,
    /// True treatment effect on the outcome.
    pub effect: f64,
    pub treatment_name: String,
    pub outcome_name: String,
}

pub const SIM_KEYS: [&str; 13] = [
    "n",
    "seed",
    "covariates",
    "means",
    "sds",
    "correlation",
    "selection-intercept",
    "selection",
    "outcome-intercept",
    "outcome",
    "effect",
    "treatment",
    "outcome-name",
];

fn identity(p: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

impl SimSpec {
    /// Independent standard-normal covariates `x1..xp`, no selection and no outcome model.
    pub fn independent(n: usize, p: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            names: (1..=p).map(|i| format!("x{i}")).collect(),
            means: vec![0.0; p],
            sds: vec![1.0; p],
            correlation: identity(p),
            selection_intercept: 0.0,
            selection: vec![0.0; p],
            outcome_intercept: 0.0,
            outcome: vec![0.0; p],
            effect: 0.0,
            treatment_name: "z".into(),
            outcome_name: "y".into(),
        }
    }

    /// One strong confounder `x1` driving both selection and outcome, two
    /// weaker correlated covariates, and no treatment effect. About a quarter
    /// of units end up treated.
    pub fn strong_confounder(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            names: vec!["x1".into(), "x2".into(), "x3".into()],
            means: vec![0.0, 0.0, 0.0],
            sds: vec![1.0, 1.0, 1.0],
            correlation: vec![
                vec![1.0, 0.3, 0.0],
                vec![0.3, 1.0, 0.2],
                vec![0.0, 0.2, 1.0],
            ],
            selection_intercept: -1.3,
            selection: vec![1.0, 0.25, 0.0],
            outcome_intercept: 0.0,
            outcome: vec![1.0, 0.3, 0.3],
            effect: 0.0,
            treatment_name: "z".into(),
            outcome_name: "y".into(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let p = self.names.len();
        if self.n < 2 {
            return Err(SimError::InvalidSpec("n must be at least 2".into()));
        }
        for (what, len) in [
            ("means", self.means.len()),
            ("sds", self.sds.len()),
            ("selection", self.selection.len()),
            ("outcome", self.outcome.len()),
            ("correlation rows", self.correlation.len()),
        ] {
            if len != p {
                return Err(SimError::InvalidSpec(format!(
                    "{what} has {len} entries for {p} covariates"
                )));
            }
        }
        if let Some(row) = self.correlation.iter().find(|r| r.len() != p) {
            return Err(SimError::InvalidSpec(format!(
                "correlation row has {} entries, expected {p}",
                row.len()
            )));
        }
        if self.sds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(SimError::InvalidSpec("sds must be positive".into()));
        }
        Ok(())
    }

    /// Lower Cholesky factor of the covariance `diag(sd) R diag(sd)`.
    fn covariance_factor(&self) -> Result<DMatrix<f64>, SimError> {
        let p = self.names.len();
        let r = DMatrix::from_fn(p, p, |i, j| self.correlation[i][j]);
        let symmetric = (0..p).all(|i| (0..p).all(|j| (r[(i, j)] - r[(j, i)]).abs() <= 1e-12));
        if !symmetric {
            return Err(SimError::NotPositiveDefinite);
        }
        let cov = DMatrix::from_fn(p, p, |i, j| self.sds[i] * r[(i, j)] * self.sds[j]);
        Cholesky::new(cov)
            .map(|c| c.l())
            .ok_or(SimError::NotPositiveDefinite)
    }

    /// Reads a spec from `key = value` text (see [`SIM_KEYS`]).
    pub fn from_config_str(text: &str) -> Result<Self, SimError> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(&SIM_KEYS)?;
        let names = kv
            .list("covariates")
            .ok_or_else(|| ConfigError::MissingKey("covariates".into()))?;
        let p = names.len();
        let correlation = match kv.get("correlation") {
            Some(v) => v
                .split(';')
                .map(|row| crate::config::parse_numbers("correlation", row))
                .collect::<Result<Vec<_>, _>>()?,
            None => identity(p),
        };
        let spec = Self {
            n: kv.required("n")?,
            seed: kv.parsed("seed")?.unwrap_or(0),
            means: kv.numbers("means")?.unwrap_or_else(|| vec![0.0; p]),
            sds: kv.numbers("sds")?.unwrap_or_else(|| vec![1.0; p]),
            correlation,
            selection_intercept: kv.parsed("selection-intercept")?.unwrap_or(0.0),
            selection: kv.numbers("selection")?.unwrap_or_else(|| vec![0.0; p]),
            outcome_intercept: kv.parsed("outcome-intercept")?.unwrap_or(0.0),
            outcome: kv.numbers("outcome")?.unwrap_or_else(|| vec![0.0; p]),
            effect: kv.parsed("effect")?.unwrap_or(0.0),
            treatment_name: kv.get("treatment").unwrap_or("z").to_string(),
            outcome_name: kv.get("outcome-name").unwrap_or("y").to_string(),
            names,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Serializes to the format read by [`SimSpec::from_config_str`].
    pub fn to_config_string(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format_g17(*x))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let corr: Vec<String> = self.correlation.iter().map(|r| join(r)).collect();
        format!(
            "n = {}\nseed = {}\ncovariates = {}\nmeans = {}\nsds = {}\ncorrelation = {}\nselection-intercept = {}\nselection = {}\noutcome-intercept = {}\noutcome = {}\neffect = {}\ntreatment = {}\noutcome-name = {}\n",
            self.n,
            self.seed,
            self.names.join(", "),
            join(&self.means),
            join(&self.sds),
            corr.join("; "),
            format_g17(self.selection_intercept),
            join(&self.selection),
            format_g17(self.outcome_intercept),
            join(&self.outcome),
            format_g17(self.effect),
            self.treatment_name,
            self.outcome_name,
        )
    }
}

/// Draws a dataset from the spec. The same spec always yields the same data.
pub fn simulate(spec: &SimSpec) -> Result<Dataset, SimError> {
    spec.validate()?;
    let factor = spec.covariance_factor()?;
    let p = spec.names.len();
    let mut rng = SplitMix64::new(spec.seed);

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.n); p];
    let mut treatment = Vec::with_capacity(spec.n);
    let mut outcome = Vec::with_capacity(spec.n);
    let mut z = vec![0.0; p];
    let mut x = vec![0.0; p];
    for _ in 0..spec.n {
        for zi in z.iter_mut() {
            *zi = rng.next_normal();
        }
        for i in 0..p {
            x[i] = spec.means[i] + (0..=i).map(|j| factor[(i, j)] * z[j]).sum::<f64>();
        }
        let eta = spec.selection_intercept
            + spec
                .selection
                .iter()
                .zip(&x)
                .map(|(b, v)| b * v)
                .sum::<f64>();
        let treated = rng.next_f64() < inverse_logit(eta);
        let noise = rng.next_normal();
        let y = spec.outcome_intercept
            + spec.outcome.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>()
            + if treated { spec.effect } else { 0.0 }
            + noise;
        for (col, &v) in columns.iter_mut().zip(&x) {
            col.push(v);
        }
        treatment.push(u8::from(treated));
        outcome.push(format_g17(y));
    }

    let covariates = spec
        .names
        .iter()
        .zip(columns)
        .map(|(n, v)| Column::new(n.clone(), v))
        .collect();
    Ok(Dataset::from_columns(
        spec.treatment_name.clone(),
        treatment,
        covariates,
        vec![],
        vec![(spec.outcome_name.clone(), outcome)],
    )?)
}
