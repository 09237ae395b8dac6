//! Covariate balance before and after matching.
//!
//! Standardized mean differences always divide by the control-group SD of the
//! unmatched sample, so before/after values are on one scale.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::dataset::{Column, Dataset};
use crate::matcher::{Disposition, MatchResult};

/// Default cutoff for the condensed imbalance table.
pub const CONDENSED_THRESHOLD: f64 = 0.25;
/// Eigenvalues below this fraction of the largest are treated as zero.
const PINV_RELATIVE_CUTOFF: f64 = 1e-10;
const MAX_L1_BINS: usize = 20;
const MAX_CATEGORIES: usize = 10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BalanceError {
    #[error("covariance of group differences has rank 0")]
    SingularCovariance,
    #[error("the after-matching phase needs a match result")]
    MissingResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Before,
    After,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Before => "before",
            Phase::After => "after",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Main,
    Square,
    Interaction,
}

/// A variable or derived product whose balance is checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    pub kind: TermKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermBalance {
    pub term: String,
    pub kind: TermKind,
    pub mean_t: f64,
    pub mean_c: f64,
    /// Control-group SD in the unmatched sample.
    pub sd_c: f64,
    /// `(mean_t - mean_c) / sd_c`; NaN when `sd_c` is zero.
    pub smd: f64,
    pub phase: Phase,
}

impl TermBalance {
    /// The control SD is zero, so no standardized difference exists.
    pub fn zero_variance(&self) -> bool {
        self.sd_c == 0.0
    }
}

/// Main terms in header order, optionally followed by squares and pairwise
/// products. Squares of 0/1 columns are skipped.
pub fn balance_terms(ds: &Dataset, expand: bool) -> Vec<Term> {
    let base: Vec<&Column> = ds.balance_columns();
    let mut terms: Vec<Term> = base
        .iter()
        .map(|c| Term {
            name: c.name.clone(),
            kind: TermKind::Main,
            values: c.values.clone(),
        })
        .collect();
    if expand {
        for c in base.iter().filter(|c| !c.is_binary()) {
            terms.push(Term {
                name: format!("{}^2", c.name),
                kind: TermKind::Square,
                values: c.values.iter().map(|v| v * v).collect(),
            });
        }
        for (i, a) in base.iter().enumerate() {
            for b in &base[i + 1..] {
                terms.push(Term {
                    name: format!("{}*{}", a.name, b.name),
                    kind: TermKind::Interaction,
                    values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
                });
            }
        }
    }
    terms
}

fn weighted_mean(values: &[f64], weights: impl Iterator<Item = f64>) -> f64 {
    let (sum, total) = values
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(s, t), (v, w)| (s + w * v, t + w));
    sum / total
}

/// Per-group weights for a phase: all ones before matching, match weights after.
fn phase_weights(
    ds: &Dataset,
    result: Option<&MatchResult>,
    phase: Phase,
) -> Result<Vec<f64>, BalanceError> {
    match phase {
        Phase::Before => Ok(vec![1.0; ds.len()]),
        Phase::After => result
            .map(|r| r.weights.clone())
            .ok_or(BalanceError::MissingResult),
    }
}

/// Standardized mean differences for every term in the given phase.
pub fn smd_table(
    ds: &Dataset,
    result: Option<&MatchResult>,
    phase: Phase,
    expand: bool,
) -> Result<Vec<TermBalance>, BalanceError> {
    let weights = phase_weights(ds, result, phase)?;
    Ok(smd_for_terms(
        ds,
        &balance_terms(ds, expand),
        &weights,
        phase,
    ))
}

pub(crate) fn smd_for_terms(
    ds: &Dataset,
    terms: &[Term],
    weights: &[f64],
    phase: Phase,
) -> Vec<TermBalance> {
    let z = ds.treatment();
    let wt = || {
        weights
            .iter()
            .zip(z)
            .map(|(&w, &t)| if t == 1 { w } else { 0.0 })
    };
    let wc = || {
        weights
            .iter()
            .zip(z)
            .map(|(&w, &t)| if t == 0 { w } else { 0.0 })
    };
    terms
        .iter()
        .map(|term| {
            let controls: Vec<f64> = term
                .values
                .iter()
                .zip(z)
                .filter(|(_, &t)| t == 0)
                .map(|(&v, _)| v)
                .collect();
            let sd_c = crate::matcher::sample_sd(&controls);
            let mean_t = weighted_mean(&term.values, wt());
            let mean_c = weighted_mean(&term.values, wc());
            let smd = if sd_c > 0.0 {
                (mean_t - mean_c) / sd_c
            } else {
                f64::NAN
            };
            TermBalance {
                term: term.name.clone(),
                kind: term.kind,
                mean_t,
                mean_c,
                sd_c,
                smd,
                phase,
            }
        })
        .collect()
}

/// Terms with `|smd| > threshold`, largest imbalance first. Ties keep input order.
pub fn condensed_table(terms: &[TermBalance], threshold: f64) -> Vec<TermBalance> {
    let mut out: Vec<TermBalance> = terms
        .iter()
        .filter(|t| t.smd.abs() > threshold)
        .cloned()
        .collect();
    out.sort_by(|a, b| b.smd.abs().total_cmp(&a.smd.abs()));
    out
}

/// Omnibus imbalance test over all main terms.
#[derive(Debug, Clone, PartialEq)]
pub struct OmnibusResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// False when the phase carries non-0/1 weights; the other fields are then NaN/0.
    pub computed: bool,
}

impl OmnibusResult {
    fn not_computed() -> Self {
        Self {
            statistic: f64::NAN,
            df: 0,
            p_value: f64::NAN,
            computed: false,
        }
    }
}

/// `d' Cov(d)^-1 d` over covariates and balance-only columns, where `d` holds
/// the treated-minus-control mean differences and `Cov(d)` is
/// `(1/n_t + 1/n_c)` times the pooled within-group covariance. Near-singular
/// covariance falls back to a pseudo-inverse and `df` becomes its rank.
pub fn omnibus_d2(
    ds: &Dataset,
    result: Option<&MatchResult>,
    phase: Phase,
) -> Result<OmnibusResult, BalanceError> {
    let weights = phase_weights(ds, result, phase)?;
    if weights.iter().any(|&w| w != 0.0 && w != 1.0) {
        return Ok(OmnibusResult::not_computed());
    }
    let cols = ds.balance_columns();
    let keep: Vec<usize> = (0..ds.len()).filter(|&i| weights[i] == 1.0).collect();
    let z = ds.treatment();
    let rows_t: Vec<usize> = keep.iter().copied().filter(|&i| z[i] == 1).collect();
    let rows_c: Vec<usize> = keep.iter().copied().filter(|&i| z[i] == 0).collect();
    let p = cols.len();
    let (nt, nc) = (rows_t.len(), rows_c.len());
    if p == 0 || nt == 0 || nc == 0 || nt + nc < 3 {
        return Err(BalanceError::SingularCovariance);
    }

    let mean_of = |rows: &[usize], col: &Column| {
        rows.iter().map(|&i| col.values[i]).sum::<f64>() / rows.len() as f64
    };
    let means_t: Vec<f64> = cols.iter().map(|c| mean_of(&rows_t, c)).collect();
    let means_c: Vec<f64> = cols.iter().map(|c| mean_of(&rows_c, c)).collect();
    let d = DVector::from_iterator(p, means_t.iter().zip(&means_c).map(|(a, b)| a - b));

    let mut pooled = DMatrix::<f64>::zeros(p, p);
    for (rows, means) in [(&rows_t, &means_t), (&rows_c, &means_c)] {
        for &i in rows.iter() {
            let dev =
                DVector::from_iterator(p, cols.iter().zip(means).map(|(c, m)| c.values[i] - m));
            pooled.ger(1.0, &dev, &dev, 1.0);
        }
    }
    pooled /= (nt + nc - 2) as f64;
    let cov = pooled * (1.0 / nt as f64 + 1.0 / nc as f64);

    let (statistic, df) = pseudo_quadratic_form(cov, &d)?;
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    Ok(OmnibusResult {
        statistic,
        df,
        p_value,
        computed: true,
    })
}

/// `d' A^+ d` and the numerical rank of the symmetric matrix `A`.
fn pseudo_quadratic_form(a: DMatrix<f64>, d: &DVector<f64>) -> Result<(f64, usize), BalanceError> {
    if d.iter().all(|&v| v == 0.0) {
        let rank = symmetric_rank(&a);
        return if rank == 0 {
            Err(BalanceError::SingularCovariance)
        } else {
            Ok((0.0, rank))
        };
    }
    let eig = SymmetricEigen::new(a);
    let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if largest <= 0.0 {
        return Err(BalanceError::SingularCovariance);
    }
    let cutoff = largest * PINV_RELATIVE_CUTOFF;
    let mut stat = 0.0;
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let proj = eig.eigenvectors.column(k).dot(d);
            stat += proj * proj / lambda;
            rank += 1;
        }
    }
    Ok((stat.max(0.0), rank))
}

fn symmetric_rank(a: &DMatrix<f64>) -> usize {
    let eig = SymmetricEigen::new(a.clone());
    let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if largest <= 0.0 {
        return 0;
    }
    eig.eigenvalues
        .iter()
        .filter(|&&l| l > largest * PINV_RELATIVE_CUTOFF)
        .count()
}

/// Coarsening of one variable for the multivariate histogram.
#[derive(Debug, Clone, PartialEq)]
pub enum Binning {
    /// Few distinct values: each value is its own cell.
    Categories(Vec<f64>),
    /// Equal-width bins; `edges.len() - 1` bins, last bin closed on the right.
    Edges(Vec<f64>),
}

impl Binning {
    /// Scott's rule on the pooled sample, capped to `1..=20` bins; variables
    /// with at most 10 distinct values are used as categories.
    pub fn for_values(values: &[f64]) -> Self {
        let mut distinct: Vec<f64> = values.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() <= MAX_CATEGORIES {
            return Binning::Categories(distinct);
        }
        let min = distinct[0];
        let max = distinct[distinct.len() - 1];
        let sd = crate::matcher::sample_sd(values);
        let width = 3.49 * sd * (values.len() as f64).powf(-1.0 / 3.0);
        let bins = if width > 0.0 {
            (((max - min) / width).ceil() as usize).clamp(1, MAX_L1_BINS)
        } else {
            1
        };
        let step = (max - min) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|k| min + step * k as f64).collect();
        edges.push(max);
        Binning::Edges(edges)
    }

    pub fn n_cells(&self) -> usize {
        match self {
            Binning::Categories(c) => c.len(),
            Binning::Edges(e) => e.len() - 1,
        }
    }

    pub fn cell(&self, v: f64) -> usize {
        match self {
            Binning::Categories(cats) => cats
                .binary_search_by(|c| c.total_cmp(&v))
                .unwrap_or_else(|i| i.min(cats.len() - 1)),
            Binning::Edges(edges) => {
                let bins = edges.len() - 1;
                // Index of the last edge <= v, clamped into the bin range.
                let k = edges.partition_point(|&e| e <= v);
                k.saturating_sub(1).min(bins - 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Result {
    pub l1_before: f64,
    pub l1_after: f64,
    /// One coarsening per variable, shared by both phases.
    pub bins: Vec<(String, Binning)>,
}

/// Multivariate imbalance: half the summed absolute difference of the
/// groups' relative cell frequencies, with bins fixed on the unmatched sample.
pub fn l1_measure(ds: &Dataset, result: &MatchResult) -> L1Result {
    let cols = ds.balance_columns();
    let bins: Vec<(String, Binning)> = cols
        .iter()
        .map(|c| (c.name.clone(), Binning::for_values(&c.values)))
        .collect();
    let cells: Vec<Vec<u16>> = (0..ds.len())
        .map(|i| {
            cols.iter()
                .zip(&bins)
                .map(|(c, (_, b))| b.cell(c.values[i]) as u16)
                .collect()
        })
        .collect();
    let ones = vec![1.0; ds.len()];
    L1Result {
        l1_before: l1_for_weights(ds.treatment(), &cells, &ones),
        l1_after: l1_for_weights(ds.treatment(), &cells, &result.weights),
        bins,
    }
}

/// L1 distance between weighted group distributions over the given cells.
pub fn l1_for_weights(treatment: &[u8], cells: &[Vec<u16>], weights: &[f64]) -> f64 {
    let mut table: BTreeMap<&[u16], (f64, f64)> = BTreeMap::new();
    let (mut total_t, mut total_c) = (0.0, 0.0);
    for ((&z, cell), &w) in treatment.iter().zip(cells).zip(weights) {
        if w <= 0.0 {
            continue;
        }
        let entry = table.entry(cell.as_slice()).or_insert((0.0, 0.0));
        if z == 1 {
            entry.0 += w;
            total_t += w;
        } else {
            entry.1 += w;
            total_c += w;
        }
    }
    if total_t <= 0.0 || total_c <= 0.0 {
        return f64::NAN;
    }
    // common denominator keeps integer counts exact: disjoint groups give exactly 1
    let sum: f64 = table
        .values()
        .map(|&(t, c)| (t * total_c - c * total_t).abs())
        .sum();
    (sum / (2.0 * total_t * total_c)).clamp(0.0, 1.0)
}

/// Two-group comparison of an outcome column before and after matching.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSummary {
    pub name: String,
    pub before: TermBalance,
    pub after: TermBalance,
}

impl OutcomeSummary {
    pub fn difference(&self, phase: Phase) -> f64 {
        let t = match phase {
            Phase::Before => &self.before,
            Phase::After => &self.after,
        };
        t.mean_t - t.mean_c
    }
}

/// Weighted treated-minus-control means of an outcome, standardized by the
/// unmatched control SD like every other term.
pub fn outcome_summary(
    ds: &Dataset,
    name: &str,
    values: Vec<f64>,
    result: &MatchResult,
) -> OutcomeSummary {
    let term = [Term {
        name: name.to_string(),
        kind: TermKind::Main,
        values,
    }];
    let ones = vec![1.0; ds.len()];
    let before = smd_for_terms(ds, &term, &ones, Phase::Before).remove(0);
    let after = smd_for_terms(ds, &term, &result.weights, Phase::After).remove(0);
    OutcomeSummary {
        name: name.to_string(),
        before,
        after,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupCounts {
    pub total: usize,
    pub matched: usize,
    pub discarded_support: usize,
    pub unmatched_no_match: usize,
    pub unused_control: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleSizes {
    pub treated: GroupCounts,
    pub control: GroupCounts,
}

pub fn sample_size_table(result: &MatchResult) -> SampleSizes {
    let mut sizes = SampleSizes::default();
    for (&z, &d) in result.treatment.iter().zip(&result.disposition) {
        let group = if z == 1 {
            &mut sizes.treated
        } else {
            &mut sizes.control
        };
        group.total += 1;
        match d {
            Disposition::Matched => group.matched += 1,
            Disposition::DiscardedSupport => group.discarded_support += 1,
            Disposition::UnmatchedNoMatch => group.unmatched_no_match += 1,
            Disposition::UnusedControl => group.unused_control += 1,
        }
    }
    sizes
}
