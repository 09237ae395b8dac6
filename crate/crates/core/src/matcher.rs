//! Greedy nearest-neighbor matching on the estimated propensity score.
//!
//! Treated units are visited in descending score order (ties by row order).
//! Ratio `k` matching runs `k` passes over that sequence, each treated unit
//! picking at most one new control per pass. With a caliper, distances are
//! measured on the logit scale and candidates must lie within
//! `caliper * SD(logit)`; otherwise raw score distance is used.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::propensity::PropensityModel;
use crate::rng::SplitMix64;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("no treated units remain after discarding units outside common support")]
    NoTreated,
    #[error("no control units remain after discarding units outside common support")]
    NoControl,
    #[error("invalid match specification: {0}")]
    InvalidSpec(String),
}

/// Which units outside the region of common support are dropped before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discard {
    #[default]
    None,
    TreatedOnly,
    ControlOnly,
    Both,
}

impl Discard {
    fn drops_treated(self) -> bool {
        matches!(self, Discard::TreatedOnly | Discard::Both)
    }

    fn drops_control(self) -> bool {
        matches!(self, Discard::ControlOnly | Discard::Both)
    }
}

impl FromStr for Discard {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Discard::None),
            "treated" | "treated_only" => Ok(Discard::TreatedOnly),
            "control" | "control_only" => Ok(Discard::ControlOnly),
            "both" => Ok(Discard::Both),
            other => Err(format!(
                "unknown discard policy '{other}' (expected none, treated, control or both)"
            )),
        }
    }
}

impl fmt::Display for Discard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Discard::None => "none",
            Discard::TreatedOnly => "treated",
            Discard::ControlOnly => "control",
            Discard::Both => "both",
        })
    }
}

/// How a control is chosen among those inside the caliper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaliperMode {
    /// Uniform draw among all candidates within the caliper.
    #[default]
    RandomWithin,
    /// Closest candidate within the caliper.
    NearestWithin,
}

impl FromStr for CaliperMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" | "random_within" => Ok(CaliperMode::RandomWithin),
            "nearest" | "nearest_within" => Ok(CaliperMode::NearestWithin),
            other => Err(format!(
                "unknown caliper mode '{other}' (expected random or nearest)"
            )),
        }
    }
}

impl fmt::Display for CaliperMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaliperMode::RandomWithin => "random",
            CaliperMode::NearestWithin => "nearest",
        })
    }
}

/// All tunable matching options.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSpec {
    /// Maximum number of controls per treated unit.
    pub ratio: usize,
    pub replace: bool,
    /// Caliper width in standard deviations of the logit score.
    pub caliper: Option<f64>,
    pub discard: Discard,
    /// Only consulted when a caliper is set.
    pub caliper_mode: CaliperMode,
    pub seed: u64,
}

impl Default for MatchSpec {
    fn default() -> Self {
        Self {
            ratio: 1,
            replace: false,
            caliper: None,
            discard: Discard::None,
            caliper_mode: CaliperMode::RandomWithin,
            seed: 0,
        }
    }
}

impl MatchSpec {
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.ratio < 1 {
            return Err(MatchError::InvalidSpec("ratio must be at least 1".into()));
        }
        if let Some(c) = self.caliper {
            if !(c.is_finite() && c > 0.0) {
                return Err(MatchError::InvalidSpec(format!(
                    "caliper must be a positive number, got {c}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Matched,
    /// Outside common support and dropped by the discard policy.
    DiscardedSupport,
    /// Treated unit for which no eligible control existed.
    UnmatchedNoMatch,
    /// Eligible control that no treated unit selected.
    UnusedControl,
}

impl Disposition {
    pub fn as_str(self) -> &'static str {
        match self {
            Disposition::Matched => "matched",
            Disposition::DiscardedSupport => "discarded_support",
            Disposition::UnmatchedNoMatch => "unmatched_no_match",
            Disposition::UnusedControl => "unused_control",
        }
    }
}

/// One treated–control assignment, by row index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub treated: usize,
    pub control: usize,
    /// Distance on the matching scale (logit with a caliper, score without).
    pub distance: f64,
    /// Zero-based pass in which the pair was formed.
    pub pass: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub pairs: Vec<Pair>,
    /// Per-unit weight, indexed by row.
    pub weights: Vec<f64>,
    pub disposition: Vec<Disposition>,
    /// Treatment indicator per row, copied from the dataset.
    pub treatment: Vec<u8>,
    /// Region of common support on the score scale; may be empty (`low > high`).
    pub support: (f64, f64),
    /// Caliper resolved to an absolute width on the logit scale.
    pub caliper_width_abs: Option<f64>,
}

impl MatchResult {
    pub fn n_matched_treated(&self) -> usize {
        self.treatment
            .iter()
            .zip(&self.disposition)
            .filter(|(&t, &d)| t == 1 && d == Disposition::Matched)
            .count()
    }

    /// True when every weight is 0 or 1.
    pub fn is_unweighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0 || w == 1.0)
    }
}

/// Overlap of the two groups' score ranges.
pub fn common_support(scores_t: &[f64], scores_c: &[f64]) -> (f64, f64) {
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |s: &[f64]| s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (
        min(scores_t).max(min(scores_c)),
        max(scores_t).min(max(scores_c)),
    )
}

/// Sample standard deviation (n - 1 denominator).
pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Matches treated to control units according to `spec`.
pub fn match_units(
    model: &PropensityModel,
    ds: &Dataset,
    spec: &MatchSpec,
) -> Result<MatchResult, MatchError> {
    spec.validate()?;
    let n = ds.len();
    let scores = &model.scores;
    let logits = &model.logits;
    let treatment = ds.treatment();

    let (scores_t, scores_c): (Vec<f64>, Vec<f64>) = {
        let mut t = Vec::new();
        let mut c = Vec::new();
        for (i, &s) in scores.iter().enumerate() {
            if treatment[i] == 1 {
                t.push(s)
            } else {
                c.push(s)
            }
        }
        (t, c)
    };
    let support = common_support(&scores_t, &scores_c);
    let outside = |s: f64| s < support.0 || s > support.1;

    let mut disposition = vec![Disposition::UnusedControl; n];
    let mut treated = Vec::new();
    let mut controls = Vec::new();
    for i in 0..n {
        let is_treated = treatment[i] == 1;
        let dropped = outside(scores[i])
            && if is_treated {
                spec.discard.drops_treated()
            } else {
                spec.discard.drops_control()
            };
        if dropped {
            disposition[i] = Disposition::DiscardedSupport;
        } else if is_treated {
            disposition[i] = Disposition::UnmatchedNoMatch;
            treated.push(i);
        } else {
            controls.push(i);
        }
    }
    if treated.is_empty() {
        return Err(MatchError::NoTreated);
    }
    if controls.is_empty() {
        return Err(MatchError::NoControl);
    }

    let caliper_width_abs = spec.caliper.map(|c| c * sample_sd(logits));
    let metric: &[f64] = if caliper_width_abs.is_some() {
        logits
    } else {
        scores
    };

    // Stable sort keeps row order among equal scores.
    treated.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let random_draw = caliper_width_abs.is_some() && spec.caliper_mode == CaliperMode::RandomWithin;
    let mut rng = SplitMix64::new(spec.seed);
    let mut used = vec![false; n];
    let mut matched_to: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pairs = Vec::new();
    let mut candidates = Vec::new();

    for pass in 0..spec.ratio {
        for &t in &treated {
            if pass > 0 && matched_to[t].len() < pass {
                continue;
            }
            candidates.clear();
            for &c in &controls {
                if (!spec.replace && used[c]) || matched_to[t].contains(&c) {
                    continue;
                }
                let d = (metric[t] - metric[c]).abs();
                if caliper_width_abs.is_some_and(|w| d > w) {
                    continue;
                }
                candidates.push((c, d));
            }
            if candidates.is_empty() {
                continue;
            }
            let (control, distance) = if random_draw {
                candidates[rng.below(candidates.len())]
            } else {
                // Controls are visited in row order, so strict `<` keeps the lowest row on ties.
                candidates
                    .iter()
                    .copied()
                    .fold(
                        candidates[0],
                        |best, cand| if cand.1 < best.1 { cand } else { best },
                    )
            };
            used[control] = true;
            matched_to[t].push(control);
            pairs.push(Pair {
                treated: t,
                control,
                distance,
                pass,
            });
        }
    }

    let mut weights = vec![0.0; n];
    let mut n_matched = 0usize;
    for &t in &treated {
        let m = matched_to[t].len();
        if m == 0 {
            continue;
        }
        n_matched += 1;
        weights[t] = 1.0;
        disposition[t] = Disposition::Matched;
        for &c in &matched_to[t] {
            weights[c] += 1.0 / m as f64;
            disposition[c] = Disposition::Matched;
        }
    }
    let control_total: f64 = controls.iter().map(|&c| weights[c]).sum();
    if control_total > 0.0 {
        let scale = n_matched as f64 / control_total;
        if scale != 1.0 {
            for &c in &controls {
                weights[c] *= scale;
            }
        }
    }

    Ok(MatchResult {
        pairs,
        weights,
        disposition,
        treatment: treatment.to_vec(),
        support,
        caliper_width_abs,
    })
}
