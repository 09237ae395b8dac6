//! Text report and machine-readable CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use crate::balance::{
    condensed_table, BalanceError, GroupCounts, L1Result, OmnibusResult, OutcomeSummary, Phase,
    SampleSizes, TermBalance,
};
use crate::dataset::{format_g17, Dataset};
use crate::matcher::{MatchResult, MatchSpec};
use crate::propensity::PropensityModel;

pub const REPORT_TXT: &str = "report.txt";
pub const TERMS_CSV: &str = "balance_terms.csv";
pub const PAIRS_CSV: &str = "pairs.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Verbosity {
    /// Full per-term tables plus the condensed table.
    #[default]
    Full,
    /// Only the condensed table of large imbalances.
    Condensed,
}

impl FromStr for Verbosity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Verbosity::Full),
            "condensed" => Ok(Verbosity::Condensed),
            other => Err(format!(
                "unknown report mode '{other}' (expected full or condensed)"
            )),
        }
    }
}

impl std::fmt::Display for Verbosity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verbosity::Full => "full",
            Verbosity::Condensed => "condensed",
        })
    }
}

/// Everything the report summarizes.
pub struct ReportInputs<'a> {
    pub ds: &'a Dataset,
    pub model: &'a PropensityModel,
    pub spec: &'a MatchSpec,
    pub result: &'a MatchResult,
    pub sizes: SampleSizes,
    pub terms_before: &'a [TermBalance],
    pub terms_after: &'a [TermBalance],
    pub omnibus_before: &'a Result<OmnibusResult, BalanceError>,
    pub omnibus_after: &'a Result<OmnibusResult, BalanceError>,
    pub l1: &'a L1Result,
    pub outcomes: &'a [OutcomeSummary],
    pub threshold: f64,
    pub verbosity: Verbosity,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.4}")
    }
}

pub fn sample_size_text(sizes: &SampleSizes) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>18} {:>12} {:>8}",
        "group", "total", "matched", "discarded_support", "no_match", "unused"
    );
    for (label, g) in [("treated", &sizes.treated), ("control", &sizes.control)] {
        let GroupCounts {
            total,
            matched,
            discarded_support,
            unmatched_no_match,
            unused_control,
        } = *g;
        let _ = writeln!(
            out,
            "{label:<10} {total:>8} {matched:>8} {discarded_support:>18} {unmatched_no_match:>12} {unused_control:>8}"
        );
    }
    out
}

pub fn omnibus_text(label: &str, omnibus: &Result<OmnibusResult, BalanceError>) -> String {
    match omnibus {
        Ok(o) if o.computed => format!(
            "{label}: chi2({}) = {:.2}, p = {:.4}",
            o.df, o.statistic, o.p_value
        ),
        Ok(_) => {
            format!("{label}: not computed; the omnibus test is not available for weighted data")
        }
        Err(e) => format!("{label}: not computed ({e})"),
    }
}

fn term_rows(out: &mut String, terms: &[TermBalance]) {
    let _ = writeln!(
        out,
        "{:<28} {:>12} {:>12} {:>12} {:>10}",
        "term", "mean_treated", "mean_control", "sd_control", "smd"
    );
    for t in terms {
        let smd = if t.zero_variance() {
            "NA (sd_c = 0)".to_string()
        } else {
            num(t.smd)
        };
        let _ = writeln!(
            out,
            "{:<28} {:>12} {:>12} {:>12} {:>10}",
            t.term,
            num(t.mean_t),
            num(t.mean_c),
            num(t.sd_c),
            smd
        );
    }
}

pub fn render_report_text(inp: &ReportInputs<'_>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Propensity score matching report");
    let _ = writeln!(out, "================================");
    let _ = writeln!(
        out,
        "Standardized differences divide by the control-group SD of the unmatched sample in both phases."
    );
    let _ = writeln!(out);

    let _ = writeln!(out, "Sample sizes");
    let _ = writeln!(out, "------------");
    out.push_str(&sample_size_text(&inp.sizes));
    let _ = writeln!(out);

    let _ = writeln!(out, "Propensity model (logistic regression)");
    let _ = writeln!(out, "--------------------------------------");
    for (term, b) in inp.model.terms.iter().zip(&inp.model.coefficients) {
        let _ = writeln!(out, "{term:<28} {b:>12.6}");
    }
    let _ = writeln!(
        out,
        "log-likelihood = {:.6}, iterations = {}, converged = {}",
        inp.model.log_likelihood, inp.model.iterations, inp.model.converged
    );
    let _ = writeln!(out);

    let _ = writeln!(out, "Matching");
    let _ = writeln!(out, "--------");
    let spec = inp.spec;
    let _ = writeln!(
        out,
        "nearest neighbor {}:1, replacement = {}, discard = {}",
        spec.ratio, spec.replace, spec.discard
    );
    match (spec.caliper, inp.result.caliper_width_abs) {
        (Some(c), Some(w)) => {
            let _ = writeln!(
                out,
                "caliper = {c} SD of logit score (absolute width {w:.6}), selection = {}, seed = {}",
                spec.caliper_mode, spec.seed
            );
        }
        _ => {
            let _ = writeln!(out, "no caliper");
        }
    }
    let (lo, hi) = inp.result.support;
    let _ = writeln!(out, "common support: [{lo:.6}, {hi:.6}]");
    let _ = writeln!(out, "pairs formed: {}", inp.result.pairs.len());
    let _ = writeln!(out);

    let _ = writeln!(out, "Overall balance");
    let _ = writeln!(out, "---------------");
    let _ = writeln!(
        out,
        "{}",
        omnibus_text("omnibus test before matching", inp.omnibus_before)
    );
    let _ = writeln!(
        out,
        "{}",
        omnibus_text("omnibus test after matching", inp.omnibus_after)
    );
    let _ = writeln!(
        out,
        "L1 imbalance: before = {}, after = {}",
        num(inp.l1.l1_before),
        num(inp.l1.l1_after)
    );
    let _ = writeln!(out);

    let condensed = condensed_table(inp.terms_after, inp.threshold);
    let _ = writeln!(
        out,
        "Terms with |standardized difference| > {} after matching",
        inp.threshold
    );
    let _ = writeln!(
        out,
        "---------------------------------------------------------"
    );
    if condensed.is_empty() {
        let _ = writeln!(out, "No terms exceed threshold.");
    } else {
        term_rows(&mut out, &condensed);
    }
    let _ = writeln!(out);

    if inp.verbosity == Verbosity::Full {
        for (title, terms) in [
            ("Balance before matching", inp.terms_before),
            ("Balance after matching", inp.terms_after),
        ] {
            let _ = writeln!(out, "{title}");
            let _ = writeln!(out, "{}", "-".repeat(title.len()));
            term_rows(&mut out, terms);
            let _ = writeln!(out);
        }
    }

    if !inp.outcomes.is_empty() {
        let _ = writeln!(out, "Outcomes (treated minus control)");
        let _ = writeln!(out, "--------------------------------");
        out.push_str(&outcome_text(inp.outcomes));
        let _ = writeln!(out);
    }
    out
}

pub fn outcome_text(outcomes: &[OutcomeSummary]) -> String {
    let mut out = String::new();
    for o in outcomes {
        for phase in [Phase::Before, Phase::After] {
            let t = match phase {
                Phase::Before => &o.before,
                Phase::After => &o.after,
            };
            let _ = writeln!(
                out,
                "{} ({}): mean_treated = {}, mean_control = {}, difference = {}, d = {}",
                o.name,
                phase.as_str(),
                num(t.mean_t),
                num(t.mean_c),
                num(o.difference(phase)),
                num(t.smd)
            );
        }
    }
    out
}

/// One row per term and phase.
pub fn write_terms_csv(
    terms_before: &[TermBalance],
    terms_after: &[TermBalance],
    path: &Path,
) -> io::Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "term",
        "kind",
        "phase",
        "mean_treated",
        "mean_control",
        "sd_control",
        "smd",
    ])?;
    for t in terms_before.iter().chain(terms_after) {
        let kind = match t.kind {
            crate::balance::TermKind::Main => "main",
            crate::balance::TermKind::Square => "square",
            crate::balance::TermKind::Interaction => "interaction",
        };
        wtr.write_record([
            t.term.as_str(),
            kind,
            t.phase.as_str(),
            &format_g17(t.mean_t),
            &format_g17(t.mean_c),
            &format_g17(t.sd_c),
            &format_g17(t.smd),
        ])?;
    }
    wtr.flush()
}

pub fn write_pairs_csv(ds: &Dataset, result: &MatchResult, path: &Path) -> io::Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["treated_id", "control_id", "distance", "pass"])?;
    let ids = ds.ids();
    for p in &result.pairs {
        wtr.write_record([
            ids[p.treated].as_str(),
            ids[p.control].as_str(),
            &format_g17(p.distance),
            &(p.pass + 1).to_string(),
        ])?;
    }
    wtr.flush()
}

/// Writes `report.txt`, `balance_terms.csv` and `pairs.csv` into `outdir`.
pub fn render_report(inp: &ReportInputs<'_>, outdir: &Path) -> io::Result<()> {
    fs::create_dir_all(outdir)?;
    fs::write(outdir.join(REPORT_TXT), render_report_text(inp))?;
    write_terms_csv(inp.terms_before, inp.terms_after, &outdir.join(TERMS_CSV))?;
    write_pairs_csv(inp.ds, inp.result, &outdir.join(PAIRS_CSV))
}
