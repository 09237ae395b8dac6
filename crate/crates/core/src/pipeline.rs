//! The full workflow: load, estimate, match, diagnose, export.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::balance::{
    l1_measure, omnibus_d2, outcome_summary, sample_size_table, smd_table, BalanceError, L1Result,
    OmnibusResult, OutcomeSummary, Phase, SampleSizes, TermBalance, CONDENSED_THRESHOLD,
};
use crate::config::{parse_bool, ConfigError, KeyValues};
use crate::dataset::{export, load_csv, ColumnRoles, Dataset, DatasetError, ExportMode};
use crate::diagnostics::report::{omnibus_text, outcome_text, sample_size_text};
use crate::diagnostics::{render_plots, render_report, ReportInputs, Verbosity};
use crate::matcher::{match_units, CaliperMode, Discard, MatchError, MatchResult, MatchSpec};
use crate::propensity::{fit_logistic, PropensityError, PropensityModel};
use crate::simgen::SimError;

pub const EXPORT_CSV: &str = "matched_data.csv";
pub const RUN_CONFIG_TXT: &str = "run_config.txt";

/// Keys accepted in run configuration files; the same names as the flags.
pub const RUN_KEYS: [&str; 15] = [
    "input",
    "id",
    "treatment",
    "covariates",
    "balance-only",
    "outcomes",
    "ratio",
    "replace",
    "caliper",
    "caliper-mode",
    "discard",
    "seed",
    "report",
    "export",
    "out",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("outcome column '{0}' is missing or not numeric")]
    Outcome(String),
    #[error(transparent)]
    Estimation(#[from] PropensityError),
    #[error(transparent)]
    Matching(#[from] MatchError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PipelineError {
    /// Stable process exit code: 1 input, 2 estimation, 3 matching, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Simulation(_) | PipelineError::Outcome(_) => {
                1
            }
            PipelineError::Dataset(DatasetError::Io(_)) => 4,
            PipelineError::Dataset(_) => 1,
            PipelineError::Estimation(_) => 2,
            PipelineError::Matching(_) => 3,
            PipelineError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "input",
            2 => "estimation",
            3 => "matching",
            _ => "io",
        }
    }

    /// `error[kind]: message` on one line.
    pub fn one_line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.kind())
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub roles: ColumnRoles,
    /// Passthrough columns summarized as outcomes.
    pub outcomes: Vec<String>,
    pub spec: MatchSpec,
    pub out: PathBuf,
    pub report: Verbosity,
    pub export: ExportMode,
}

impl RunConfig {
    /// Resolves a run from `key = value` entries, applying defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.check_keys(&RUN_KEYS)?;
        let input: String = kv.required("input")?;
        let treatment: String = kv.required("treatment")?;
        let covariates = kv.list("covariates").unwrap_or_default();
        if covariates.is_empty() {
            return Err(ConfigError::MissingKey("covariates".into()));
        }
        let caliper: Option<f64> = kv.parsed("caliper")?;
        let caliper_mode: Option<CaliperMode> = kv.parsed("caliper-mode")?;
        if caliper_mode.is_some() && caliper.is_none() {
            return Err(ConfigError::InvalidValue {
                key: "caliper-mode".into(),
                reason: "requires a caliper".into(),
            });
        }
        let replace = kv
            .get("replace")
            .map(|v| parse_bool("replace", v))
            .transpose()?
            .unwrap_or(false);
        let export = match kv.get("export") {
            None | Some("full") => ExportMode::Full,
            Some("matched") => ExportMode::MatchedOnly,
            Some(other) => {
                return Err(ConfigError::InvalidValue {
                    key: "export".into(),
                    reason: format!("'{other}' (expected full or matched)"),
                })
            }
        };
        let spec = MatchSpec {
            ratio: kv.parsed("ratio")?.unwrap_or(1),
            replace,
            caliper,
            discard: kv.parsed::<Discard>("discard")?.unwrap_or_default(),
            caliper_mode: caliper_mode.unwrap_or_default(),
            seed: kv.parsed("seed")?.unwrap_or(0),
        };
        spec.validate().map_err(|e| ConfigError::InvalidValue {
            key: "ratio/caliper".into(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            input: PathBuf::from(input),
            roles: ColumnRoles {
                id: kv.get("id").map(str::to_string),
                treatment,
                covariates,
                balance_only: kv.list("balance-only").unwrap_or_default(),
            },
            outcomes: kv.list("outcomes").unwrap_or_default(),
            spec,
            out: PathBuf::from(kv.get("out").unwrap_or("psmatch_out")),
            report: kv.parsed("report")?.unwrap_or_default(),
            export,
        })
    }

    /// The resolved configuration as `key = value` lines. The output
    /// directory is left out so runs into different directories echo the
    /// same text.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "input = {}", self.input.display());
        if let Some(id) = &self.roles.id {
            let _ = writeln!(s, "id = {id}");
        }
        let _ = writeln!(s, "treatment = {}", self.roles.treatment);
        let _ = writeln!(s, "covariates = {}", self.roles.covariates.join(", "));
        if !self.roles.balance_only.is_empty() {
            let _ = writeln!(s, "balance-only = {}", self.roles.balance_only.join(", "));
        }
        if !self.outcomes.is_empty() {
            let _ = writeln!(s, "outcomes = {}", self.outcomes.join(", "));
        }
        let _ = writeln!(s, "ratio = {}", self.spec.ratio);
        let _ = writeln!(s, "replace = {}", self.spec.replace);
        if let Some(c) = self.spec.caliper {
            let _ = writeln!(s, "caliper = {c}");
            let _ = writeln!(s, "caliper-mode = {}", self.spec.caliper_mode);
        }
        let _ = writeln!(s, "discard = {}", self.spec.discard);
        let _ = writeln!(s, "seed = {}", self.spec.seed);
        let _ = writeln!(s, "report = {}", self.report);
        let export = match self.export {
            ExportMode::Full => "full",
            ExportMode::MatchedOnly => "matched",
        };
        let _ = writeln!(s, "export = {export}");
        s
    }
}

/// Estimation, matching and every balance statistic for one dataset.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub model: PropensityModel,
    pub result: MatchResult,
    pub sizes: SampleSizes,
    pub terms_before: Vec<TermBalance>,
    pub terms_after: Vec<TermBalance>,
    pub omnibus_before: Result<OmnibusResult, BalanceError>,
    pub omnibus_after: Result<OmnibusResult, BalanceError>,
    pub l1: L1Result,
}

/// Runs estimation, matching and balance checks in memory. Terms include
/// squares and pairwise interactions.
pub fn analyze(ds: &Dataset, spec: &MatchSpec) -> Result<Analysis, PipelineError> {
    let model = fit_logistic(ds)?;
    let result = match_units(&model, ds, spec)?;
    let terms_before =
        smd_table(ds, None, Phase::Before, true).expect("before phase needs no result");
    let terms_after = smd_table(ds, Some(&result), Phase::After, true).expect("result given");
    let omnibus_before = omnibus_d2(ds, None, Phase::Before);
    let omnibus_after = omnibus_d2(ds, Some(&result), Phase::After);
    let l1 = l1_measure(ds, &result);
    Ok(Analysis {
        sizes: sample_size_table(&result),
        model,
        result,
        terms_before,
        terms_after,
        omnibus_before,
        omnibus_after,
        l1,
    })
}

/// What a run reports back to the caller.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub analysis: Analysis,
    pub outcomes: Vec<OutcomeSummary>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// Sample sizes, omnibus test, L1 and outcome differences, as printed to stdout.
    pub fn to_text(&self) -> String {
        let a = &self.analysis;
        let mut s = sample_size_text(&a.sizes);
        let _ = writeln!(s, "{}", omnibus_text("omnibus before", &a.omnibus_before));
        let _ = writeln!(s, "{}", omnibus_text("omnibus after", &a.omnibus_after));
        let _ = writeln!(
            s,
            "L1 before = {:.4}, after = {:.4}",
            a.l1.l1_before, a.l1.l1_after
        );
        s.push_str(&outcome_text(&self.outcomes));
        s
    }
}

/// Outcome summaries for named passthrough columns.
pub fn outcome_summaries(
    ds: &Dataset,
    names: &[String],
    result: &MatchResult,
) -> Result<Vec<OutcomeSummary>, PipelineError> {
    names
        .iter()
        .map(|name| {
            let values = ds
                .extra_numeric(name)
                .ok_or_else(|| PipelineError::Outcome(name.clone()))?;
            Ok(outcome_summary(ds, name, values, result))
        })
        .collect()
}

/// Executes the whole workflow and writes every artifact into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    let ds = load_csv(&config.input, &config.roles)?;
    run_on_dataset(&ds, config)
}

/// [`run`] on an already loaded dataset; `config.input` is only echoed.
pub fn run_on_dataset(ds: &Dataset, config: &RunConfig) -> Result<RunSummary, PipelineError> {
    let analysis = analyze(ds, &config.spec)?;
    let outcomes = outcome_summaries(ds, &config.outcomes, &analysis.result)?;
    let files = write_outputs(ds, config, &analysis, &outcomes)?;
    Ok(RunSummary {
        analysis,
        outcomes,
        files,
    })
}

fn write_outputs(
    ds: &Dataset,
    config: &RunConfig,
    a: &Analysis,
    outcomes: &[OutcomeSummary],
) -> Result<Vec<PathBuf>, PipelineError> {
    let out: &Path = &config.out;
    fs::create_dir_all(out)?;
    let mut files = render_plots(
        &a.model,
        ds,
        &a.result,
        &a.terms_before,
        &a.terms_after,
        out,
    )?;
    let inputs = ReportInputs {
        ds,
        model: &a.model,
        spec: &config.spec,
        result: &a.result,
        sizes: a.sizes,
        terms_before: &a.terms_before,
        terms_after: &a.terms_after,
        omnibus_before: &a.omnibus_before,
        omnibus_after: &a.omnibus_after,
        l1: &a.l1,
        outcomes,
        threshold: CONDENSED_THRESHOLD,
        verbosity: config.report,
    };
    render_report(&inputs, out)?;
    use crate::diagnostics::report::{PAIRS_CSV, REPORT_TXT, TERMS_CSV};
    files.extend([REPORT_TXT, TERMS_CSV, PAIRS_CSV].map(|f| out.join(f)));

    let export_path = out.join(EXPORT_CSV);
    export(ds, &a.model, &a.result, config.export, &export_path).map_err(|e| match e {
        DatasetError::Io(io) => PipelineError::Io(io),
        DatasetError::Csv(c) => PipelineError::Io(c.into()),
        other => PipelineError::Dataset(other),
    })?;
    files.push(export_path);

    let cfg_path = out.join(RUN_CONFIG_TXT);
    fs::write(&cfg_path, config.to_config_string())?;
    files.push(cfg_path);
    Ok(files)
}
