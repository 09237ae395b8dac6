use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use psmatch::config::KeyValues;
use psmatch::dataset::save_csv;
use psmatch::pipeline::{run, PipelineError, RunConfig};
use psmatch::simgen::{simulate, SimSpec};

/// Propensity score matching with balance diagnostics.
#[derive(Parser)]
#[command(name = "psmatch", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic confounded dataset.
    Simulate {
        /// Simulation spec, one `key = value` per line.
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<String>,
    /// Column with unit identifiers (defaults to row numbers).
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    treatment: Option<String>,
    /// Comma-separated covariates used for estimation.
    #[arg(long)]
    covariates: Option<String>,
    /// Comma-separated covariates checked for balance only.
    #[arg(long = "balance-only")]
    balance_only: Option<String>,
    /// Comma-separated outcome columns to summarize after matching.
    #[arg(long)]
    outcomes: Option<String>,
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long)]
    replace: bool,
    /// Caliper in standard deviations of the logit propensity score.
    #[arg(long)]
    caliper: Option<String>,
    /// random | nearest
    #[arg(long = "caliper-mode")]
    caliper_mode: Option<String>,
    /// none | treated | control | both
    #[arg(long)]
    discard: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// full | condensed
    #[arg(long)]
    report: Option<String>,
    /// full | matched
    #[arg(long)]
    export: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, PipelineError> {
        let mut kv = match &self.config {
            Some(path) => KeyValues::parse(&std::fs::read_to_string(path)?)?,
            None => KeyValues::default(),
        };
        let flags = [
            ("input", self.input),
            ("id", self.id),
            ("treatment", self.treatment),
            ("covariates", self.covariates),
            ("balance-only", self.balance_only),
            ("outcomes", self.outcomes),
            ("ratio", self.ratio),
            ("caliper", self.caliper),
            ("caliper-mode", self.caliper_mode),
            ("discard", self.discard),
            ("seed", self.seed),
            ("report", self.report),
            ("export", self.export),
            ("out", self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                kv.insert(key, v);
            }
        }
        if self.replace {
            kv.insert("replace", "true");
        }
        Ok(RunConfig::from_key_values(&kv)?)
    }
}

fn fail(err: &PipelineError) -> ExitCode {
    eprintln!("{}", err.one_line());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[input]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };

    match cli.command {
        Some(Command::Simulate { spec, out }) => {
            let result = std::fs::read_to_string(&spec)
                .map_err(PipelineError::from)
                .and_then(|text| Ok(SimSpec::from_config_str(&text)?))
                .and_then(|spec| Ok(simulate(&spec)?))
                .and_then(|ds| {
                    save_csv(&ds, &out)?;
                    Ok(ds)
                });
            match result {
                Ok(ds) => {
                    println!(
                        "wrote {} units ({} treated, {} control) to {}",
                        ds.len(),
                        ds.n_treated(),
                        ds.n_control(),
                        out.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        None => match cli.run.resolve().and_then(|config| run(&config)) {
            Ok(summary) => {
                print!("{}", summary.to_text());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
