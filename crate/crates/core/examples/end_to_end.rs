// The whole workflow from a CSV file: load, estimate, match, diagnose,
// export. Equivalent to
// `psmatch --input data.csv --treatment z --covariates x1,x2 --balance-only x3 --outcomes y --caliper 0.15 --seed 7 --out <dir>`.
//
// `cargo run --example end_to_end [output-dir]`

use std::path::Path;

use psmatch::config::KeyValues;
use psmatch::dataset::save_csv;
use psmatch::{run, simulate, RunConfig, SimSpec};

pub fn run_in(dir: &Path) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all(dir)?;
    let input = dir.join("data.csv");
    save_csv(&simulate(&SimSpec::strong_confounder(3000, 5))?, &input)?;

    let text = format!(
        "input = {}\ntreatment = z\ncovariates = x1, x2\nbalance-only = x3\noutcomes = y\n\
         caliper = 0.15\nseed = 7\nreport = condensed\nout = {}\n",
        input.display(),
        dir.join("results").display()
    );
    let config = RunConfig::from_key_values(&KeyValues::parse(&text)?)?;
    let summary = run(&config)?;
    print!("{}", summary.to_text());
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    assert_eq!(summary.files.len(), 10);
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_in(&std::env::temp_dir().join("psmatch_end_to_end"))
}

fn main() {
    let result = match std::env::args().nth(1) {
        Some(dir) => run_in(Path::new(&dir)),
        None => run_example(),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
