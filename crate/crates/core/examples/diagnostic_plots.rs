// Render the five diagnostic figures as SVG files.
//
// `cargo run --example diagnostic_plots [output-dir]`

use std::path::Path;

use psmatch::diagnostics::render_plots;
use psmatch::{analyze, simulate, MatchSpec, SimSpec};

pub fn run_in(outdir: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let ds = simulate(&SimSpec::strong_confounder(1500, 3))?;
    let spec = MatchSpec {
        ratio: 2,
        caliper: Some(0.15),
        ..MatchSpec::default()
    };
    let a = analyze(&ds, &spec)?;
    let files = render_plots(
        &a.model,
        &ds,
        &a.result,
        &a.terms_before,
        &a.terms_after,
        outdir,
    )?;
    for f in &files {
        let bytes = std::fs::metadata(f)?.len();
        println!("{} ({bytes} bytes)", f.display());
    }
    assert_eq!(files.len(), 5);
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_in(&std::env::temp_dir().join("psmatch_diagnostic_plots"))
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
