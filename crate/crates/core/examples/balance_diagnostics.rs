// Balance before and after matching: standardized differences for every
// term, the condensed table of large imbalances, the omnibus test and L1.
//
// `cargo run --example balance_diagnostics`

use psmatch::balance::CONDENSED_THRESHOLD;
use psmatch::diagnostics::report::{omnibus_text, sample_size_text};
use psmatch::{analyze, condensed_table, simulate, MatchSpec, SimSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ds = simulate(&SimSpec::strong_confounder(4000, 7))?;
    let spec = MatchSpec {
        caliper: Some(0.15),
        seed: 7,
        ..MatchSpec::default()
    };
    let a = analyze(&ds, &spec)?;

    print!("{}", sample_size_text(&a.sizes));
    println!("{:<10} {:>9} {:>9}", "term", "before", "after");
    for (b, t) in a.terms_before.iter().zip(&a.terms_after) {
        println!("{:<10} {:>9.3} {:>9.3}", b.term, b.smd, t.smd);
    }

    let large = condensed_table(&a.terms_before, CONDENSED_THRESHOLD);
    println!(
        "terms above {CONDENSED_THRESHOLD} before matching: {}",
        large.len()
    );
    let left = condensed_table(&a.terms_after, CONDENSED_THRESHOLD);
    println!(
        "terms above {CONDENSED_THRESHOLD} after matching: {}",
        left.len()
    );

    println!("{}", omnibus_text("omnibus before", &a.omnibus_before));
    println!("{}", omnibus_text("omnibus after", &a.omnibus_after));
    println!(
        "L1 before {:.3}, after {:.3}",
        a.l1.l1_before, a.l1.l1_after
    );
    assert!(a.l1.l1_after < a.l1.l1_before);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
