// Greedy nearest-neighbor matching on hand-picked scores: processing
// order, replacement, ratio matching with weights, and a caliper.
//
// `cargo run --example greedy_matching`

use psmatch::dataset::Column;
use psmatch::propensity::logit;
use psmatch::{match_units, CaliperMode, Dataset, MatchResult, MatchSpec, PropensityModel};

/// Units T1, T2 (treated) and C1..C4 (control) with fixed scores.
fn units() -> Result<(Dataset, PropensityModel), Box<dyn std::error::Error>> {
    let scores = vec![0.80, 0.60, 0.78, 0.62, 0.40, 0.77];
    let z = vec![1, 1, 0, 0, 0, 0];
    let ds = Dataset::from_columns(
        "z",
        z,
        vec![Column::new("x", scores.clone())],
        vec![],
        vec![],
    )?;
    let model = PropensityModel {
        terms: vec!["(Intercept)".into(), "x".into()],
        coefficients: vec![0.0, 0.0],
        logits: scores.iter().map(|&s| logit(s)).collect(),
        scores,
        converged: true,
        iterations: 0,
        log_likelihood: 0.0,
    };
    Ok((ds, model))
}

const NAMES: [&str; 6] = ["T1", "T2", "C1", "C2", "C3", "C4"];

fn show(label: &str, r: &MatchResult) {
    let pairs: Vec<String> = r
        .pairs
        .iter()
        .map(|p| format!("({},{})", NAMES[p.treated], NAMES[p.control]))
        .collect();
    let weights: Vec<String> = r.weights.iter().map(|w| format!("{w:.2}")).collect();
    println!(
        "{label:<28} pairs {}  weights [{}]",
        pairs.join(" "),
        weights.join(", ")
    );
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (ds, model) = units()?;

    // T1 (.80) goes first and takes C1 (.78); T2 (.60) then takes C2 (.62).
    let one_to_one = match_units(&model, &ds, &MatchSpec::default())?;
    show("1:1 without replacement", &one_to_one);
    assert_eq!(
        (one_to_one.pairs[0].treated, one_to_one.pairs[0].control),
        (0, 2)
    );

    let two_to_one = match_units(
        &model,
        &ds,
        &MatchSpec {
            ratio: 2,
            ..MatchSpec::default()
        },
    )?;
    show("2:1 without replacement", &two_to_one);
    let control_total: f64 = two_to_one.weights[2..].iter().sum();
    assert!((control_total - 2.0).abs() < 1e-12);

    let reuse = match_units(
        &model,
        &ds,
        &MatchSpec {
            ratio: 2,
            replace: true,
            ..MatchSpec::default()
        },
    )?;
    show("2:1 with replacement", &reuse);

    // With a caliper of .15 SD (about .10 on the logit scale) T1 has no
    // partner: C1, its nearest control, is .12 away. T2 still gets C2.
    let tight = MatchSpec {
        caliper: Some(0.15),
        caliper_mode: CaliperMode::NearestWithin,
        ..MatchSpec::default()
    };
    let r = match_units(&model, &ds, &tight)?;
    show("caliper .15 SD, nearest", &r);
    assert_eq!(r.n_matched_treated(), 1);
    println!(
        "caliper width on the logit scale: {:.4}; matched treated: {}",
        r.caliper_width_abs.unwrap_or(f64::NAN),
        r.n_matched_treated()
    );
    for (name, d) in NAMES.iter().zip(&r.disposition) {
        println!("  {name}: {}", d.as_str());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
