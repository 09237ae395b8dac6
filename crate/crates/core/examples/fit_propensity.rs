// Estimate propensity scores by logistic regression and score a new unit.
//
// `cargo run --example fit_propensity`

use psmatch::dataset::Column;
use psmatch::{fit_logistic, predict, simulate, Dataset, PropensityError, SimSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ds = simulate(&SimSpec::strong_confounder(2000, 42))?;
    let model = fit_logistic(&ds)?;
    println!(
        "{} units, {} treated; converged after {} iterations (log-likelihood {:.3})",
        ds.len(),
        ds.n_treated(),
        model.iterations,
        model.log_likelihood
    );
    for (term, b) in model.terms.iter().zip(&model.coefficients) {
        println!("  {term:<12} {b:>9.4}");
    }

    let unit = [1.0, 0.0, -0.5];
    let score = predict(&model, &unit)?;
    println!("score of x = {unit:?}: {score:.4}");
    assert!(score > 0.0 && score < 1.0);

    // A covariate that is an exact multiple of another cannot be estimated.
    let x1 = ds.covariates()[0].values.clone();
    let doubled: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
    let bad = Dataset::from_columns(
        "z",
        ds.treatment().to_vec(),
        vec![Column::new("x1", x1), Column::new("x1_twice", doubled)],
        vec![],
        vec![],
    )?;
    match fit_logistic(&bad) {
        Err(PropensityError::RankDeficient(col)) => {
            println!("rank deficient design, offending column: {col}")
        }
        other => return Err(format!("expected a rank error, got {other:?}").into()),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
