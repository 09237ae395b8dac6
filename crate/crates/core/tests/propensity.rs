mod common;

use common::{
    design, gradient, load_logit_fixture, log_likelihood, newton_logistic, LOGIT_FIXTURES,
};
use psmatch::dataset::Column;
use psmatch::{fit_logistic, predict, Dataset};

/// Coefficients from an external statistics package (full-precision
/// Newton fit of the same files), frozen when the fixtures were generated.
const EXTERNAL: [&[f64]; 3] = [
    &[
        -0.08534984610844258,
        1.5850805280642317,
        -0.3102381761135523,
    ],
    &[
        2.3962439907129216,
        0.8920056824562068,
        -0.21972118425721845,
        1.1961418781343698,
    ],
    &[
        -3.7611900872103816,
        0.3670051627208111,
        0.5952407567821858,
        -1.1069391959906603,
        0.22810814260618972,
    ],
];
const EXTERNAL_LOGLIK: [f64; 3] = [-23.942808430030002, -29.23351136273214, -24.068344383949064];

#[test]
fn agrees_with_newton_oracle() {
    for (name, p) in LOGIT_FIXTURES {
        let ds = load_logit_fixture(name, p);
        let model = fit_logistic(&ds).unwrap();
        let oracle = newton_logistic(&design(&ds), ds.treatment());
        assert!(model.converged);
        for (a, b) in model.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn agrees_with_frozen_external_fit() {
    for (k, (name, p)) in LOGIT_FIXTURES.into_iter().enumerate() {
        let model = fit_logistic(&load_logit_fixture(name, p)).unwrap();
        for (a, b) in model.coefficients.iter().zip(EXTERNAL[k]) {
            assert!((a - b).abs() < 1e-6, "{name}: {a} vs {b}");
        }
        assert!((model.log_likelihood - EXTERNAL_LOGLIK[k]).abs() < 1e-8);
    }
}

#[test]
fn gradient_vanishes_at_optimum() {
    for (name, p) in LOGIT_FIXTURES {
        let ds = load_logit_fixture(name, p);
        let x = design(&ds);
        let model = fit_logistic(&ds).unwrap();
        let g = gradient(&x, ds.treatment(), &model.coefficients);
        let norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(norm < 1e-6, "{name}: {norm}");

        // central differences of the log-likelihood agree with the analytic gradient
        let h = 1e-5;
        for j in 0..model.coefficients.len() {
            let mut up = model.coefficients.clone();
            let mut down = model.coefficients.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (log_likelihood(&x, ds.treatment(), &up)
                - log_likelihood(&x, ds.treatment(), &down))
                / (2.0 * h);
            assert!(fd.abs() < 1e-5, "{name} coefficient {j}: {fd}");
        }
    }
}

#[test]
fn predict_reproduces_fitted_scores() {
    for (name, p) in LOGIT_FIXTURES {
        let ds = load_logit_fixture(name, p);
        let model = fit_logistic(&ds).unwrap();
        for i in 0..ds.len() {
            let s = predict(&model, &ds.covariate_row(i)).unwrap();
            assert!((s - model.scores[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn scores_invariant_under_affine_rescaling() {
    // kept moderate: the separation guard bounds |coefficient| at 30 in the new units
    let shifts = [(2.5, -1.0), (0.5, 3.0), (-3.0, 7.0), (100.0, 0.5)];
    for (name, p) in LOGIT_FIXTURES {
        let ds = load_logit_fixture(name, p);
        let base = fit_logistic(&ds).unwrap();
        let covariates: Vec<Column> = ds
            .covariates()
            .iter()
            .zip(shifts)
            .map(|(c, (a, b))| {
                Column::new(c.name.clone(), c.values.iter().map(|v| a * v + b).collect())
            })
            .collect();
        let moved = Dataset::from_columns("z", ds.treatment().to_vec(), covariates, vec![], vec![])
            .unwrap();
        let refit = fit_logistic(&moved).unwrap();
        for (s, t) in base.scores.iter().zip(&refit.scores) {
            assert!((s - t).abs() < 1e-8, "{name}: {s} vs {t}");
        }
        // slopes scale inversely with the covariate scale
        for (j, (a, _)) in shifts.iter().take(p).enumerate() {
            let expected = base.coefficients[j + 1] / a;
            assert!((refit.coefficients[j + 1] - expected).abs() < 1e-6 * (1.0 + expected.abs()));
        }
    }
}

#[test]
fn refitting_is_bitwise_deterministic() {
    let ds = load_logit_fixture("logit_p4.csv", 4);
    let a = fit_logistic(&ds).unwrap();
    let b = fit_logistic(&ds).unwrap();
    assert_eq!(a, b);
}
