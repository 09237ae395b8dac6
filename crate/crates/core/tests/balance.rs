use proptest::prelude::*;
use psmatch::balance::{balance_terms, TermKind};
use psmatch::dataset::Column;
use psmatch::{
    fit_logistic, l1_measure, match_units, omnibus_d2, simulate, smd_table, Dataset, MatchSpec,
    Phase, SimSpec,
};

fn dataset(z: &[u8], cols: &[Vec<f64>]) -> Dataset {
    let covariates = cols
        .iter()
        .enumerate()
        .map(|(j, v)| Column::new(format!("x{}", j + 1), v.clone()))
        .collect();
    Dataset::from_columns("z", z.to_vec(), covariates, vec![], vec![]).unwrap()
}

fn affine(cols: &[Vec<f64>], a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    cols.iter()
        .enumerate()
        .map(|(j, v)| v.iter().map(|x| a[j] * x + b[j]).collect())
        .collect()
}

fn sample(seed: u64, n: usize, p: usize) -> (Vec<u8>, Vec<Vec<f64>>) {
    let mut spec = SimSpec::independent(n, p, seed);
    spec.selection = vec![0.4; p];
    let ds = simulate(&spec).unwrap();
    let cols = ds.covariates().iter().map(|c| c.values.clone()).collect();
    (ds.treatment().to_vec(), cols)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn main_smd_is_scale_invariant(seed in any::<u64>(), a in prop::collection::vec(0.1f64..50.0, 3),
                                   b in prop::collection::vec(-100.0f64..100.0, 3)) {
        let (z, cols) = sample(seed, 120, 3);
        let base = smd_table(&dataset(&z, &cols), None, Phase::Before, false).unwrap();
        let moved = smd_table(&dataset(&z, &affine(&cols, &a, &b)), None, Phase::Before, false).unwrap();
        for (s, t) in base.iter().zip(&moved) {
            prop_assert!((s.smd - t.smd).abs() < 1e-9, "{} vs {}", s.smd, t.smd);
        }
    }

    #[test]
    fn negating_a_covariate_flips_its_smd(seed in any::<u64>()) {
        let (z, cols) = sample(seed, 80, 2);
        let base = smd_table(&dataset(&z, &cols), None, Phase::Before, false).unwrap();
        let flipped = smd_table(&dataset(&z, &affine(&cols, &[-1.0, 1.0], &[0.0, 0.0])), None, Phase::Before, false)
            .unwrap();
        prop_assert!((base[0].smd + flipped[0].smd).abs() < 1e-12);
        prop_assert_eq!(base[1].smd, flipped[1].smd);
    }

    #[test]
    fn omnibus_is_affine_invariant(seed in any::<u64>(), a in prop::collection::vec(0.2f64..20.0, 4),
                                   b in prop::collection::vec(-50.0f64..50.0, 4)) {
        let (z, cols) = sample(seed, 150, 4);
        let base = omnibus_d2(&dataset(&z, &cols), None, Phase::Before).unwrap();
        let moved = omnibus_d2(&dataset(&z, &affine(&cols, &a, &b)), None, Phase::Before).unwrap();
        prop_assert_eq!(base.df, moved.df);
        prop_assert!((base.statistic - moved.statistic).abs() < 1e-8 * (1.0 + base.statistic));
        prop_assert!(base.p_value >= 0.0 && base.p_value <= 1.0);
    }

    #[test]
    fn l1_stays_in_unit_interval(seed in any::<u64>(), caliper in prop::option::of(0.05f64..0.5)) {
        let mut spec = SimSpec::independent(200, 3, seed);
        spec.selection = vec![0.8, -0.5, 0.3];
        let ds = simulate(&spec).unwrap();
        let model = fit_logistic(&ds).unwrap();
        let r = match_units(&model, &ds, &MatchSpec { caliper, seed, ..MatchSpec::default() }).unwrap();
        let l1 = l1_measure(&ds, &r);
        prop_assert!((0.0..=1.0).contains(&l1.l1_before));
        prop_assert!((0.0..=1.0).contains(&l1.l1_after));
    }
}

#[test]
fn expanded_terms_cover_squares_and_pairs() {
    let z = [1, 0, 1, 0, 1, 0];
    let flag = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let x = vec![0.5, 1.5, -2.0, 3.0, 0.0, 1.0];
    let y = vec![2.0, 1.0, 0.0, -1.0, 4.0, 3.0];
    let ds = dataset(&z, &[x, flag, y]);
    let terms = balance_terms(&ds, true);
    let names: Vec<&str> = terms.iter().map(|t| t.name.as_str()).collect();
    // the binary column gets no square
    assert_eq!(
        names,
        ["x1", "x2", "x3", "x1^2", "x3^2", "x1*x2", "x1*x3", "x2*x3"]
    );
    assert_eq!(
        terms
            .iter()
            .filter(|t| t.kind == TermKind::Interaction)
            .count(),
        3
    );
    let table = smd_table(&ds, None, Phase::Before, true).unwrap();
    assert_eq!(table.len(), 8);
    assert_eq!(table[5].mean_t, (0.5 + 0.0 + 0.0) / 3.0);
}

#[test]
fn after_phase_needs_a_result() {
    let ds = dataset(&[1, 0, 1, 0], &[vec![1.0, 2.0, 3.0, 5.0]]);
    assert!(smd_table(&ds, None, Phase::After, false).is_err());
    assert!(omnibus_d2(&ds, None, Phase::After).is_err());
}

#[test]
fn unconfounded_simulation_is_balanced_on_average() {
    let mut total = [0.0; 3];
    let reps = 200;
    for seed in 0..reps {
        let ds = simulate(&SimSpec::independent(300, 3, seed)).unwrap();
        let t = smd_table(&ds, None, Phase::Before, false).unwrap();
        for (acc, row) in total.iter_mut().zip(&t) {
            *acc += row.smd;
        }
    }
    // each smd has SD about sqrt(4/300) = .115; the mean of 200 has SD about .008
    for acc in total {
        assert!((acc / reps as f64).abs() < 0.03, "{}", acc / reps as f64);
    }
}

#[test]
fn simulated_covariance_matches_spec() {
    let mut spec = SimSpec::strong_confounder(100_000, 11);
    spec.sds = vec![1.0, 2.0, 0.5];
    let ds = simulate(&spec).unwrap();
    let cols: Vec<&[f64]> = ds
        .covariates()
        .iter()
        .map(|c| c.values.as_slice())
        .collect();
    let n = ds.len() as f64;
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mut frob = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let cov = cols[i]
                .iter()
                .zip(cols[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>()
                / (n - 1.0);
            let target = spec.sds[i] * spec.correlation[i][j] * spec.sds[j];
            frob += (cov - target).powi(2);
        }
    }
    assert!(frob.sqrt() < 0.05, "{}", frob.sqrt());
}
