mod common;

use common::{random_instance, reference_greedy, score_instance};
use proptest::prelude::*;
use psmatch::rng::SplitMix64;
use psmatch::{match_units, CaliperMode, Discard, Disposition, MatchError, MatchSpec};

fn units() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    prop::collection::vec((any::<bool>(), 0.01f64..0.99), 2..40)
        .prop_filter("both groups present", |v| {
            v.iter().any(|(t, _)| *t) && v.iter().any(|(t, _)| !*t)
        })
        .prop_map(|v| v.into_iter().map(|(t, s)| (t as u8, s)).unzip())
}

fn specs() -> impl Strategy<Value = MatchSpec> {
    (
        1usize..4,
        any::<bool>(),
        prop::option::of(0.05f64..1.0),
        prop_oneof![
            Just(Discard::None),
            Just(Discard::TreatedOnly),
            Just(Discard::ControlOnly),
            Just(Discard::Both)
        ],
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(
            |(ratio, replace, caliper, discard, nearest, seed)| MatchSpec {
                ratio,
                replace,
                caliper,
                discard,
                caliper_mode: if nearest {
                    CaliperMode::NearestWithin
                } else {
                    CaliperMode::RandomWithin
                },
                seed,
            },
        )
}

proptest! {
    #[test]
    fn matching_invariants((z, scores) in units(), spec in specs()) {
        let (ds, model) = score_instance(&z, &scores);
        let r = match match_units(&model, &ds, &spec) {
            Ok(r) => r,
            Err(MatchError::NoTreated | MatchError::NoControl) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let n = z.len();
        let mut per_treated = vec![0usize; n];
        let mut per_control = vec![0usize; n];
        for p in &r.pairs {
            prop_assert_eq!(z[p.treated], 1);
            prop_assert_eq!(z[p.control], 0);
            per_treated[p.treated] += 1;
            per_control[p.control] += 1;
            if let Some(w) = r.caliper_width_abs {
                prop_assert!(p.distance <= w + 1e-12);
                let d = (model.logits[p.treated] - model.logits[p.control]).abs();
                prop_assert!(d <= w + 1e-12);
            }
        }
        for i in 0..n {
            let matched = r.disposition[i] == Disposition::Matched;
            if z[i] == 1 {
                prop_assert_eq!(matched, per_treated[i] >= 1);
                prop_assert!(per_treated[i] <= spec.ratio);
                prop_assert_eq!(r.weights[i], if matched { 1.0 } else { 0.0 });
            } else {
                prop_assert_eq!(matched, per_control[i] >= 1);
                if !spec.replace {
                    prop_assert!(per_control[i] <= 1);
                }
                if !matched {
                    prop_assert_eq!(r.weights[i], 0.0);
                }
            }
        }
        let control_sum: f64 = (0..n).filter(|&i| z[i] == 0).map(|i| r.weights[i]).sum();
        prop_assert!((control_sum - r.n_matched_treated() as f64).abs() < 1e-9);

        // same inputs, same result, bit for bit
        prop_assert_eq!(&r, &match_units(&model, &ds, &spec).unwrap());
    }

    #[test]
    fn wider_caliper_never_loses_treated((z, scores) in units(), c in 0.01f64..1.0, grow in 1.0f64..4.0,
                                          ratio in 1usize..3, replace in any::<bool>()) {
        let (ds, model) = score_instance(&z, &scores);
        let spec = |c: f64| MatchSpec {
            ratio,
            replace,
            caliper: Some(c),
            caliper_mode: CaliperMode::NearestWithin,
            ..MatchSpec::default()
        };
        let narrow = match_units(&model, &ds, &spec(c)).unwrap();
        let wide = match_units(&model, &ds, &spec(c * grow)).unwrap();
        prop_assert!(wide.n_matched_treated() >= narrow.n_matched_treated());
    }

    #[test]
    fn nearest_mode_equals_reference((z, scores) in units(), ratio in 1usize..3, replace in any::<bool>(),
                                     caliper in prop::option::of(0.05f64..1.0)) {
        let (ds, model) = score_instance(&z, &scores);
        let spec = MatchSpec {
            ratio,
            replace,
            caliper,
            caliper_mode: CaliperMode::NearestWithin,
            ..MatchSpec::default()
        };
        let got = match_units(&model, &ds, &spec).unwrap();
        let want = reference_greedy(&z, &scores, &model.logits, ratio, replace, caliper);
        let pairs: Vec<(usize, usize)> = got.pairs.iter().map(|p| (p.treated, p.control)).collect();
        prop_assert_eq!(pairs, want.pairs);
        for (a, b) in got.weights.iter().zip(&want.weights) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn ratio_weights_rescale_to_matched_count() {
    // T1 gets two controls, T2 only one: raw control weights 1/2, 1/2, 1 already sum to 2.
    let z = [1, 1, 0, 0, 0];
    let scores = [0.8, 0.3, 0.79, 0.78, 0.31];
    let (ds, model) = score_instance(&z, &scores);
    let spec = MatchSpec {
        ratio: 2,
        caliper: Some(0.3),
        caliper_mode: CaliperMode::NearestWithin,
        ..MatchSpec::default()
    };
    let r = match_units(&model, &ds, &spec).unwrap();
    assert_eq!(r.pairs.len(), 3);
    assert_eq!(&r.weights[2..], &[0.5, 0.5, 1.0]);
}

#[test]
fn random_within_draws_differ_across_seeds() {
    let mut rng = SplitMix64::new(99);
    let z: Vec<u8> = (0..200).map(|i| (i % 4 == 0) as u8).collect();
    let scores: Vec<f64> = (0..200).map(|_| 0.3 + 0.4 * rng.next_f64()).collect();
    let (ds, model) = score_instance(&z, &scores);
    let spec = |seed| MatchSpec {
        caliper: Some(0.5),
        seed,
        ..MatchSpec::default()
    };
    let a = match_units(&model, &ds, &spec(1)).unwrap();
    let b = match_units(&model, &ds, &spec(2)).unwrap();
    assert_ne!(a.pairs, b.pairs);
    assert_eq!(a, match_units(&model, &ds, &spec(1)).unwrap());
}

#[test]
fn reference_agrees_on_fixed_instances() {
    let mut rng = SplitMix64::new(2024);
    for _ in 0..200 {
        let (z, scores) = random_instance(&mut rng, 6, 6);
        let (ds, model) = score_instance(&z, &scores);
        for replace in [false, true] {
            let spec = MatchSpec {
                replace,
                ..MatchSpec::default()
            };
            let got = match_units(&model, &ds, &spec).unwrap();
            let want = reference_greedy(&z, &scores, &model.logits, 1, replace, None);
            let pairs: Vec<(usize, usize)> =
                got.pairs.iter().map(|p| (p.treated, p.control)).collect();
            assert_eq!(pairs, want.pairs, "z={z:?} scores={scores:?}");
        }
    }
}
