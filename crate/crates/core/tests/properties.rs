use proptest::prelude::*;
use staysim_core::activity::jsd;
use staysim_core::detect::{smooth_neighbor_max, visit_rate_score};
use staysim_core::domain::{truncate_to_window, validate_staypoint_sequence};
use staysim_core::evaluate::{aucroc, average_precision};
use staysim_core::{SimClock, Staypoint, Timestamp};

fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60).prop_flat_map(|n| {
        (proptest::collection::vec(0.0f64..5.0, n), proptest::collection::vec(any::<bool>(), n))
            .prop_filter("both classes present", |(_, l)| l.iter().any(|x| *x) && l.iter().any(|x| !*x))
    })
}

proptest! {
    #[test]
    fn visit_rate_is_zero_only_on_equal_counts(train in 0u64..200, test in 0u64..200) {
        let a = visit_rate_score(train, test);
        prop_assert!(a >= 0.0 && a.is_finite());
        if train > 0 {
            prop_assert_eq!(a == 0.0, train == test);
        }
    }

    #[test]
    fn visit_rate_grows_with_count_gap(train in 1u64..100, d1 in 0u64..50, d2 in 0u64..50) {
        prop_assume!(d1 < d2);
        prop_assert!(visit_rate_score(train, train + d1) < visit_rate_score(train, train + d2));
        if d2 <= train {
            prop_assert!(visit_rate_score(train, train - d1) < visit_rate_score(train, train - d2));
        }
    }

    #[test]
    fn smoothing_is_the_window_of_three_maximum(v in proptest::collection::vec(0.0f64..10.0, 1..40)) {
        let s = smooth_neighbor_max(&v);
        prop_assert_eq!(s.len(), v.len());
        for i in 0..v.len() {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(v.len() - 1);
            let m = v[lo..=hi].iter().copied().fold(f64::MIN, f64::max);
            prop_assert!(s[i] >= v[i]);
            prop_assert_eq!(s[i], m);
        }
    }

    #[test]
    fn aucroc_is_bounded_and_flips_with_score_sign((scores, labels) in labeled_scores()) {
        let a = aucroc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((a + aucroc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_precision_is_bounded_and_perfect_on_separated_scores((scores, labels) in labeled_scores()) {
        let ap = average_precision(&scores, &labels).unwrap();
        prop_assert!(ap > 0.0 && ap <= 1.0);
        let ideal: Vec<f64> = labels.iter().map(|l| if *l { 1.0 } else { 0.0 }).collect();
        prop_assert!((average_precision(&ideal, &labels).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((aucroc(&ideal, &labels).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsd_is_symmetric_and_bounded(
        p in proptest::collection::vec(0.01f64..1.0, 2..12),
        seed in proptest::collection::vec(0.01f64..1.0, 12),
    ) {
        let q = &seed[..p.len()];
        let a = jsd(&p, q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        prop_assert!((a - jsd(q, &p).unwrap()).abs() < 1e-12);
        prop_assert!(jsd(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn truncation_keeps_rows_inside_the_window(
        gaps in proptest::collection::vec((0i64..20_000, 300i64..200_000), 1..60),
        offset in -100_000i64..100_000,
    ) {
        let clock = SimClock::default();
        let mut t = clock.train_start().plus(offset);
        let mut seq = Vec::new();
        for (gap, len) in gaps {
            let start = t.plus(gap);
            let end = start.plus(len);
            t = end;
            if end > clock.train_start() && start < clock.window_last() {
                seq.push(Staypoint::new(1, 1, start, end));
            }
        }
        let (train, test) = truncate_to_window(&seq, &clock).unwrap();
        prop_assert_eq!(train.len() + test.len(), seq.len());
        for s in train.iter().chain(&test) {
            prop_assert!(s.start >= clock.train_start() && s.end <= clock.window_last());
        }
        prop_assert!(train.iter().all(|s| s.start < clock.test_start()));
        prop_assert!(test.iter().all(|s| s.start >= clock.test_start()));
        let joined: Vec<Staypoint> = train.iter().chain(&test).copied().collect();
        prop_assert!(validate_staypoint_sequence(&joined, None).is_empty());
    }
}

#[test]
fn window_constants() {
    let clock = SimClock::default();
    assert_eq!(clock.train_start(), Timestamp::local(2024, 1, 1, 0, 0, 0));
    assert_eq!(clock.window_last(), Timestamp::local(2024, 2, 25, 23, 59, 59));
}
