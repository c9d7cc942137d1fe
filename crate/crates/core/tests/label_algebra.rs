use interlerp::label_space::{build_schedule, one_hot, transfer_mass, transition_count, validate, ConditioningVector, Violation};
use interlerp::Error;
use proptest::prelude::*;

/// `(n, source, target)` with distinct endpoints.
fn endpoints() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..16).prop_flat_map(|n| (Just(n), 0..n, 0..n - 1)).prop_map(|(n, s, t)| (n, s, if t >= s { t + 1 } else { t }))
}

/// Step sizes: reciprocals of integers, dyadic values and arbitrary reals.
fn step() -> impl Strategy<Value = f64> {
    prop_oneof![(1u32..=100).prop_map(|k| 1.0 / k as f64), (1u32..=64).prop_map(|k| k as f64 / 64.0), 0.005..=1.0f64,]
}

/// A point on the simplex with at least two classes.
fn simplex() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 2..12).prop_filter_map("all-zero weights", |w| {
        let s: f64 = w.iter().sum();
        (s > 0.0).then(|| w.iter().map(|x| x / s).collect::<Vec<f64>>()).filter(|v| validate(v).is_empty())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn schedules_are_valid_and_exact_at_the_ends((n, s, t) in endpoints(), e in step()) {
        let sched = build_schedule(s, t, e, n).unwrap();
        prop_assert_eq!(sched.len(), transition_count(e) + 1);
        prop_assert_eq!(&sched.steps[0], &one_hot(s, n).unwrap());
        prop_assert_eq!(sched.steps.last().unwrap(), &one_hot(t, n).unwrap());
        for v in &sched.steps {
            prop_assert!(validate(v.values()).is_empty());
        }
        // each step moves mass only between source and target
        let last = sched.len() - 2;
        let mut cumulative = one_hot(s, n).unwrap();
        for (k, w) in sched.steps.windows(2).enumerate() {
            let moved = w[1].get(t) - w[0].get(t);
            prop_assert!((w[0].get(s) - w[1].get(s) - moved).abs() <= 1e-12);
            if k < last {
                prop_assert!((moved - e).abs() <= 1e-12, "step {} moved {}", k, moved);
                cumulative = transfer_mass(&cumulative, s, t, e).unwrap();
                for i in 0..n {
                    prop_assert!((cumulative.get(i) - w[1].get(i)).abs() <= 1e-12);
                }
            } else {
                prop_assert!(moved > 0.0 && moved <= e + 1e-12);
            }
            for i in (0..n).filter(|&i| i != s && i != t) {
                prop_assert_eq!(w[1].get(i), 0.0);
            }
        }
    }

    #[test]
    fn transfer_is_invertible(v in simplex(), picks in (0usize..64, 0usize..64), frac in 0.0..=1.0f64) {
        let n = v.len();
        let s = picks.0 % n;
        let t = (s + 1 + picks.1 % (n - 1)) % n;
        let e = v[s] * frac;
        prop_assume!(e > 0.0);
        let cv = ConditioningVector::new(v.clone()).unwrap();
        let there = transfer_mass(&cv, s, t, e).unwrap();
        let back = transfer_mass(&there, t, s, e).unwrap();
        for i in 0..n {
            prop_assert!((back.get(i) - v[i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn fixed_cases() {
    assert_eq!(one_hot(0, 6).unwrap().values(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(one_hot(5, 6).unwrap().values(), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    assert!(matches!(one_hot(6, 6), Err(Error::Index { index: 6, n: 6 })));

    let v = transfer_mass(&one_hot(0, 6).unwrap(), 0, 5, 0.3).unwrap();
    assert_eq!(v.values(), &[0.7, 0.0, 0.0, 0.0, 0.0, 0.3]);
    let half = ConditioningVector::new(vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
    assert_eq!(transfer_mass(&half, 0, 5, 0.5).unwrap(), one_hot(5, 6).unwrap());
    let low = ConditioningVector::new(vec![0.05, 0.0, 0.0, 0.0, 0.0, 0.95]).unwrap();
    assert!(matches!(transfer_mass(&low, 0, 5, 0.1), Err(Error::InsufficientMass { .. })));

    let s = build_schedule(0, 5, 0.1, 6).unwrap();
    assert_eq!(s.len(), 11);
    for (got, want) in s.steps[3].values().iter().zip([0.7, 0.0, 0.0, 0.0, 0.0, 0.3]) {
        assert!((got - want).abs() <= 1e-12);
    }
    let s = build_schedule(0, 5, 0.5, 6).unwrap();
    assert_eq!(s.steps, vec![one_hot(0, 6).unwrap(), half, one_hot(5, 6).unwrap()]);
    assert!(matches!(build_schedule(2, 2, 0.1, 6), Err(Error::DegenerateTransfer(2))));

    assert!(validate(&[0.5, 0.5]).is_empty());
    assert!(matches!(validate(&[0.5, 0.6]).as_slice(), [Violation::Sum { .. }]));
    let range = validate(&[1.2, -0.2]);
    assert_eq!(range.len(), 2);
    assert!(range.iter().all(|v| matches!(v, Violation::OutOfRange { .. })));
}
