mod common;

use common::oracles;
use interlerp::metrics::{self, monotonicity, spearman, AxisMetrics, Direction, PairedSeries};
use interlerp::Error;
use proptest::prelude::*;

const TOL: f64 = 1e-9;

/// Continuous values mixed with a coarse grid, so ties and exact zeros
/// show up regularly.
fn value() -> impl Strategy<Value = f64> {
    prop_oneof![3 => -1.0..1.0f64, 1 => (-4i32..=4).prop_map(|k| k as f64 / 4.0)]
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..48).prop_flat_map(|n| (prop::collection::vec(value(), n), prop::collection::vec(value(), n)))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn metrics_match_brute_force((p, t) in pair()) {
        let s = PairedSeries::new(&p, &t).unwrap();
        prop_assert!(close(metrics::rmse(&s), oracles::rmse(&p, &t)));
        prop_assert_eq!(metrics::sagr(&s), oracles::sagr(&p, &t));
        match (metrics::corr(&s), oracles::corr(&p, &t)) {
            (Ok(a), Some(b)) => prop_assert!(close(a, b), "corr {} vs {}", a, b),
            (Err(Error::DegenerateInput(_)), None) => {}
            (a, b) => prop_assert!(false, "corr disagreement: {:?} vs {:?}", a, b),
        }
        match (metrics::ccc(&s), oracles::ccc(&p, &t)) {
            (Ok(a), Some(b)) => prop_assert!(close(a, b), "ccc {} vs {}", a, b),
            (Err(Error::DegenerateInput(_)), None) => {}
            (a, b) => prop_assert!(false, "ccc disagreement: {:?} vs {:?}", a, b),
        }
        if let (Ok(a), Some(b)) = (spearman(&p, &t), oracles::spearman(&p, &t)) {
            prop_assert!(close(a, b), "spearman {} vs {}", a, b);
        }
    }

    #[test]
    fn symmetric_and_scale_invariant((p, t) in pair(), k in 0.01..100.0f64) {
        let (a, b) = (PairedSeries::new(&p, &t).unwrap(), PairedSeries::new(&t, &p).unwrap());
        prop_assert_eq!(metrics::rmse(&a), metrics::rmse(&b));
        prop_assert_eq!(metrics::rmse(&PairedSeries::new(&p, &p).unwrap()), 0.0);
        if let (Ok(x), Ok(y)) = (metrics::ccc(&a), metrics::ccc(&b)) {
            prop_assert!(close(x, y));
        }
        let (ps, ts): (Vec<f64>, Vec<f64>) = (p.iter().map(|v| v * k).collect(), t.iter().map(|v| v * k).collect());
        prop_assert_eq!(metrics::sagr(&a), metrics::sagr(&PairedSeries::new(&ps, &ts).unwrap()));
    }

    #[test]
    fn affine_and_monotone_invariance((p, t) in pair(), k in 0.1..10.0f64, c in -5.0..5.0f64) {
        let moved: Vec<f64> = p.iter().map(|v| k * v + c).collect();
        if let (Ok(x), Ok(y)) = (metrics::corr(&PairedSeries::new(&p, &t).unwrap()), metrics::corr(&PairedSeries::new(&moved, &t).unwrap())) {
            prop_assert!(close(x, y), "{} vs {}", x, y);
        }
        if p.len() >= 3 {
            let warped: Vec<f64> = p.iter().map(|v| v.exp()).collect();
            prop_assert_eq!(monotonicity(&p).unwrap(), monotonicity(&warped).unwrap());
        }
    }
}

#[test]
fn fixed_cases() {
    let ps = |p: &'static [f64], t: &'static [f64]| PairedSeries::new(p, t).unwrap();
    assert_eq!(metrics::rmse(&ps(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])), 0.0);
    assert_eq!(metrics::rmse(&ps(&[0.0, 0.0], &[1.0, 1.0])), 1.0);
    assert_eq!(metrics::corr(&ps(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0])).unwrap(), 1.0);
    assert_eq!(metrics::corr(&ps(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap(), -1.0);
    assert!(matches!(metrics::corr(&ps(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])), Err(Error::DegenerateInput(_))));
    assert_eq!(metrics::sagr(&ps(&[0.5, -0.2], &[0.1, -0.9])), 1.0);
    assert_eq!(metrics::sagr(&ps(&[0.5, -0.2], &[-0.1, -0.9])), 0.5);
    assert_eq!(metrics::sagr(&ps(&[0.0], &[0.0])), 1.0);
    assert_eq!(metrics::ccc(&ps(&[0.1, 0.5, -0.3], &[0.1, 0.5, -0.3])).unwrap(), 1.0);
    assert_eq!(metrics::ccc(&ps(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap(), -1.0);
    assert!(matches!(metrics::ccc(&ps(&[2.0, 2.0], &[5.0, 5.0])), Err(Error::DegenerateInput(_))));
    assert!(matches!(PairedSeries::new(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));

    let up = monotonicity(&[0.0, 0.2, 0.5, 0.9]).unwrap();
    assert_eq!((up.spearman_rho, up.direction), (1.0, Direction::Increasing));
    assert_eq!(monotonicity(&[3.0, 2.0, 1.0]).unwrap().spearman_rho, -1.0);
    let flat = monotonicity(&[0.4; 5]).unwrap();
    assert_eq!((flat.spearman_rho, flat.direction), (0.0, Direction::Increasing));

    let curve = [0.0, 0.1, 0.05, 0.3, 0.6, 0.8, 0.85, 0.9, 0.95, 0.97, 1.0];
    let steps: Vec<f64> = (0..curve.len()).map(|i| i as f64).collect();
    let expected = oracles::spearman(&curve, &steps).unwrap();
    assert!((monotonicity(&curve).unwrap().spearman_rho - expected).abs() <= 1e-12);
    // one adjacent swap among 11 points: 1 - 6 * 2 / (11 * 120)
    assert!((expected - (1.0 - 12.0 / 1320.0)).abs() <= 1e-12);
}

#[test]
fn axis_row_bundles_all_four() {
    let row = AxisMetrics::compute("valence", &[0.1, 0.5, -0.3, 0.2], &[0.2, 0.4, -0.1, 0.0]).unwrap();
    let (p, t) = ([0.1, 0.5, -0.3, 0.2], [0.2, 0.4, -0.1, 0.0]);
    assert!(close(row.rmse, oracles::rmse(&p, &t)));
    assert!(close(row.corr, oracles::corr(&p, &t).unwrap()));
    assert!(close(row.ccc, oracles::ccc(&p, &t).unwrap()));
    assert_eq!(row.sagr, 0.75);
}
