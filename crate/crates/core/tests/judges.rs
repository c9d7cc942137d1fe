use interlerp::datasets::synth::{synth_faces, SyntheticFaceSpec};
use interlerp::datasets::{LabeledImageSet, Split};
use interlerp::judges::{train_classifier, train_va_regressor, JudgeCheckpoint, JudgeConfig, JudgeKind, JudgeMetrics};
use interlerp::{Error, ImageTensor, LabelMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three 8x8 classes: bright top half, bright left half, bright diagonal.
fn toy(n: usize, seed: u64, split: Split) -> LabeledImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let l = i % 3;
        let data = (0..64usize)
            .map(|p| {
                let (y, x) = (p / 8, p % 8);
                let on = match l {
                    0 => y < 4,
                    1 => x < 4,
                    _ => x.abs_diff(y) <= 1,
                };
                (if on { 0.6 } else { -0.6 }) + rng.random_range(-0.4..0.4)
            })
            .collect();
        images.push(ImageTensor::new(8, 8, 1, data).unwrap());
        labels.push(l);
    }
    let lm = LabelMap::new(vec!["top".into(), "left".into(), "diag".into()]).unwrap();
    LabeledImageSet::new(images, labels, lm, split).unwrap()
}

fn small_config(floor: f64) -> JudgeConfig {
    JudgeConfig { channels: vec![4, 8], hidden: 16, batch_size: 16, max_epochs: 4, learning_rate: 3e-3, ..JudgeConfig::new(floor) }
}

#[test]
fn classifier_learns_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (toy(240, 1, Split::Train), toy(60, 2, Split::Test));
    let ck = train_classifier(&train, &test, &small_config(0.9), dir.path()).unwrap();
    assert!(ck.manifest.gate.passed);
    let back = JudgeCheckpoint::load(dir.path()).unwrap();
    assert_eq!(back.kind(), JudgeKind::Classifier);
    let scores = back.evaluate_classifier(&test).unwrap();
    match &ck.manifest.metrics {
        JudgeMetrics::Classifier(m) => {
            assert!((m.accuracy - scores.accuracy).abs() < 1e-6);
            assert_eq!(m.confusion, scores.confusion);
        }
        other => panic!("unexpected metrics {other:?}"),
    }
    let batch = back.classify_batch(test.images()).unwrap();
    for (i, cv) in batch.iter().enumerate().step_by(7) {
        assert!((cv.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(cv, &back.classify(&test.images()[i]).unwrap());
    }
    assert!(matches!(back.predict_va(&test.images()[0]), Err(Error::Kind { .. })));
    let wrong = ImageTensor::new(4, 4, 1, vec![0.0; 16]).unwrap();
    assert!(matches!(back.classify(&wrong), Err(Error::Shape(_))));
}

#[test]
fn missed_gate_still_saves_a_failing_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = JudgeConfig { max_epochs: 1, ..small_config(1.01) };
    let err = train_classifier(&toy(48, 1, Split::Train), &toy(30, 2, Split::Test), &cfg, dir.path()).unwrap_err();
    assert!(matches!(err, Error::QualityGate { .. }), "{err}");
    let ck = JudgeCheckpoint::load(dir.path()).unwrap();
    assert!(!ck.manifest.gate.passed);
}

#[test]
fn relabelled_classes_give_permuted_confidences() {
    let (train, test) = (toy(120, 3, Split::Train), toy(30, 4, Split::Test));
    // the same class names, listed in a different index order
    let perm = [2, 0, 1];
    let lm = LabelMap::new(vec!["left".into(), "diag".into(), "top".into()]).unwrap();
    let (train_p, test_p) = (train.permute_labels(&perm, lm.clone()).unwrap(), test.permute_labels(&perm, lm).unwrap());
    let cfg = JudgeConfig { max_epochs: 2, ..small_config(0.0) };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ja = train_classifier(&train, &test, &cfg, a.path()).unwrap();
    let jb = train_classifier(&train_p, &test_p, &cfg, b.path()).unwrap();
    let (JudgeMetrics::Classifier(ma), JudgeMetrics::Classifier(mb)) = (&ja.manifest.metrics, &jb.manifest.metrics) else { panic!("kind") };
    for (i, row) in ma.confusion.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            assert_eq!(mb.confusion[perm[i]][perm[j]], count);
        }
    }
    // bit-level equality is not expected: summation order inside the head
    // follows the class order
    let pa = ja.classify_batch(test.images()).unwrap();
    let pb = jb.classify_batch(test.images()).unwrap();
    for (x, y) in pa.iter().zip(&pb) {
        for (old, &new) in perm.iter().enumerate() {
            assert!((x.probs[old] - y.probs[new]).abs() < 1e-2, "{:?} vs {:?}", x.probs, y.probs);
        }
    }
}

#[test]
fn regressor_recovers_synthetic_valence_arousal() {
    let spec = SyntheticFaceSpec { image_size: 16, ..SyntheticFaceSpec::new(600, 5) };
    let (train, test) = synth_faces(&spec).unwrap().split_tail(150).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = JudgeConfig { channels: vec![8, 16], hidden: 32, batch_size: 32, max_epochs: 8, ..JudgeConfig::new(0.5) };
    let ck = train_va_regressor(&train, &test, &cfg, dir.path()).unwrap();
    let JudgeMetrics::Regressor { axes } = &ck.manifest.metrics else { panic!("kind") };
    let again = ck.evaluate_regressor(&test).unwrap();
    for (m, r) in axes.iter().zip(&again) {
        assert!((m.ccc - r.ccc).abs() < 1e-6 && (m.rmse - r.rmse).abs() < 1e-6);
    }
    let report = std::fs::read_to_string(dir.path().join("metrics_report.csv")).unwrap();
    assert!(report.lines().count() == 3, "{report}");
    let p = ck.predict_va(&test.set.images()[0]).unwrap();
    assert!(p.valence.abs() <= 1.0 && p.arousal.abs() <= 1.0);
    assert!(matches!(ck.classify(&test.set.images()[0]), Err(Error::Kind { .. })));
}

#[test]
fn ten_image_toy_set_for_one_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = JudgeConfig { max_epochs: 1, ..small_config(0.0) };
    let ck = train_classifier(&toy(10, 3, Split::Train), &toy(6, 4, Split::Test), &cfg, dir.path()).unwrap();
    assert!(dir.path().join("manifest.json").is_file());
    let JudgeMetrics::Classifier(s) = &ck.manifest.metrics else { panic!("kind") };
    assert!((0.0..=1.0).contains(&s.accuracy));
    assert_eq!(ck.manifest.epochs_completed, 1);

    // totality on an image unlike anything seen in training
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = ImageTensor::new(8, 8, 1, (0..64).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap();
    let cv = ck.classify(&noise).unwrap();
    assert_eq!(cv.len(), 3);
    assert!(cv.probs.iter().all(|&p| p >= 0.0));
    assert!((cv.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert!(matches!(ck.predict_va(&noise), Err(Error::Kind { .. })));
}

#[test]
fn empty_or_mismatched_training_sets_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticFaceSpec { image_size: 16, ..SyntheticFaceSpec::new(40, 2) };
    let (train, test) = synth_faces(&spec).unwrap().split_tail(10).unwrap();
    let empty = train.subset(&[]);
    let cfg = JudgeConfig::new(0.0);
    assert!(matches!(train_va_regressor(&empty, &test, &cfg, dir.path()), Err(Error::Data(_))));
    assert!(matches!(train_classifier(&toy(10, 1, Split::Train), &test.set, &cfg, dir.path()), Err(Error::Consistency(_))));
}
