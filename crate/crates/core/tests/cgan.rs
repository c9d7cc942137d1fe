mod common;

use common::gan::{discriminator_probes, rel_err, smallest_config};
use interlerp::cgan::{sample_noise, GeneratorCheckpoint};
use interlerp::{one_hot, ConditioningVector, LabelMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn discriminator_gradients_match_central_differences() {
    for (i, (analytic, fd)) in discriminator_probes(3, 10).into_iter().enumerate() {
        assert!(rel_err(analytic, fd) < 1e-3, "probe {i}: analytic {analytic} vs fd {fd}");
    }
}

#[test]
fn generator_output_stays_in_range_for_wild_inputs() {
    let cfg = smallest_config();
    let gan = GeneratorCheckpoint::untrained(&cfg, LabelMap::new(vec!["a".into(), "b".into()]).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max = 0.0f32;
    for _ in 0..100 {
        // noise far outside the training distribution, conditioning anywhere on the simplex
        let zs: Vec<_> = (0..100)
            .map(|_| {
                let scale = rng.random_range(0.1..50.0f32);
                let z: Vec<f32> = (0..cfg.z_dim).map(|_| scale * rng.random_range(-1.0..1.0f32)).collect();
                interlerp::cgan::NoiseVector::new(z).unwrap()
            })
            .collect();
        let vs: Vec<_> = (0..100)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..=1.0);
                ConditioningVector::new(vec![a, 1.0 - a]).unwrap()
            })
            .collect();
        for img in gan.generate_batch(&zs, &vs).unwrap() {
            max = img.data().iter().fold(max, |m, p| m.max(p.abs()));
        }
    }
    assert!(max <= 1.0, "max |pixel| {max}");
}

#[test]
fn conditioning_changes_the_image() {
    let cfg = smallest_config();
    let gan = GeneratorCheckpoint::untrained(&cfg, LabelMap::new(vec!["a".into(), "b".into()]).unwrap()).unwrap();
    let zs = sample_noise(5, 1000, cfg.z_dim);
    let a = gan.generate_batch(&zs, &vec![one_hot(0, 2).unwrap(); 1000]).unwrap();
    let b = gan.generate_batch(&zs, &vec![one_hot(1, 2).unwrap(); 1000]).unwrap();
    let differ = a.iter().zip(&b).filter(|(x, y)| x.data().iter().zip(y.data()).any(|(p, q)| p != q)).count();
    assert!(differ >= 990, "{differ} of 1000");
}

#[test]
fn noise_statistics_and_substreams() {
    let many = sample_noise(7, 1000, 100);
    let mean = many.iter().flat_map(|z| z.values()).map(|&v| v as f64).sum::<f64>() / 100_000.0;
    assert!(mean.abs() <= 0.02, "{mean}");
    assert_eq!(sample_noise(7, 3, 100), sample_noise(7, 3, 100));
    assert_eq!(sample_noise(7, 2, 100)[1], many[1]);
}
