use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ClassifierError, FeatureSet};
use crate::nn::Tensor;

/// Stand-in for backbone features. Every value is unit-variance Gaussian;
/// class `k` adds `separation / sqrt(2)` to channel `k mod C` at every
/// position, so two class means are `separation` apart whenever the
/// channel count is at least the class count. Samples are interleaved
/// by class.
pub fn generate_synthetic_features(
    classes: usize,
    per_class: usize,
    sample_shape: &[usize],
    separation: f64,
    seed: u64,
) -> Result<FeatureSet, ClassifierError> {
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(ClassifierError::BadSeparation(separation));
    }
    let channels = sample_shape.last().copied().unwrap_or(0);
    if channels == 0 || sample_shape.contains(&0) {
        return Err(ClassifierError::BadInputShape(sample_shape.to_vec()));
    }
    let len: usize = sample_shape.iter().product();
    let offset = separation / core::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = FeatureSet::new(sample_shape.to_vec());
    for _ in 0..per_class {
        for k in 0..classes {
            let hot = k % channels;
            let data: Vec<f64> = (0..len)
                .map(|i| {
                    let noise: f64 = rng.sample(StandardNormal);
                    if i % channels == hot {
                        noise + offset
                    } else {
                        noise
                    }
                })
                .collect();
            set.push(&Tensor::new(sample_shape.to_vec(), data)?, k, None)?;
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn nearest_mean(sample: &[f64], classes: usize, channels: usize, separation: f64) -> usize {
        let m = separation / 2f64.sqrt();
        let dist = |k: usize| -> f64 {
            sample
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mu = if i % channels == k % channels { m } else { 0.0 };
                    (v - mu) * (v - mu)
                })
                .sum()
        };
        (0..classes).fold(0, |b, k| if dist(k) < dist(b) { k } else { b })
    }

    #[test]
    fn separated_classes_are_separable() {
        let set = generate_synthetic_features(2, 500, &[1, 1, 8], 10.0, 4).unwrap();
        let right = (0..set.len())
            .filter(|&i| nearest_mean(set.sample(i), 2, 8, 10.0) == set.labels()[i])
            .count();
        assert!(right as f64 / set.len() as f64 >= 0.99, "{right}");
    }

    #[test]
    fn class_means_are_separation_apart() {
        let set = generate_synthetic_features(2, 4000, &[1, 1, 2], 3.0, 1).unwrap();
        let mut mean = [[0.0; 2]; 2];
        for i in 0..set.len() {
            for (c, v) in set.sample(i).iter().enumerate() {
                mean[set.labels()[i]][c] += v / 4000.0;
            }
        }
        let d = ((mean[0][0] - mean[1][0]).powi(2) + (mean[0][1] - mean[1][1]).powi(2)).sqrt();
        assert!((d - 3.0).abs() < 0.1, "{d}");
    }

    #[test]
    fn seeded() {
        let a = generate_synthetic_features(3, 5, &[2, 2, 3], 1.0, 7).unwrap();
        assert_eq!(
            a,
            generate_synthetic_features(3, 5, &[2, 2, 3], 1.0, 7).unwrap()
        );
        assert_ne!(
            a,
            generate_synthetic_features(3, 5, &[2, 2, 3], 1.0, 8).unwrap()
        );
        assert_eq!(a.labels()[..3], [0, 1, 2]);
    }

    #[test]
    fn rejects_negative_separation() {
        assert!(generate_synthetic_features(2, 1, &[1, 1, 2], -1.0, 0).is_err());
        assert!(generate_synthetic_features(2, 1, &[], 1.0, 0).is_err());
        assert_eq!(
            generate_synthetic_features(2, 0, &[1, 1, 2], 1.0, 0)
                .unwrap()
                .sample_shape(),
            &vec![1, 1, 2][..]
        );
    }
}
