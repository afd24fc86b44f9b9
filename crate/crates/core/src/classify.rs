//! Matching probe fingerprints against enrolled devices.
//!
//! Four mechanisms are provided: nearest enrolled vector under Euclidean
//! distance, per-feature Gaussian maximum likelihood, the scaled Z-axis
//! accelerometer distance, and majority-vote k-nearest neighbours with
//! seeded k-fold cross-validation. Ties always resolve to the lowest id.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::accel::ZAxisFingerprint;
use crate::audio::AudioFingerprint;
use crate::error::{invalid, Error, Result};
use crate::rng::SimRng;

/// Variance floor applied by [`mle_fit`].
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Default weight of sensitivity differences in [`scaled_accel_distance`].
pub const DEFAULT_M_SZ: f64 = 300.0;

/// Enrolled feature vectors per device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintDb<K: Ord> {
    entries: BTreeMap<K, Vec<Vec<f64>>>,
    dim: usize,
}

impl<K: Ord + Clone> FingerprintDb<K> {
    pub fn new(enrolled: impl IntoIterator<Item = (K, Vec<f64>)>) -> Result<Self> {
        let mut entries: BTreeMap<K, Vec<Vec<f64>>> = BTreeMap::new();
        let mut dim = None;
        for (key, v) in enrolled {
            let expected = *dim.get_or_insert(v.len());
            if v.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    actual: v.len(),
                });
            }
            entries.entry(key).or_default().push(v);
        }
        match dim {
            None => Err(Error::Empty("fingerprint database")),
            Some(dim) => Ok(Self { entries, dim }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Which part of an audio fingerprint feeds the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceVariant {
    /// First-harmonic ratios.
    A,
    /// Second-harmonic ratios.
    B,
    /// Second harmonic plus its first differences along frequency.
    BPrime,
    /// Second harmonic plus first and second differences.
    BDoublePrime,
}

impl DistanceVariant {
    pub const ALL: [DistanceVariant; 4] = [Self::A, Self::B, Self::BPrime, Self::BDoublePrime];

    pub fn label(&self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::BPrime => "B'",
            Self::BDoublePrime => "B''",
        }
    }
}

fn differences(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn extract_features(fp: &AudioFingerprint, variant: DistanceVariant) -> Result<Vec<f64>> {
    if variant == DistanceVariant::A {
        return fp.harmonic_values(1);
    }
    let mut out = fp.harmonic_values(2)?;
    let base = out.clone();
    if matches!(variant, DistanceVariant::BPrime | DistanceVariant::BDoublePrime) {
        let first = differences(&base);
        if variant == DistanceVariant::BDoublePrime {
            let second = differences(&first);
            out.extend(first);
            out.extend(second);
        } else {
            out.extend(first);
        }
    }
    Ok(out)
}

/// Device whose closest enrolled vector is nearest to the probe.
pub fn l2_classify<K: Ord + Clone>(db: &FingerprintDb<K>, probe: &[f64]) -> Result<K> {
    if probe.len() != db.dim {
        return Err(Error::LengthMismatch {
            expected: db.dim,
            actual: probe.len(),
        });
    }
    let mut best: Option<(&K, f64)> = None;
    for (key, vectors) in &db.entries {
        let d = vectors
            .iter()
            .map(|v| squared_distance(v, probe))
            .fold(f64::INFINITY, f64::min);
        // Keys iterate in ascending order, so strict `<` keeps the lowest on ties.
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((key, d));
        }
    }
    Ok(best.expect("database is non-empty").0.clone())
}

/// Per-device Gaussian model of each feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleModel<K: Ord> {
    pub devices: BTreeMap<K, FeatureStats>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Sample mean and population variance (floored) of every feature, per device.
pub fn mle_fit<K: Ord + Clone + ToString>(training: &BTreeMap<K, Vec<Vec<f64>>>) -> Result<MleModel<K>> {
    let mut dim = None;
    let mut devices = BTreeMap::new();
    for (key, samples) in training {
        if samples.len() < 2 {
            return Err(Error::InsufficientTraining {
                device: key.to_string(),
                count: samples.len(),
                required: 2,
            });
        }
        let d = *dim.get_or_insert(samples[0].len());
        if let Some(bad) = samples.iter().find(|s| s.len() != d) {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        let n = samples.len() as f64;
        let mean: Vec<f64> = (0..d).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / n).collect();
        let variance = (0..d)
            .map(|i| {
                let v = samples.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / n;
                v.max(VARIANCE_FLOOR)
            })
            .collect();
        devices.insert(key.clone(), FeatureStats { mean, variance });
    }
    match dim {
        None => Err(Error::Empty("training set")),
        Some(dim) => Ok(MleModel { devices, dim }),
    }
}

/// Log-likelihood score up to constants: `-sum_i (v_i - mu_i)^2 / var_i`.
pub fn mle_score(stats: &FeatureStats, probe: &[f64]) -> f64 {
    probe
        .iter()
        .zip(&stats.mean)
        .zip(&stats.variance)
        .map(|((v, m), s2)| -(v - m).powi(2) / s2)
        .sum()
}

/// Device with the highest score.
pub fn mle_classify<K: Ord + Clone>(model: &MleModel<K>, probe: &[f64]) -> Result<K> {
    if probe.len() != model.dim {
        return Err(Error::LengthMismatch {
            expected: model.dim,
            actual: probe.len(),
        });
    }
    let mut best: Option<(&K, f64)> = None;
    for (key, stats) in &model.devices {
        let score = mle_score(stats, probe);
        if best.map_or(true, |(_, bs)| score > bs) {
            best = Some((key, score));
        }
    }
    best.map(|(k, _)| k.clone()).ok_or(Error::Empty("model"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledDistanceConfig {
    pub m_sz: f64,
}

impl Default for ScaledDistanceConfig {
    fn default() -> Self {
        Self { m_sz: DEFAULT_M_SZ }
    }
}

/// `(dO_z)^2 + M_Sz * (dS_z)^2`.
pub fn scaled_accel_distance(a: &ZAxisFingerprint, b: &ZAxisFingerprint, cfg: &ScaledDistanceConfig) -> f64 {
    let d_o = b.o_z - a.o_z;
    let d_s = b.s_z - a.s_z;
    d_o * d_o + cfg.m_sz * d_s * d_s
}

/// Majority label among the `k` nearest training points.
///
/// Equal distances keep training order; equal vote counts go to the lowest
/// label.
pub fn knn_classify<L: Ord + Clone>(labeled: &[(Vec<f64>, L)], probe: &[f64], k: usize) -> Result<L> {
    if labeled.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if k == 0 || k > labeled.len() {
        return Err(invalid("k", format!("must lie in 1..={}", labeled.len())));
    }
    let dim = labeled[0].0.len();
    if probe.len() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: probe.len(),
        });
    }
    let mut order: Vec<(f64, usize)> = labeled
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (squared_distance(v, probe), i))
        .collect();
    // Stable sort on distance only: ties stay in insertion order.
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut votes: BTreeMap<&L, usize> = BTreeMap::new();
    for &(_, i) in &order[..k] {
        *votes.entry(&labeled[i].1).or_default() += 1;
    }
    let top = votes.values().copied().max().unwrap_or(0);
    // BTreeMap iterates labels in ascending order.
    Ok(votes
        .into_iter()
        .find(|(_, c)| *c == top)
        .map(|(l, _)| l.clone())
        .expect("at least one vote"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FoldClassifier {
    Knn { k: usize },
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub folds: usize,
    /// Some class has fewer members than folds, so not every fold sees it.
    pub undersized_classes: bool,
}

/// Seeded, stratified k-fold cross-validation accuracy.
///
/// Each class is shuffled and dealt round-robin across folds, continuing
/// from where the previous class stopped, so fold sizes differ by at most
/// one.
pub fn kfold_accuracy<L: Ord + Clone + ToString>(
    labeled: &[(Vec<f64>, L)],
    folds: usize,
    classifier: FoldClassifier,
    seed: u64,
) -> Result<KFoldReport> {
    if folds < 2 {
        return Err(invalid("folds", "need at least 2"));
    }
    if labeled.len() < folds {
        return Err(invalid("folds", format!("{} samples cannot fill {folds} folds", labeled.len())));
    }
    let mut by_label: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, (_, l)) in labeled.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let undersized_classes = by_label.values().any(|v| v.len() < folds);

    let mut rng = SimRng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labeled.len()];
    let mut next = 0usize;
    for indices in by_label.values_mut() {
        rng.shuffle(indices);
        for &i in indices.iter() {
            fold_of[i] = next % folds;
            next += 1;
        }
    }

    let mut correct = 0usize;
    for fold in 0..folds {
        let train: Vec<(Vec<f64>, L)> = labeled
            .iter()
            .enumerate()
            .filter(|(i, _)| fold_of[*i] != fold)
            .map(|(_, x)| x.clone())
            .collect();
        let test = labeled.iter().enumerate().filter(|(i, _)| fold_of[*i] == fold);
        match classifier {
            FoldClassifier::Knn { k } => {
                let k = k.min(train.len());
                for (_, (v, l)) in test {
                    if knn_classify(&train, v, k)? == *l {
                        correct += 1;
                    }
                }
            }
            FoldClassifier::Mle => {
                let mut grouped: BTreeMap<L, Vec<Vec<f64>>> = BTreeMap::new();
                for (v, l) in train {
                    grouped.entry(l).or_default().push(v);
                }
                // Classes with a single training sample cannot be modelled.
                grouped.retain(|_, v| v.len() >= 2);
                let model = mle_fit(&grouped)?;
                for (_, (v, l)) in test {
                    if mle_classify(&model, v)? == *l {
                        correct += 1;
                    }
                }
            }
        }
    }
    Ok(KFoldReport {
        accuracy: correct as f64 / labeled.len() as f64,
        correct,
        total: labeled.len(),
        folds,
        undersized_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::HarmonicResponse;

    fn fp_from(h1: &[f64], h2: &[f64]) -> AudioFingerprint {
        let entries = h1
            .iter()
            .zip(h2)
            .enumerate()
            .flat_map(|(i, (&a, &b))| {
                let f = 100.0 * (i + 1) as f64;
                [
                    HarmonicResponse { freq_hz: f, harmonic: 1, ratio: a },
                    HarmonicResponse { freq_hz: f, harmonic: 2, ratio: b },
                ]
            })
            .collect();
        AudioFingerprint { entries }
    }

    #[test]
    fn feature_lengths() {
        let fp = fp_from(&[1.0; 7], &[0.1, 0.2, 0.4, 0.3, 0.5, 0.6, 0.2]);
        assert_eq!(extract_features(&fp, DistanceVariant::A).unwrap(), vec![1.0; 7]);
        assert_eq!(extract_features(&fp, DistanceVariant::B).unwrap().len(), 7);
        assert_eq!(extract_features(&fp, DistanceVariant::BPrime).unwrap().len(), 13);
        assert_eq!(extract_features(&fp, DistanceVariant::BDoublePrime).unwrap().len(), 18);
    }

    #[test]
    fn constant_second_harmonic_has_zero_differences() {
        let fp = fp_from(&[1.0; 7], &[0.3; 7]);
        let f = extract_features(&fp, DistanceVariant::BPrime).unwrap();
        assert!(f[7..].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn missing_harmonic_is_error() {
        let fp = AudioFingerprint {
            entries: vec![HarmonicResponse { freq_hz: 100.0, harmonic: 1, ratio: 1.0 }],
        };
        assert!(matches!(
            extract_features(&fp, DistanceVariant::B),
            Err(Error::MissingHarmonic { .. })
        ));
    }

    #[test]
    fn l2_cases() {
        let db = FingerprintDb::new([("d1", vec![0.0, 0.0]), ("d2", vec![1.0, 1.0])]).unwrap();
        assert_eq!(l2_classify(&db, &[0.1, 0.1]).unwrap(), "d1");
        assert_eq!(l2_classify(&db, &[1.0, 1.0]).unwrap(), "d2");
        assert!(matches!(l2_classify(&db, &[0.0]), Err(Error::LengthMismatch { .. })));
        let tie = FingerprintDb::new([("b", vec![0.5]), ("a", vec![0.5])]).unwrap();
        assert_eq!(l2_classify(&tie, &[0.0]).unwrap(), "a");
    }

    #[test]
    fn mle_fit_statistics() {
        let mut t = BTreeMap::new();
        t.insert(1u32, vec![vec![2.0, 5.0], vec![4.0, 5.0]]);
        t.insert(2u32, vec![vec![10.0, 0.0], vec![12.0, 2.0]]);
        let m = mle_fit(&t).unwrap();
        assert_eq!(m.devices[&1].mean, vec![3.0, 5.0]);
        assert_eq!(m.devices[&1].variance, vec![1.0, VARIANCE_FLOOR]);
        assert_eq!(m.devices[&2].mean, vec![11.0, 1.0]);
        assert_eq!(m.devices[&2].variance, vec![1.0, 1.0]);
        t.insert(3u32, vec![vec![0.0, 0.0]]);
        assert!(matches!(mle_fit(&t), Err(Error::InsufficientTraining { .. })));
    }

    #[test]
    fn mle_variance_weighting() {
        let mut devices = BTreeMap::new();
        devices.insert(1u32, FeatureStats { mean: vec![0.0], variance: vec![1.0] });
        devices.insert(2u32, FeatureStats { mean: vec![1.0], variance: vec![100.0] });
        let model = MleModel { devices, dim: 1 };
        assert!((mle_score(&model.devices[&1], &[0.6]) - -0.36).abs() < 1e-12);
        assert!((mle_score(&model.devices[&2], &[0.6]) - -0.0016).abs() < 1e-12);
        assert_eq!(mle_classify(&model, &[0.6]).unwrap(), 2);
        assert_eq!(mle_classify(&model, &[0.0]).unwrap(), 1);
        assert!(mle_classify(&model, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn scaled_distance_values() {
        let a = ZAxisFingerprint { o_z: 0.1, s_z: 1.00 };
        let b = ZAxisFingerprint { o_z: 0.2, s_z: 1.01 };
        assert_eq!(scaled_accel_distance(&a, &a, &ScaledDistanceConfig::default()), 0.0);
        let d = scaled_accel_distance(&a, &b, &ScaledDistanceConfig { m_sz: 300.0 });
        assert!((d - 0.04).abs() < 1e-12);
        let d0 = scaled_accel_distance(&a, &b, &ScaledDistanceConfig { m_sz: 0.0 });
        assert!((d0 - 0.01).abs() < 1e-12);
    }

    #[test]
    fn knn_cases() {
        let train = vec![(vec![0.0], "x"), (vec![2.0], "x"), (vec![1.5], "y")];
        assert_eq!(knn_classify(&train, &[2.0], 1).unwrap(), "x");
        // Two X at distance 1, one Y at distance 0.5.
        assert_eq!(knn_classify(&train, &[1.0], 3).unwrap(), "x");
        let distinct = vec![(vec![0.0], "c"), (vec![1.0], "a"), (vec![2.0], "b")];
        assert_eq!(knn_classify(&distinct, &[0.0], 3).unwrap(), "a");
        let empty: Vec<(Vec<f64>, &str)> = vec![];
        assert!(matches!(knn_classify(&empty, &[0.0], 1), Err(Error::Empty(_))));
        assert!(knn_classify(&train, &[0.0], 4).is_err());
    }

    fn clusters(n_per: usize) -> Vec<(Vec<f64>, u32)> {
        (0..4u32)
            .flat_map(|c| (0..n_per).map(move |i| (vec![c as f64 * 10.0 + i as f64 * 0.01, 0.0], c)))
            .collect()
    }

    #[test]
    fn kfold_separable_is_perfect() {
        for folds in [2, 5, 10] {
            let r = kfold_accuracy(&clusters(10), folds, FoldClassifier::Knn { k: 3 }, 1).unwrap();
            assert_eq!(r.accuracy, 1.0);
            assert!(!r.undersized_classes);
        }
        let r = kfold_accuracy(&clusters(10), 5, FoldClassifier::Mle, 1).unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn kfold_deterministic_and_flags_small_classes() {
        let data = clusters(3);
        let a = kfold_accuracy(&data, 5, FoldClassifier::Knn { k: 1 }, 9).unwrap();
        let b = kfold_accuracy(&data, 5, FoldClassifier::Knn { k: 1 }, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.undersized_classes);
        assert!(kfold_accuracy(&data, 1, FoldClassifier::Knn { k: 1 }, 0).is_err());
        assert!(kfold_accuracy(&data[..3], 5, FoldClassifier::Knn { k: 1 }, 0).is_err());
    }

    #[test]
    fn kfold_random_labels_near_chance() {
        let mut total = 0.0;
        let seeds = 40;
        for seed in 0..seeds {
            let mut rng = SimRng::seed_from_u64(1000 + seed);
            let data: Vec<(Vec<f64>, u32)> =
                (0..40).map(|_| (vec![1.0, 1.0], rng.below(2) as u32)).collect();
            total += kfold_accuracy(&data, 10, FoldClassifier::Knn { k: 1 }, seed).unwrap().accuracy;
        }
        let mean = total / seeds as f64;
        assert!((mean - 0.5).abs() <= 0.15, "{mean}");
    }
}
