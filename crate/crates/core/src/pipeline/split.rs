use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Stratify;
use crate::data::TabularFrame;
use crate::error::{Error, Result};
use crate::stats::round_count;

/// Row indices of a train/test partition, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Random (optionally stratified) partition of `n = labels.len()` rows.
///
/// Each stratum contributes `round(test_fraction * size)` rows to the test
/// side. Strata are visited in key order from one seeded generator.
pub fn split(labels: &[u8], groups: &[u32], test_fraction: f64, stratify: Stratify, seed: u64) -> Result<Split> {
    let n = labels.len();
    if groups.len() != n {
        return Err(Error::Pipeline("labels and groups differ in length".into()));
    }
    if n < 10 {
        return Err(Error::Pipeline(format!("cannot split {n} rows; need at least 10")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Pipeline(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut strata: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let key = match stratify {
            Stratify::None => (0, 0),
            Stratify::Target => (u32::from(labels[i]), 0),
            Stratify::ProtectedAttribute => (0, groups[i]),
            Stratify::Both => (u32::from(labels[i]), groups[i]),
        };
        strata.entry(key).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n);
    let mut test = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for (key, mut rows) in strata {
        if rows.len() == 1 && stratify != Stratify::None {
            warnings.push(format!("singleton stratum (target {}, group {}) placed in train", key.0, key.1));
            train.extend(rows);
            continue;
        }
        rows.shuffle(&mut rng);
        let k = round_count(test_fraction * rows.len() as f64).min(rows.len());
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test, warnings })
}

/// [`split`] applied to a frame's target and protected columns.
pub fn split_frame(
    frame: &TabularFrame,
    test_fraction: f64,
    stratify: Stratify,
    seed: u64,
) -> Result<(TabularFrame, TabularFrame, Split)> {
    let labels = frame.target();
    let (_, groups) = frame.groups();
    let s = split(&labels, groups, test_fraction, stratify, seed)?;
    Ok((frame.take(&s.train), frame.take(&s.test), s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_split_sizes() {
        let labels = vec![0u8; 1000];
        let groups = vec![0u32; 1000];
        let s = split(&labels, &groups, 0.3, Stratify::None, 1).unwrap();
        assert_eq!(s.test.len(), 300);
        assert_eq!(s.train.len(), 700);
    }

    #[test]
    fn per_stratum_rounding() {
        let mut labels = vec![0u8; 700];
        labels.extend(vec![1u8; 300]);
        let mut groups = vec![0u32; 700];
        groups.extend(vec![1u32; 300]);
        let s = split(&labels, &groups, 0.3, Stratify::Both, 4).unwrap();
        let test_a = s.test.iter().filter(|&&i| i < 700).count();
        let test_b = s.test.len() - test_a;
        assert_eq!((test_a, test_b), (210, 90));
    }

    #[test]
    fn singleton_strata_go_to_train() {
        let mut labels = vec![0u8; 20];
        labels[7] = 1;
        let groups = vec![0u32; 20];
        let s = split(&labels, &groups, 0.3, Stratify::Target, 0).unwrap();
        assert!(s.train.contains(&7));
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.test.len(), 6); // round(0.3 * 19)
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let labels: Vec<u8> = (0..200).map(|i| (i % 3 == 0) as u8).collect();
        let groups: Vec<u32> = (0..200).map(|i| (i % 4) as u32).collect();
        let a = split(&labels, &groups, 0.3, Stratify::Both, 99).unwrap();
        let b = split(&labels, &groups, 0.3, Stratify::Both, 99).unwrap();
        assert_eq!(a, b);
        let c = split(&labels, &groups, 0.3, Stratify::Both, 100).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn rejects_tiny_frames() {
        assert!(split(&[0; 9], &[0; 9], 0.3, Stratify::None, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_exhaustive_and_disjoint(
            labels in prop::collection::vec(0u8..2, 10..300),
            seed in any::<u64>(),
            frac in 0.05f64..0.95,
            mode in 0usize..4,
        ) {
            let groups: Vec<u32> = labels.iter().enumerate().map(|(i, _)| (i % 3) as u32).collect();
            let stratify = Stratify::ALL[mode];
            let s = split(&labels, &groups, frac, stratify, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }

        #[test]
        fn target_stratification_preserves_rate(
            labels in prop::collection::vec(0u8..2, 20..400),
            seed in any::<u64>(),
        ) {
            let groups = vec![0u32; labels.len()];
            let s = split(&labels, &groups, 0.3, Stratify::Target, seed).unwrap();
            let rate = |idx: &[usize]| idx.iter().map(|&i| f64::from(labels[i])).sum::<f64>() / idx.len() as f64;
            let full = rate(&(0..labels.len()).collect::<Vec<_>>());
            let positives = labels.iter().filter(|&&y| y == 1).count();
            let negatives = labels.len() - positives;
            let smallest = positives.min(negatives).max(1) as f64;
            if positives > 1 && negatives > 1 {
                prop_assert!((rate(&s.train) - full).abs() <= 1.0 / smallest + 1e-12);
                prop_assert!((rate(&s.test) - full).abs() <= 1.0 / smallest + 1e-12);
            }
        }
    }
}
