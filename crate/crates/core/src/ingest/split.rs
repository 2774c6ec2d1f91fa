use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    WithinUser,
    CrossUser,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Held-out subjects (cross-user folds only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_subjects: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

impl SplitPlan {
    /// Keeps only the first `n` folds.
    pub fn truncate(mut self, n: usize) -> Self {
        self.folds.truncate(n.max(1));
        self
    }
}

/// Random segment-level k-fold split. Segment ids are `0..n_segments`.
pub fn within_user_folds(n_segments: usize, k: usize, seed: u64) -> Result<SplitPlan, IngestError> {
    if k < 2 || n_segments < k {
        return Err(IngestError::TooFewSegments { needed: k.max(2), k, got: n_segments });
    }
    let mut ids: Vec<usize> = (0..n_segments).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut tests: Vec<Vec<usize>> = vec![Vec::with_capacity(n_segments / k + 1); k];
    for (pos, id) in ids.into_iter().enumerate() {
        tests[pos % k].push(id);
    }
    let folds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let held: BTreeSet<usize> = test.iter().copied().collect();
            let train = (0..n_segments).filter(|i| !held.contains(i)).collect();
            Fold { train, test, test_subjects: Vec::new() }
        })
        .collect();
    Ok(SplitPlan { mode: SplitMode::WithinUser, folds, seed })
}

/// Partitions subjects into `n / group_size` seeded random groups; the
/// remainder is spread one extra subject per group, so 31 subjects with
/// group size 3 gives nine groups of three and one of four.
pub fn cross_user_groups(subjects: &[u32], group_size: usize, seed: u64) -> Result<Vec<Vec<u32>>, IngestError> {
    let unique: BTreeSet<u32> = subjects.iter().copied().collect();
    let n = unique.len();
    if n < 2 || group_size == 0 || n / group_size < 2 {
        return Err(IngestError::TooFewSubjects(n));
    }
    let mut ids: Vec<u32> = unique.into_iter().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_groups = n / group_size;
    let extra = n % n_groups;
    let base = n / n_groups;
    let mut groups = Vec::with_capacity(n_groups);
    let mut it = ids.into_iter();
    for g in 0..n_groups {
        let size = base + usize::from(g < extra);
        let mut group: Vec<u32> = it.by_ref().take(size).collect();
        group.sort_unstable();
        groups.push(group);
    }
    Ok(groups)
}

/// Leave-group-out folds; `segment_subjects[i]` is the subject of segment `i`.
pub fn cross_user_folds(segment_subjects: &[u32], group_size: usize, seed: u64) -> Result<SplitPlan, IngestError> {
    let groups = cross_user_groups(segment_subjects, group_size, seed)?;
    let folds = groups
        .into_iter()
        .map(|group| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..segment_subjects.len()).partition(|&i| group.contains(&segment_subjects[i]));
            Fold { train, test, test_subjects: group }
        })
        .collect();
    Ok(SplitPlan { mode: SplitMode::CrossUser, folds, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn baseline_ten_fold() {
        let plan = within_user_folds(55_800, 10, 42).unwrap();
        assert_eq!(plan.folds.len(), 10);
        assert!(plan.folds.iter().all(|f| f.test.len() == 5_580 && f.train.len() == 50_220));
    }

    #[test]
    fn minimal_partition_and_errors() {
        let plan = within_user_folds(10, 10, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.test.len() == 1));
        assert!(within_user_folds(9, 10, 1).is_err());
        assert!(within_user_folds(10, 1, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = serde_json::to_vec(&within_user_folds(1234, 10, 9).unwrap()).unwrap();
        let b = serde_json::to_vec(&within_user_folds(1234, 10, 9).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(within_user_folds(1234, 10, 9).unwrap(), within_user_folds(1234, 10, 10).unwrap());
    }

    #[test]
    fn thirty_one_subjects() {
        let subjects: Vec<u32> = (1..=31).collect();
        let groups = cross_user_groups(&subjects, 3, 5).unwrap();
        assert_eq!(groups.len(), 10);
        let mut sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, [3, 3, 3, 3, 3, 3, 3, 3, 3, 4]);
        let mut all: Vec<u32> = groups.concat();
        all.sort();
        assert_eq!(all, subjects);
    }

    #[test]
    fn four_subjects_pairs() {
        let seg_subjects = [1, 1, 2, 2, 3, 3, 4, 4];
        let plan = cross_user_folds(&seg_subjects, 2, 0).unwrap();
        assert_eq!(plan.folds.len(), 2);
        assert!(plan.folds.iter().all(|f| f.test_subjects.len() == 2 && f.test.len() == 4));
        assert!(cross_user_folds(&[1, 1, 1], 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn within_user_partitions(n in 2usize..400, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let plan = within_user_folds(n, k, seed).unwrap();
            let mut seen = vec![0u32; n];
            let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in &plan.folds {
                prop_assert_eq!(f.train.len() + f.test.len(), n);
                for &t in &f.test { seen[t] += 1; prop_assert!(!f.train.contains(&t)); }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn cross_user_no_leakage(subjects in proptest::collection::vec(0u32..12, 4..200), gs in 1usize..4, seed in any::<u64>()) {
            let distinct: BTreeSet<u32> = subjects.iter().copied().collect();
            prop_assume!(distinct.len() / gs >= 2);
            let plan = cross_user_folds(&subjects, gs, seed).unwrap();
            let mut tested = BTreeSet::new();
            for f in &plan.folds {
                let tr: BTreeSet<u32> = f.train.iter().map(|&i| subjects[i]).collect();
                let te: BTreeSet<u32> = f.test.iter().map(|&i| subjects[i]).collect();
                prop_assert!(tr.is_disjoint(&te));
                tested.extend(te);
            }
            prop_assert_eq!(tested, distinct);
        }
    }
}
