//! Seeded k-fold and stratified k-fold planning.
//!
//! A [`FoldPlan`] partitions a dataset's index set into k disjoint test
//! sets; each fold trains on everything outside its test set. Shuffling is
//! Fisher-Yates driven by the crate's counter-based RNG, so the same
//! (dataset, k, seed, strategy) always yields a byte-identical plan.

use serde::{Deserialize, Serialize};

use crate::data::DatasetIndex;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

const STREAM_PLAIN: u64 = 0x4B46_4F4C; // "KFOL"
const STREAM_STRAT: u64 = 0x5354_5241; // "STRA"

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Plain,
    Stratified,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Plain => write!(f, "plain"),
            Strategy::Stratified => write!(f, "stratified"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Strategy::Plain),
            "stratified" => Ok(Strategy::Stratified),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected plain or stratified)"
            ))),
        }
    }
}

/// Per-fold test index sets over a dataset; train sets are the complements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub strategy: Strategy,
    /// Ascending test indices, one array per fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Ascending complement of the fold's test set.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let n = self.n_samples();
        let mut in_test = vec![false; n];
        for &i in &self.folds[fold] {
            in_test[i] = true;
        }
        (0..n).filter(|&i| !in_test[i]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Plan(format!("bad fold plan json: {e}")))
    }
}

/// Split `n` items into `k` chunk lengths differing by at most one, larger
/// chunks first.
fn chunk_sizes(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let extra = n % k;
    (0..k).map(|i| base + usize::from(i < extra)).collect()
}

/// Plan k folds over the dataset.
///
/// Plain strategy: one seeded shuffle of all indices, then contiguous
/// chunks. Stratified: a per-class seeded shuffle and per-class chunking,
/// unioned fold-wise, so every fold preserves the class proportions to
/// within one sample per class.
pub fn make_folds(
    index: &DatasetIndex,
    k: usize,
    seed: u64,
    strategy: Strategy,
) -> Result<FoldPlan> {
    let n = index.len();
    if k < 2 {
        return Err(Error::Plan(format!(
            "k = {k} leaves no training data; need k >= 2"
        )));
    }
    if n < k {
        return Err(Error::Plan(format!("{n} samples cannot fill {k} folds")));
    }

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    match strategy {
        Strategy::Plain => {
            let mut order: Vec<usize> = (0..n).collect();
            CounterRng::from_parts(&[STREAM_PLAIN, seed]).shuffle(&mut order);
            let mut cursor = 0;
            for (fold, size) in chunk_sizes(n, k).into_iter().enumerate() {
                folds[fold].extend_from_slice(&order[cursor..cursor + size]);
                cursor += size;
            }
        }
        Strategy::Stratified => {
            for (class_id, name) in index.class_names().iter().enumerate() {
                let mut members: Vec<usize> = (0..n)
                    .filter(|&i| index.label(i) == class_id)
                    .collect();
                if members.len() < k {
                    return Err(Error::Plan(format!(
                        "class '{name}' has {} samples, fewer than k = {k}",
                        members.len()
                    )));
                }
                CounterRng::from_parts(&[STREAM_STRAT, seed, class_id as u64])
                    .shuffle(&mut members);
                let mut cursor = 0;
                for (fold, size) in chunk_sizes(members.len(), k).into_iter().enumerate() {
                    folds[fold].extend_from_slice(&members[cursor..cursor + size]);
                    cursor += size;
                }
            }
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan {
        seed,
        strategy,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    // Explicit import so the enum wins over proptest's `Strategy` trait.
    use super::Strategy;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn synthetic_index(counts: &[usize]) -> DatasetIndex {
        let class_names: Vec<String> = (0..counts.len()).map(|c| format!("class{c}")).collect();
        let mut samples = Vec::new();
        for (class_id, &count) in counts.iter().enumerate() {
            for i in 0..count {
                samples.push((PathBuf::from(format!("class{class_id}/img{i:05}.png")), class_id));
            }
        }
        DatasetIndex::from_parts(class_names, samples).unwrap()
    }

    fn assert_partition(plan: &FoldPlan, n: usize) {
        let mut seen = vec![0usize; n];
        for fold in 0..plan.k() {
            for &i in plan.test_indices(fold) {
                seen[i] += 1;
            }
            let train = plan.train_indices(fold);
            let test = plan.test_indices(fold);
            assert_eq!(train.len() + test.len(), n);
            assert!(test.iter().all(|i| !train.contains(i)));
        }
        assert!(seen.iter().all(|&c| c == 1), "not a partition");
    }

    #[test]
    fn plain_7023_gives_703s_and_702s() {
        let plan = make_folds(&synthetic_index(&[3512, 3511]), 10, 1, Strategy::Plain).unwrap();
        let mut sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![702, 702, 702, 702, 702, 702, 702, 703, 703, 703]);
        assert_partition(&plan, 7023);
    }

    #[test]
    fn degenerate_k_rejected() {
        let index = synthetic_index(&[10, 10]);
        assert!(matches!(
            make_folds(&index, 1, 0, Strategy::Plain),
            Err(Error::Plan(_))
        ));
        assert!(make_folds(&index, 0, 0, Strategy::Plain).is_err());
        assert!(make_folds(&index, 21, 0, Strategy::Plain).is_err());
    }

    #[test]
    fn stratified_fold_counts_for_figshare_sizes() {
        // Class counts 1426 / 708 / 930 over 10 folds.
        let index = synthetic_index(&[1426, 708, 930]);
        let plan = make_folds(&index, 10, 7, Strategy::Stratified).unwrap();
        assert_partition(&plan, 3064);
        for fold in 0..10 {
            let mut per_class = [0usize; 3];
            for &i in plan.test_indices(fold) {
                per_class[index.label(i)] += 1;
            }
            assert!(matches!(per_class[0], 142 | 143), "{per_class:?}");
            assert!(matches!(per_class[1], 70 | 71), "{per_class:?}");
            assert_eq!(per_class[2], 93, "{per_class:?}");
        }
    }

    #[test]
    fn small_class_error_names_the_class() {
        let index = synthetic_index(&[40, 5]);
        let err = make_folds(&index, 10, 0, Strategy::Stratified).unwrap_err();
        assert!(err.to_string().contains("class1"), "{err}");
    }

    #[test]
    fn same_seed_byte_identical_plan() {
        let index = synthetic_index(&[97, 55, 31]);
        let a = make_folds(&index, 10, 99, Strategy::Stratified).unwrap();
        let b = make_folds(&index, 10, 99, Strategy::Stratified).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = make_folds(&index, 10, 100, Strategy::Stratified).unwrap();
        assert_ne!(a.to_json(), c.to_json());
        // Round trip.
        assert_eq!(FoldPlan::from_json(&a.to_json()).unwrap(), a);
    }

    proptest! {
        #[test]
        fn folds_partition_for_random_sizes(
            counts in proptest::collection::vec(12usize..60, 2..5),
            k in 2usize..11,
            seed in 0u64..1000,
            stratified in proptest::bool::ANY,
        ) {
            let index = synthetic_index(&counts);
            let strategy = if stratified { Strategy::Stratified } else { Strategy::Plain };
            let plan = make_folds(&index, k, seed, strategy).unwrap();
            let n: usize = counts.iter().sum();
            let mut seen = vec![0usize; n];
            for fold in &plan.folds {
                for &i in fold {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            // Fold size balance: at most 1 apart overall (plain) or per class.
            if strategy == Strategy::Plain {
                let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
                let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                prop_assert!(max - min <= 1);
            } else {
                for fold in &plan.folds {
                    for class in 0..counts.len() {
                        let got = fold.iter().filter(|&&i| index.label(i) == class).count();
                        let floor = counts[class] / k;
                        prop_assert!(got == floor || got == floor + 1);
                    }
                }
            }
        }
    }
}
