use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Training samples drawn from each class.
pub const DEFAULT_PER_CLASS: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitGroupCounts {
    pub group: u32,
    pub train: usize,
    pub test: usize,
}

/// A train/test partition of dataset indices, both in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub groups: Vec<SplitGroupCounts>,
}

impl Split {
    pub fn apply(&self, data: &LabeledDataset) -> (LabeledDataset, LabeledDataset) {
        (data.subset(&self.train), data.subset(&self.test))
    }

    /// Groups whose whole population went to training.
    pub fn groups_without_test(&self) -> Vec<u32> {
        self.groups.iter().filter(|g| g.test == 0).map(|g| g.group).collect()
    }
}

/// Draws `per_class` training samples per binary label.
pub fn split_train_test(data: &LabeledDataset, per_class: usize, seed: u64) -> Result<Split> {
    let groups: Vec<u32> = data.labels.iter().map(|&l| u32::from(l)).collect();
    split_by_groups(&groups, per_class, seed)
}

/// Draws `per_class` members of every group uniformly without replacement.
///
/// Each group draws from its own ChaCha8 stream (stream id = group id) keyed
/// by `seed`, so a group's selection depends only on the seed, the group id
/// and the group's member list.
pub fn split_by_groups(groups: &[u32], per_class: usize, seed: u64) -> Result<Split> {
    if per_class == 0 {
        return Err(Error::invalid("per-class training count must be positive"));
    }
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    let mut in_train = vec![false; groups.len()];
    let mut counts = Vec::with_capacity(members.len());
    for (&group, idx) in &members {
        if idx.len() < per_class {
            return Err(Error::invalid(format!(
                "class {group} has {} samples, fewer than the {per_class} requested for training",
                idx.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(group));
        for pick in rand::seq::index::sample(&mut rng, idx.len(), per_class) {
            in_train[idx[pick]] = true;
        }
        counts.push(SplitGroupCounts { group, train: per_class, test: idx.len() - per_class });
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&i| in_train[i]);
    Ok(Split { train, test, groups: counts })
}
