use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClassLabel, ManifestEntry};

/// Anything that can be partitioned at image level.
pub trait SplitItem: Clone {
    fn image_id(&self) -> &str;
    fn label(&self) -> ClassLabel;
}

impl SplitItem for ManifestEntry {
    fn image_id(&self) -> &str {
        &self.image_id
    }

    fn label(&self) -> ClassLabel {
        self.label
    }
}

impl SplitItem for (String, ClassLabel) {
    fn image_id(&self) -> &str {
        &self.0
    }

    fn label(&self) -> ClassLabel {
        self.1
    }
}
use crate::{Error, Result};

/// Image-level train/test partition parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            seed: 0,
            stratified: true,
        }
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return n;
    }
    let t = (fraction * n as f64).round() as usize;
    t.clamp(1, n - 1)
}

/// Partitions `entries` into `(train, test)`.
///
/// Entries are sorted by `image_id` before shuffling, so the result depends
/// only on the entry set and the seed, not on input order. Per-class train
/// counts are `round(fraction * n)` (halves go to train), kept within
/// `1..n` so every class with two or more images lands in both sides. A
/// single-image class goes wholly to train.
pub fn split<T: SplitItem>(entries: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    if entries.is_empty() {
        return Err(Error::Data("cannot split an empty entry list".into()));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0,1), got {}",
            spec.train_fraction
        )));
    }
    let mut sorted: Vec<&T> = entries.iter().collect();
    sorted.sort_by(|a, b| a.image_id().cmp(b.image_id()));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let groups: Vec<Vec<&T>> = if spec.stratified {
        let mut by_class: BTreeMap<ClassLabel, Vec<&T>> = BTreeMap::new();
        for e in sorted {
            by_class.entry(e.label()).or_default().push(e);
        }
        by_class.into_values().collect()
    } else {
        vec![sorted]
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups {
        if group.len() < 2 {
            log::warn!(
                "class {} has a single image; placing it in the training split",
                group[0].label()
            );
        }
        group.shuffle(&mut rng);
        let k = train_count(group.len(), spec.train_fraction);
        train.extend(group[..k].iter().map(|e| (*e).clone()));
        test.extend(group[k..].iter().map(|e| (*e).clone()));
    }
    train.sort_by(|a, b| a.image_id().cmp(b.image_id()));
    test.sort_by(|a, b| a.image_id().cmp(b.image_id()));
    Ok((train, test))
}
