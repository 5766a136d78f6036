use crate::corpus::instance::RelationInstance;
use crate::error::{Error, Result};
use crate::numeric::rng::SeededRng;

/// Labeled / unlabeled / validation / test partitions.
#[derive(Clone, Debug, Default)]
pub struct DatasetSplit {
    pub labeled: Vec<RelationInstance>,
    /// Labels stripped.
    pub unlabeled: Vec<RelationInstance>,
    pub validation: Vec<RelationInstance>,
    pub test: Vec<RelationInstance>,
}

impl DatasetSplit {
    /// Labeled plus unlabeled, i.e. everything the vocabulary may be built from.
    pub fn training(&self) -> impl Iterator<Item = &RelationInstance> {
        self.labeled.iter().chain(&self.unlabeled)
    }
}

/// Draw test, then validation, then labeled instances uniformly without
/// replacement; whatever remains becomes unlabeled training data.
pub fn sample_splits(
    instances: &[RelationInstance],
    labeled_count: usize,
    val_count: usize,
    test_count: usize,
    rng: &mut SeededRng,
) -> Result<DatasetSplit> {
    let requested = labeled_count + val_count + test_count;
    if requested > instances.len() {
        return Err(Error::SplitTooLarge {
            requested,
            available: instances.len(),
        });
    }
    if let Some(i) = instances.iter().find(|i| i.label.is_none()) {
        return Err(Error::MissingLabel(i.id.clone()));
    }
    let order = rng.permutation(instances.len());
    let take = |range: std::ops::Range<usize>| -> Vec<RelationInstance> {
        order[range].iter().map(|&i| instances[i].clone()).collect()
    };
    let a = test_count;
    let b = a + val_count;
    let c = b + labeled_count;
    Ok(DatasetSplit {
        test: take(0..a),
        validation: take(a..b),
        labeled: take(b..c),
        unlabeled: order[c..].iter().map(|&i| instances[i].without_label()).collect(),
    })
}
