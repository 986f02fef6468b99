use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::NodeDocument;

/// Year boundaries: train `<= train_end`, validation strictly between,
/// test `>= test_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitBoundaries {
    pub train_end: i32,
    pub test_start: i32,
}

impl Default for SplitBoundaries {
    fn default() -> Self {
        Self {
            train_end: 2017,
            test_start: 2019,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            _ => Err(Error::Config(format!(
                "unknown split {s:?}; expected train, val or test"
            ))),
        }
    }
}

impl TemporalSplit {
    pub fn get(&self, p: Partition) -> &[usize] {
        match p {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }
}

pub fn make_temporal_split(
    docs: &[NodeDocument],
    bounds: &SplitBoundaries,
) -> Result<TemporalSplit> {
    let labels: Vec<Option<usize>> = docs.iter().map(|d| d.label).collect();
    let years: Vec<i32> = docs.iter().map(|d| d.year).collect();
    split_by_year(&labels, &years, bounds)
}

/// Partitions the labeled nodes by year. Unlabeled nodes are left out.
pub fn split_by_year(
    labels: &[Option<usize>],
    years: &[i32],
    bounds: &SplitBoundaries,
) -> Result<TemporalSplit> {
    if labels.len() != years.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} years",
            labels.len(),
            years.len()
        )));
    }
    if bounds.test_start <= bounds.train_end + 1 {
        return Err(Error::Config(format!(
            "split boundaries leave no validation years: train <= {}, test >= {}",
            bounds.train_end, bounds.test_start
        )));
    }
    let mut split = TemporalSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (i, (label, &year)) in labels.iter().zip(years).enumerate() {
        if label.is_none() {
            continue;
        }
        if year <= bounds.train_end {
            split.train.push(i);
        } else if year >= bounds.test_start {
            split.test.push(i);
        } else {
            split.val.push(i);
        }
    }
    for (name, part) in [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ] {
        if part.is_empty() {
            return Err(Error::Config(format!(
                "{name} partition is empty with boundaries train <= {}, test >= {}",
                bounds.train_end, bounds.test_start
            )));
        }
    }
    log::info!(
        "temporal split: {} train, {} val, {} test",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(split)
}
