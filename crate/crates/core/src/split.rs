//! Deterministic train / validation / test partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::PartialDataset;
use crate::error::{PllError, Result};
use crate::rng;

/// Split proportions and the shuffle seed. Fractions must be positive and sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 0.7 / 0.1 / 0.2.
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.7,
            val_fraction: 0.1,
            test_fraction: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PllError::InvalidSplit("fractions must be positive".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(PllError::InvalidSplit("fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// Subset sizes for `n` examples: `round(train·n)`, `round(val·n)`, remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((self.train_fraction * n as f64).round() as usize).min(n);
        let val = ((self.val_fraction * n as f64).round() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

/// Index assignment produced by [`split_indices`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// The three subsets of a split.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: PartialDataset,
    pub val: PartialDataset,
    pub test: PartialDataset,
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if n == 0 {
        return Err(PllError::Empty("dataset"));
    }
    let (n_train, n_val, n_test) = spec.sizes(n);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(PllError::InvalidSplit(format!(
            "{n} examples give an empty subset ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(spec.seed, 0));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        val,
        test,
    })
}

pub fn split(dataset: &PartialDataset, spec: &SplitSpec) -> Result<Splits> {
    let idx = split_indices(dataset.len(), spec)?;
    let name = dataset.name();
    Ok(Splits {
        train: dataset.subset(&idx.train, format!("{name}/train")),
        val: dataset.subset(&idx.val, format!("{name}/val")),
        test: dataset.subset(&idx.test, format!("{name}/test")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        let spec = SplitSpec::with_seed(42);
        assert_eq!(spec.sizes(10), (7, 1, 2));
        let idx = split_indices(10, &spec).unwrap();
        assert_eq!((idx.train.len(), idx.val.len(), idx.test.len()), (7, 1, 2));
    }

    #[test]
    fn lost_sized_split() {
        // round(0.7 * 1122) = round(785.4) = 785; round(112.2) = 112; 1122 - 897 = 225.
        let expected = ((0.7f64 * 1122.0).round() as usize, (0.1f64 * 1122.0).round() as usize);
        assert_eq!(expected, (785, 112));
        assert_eq!(SplitSpec::with_seed(0).sizes(1122), (785, 112, 225));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let spec = SplitSpec::with_seed(42);
        let a = split_indices(500, &spec).unwrap();
        assert_eq!(a, split_indices(500, &spec).unwrap());
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
        assert_ne!(a, split_indices(500, &SplitSpec::with_seed(43)).unwrap());
    }

    #[test]
    fn empty_subset_rejected() {
        assert!(split_indices(3, &SplitSpec::with_seed(1)).is_err());
        assert!(SplitSpec::new(0.5, 0.5, 0.0, 1).is_err());
        assert!(SplitSpec::new(0.5, 0.3, 0.3, 1).is_err());
    }
}
