// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const MIN_INSTANCES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitOrder {
    /// Seeded shuffle before cutting.
    Random,
    /// Keep mining order: the oldest instances train.
    Chronological,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// train : validation : test
    pub ratios: [u32; 3],
    pub seed: u64,
    pub order: SplitOrder,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: [8, 1, 1],
            seed: 0,
            order: SplitOrder::Random,
        }
    }
}

impl SplitSpec {
    /// Parses `a:b:c` with three positive integers.
    pub fn parse_ratios(s: &str) -> Option<[u32; 3]> {
        let mut parts = s.split(':').map(|p| p.trim().parse::<u32>().ok());
        let r = [parts.next()??, parts.next()??, parts.next()??];
        if parts.next().is_some() || r.contains(&0) {
            return None;
        }
        Some(r)
    }

    /// Sizes of the three parts for `n` instances: floors of the train and
    /// validation shares, the remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let total: u64 = self.ratios.iter().map(|&r| u64::from(r)).sum();
        let share = |r: u32| ((n as u64 * u64::from(r)) / total) as usize;
        let train = share(self.ratios[0]);
        let val = share(self.ratios[1]);
        (train, val, n - train - val)
    }
}

/// Indices into the instance list, one vector per part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `n` instances (given in mining order) according to `spec`.
pub fn split(n: usize, spec: &SplitSpec) -> Result<Partition, DatasetError> {
    if n < MIN_INSTANCES {
        return Err(DatasetError::TooFewInstances { found: n, needed: MIN_INSTANCES });
    }
    if spec.ratios.contains(&0) {
        return Err(DatasetError::BadRatios);
    }
    let mut order: Vec<usize> = (0..n).collect();
    if spec.order == SplitOrder::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        order.shuffle(&mut rng);
    }
    let (train, val, _) = spec.sizes(n);
    let test = order.split_off(train + val);
    let val = order.split_off(train);
    Ok(Partition {
        train: order,
        val,
        test,
    })
}
