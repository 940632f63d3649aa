use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum BatchSpec {
    #[default]
    Full,
    MiniBatch { size: usize, seed: u64 },
}

/// Subset of the batchable points used for one evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Batch {
    Full,
    Indices(Vec<usize>),
}

impl Batch {
    pub fn len(&self, dataset: usize) -> usize {
        match self {
            Batch::Full => dataset,
            Batch::Indices(i) => i.len(),
        }
    }

    pub fn is_empty(&self, dataset: usize) -> bool {
        self.len(dataset) == 0
    }

    /// Rows of a row-major `n × dim` array selected by the batch.
    pub fn select(&self, data: &[f64], dim: usize) -> Vec<f64> {
        match self {
            Batch::Full => data.to_vec(),
            Batch::Indices(idx) => idx
                .iter()
                .flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied())
                .collect(),
        }
    }
}

/// The batch used at `iteration`: consecutive chunks of a per-epoch random
/// permutation, so each epoch covers the dataset exactly once. The last chunk
/// of an epoch is shorter when `size` does not divide `n`.
pub fn epoch_batch(n: usize, spec: BatchSpec, iteration: usize) -> Result<Batch> {
    let (size, seed) = match spec {
        BatchSpec::Full => return Ok(Batch::Full),
        BatchSpec::MiniBatch { size, seed } => (size, seed),
    };
    if size == 0 || size > n {
        return Err(Error::InvalidConfig(format!(
            "batch size {size} for a dataset of {n} points"
        )));
    }
    let per_epoch = n.div_ceil(size);
    let epoch = iteration / per_epoch;
    let k = iteration % per_epoch;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let end = ((k + 1) * size).min(n);
    Ok(Batch::Indices(perm[k * size..end].to_vec()))
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `n` points interior to the unit interval on an even grid.
pub(crate) fn grid_interior(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// Uniform points on the boundary of the unit square, edge chosen uniformly.
pub(crate) fn square_boundary(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let t: f64 = rng.random_range(0.0..=1.0);
        let (x, y) = match rng.random_range(0..4) {
            0 => (t, 0.0),
            1 => (t, 1.0),
            2 => (0.0, t),
            _ => (1.0, t),
        };
        pts.push(x);
        pts.push(y);
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_batch_is_everything() {
        assert_eq!(epoch_batch(7, BatchSpec::Full, 3).unwrap(), Batch::Full);
        assert_eq!(Batch::Full.select(&[1.0, 2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn epochs_cover_dataset_disjointly() {
        let spec = BatchSpec::MiniBatch { size: 40, seed: 9 };
        for epoch in 0..3 {
            let mut seen = vec![false; 400];
            for k in 0..10 {
                let Batch::Indices(idx) = epoch_batch(400, spec, epoch * 10 + k).unwrap() else {
                    panic!()
                };
                assert_eq!(idx.len(), 40);
                for i in idx {
                    assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
        assert_ne!(epoch_batch(400, spec, 0).unwrap(), epoch_batch(400, spec, 10).unwrap());
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = BatchSpec::MiniBatch { size: 3, seed: 1 };
        let a: Vec<_> = (0..20).map(|i| epoch_batch(10, spec, i).unwrap()).collect();
        let b: Vec<_> = (0..20).map(|i| epoch_batch(10, spec, i).unwrap()).collect();
        assert_eq!(a, b);
        assert_eq!(a[3].len(10), 1);
        assert!(epoch_batch(2, spec, 0).is_err());
    }
}
