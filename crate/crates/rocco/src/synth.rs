//! Synthetic bicluster benchmark datasets: a block-constant matrix (K blocks
//! of large values on a background of small values) with Gaussian noise,
//! row and column order shuffled.
//!
//! All randomness flows from one ChaCha8 stream seeded by `seed`, drawn in a
//! fixed order (block values, noise, row permutation, column permutation),
//! so a given seed always reproduces the same dataset byte for byte.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{DataMatrix, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub p: usize,
    pub n_clusters: usize,
    pub noise: f64,
    pub seed: u64,
    pub minval: f64,
    pub maxval: f64,
}

impl SynthParams {
    pub fn new(n: usize, p: usize, n_clusters: usize, noise: f64, seed: u64) -> Self {
        SynthParams {
            n,
            p,
            n_clusters,
            noise,
            seed,
            minval: 10.0,
            maxval: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub x: DataMatrix,
    pub true_row_labels: Vec<usize>,
    pub true_col_labels: Vec<usize>,
    pub params: SynthParams,
}

/// Split 0..total into `groups` contiguous groups with sizes differing by at
/// most one; returns the group label of each index.
fn partition_labels(total: usize, groups: usize) -> Vec<usize> {
    let base = total / groups;
    let extra = total % groups;
    let mut labels = Vec::with_capacity(total);
    for g in 0..groups {
        let size = base + usize::from(g < extra);
        labels.extend(std::iter::repeat(g).take(size));
    }
    labels
}

pub fn make_biclusters(params: &SynthParams) -> Result<SyntheticDataset> {
    let SynthParams {
        n,
        p,
        n_clusters: k,
        noise,
        seed,
        minval,
        maxval,
    } = *params;
    if k == 0 || k > n.min(p) {
        return Err(Error::Parameter(format!(
            "make_biclusters: K = {k} must be in 1..=min(n, p) = {}",
            n.min(p)
        )));
    }
    if noise < 0.0 {
        return Err(Error::Parameter("make_biclusters: noise must be >= 0".into()));
    }
    if !(minval < maxval) {
        return Err(Error::Parameter(
            "make_biclusters: minval must be < maxval".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let block_values: Vec<f64> = (0..k).map(|_| rng.gen_range(minval..maxval)).collect();
    let row_groups = partition_labels(n, k);
    let col_groups = partition_labels(p, k);

    // Background is zero and block values sit in [minval, maxval], so the
    // block-to-background contrast never falls below minval. Using minval as
    // the background instead would let the contrast of an unlucky block draw
    // approach zero, making some seeds unsolvable in a way the reference
    // generator never produces.
    let mut x = Array2::from_shape_fn((n, p), |(i, j)| {
        if row_groups[i] == col_groups[j] {
            block_values[row_groups[i]]
        } else {
            0.0
        }
    });
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("noise validated");
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let mut row_order: Vec<usize> = (0..n).collect();
    row_order.shuffle(&mut rng);
    let mut col_order: Vec<usize> = (0..p).collect();
    col_order.shuffle(&mut rng);

    let shuffled = Array2::from_shape_fn((n, p), |(i, j)| x[[row_order[i], col_order[j]]]);
    let true_row_labels: Vec<usize> = row_order.iter().map(|&r| row_groups[r]).collect();
    let true_col_labels: Vec<usize> = col_order.iter().map(|&c| col_groups[c]).collect();

    Ok(SyntheticDataset {
        x: shuffled,
        true_row_labels,
        true_col_labels,
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_blocks_are_constant() {
        let ds = make_biclusters(&SynthParams::new(30, 24, 3, 0.0, 1)).unwrap();
        for i in 0..30 {
            for j in 0..24 {
                let same = ds.true_row_labels[i] == ds.true_col_labels[j];
                let v = ds.x[[i, j]];
                if same {
                    // every cell of a (row group, col group) block holds the block value
                    let g = ds.true_row_labels[i];
                    let other = (0..30)
                        .position(|r| ds.true_row_labels[r] == g)
                        .unwrap();
                    let oj = (0..24).position(|c| ds.true_col_labels[c] == g).unwrap();
                    assert_eq!(v, ds.x[[other, oj]]);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = make_biclusters(&SynthParams::new(50, 40, 5, 20.0, 7)).unwrap();
        let b = make_biclusters(&SynthParams::new(50, 40, 5, 20.0, 7)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.true_row_labels, b.true_row_labels);
        assert_eq!(a.true_col_labels, b.true_col_labels);
        let c = make_biclusters(&SynthParams::new(50, 40, 5, 20.0, 8)).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn group_sizes_near_equal() {
        let ds = make_biclusters(&SynthParams::new(100, 100, 5, 10.0, 0)).unwrap();
        let mut sizes = vec![0usize; 5];
        for &l in &ds.true_row_labels {
            sizes[l] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 20));
        // near-equal also when K does not divide n
        let ds = make_biclusters(&SynthParams::new(103, 50, 5, 0.0, 0)).unwrap();
        let mut sizes = vec![0usize; 5];
        for &l in &ds.true_row_labels {
            sizes[l] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1);
    }

    #[test]
    fn k_too_large_is_error() {
        assert!(make_biclusters(&SynthParams::new(100, 100, 200, 0.0, 0)).is_err());
    }

    #[test]
    fn within_block_variance_matches_noise() {
        // (m-1) s^2 / sigma^2 ~ chi^2(m-1); check a 99% interval using the
        // Wilson-Hilferty approximation of the chi-square quantiles.
        let sigma = 10.0;
        let ds = make_biclusters(&SynthParams::new(100, 100, 5, sigma, 3)).unwrap();
        // take block (0, 0): rows/cols with group 0
        let rows: Vec<usize> = (0..100).filter(|&i| ds.true_row_labels[i] == 0).collect();
        let cols: Vec<usize> = (0..100).filter(|&j| ds.true_col_labels[j] == 0).collect();
        let mut vals = Vec::new();
        for &i in &rows {
            for &j in &cols {
                vals.push(ds.x[[i, j]]);
            }
        }
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let s2 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        let df = m - 1.0;
        let wh = |z: f64| df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        let lo = wh(-2.5758) * sigma * sigma / df;
        let hi = wh(2.5758) * sigma * sigma / df;
        assert!(s2 > lo && s2 < hi, "s2 {s2} outside [{lo}, {hi}]");
    }
}
