//! Cluster assignment from the learned representation.
//!
//! Dense inputs go through the one-sided representation fit on each side of
//! U followed by thresholded connected components; sparse inputs (where that
//! threshold heuristic breaks down) fall back to k-means with the number of
//! clusters selected by the silhouette coefficient.

use ndarray::{Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{attach_small_components, build_mutual_knn, MutualKnnGraph};
use crate::optimize::{fit_one_sided, FitConfig};
use crate::{DataMatrix, Error, MatrixAxis, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignMethod {
    Rcc,
    Kmeans,
}

/// Row and column cluster labels. Labels are 0-based and contiguous.
#[derive(Debug, Clone)]
pub struct CoClustering {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub method_used: AssignMethod,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignConfig {
    /// Zero-fraction above which (strictly) the k-means branch is taken.
    pub sparsity_threshold: f64,
    /// The component threshold tau is this factor times the mean edge
    /// distance of the assignment graph.
    pub tau_scale: f64,
    pub kmeans_seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    /// Configuration for the inner one-sided representation fits.
    pub fit: FitConfig,
}

impl Default for AssignConfig {
    fn default() -> Self {
        AssignConfig {
            sparsity_threshold: 0.5,
            tau_scale: 0.14,
            kmeans_seed: 0,
            k_min: 2,
            k_max: 20,
            // The assignment fit collapses an already-denoised representation,
            // so it needs far less annealing depth than the main fit; a deep
            // floor here lets borderline between-cluster edges collapse too.
            fit: FitConfig {
                mu_floor_divisor: 64.0,
                ..FitConfig::default()
            },
        }
    }
}

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;

/// Fraction of exactly-zero entries.
pub fn sparsity(x: &DataMatrix) -> f64 {
    let zeros = x.iter().filter(|&&v| v == 0.0).count();
    zeros as f64 / x.len() as f64
}

/// Relabel so every label in [0, max] occurs, in order of first appearance.
pub fn relabel_contiguous(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    let mut next = 0usize;
    labels
        .iter()
        .map(|&l| {
            *map.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Connected components of the subgraph of edges whose learned-space
/// endpoint distance is at most tau. Isolated nodes become singletons.
pub fn connected_components_threshold(
    v: &DataMatrix,
    g: &MutualKnnGraph,
    tau: f64,
) -> Vec<usize> {
    let n = g.node_count;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &g.edges {
        if sq_dist(v.row(e.i), v.row(e.j)).sqrt() <= tau {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    relabel_contiguous(&roots)
}

/// One-sided assignment: learn a collapsed representation of the rows of `m`,
/// then cut the mutual k-NN graph at a threshold computed in the learned
/// space (tau = tau_scale * mean learned edge distance).
pub fn rcc_cluster(m: &DataMatrix, cfg: &AssignConfig) -> Result<(Vec<usize>, Vec<String>)> {
    let n = m.nrows();
    if n < 2 {
        return Ok((vec![0; n], Vec::new()));
    }
    let mut warnings = Vec::new();
    let (mut g, clamped) = build_mutual_knn(m, cfg.fit.k, cfg.fit.metric, MatrixAxis::Rows)?;
    if clamped {
        warnings.push(format!("rcc: k clamped to {} nodes - 1", n));
    }
    attach_small_components(m, MatrixAxis::Rows, &mut g, cfg.fit.metric, cfg.fit.k)?;
    if g.edges.is_empty() {
        return Ok(((0..n).collect(), warnings));
    }
    let outcome = fit_one_sided(m, &g, &cfg.fit)?;
    warnings.extend(outcome.report.warnings);
    let v = &outcome.u;
    // The cut compares learned distances against a scale taken from the
    // graph's own edge lengths (distances in M, before the collapse). The
    // fit contracts within-cluster edges far below that scale while
    // between-cluster edges keep it, so the threshold separates the two even
    // when the graph happens to contain no between-cluster edge at all --
    // a learned-space mean would turn such graphs into all singletons.
    // Edge lengths are re-measured in L2 rather than taken from the graph
    // metric, because the cut itself is an L2 comparison: a cosine-built
    // graph stores distances bounded by 2, a useless scale for data of any
    // real magnitude.
    let mean_edge_dist = g
        .edges
        .iter()
        .map(|e| sq_dist(m.row(e.i), m.row(e.j)).sqrt())
        .sum::<f64>()
        / g.edges.len() as f64;
    // Distances at the floating-point noise floor are ties, not splits: when
    // every edge connects (near-)identical points the mean is pure roundoff,
    // and an unfloored threshold would shatter a perfectly collapsed
    // representation into singletons. Floor the cut at 1e-9 of the RMS row
    // norm, far below any genuine between-cluster distance.
    let rms_row_norm = (m.mapv(|v| v * v).sum() / n as f64).sqrt();
    let tau = (cfg.tau_scale * mean_edge_dist).max(1e-9 * rms_row_norm);
    Ok((connected_components_threshold(v, &g, tau), warnings))
}

fn count_distinct_rows(m: &DataMatrix) -> usize {
    let mut seen = std::collections::HashSet::new();
    for row in m.rows() {
        let bits: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        seen.insert(bits);
    }
    seen.len()
}

fn kmeans_once(
    m: &DataMatrix,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, f64) {
    let n = m.nrows();
    let p = m.ncols();

    // k-means++ seeding
    let mut centers = Array2::zeros((k, p));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&m.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(m.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).assign(&m.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(m.row(i), centers.row(c)));
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITER {
        // assignment step; ties go to the lowest center index
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(m.row(i), centers.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // update step
        let mut counts = vec![0usize; k];
        centers.fill(0.0);
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = centers.row_mut(labels[i]);
            row += &m.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mut row = centers.row_mut(c);
                row /= counts[c] as f64;
            } else {
                // re-seed an empty cluster on the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(m.row(a), centers.row(labels[a]));
                        let db = sq_dist(m.row(b), centers.row(labels[b]));
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .unwrap();
                centers.row_mut(c).assign(&m.row(far));
            }
        }
    }
    let wcss: f64 = (0..n).map(|i| sq_dist(m.row(i), centers.row(labels[i]))).sum();
    (labels, wcss)
}

/// Lloyd's algorithm with k-means++ seeding, best of 10 restarts by
/// within-cluster sum of squares. Deterministic per seed. K larger than the
/// number of distinct rows is reduced to that count.
pub fn kmeans(m: &DataMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = m.nrows();
    if k < 1 || k > n {
        return Err(Error::Parameter(format!(
            "kmeans: K = {k} out of range for {n} rows"
        )));
    }
    let k = k.min(count_distinct_rows(m));
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let (labels, wcss) = kmeans_once(m, k, &mut rng);
        if best.as_ref().map_or(true, |(_, bw)| wcss < *bw) {
            best = Some((labels, wcss));
        }
    }
    Ok(relabel_contiguous(&best.expect("at least one restart").0))
}

/// Mean silhouette coefficient under Euclidean distance. Points in singleton
/// clusters contribute 0. Errors if fewer than 2 clusters are present.
pub fn silhouette(m: &DataMatrix, labels: &[usize]) -> Result<f64> {
    let n = m.nrows();
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "silhouette: {} labels for {} rows",
            labels.len(),
            n
        )));
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Parameter(
            "silhouette: needs at least 2 clusters".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..n {
        if sizes[labels[i]] == 1 {
            continue; // singleton contributes 0
        }
        // mean distance to every cluster
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += sq_dist(m.row(i), m.row(j)).sqrt();
            }
        }
        let own = labels[i];
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Grid search over K maximizing the silhouette; ties go to the smaller K.
pub fn auto_kmeans(m: &DataMatrix, k_min: usize, k_max: usize, seed: u64) -> Result<Vec<usize>> {
    let n = m.nrows();
    if n <= k_min {
        return Err(Error::Parameter(format!(
            "auto_kmeans: {n} rows is too few for k_min = {k_min}"
        )));
    }
    let hi = k_max.min(n - 1);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for k in k_min..=hi {
        let labels = kmeans(m, k, seed)?;
        let distinct = labels.iter().max().map_or(0, |&m| m + 1);
        if distinct < 2 {
            continue;
        }
        let score = silhouette(m, &labels)?;
        if best.as_ref().map_or(true, |(_, bs)| score > *bs) {
            best = Some((labels, score));
        }
    }
    // All-identical rows leave no valid K; everything is one cluster then.
    Ok(best.map_or_else(|| vec![0; n], |(labels, _)| labels))
}

/// Sparsity-branched co-cluster assignment on the learned representation.
pub fn co_cluster_assign(
    x: &DataMatrix,
    u: &DataMatrix,
    cfg: &AssignConfig,
) -> Result<CoClustering> {
    if x.raw_dim() != u.raw_dim() {
        return Err(Error::Dimension(format!(
            "co_cluster_assign: X is {}x{} but U is {}x{}",
            x.nrows(),
            x.ncols(),
            u.nrows(),
            u.ncols()
        )));
    }
    let ut = u.t().to_owned();
    if sparsity(x) > cfg.sparsity_threshold {
        let row_labels = auto_kmeans(u, cfg.k_min, cfg.k_max, cfg.kmeans_seed)?;
        let col_labels = auto_kmeans(&ut, cfg.k_min, cfg.k_max, cfg.kmeans_seed)?;
        Ok(CoClustering {
            row_labels,
            col_labels,
            method_used: AssignMethod::Kmeans,
            warnings: Vec::new(),
        })
    } else {
        let (row_labels, mut warnings) = rcc_cluster(u, cfg)?;
        let (col_labels, col_warnings) = rcc_cluster(&ut, cfg)?;
        warnings.extend(col_warnings);
        Ok(CoClustering {
            row_labels,
            col_labels,
            method_used: AssignMethod::Rcc,
            warnings,
        })
    }
}
