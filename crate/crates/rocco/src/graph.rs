//! Mutual k-nearest-neighbor graph construction on the rows or columns of a
//! data matrix.
//!
//! An edge (i, j) survives only when each endpoint is among the other's k
//! nearest neighbors, which prunes the spurious links plain k-NN graphs keep.
//! Construction is brute force O(n^2 p); ties at equal distance are broken by
//! ascending node index so the graph is deterministic.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::{DataMatrix, Error, MatrixAxis, Result};

/// Distance metric for graph construction.
///
/// Cosine distance of a zero-norm vector against anything is defined as 1
/// (maximally dissimilar among typical values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::Cosine];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Cosine => "cosine",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "e" => Ok(Metric::Euclidean),
            "manhattan" | "m" => Ok(Metric::Manhattan),
            "cosine" | "c" => Ok(Metric::Cosine),
            other => Err(Error::Parameter(format!(
                "unknown metric {other:?} (expected euclidean, manhattan or cosine)"
            ))),
        }
    }
}

/// Undirected edge with the base distance between its endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub dist: f64,
}

/// Undirected graph over the rows (or columns) of a matrix, stored once per
/// unordered pair with i < j. Isolated nodes are permitted; they become
/// singleton clusters downstream.
#[derive(Debug, Clone, Default)]
pub struct MutualKnnGraph {
    pub node_count: usize,
    pub edges: Vec<Edge>,
}

impl MutualKnnGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Largest squared edge distance, or `None` for an edgeless graph.
    pub fn max_sq_dist(&self) -> Option<f64> {
        self.edges
            .iter()
            .map(|e| e.dist * e.dist)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }
}

/// Distance between two equal-length vectors under `m`.
pub fn pairwise_distance(x: ArrayView1<f64>, y: ArrayView1<f64>, m: Metric) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "pairwise_distance: lengths {} and {} differ",
            x.len(),
            y.len()
        )));
    }
    Ok(match m {
        Metric::Euclidean => x
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        Metric::Manhattan => x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum(),
        Metric::Cosine => {
            let nx = x.dot(&x).sqrt();
            let ny = y.dot(&y).sqrt();
            if nx == 0.0 || ny == 0.0 {
                1.0
            } else {
                // Clamp against rounding so the distance stays in [0, 2].
                1.0 - (x.dot(&y) / (nx * ny)).clamp(-1.0, 1.0)
            }
        }
    })
}

/// Per-node k-nearest-neighbor lists, sorted by ascending distance with ties
/// broken by ascending index.
///
/// Returns the lists and whether `k` had to be clamped to `n - 1`.
pub fn knn_lists(
    m: &DataMatrix,
    k: usize,
    metric: Metric,
    axis: MatrixAxis,
) -> Result<(Vec<Vec<(usize, f64)>>, bool)> {
    if k == 0 {
        return Err(Error::Parameter("knn_lists: k must be >= 1".into()));
    }
    let owned;
    let view: ArrayView2<f64> = match axis {
        MatrixAxis::Rows => m.view(),
        MatrixAxis::Columns => {
            owned = m.t().to_owned();
            owned.view()
        }
    };
    let n = view.nrows();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "knn_lists: need at least 2 nodes along the axis, got {n}"
        )));
    }
    let clamped = k >= n;
    let k = k.min(n - 1);

    let lists = match metric {
        Metric::Euclidean => euclidean_knn(view, k),
        Metric::Manhattan | Metric::Cosine => generic_knn(view, k, metric),
    };
    Ok((lists, clamped))
}

/// Select the k nearest from one row of distances, excluding `i` itself.
fn select_k(dists: &[f64], i: usize, k: usize) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, f64)> = dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &d)| (j, d))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| {
        a.1.partial_cmp(&b.1)
            .expect("non-finite distance")
            .then(a.0.cmp(&b.0))
    };
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand
}

/// Euclidean lists via blocked Gram products: d^2 = |x|^2 + |y|^2 - 2 x.y.
fn euclidean_knn(x: ArrayView2<f64>, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = x.nrows();
    let sq: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
    let xt = x.t();
    let block = 256;
    let mut lists = Vec::with_capacity(n);
    let mut row = vec![0.0f64; n];
    for start in (0..n).step_by(block) {
        let end = (start + block).min(n);
        let gram: Array2<f64> = x.slice(ndarray::s![start..end, ..]).dot(&xt);
        for i in start..end {
            let g = gram.row(i - start);
            for j in 0..n {
                row[j] = (sq[i] + sq[j] - 2.0 * g[j]).max(0.0).sqrt();
            }
            lists.push(select_k(&row, i, k));
        }
    }
    lists
}

fn generic_knn(x: ArrayView2<f64>, k: usize, metric: Metric) -> Vec<Vec<(usize, f64)>> {
    let n = x.nrows();
    let mut row = vec![0.0f64; n];
    (0..n)
        .map(|i| {
            let xi = x.row(i);
            for j in 0..n {
                row[j] = pairwise_distance(xi, x.row(j), metric).expect("equal lengths");
            }
            lists_entry(&row, i, k)
        })
        .collect()
}

fn lists_entry(row: &[f64], i: usize, k: usize) -> Vec<(usize, f64)> {
    select_k(row, i, k)
}

/// Keep edge (i, j) iff j is in i's list and i is in j's list.
pub fn mutual_knn_graph(lists: &[Vec<(usize, f64)>]) -> MutualKnnGraph {
    let n = lists.len();
    let sets: Vec<std::collections::HashSet<usize>> = lists
        .iter()
        .map(|l| l.iter().map(|&(j, _)| j).collect())
        .collect();
    let mut edges = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        for &(j, d) in list {
            if i < j && sets[j].contains(&i) {
                edges.push(Edge { i, j, dist: d });
            }
        }
    }
    edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    MutualKnnGraph {
        node_count: n,
        edges,
    }
}

/// Connect every small connected component (fewer than `min_size` nodes) to
/// the rest of the graph through its shortest outgoing edge, repeating until
/// no small component remains. The mutual k-NN intersection drops fringe
/// points and splinters tight groups (their members have closer friends),
/// which would freeze them as separate clusters no matter how close they sit
/// to a larger group. A single candidate edge per fragment lets the robust
/// fit downstream decide: close fragments get pulled in, genuinely distant
/// ones keep a long edge whose line-process weight decays to zero.
pub fn attach_small_components(
    m: &DataMatrix,
    axis: MatrixAxis,
    g: &mut MutualKnnGraph,
    metric: Metric,
    min_size: usize,
) -> Result<()> {
    let owned;
    let view: ArrayView2<f64> = match axis {
        MatrixAxis::Rows => m.view(),
        MatrixAxis::Columns => {
            owned = m.t().to_owned();
            owned.view()
        }
    };
    let n = g.node_count;
    let mut present: std::collections::HashSet<(usize, usize)> =
        g.edges.iter().map(|e| (e.i, e.j)).collect();
    loop {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &g.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let comp: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut sizes = vec![0usize; n];
        for &c in &comp {
            sizes[c] += 1;
        }
        let mut new_edges = Vec::new();
        for c in (0..n).filter(|&c| sizes[c] > 0 && sizes[c] < min_size.min(n)) {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in (0..n).filter(|&i| comp[i] == c) {
                for j in (0..n).filter(|&j| comp[j] != c) {
                    let d = pairwise_distance(view.row(i), view.row(j), metric)?;
                    if best.is_none_or(|(_, _, bd)| d < bd) {
                        best = Some((i, j, d));
                    }
                }
            }
            if let Some((i, j, d)) = best {
                if present.insert((i.min(j), i.max(j))) {
                    new_edges.push(Edge {
                        i: i.min(j),
                        j: i.max(j),
                        dist: d,
                    });
                }
            }
        }
        if new_edges.is_empty() {
            return Ok(());
        }
        g.edges.extend(new_edges);
        g.edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    }
}

/// Convenience: k-NN lists followed by the mutual intersection.
pub fn build_mutual_knn(
    m: &DataMatrix,
    k: usize,
    metric: Metric,
    axis: MatrixAxis,
) -> Result<(MutualKnnGraph, bool)> {
    let (lists, clamped) = knn_lists(m, k, metric, axis)?;
    Ok((mutual_knn_graph(&lists), clamped))
}
