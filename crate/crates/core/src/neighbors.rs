//! Brute-force nearest neighbors and the per-point nearest-line index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};

/// Per-sample neighbor sets and the unordered neighbor pairs spanning each
/// sample's nearest lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborLineIndex {
    pub neighbors: Vec<Vec<usize>>,
    pub lines: Vec<Vec<(usize, usize)>>,
}

impl NeighborLineIndex {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn k(&self) -> usize {
        self.neighbors.first().map_or(0, Vec::len)
    }

    pub fn line_count(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other samples of every sample as `(index, squared
/// distance)`, nearest first; equal distances resolve to the smaller index.
pub fn knn(dataset: &Dataset, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = dataset.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "K must lie in [1, n-1] = [1, {}], got {k}",
            n - 1
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let xi = dataset.sample(i);
            let mut cand: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, sq_dist(xi, dataset.sample(j))))
                .collect();
            let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_by(cmp);
            cand
        })
        .collect())
}

/// Neighbor sets of size `k` (2 <= k <= n-1) and all `k(k-1)/2` pairs of
/// each set, stored as `(j, k)` with `j < k`.
pub fn build_neighbor_lines(dataset: &Dataset, k: usize) -> Result<NeighborLineIndex> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "K must be at least 2 to form lines, got {k}"
        )));
    }
    let nn = knn(dataset, k)?;
    let neighbors: Vec<Vec<usize>> = nn
        .into_iter()
        .map(|row| row.into_iter().map(|(j, _)| j).collect())
        .collect();
    let lines = neighbors
        .iter()
        .map(|nb| {
            let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
            for a in 0..nb.len() {
                for b in a + 1..nb.len() {
                    pairs.push((nb[a].min(nb[b]), nb[a].max(nb[b])));
                }
            }
            pairs
        })
        .collect();
    Ok(NeighborLineIndex { neighbors, lines })
}
