//! Scoring recovered clusterings against the ground truth.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::geometry::{euclidean, Clustering, Point};
use crate::ssac::SsacOutput;

/// One-to-one assignment of recovered clusters to true clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// True label for each recovered cluster, `None` if left unmatched.
    pub map: Vec<Option<usize>>,
    pub cost: f64,
}

/// Minimum-cost assignment on a rectangular cost matrix (rows x cols).
///
/// Returns, per row, the assigned column, or `None` for rows left over when
/// there are more rows than columns.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        hungarian(cost, rows, cols).into_iter().map(Some).collect()
    } else {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let mut out = vec![None; rows];
        for (c, r) in hungarian(&transposed, cols, rows).into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}

/// Shortest augmenting path Hungarian algorithm with potentials, `n <= m`.
fn hungarian(a: &[Vec<f64>], n: usize, m: usize) -> Vec<usize> {
    // 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Matches recovered centers to true centers by minimum total distance.
pub fn match_labels(truth: &Clustering, recovered: &[Point]) -> Matching {
    let cost: Vec<Vec<f64>> = recovered
        .iter()
        .map(|p| {
            truth
                .centers()
                .iter()
                .map(|mu| euclidean(p.coords(), mu.coords()))
                .collect()
        })
        .collect();
    let map = min_cost_assignment(&cost);
    let total = map
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| cost[r][c]))
        .sum();
    Matching { map, cost: total }
}

/// Metrics of a single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub accuracy: f64,
    pub failed: bool,
    pub clusters_recovered: usize,
    pub phase1_failures: usize,
    pub queries_phase1: u64,
    pub queries_phase2: u64,
    pub ambiguity_events: usize,
}

/// Fraction of all points whose recovered cluster maps to their true label.
pub fn score(truth: &Clustering, output: &SsacOutput) -> RunResult {
    let centers: Vec<Point> = output.clusters.iter().map(|c| c.center.clone()).collect();
    let n = truth.labels().len();
    let accuracy = if centers.is_empty() || n == 0 {
        0.0
    } else {
        let matching = match_labels(truth, &centers);
        let correct = output
            .labels
            .iter()
            .enumerate()
            .filter(|&(i, l)| l.and_then(|c| matching.map[c]) == Some(truth.label(i)))
            .count();
        correct as f64 / n as f64
    };
    RunResult {
        accuracy,
        failed: output.failed,
        clusters_recovered: output.clusters.len(),
        phase1_failures: output.phase1_failures(),
        queries_phase1: output.queries_phase1(),
        queries_phase2: output.queries_phase2(),
        ambiguity_events: output.ambiguity_events(),
    }
}

/// Summary statistics of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary<K> {
    pub key: K,
    pub mean_accuracy: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_accuracy: f64,
    pub failure_count: usize,
    pub mean_queries: f64,
    pub reps: usize,
}

/// Groups results by cell key and summarizes each cell, in key order.
pub fn aggregate<'a, K: Ord + Clone + 'a>(
    results: impl IntoIterator<Item = (K, &'a RunResult)>,
) -> Vec<CellSummary<K>> {
    let mut cells: BTreeMap<K, Vec<&RunResult>> = BTreeMap::new();
    for (key, r) in results {
        cells.entry(key).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|(key, runs)| {
            let n = runs.len() as f64;
            let mean = runs.iter().map(|r| r.accuracy).sum::<f64>() / n;
            let var = if runs.len() > 1 {
                runs.iter()
                    .map(|r| (r.accuracy - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0)
            } else {
                0.0
            };
            CellSummary {
                key,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                failure_count: runs.iter().filter(|r| r.failed).count(),
                mean_queries: runs
                    .iter()
                    .map(|r| (r.queries_phase1 + r.queries_phase2) as f64)
                    .sum::<f64>()
                    / n,
                reps: runs.len(),
            }
        })
        .collect()
}
