//! External validity indices: Jaccard, adjusted Rand, Fowlkes–Mallows and
//! normalized mutual information, all derived from a contingency table.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("partition lengths differ: {0} vs {1}")]
    IncompatiblePartitions(usize, usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("index undefined for fewer than two objects")]
    UndefinedIndex,
}

/// Cluster assignment of `N` objects into labels `0..num_clusters`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignments: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    pub fn new(assignments: Vec<usize>, num_clusters: usize) -> Result<Self, MetricsError> {
        if assignments.is_empty() {
            return Err(MetricsError::InvalidPartition("no objects".into()));
        }
        if let Some(bad) = assignments.iter().find(|&&a| a >= num_clusters) {
            return Err(MetricsError::InvalidPartition(format!(
                "label {bad} outside [0, {num_clusters})"
            )));
        }
        Ok(Self {
            assignments,
            num_clusters,
        })
    }

    /// Uses `max label + 1` as the cluster count.
    pub fn from_labels(assignments: Vec<usize>) -> Result<Self, MetricsError> {
        let k = assignments.iter().max().map_or(0, |m| m + 1);
        Self::new(assignments, k)
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn non_empty_clusters(&self) -> usize {
        self.cluster_sizes().iter().filter(|&&s| s > 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_marginals: Vec<u64>,
    col_marginals: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Builds a table from explicit counts (rows index the first partition).
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let cols = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|r| r.len() != cols) {
            return Err(MetricsError::InvalidPartition("ragged contingency table".into()));
        }
        let row_marginals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_marginals: Vec<u64> = (0..cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let total = row_marginals.iter().sum();
        Ok(Self {
            counts,
            row_marginals,
            col_marginals,
            total,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_marginals(&self) -> &[u64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[u64] {
        &self.col_marginals
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn transpose(&self) -> Self {
        let rows = self.counts.len();
        let cols = self.col_marginals.len();
        let counts = (0..cols)
            .map(|j| (0..rows).map(|i| self.counts[i][j]).collect())
            .collect();
        Self {
            counts,
            row_marginals: self.col_marginals.clone(),
            col_marginals: self.row_marginals.clone(),
            total: self.total,
        }
    }
}

pub fn build_contingency(u: &Partition, v: &Partition) -> Result<ContingencyTable, MetricsError> {
    if u.len() != v.len() {
        return Err(MetricsError::IncompatiblePartitions(u.len(), v.len()));
    }
    let mut counts = vec![vec![0u64; v.num_clusters()]; u.num_clusters()];
    for (&a, &b) in u.assignments().iter().zip(v.assignments()) {
        counts[a][b] += 1;
    }
    ContingencyTable::from_counts(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    /// Pairs together in both partitions.
    pub a: u64,
    /// Together in the first only.
    pub b: u64,
    /// Together in the second only.
    pub c: u64,
}

#[inline]
fn choose2(n: u64) -> u128 {
    let n = u128::from(n);
    n * n.saturating_sub(1) / 2
}

struct PairSums {
    a: u128,
    rows: u128,
    cols: u128,
    total: u128,
}

fn pair_sums(t: &ContingencyTable) -> PairSums {
    PairSums {
        a: t.counts.iter().flatten().map(|&n| choose2(n)).sum(),
        rows: t.row_marginals.iter().map(|&n| choose2(n)).sum(),
        cols: t.col_marginals.iter().map(|&n| choose2(n)).sum(),
        total: choose2(t.total),
    }
}

pub fn pair_counts(t: &ContingencyTable) -> PairCounts {
    let s = pair_sums(t);
    let narrow = |x: u128| u64::try_from(x).expect("pair count exceeds u64");
    PairCounts {
        a: narrow(s.a),
        b: narrow(s.rows - s.a),
        c: narrow(s.cols - s.a),
    }
}

/// `a / (a + b + c)`; 1 when no pair is co-clustered in either partition.
pub fn jaccard(p: &PairCounts) -> f64 {
    let denom = p.a + p.b + p.c;
    if denom == 0 {
        1.0
    } else {
        p.a as f64 / denom as f64
    }
}

/// `a / √((a+b)(a+c))`; 1 when `a = b = c = 0`.
pub fn fowlkes_mallows(p: &PairCounts) -> f64 {
    if p.a == 0 && p.b == 0 && p.c == 0 {
        return 1.0;
    }
    let prod = u128::from(p.a + p.b) * u128::from(p.a + p.c);
    if prod == 0 {
        return 0.0;
    }
    p.a as f64 / (prod as f64).sqrt()
}

/// Hubert–Arabie adjusted Rand index.
///
/// Evaluated as `2(a·T − Sᵤ·Sᵥ) / ((Sᵤ + Sᵥ)·T − 2·Sᵤ·Sᵥ)` with `T = C(n,2)`
/// in exact 128-bit integers; only the final ratio is floating point.
pub fn adjusted_rand(t: &ContingencyTable) -> Result<f64, MetricsError> {
    if t.total < 2 {
        return Err(MetricsError::UndefinedIndex);
    }
    let s = pair_sums(t);
    let su_sv = (s.rows * s.cols) as i128;
    let num = 2 * ((s.a * s.total) as i128 - su_sv);
    let den = ((s.rows + s.cols) * s.total) as i128 - 2 * su_sv;
    if den == 0 {
        // only reachable when both partitions are all-singletons or both single-cluster
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

fn entropy(marginals: &[u64], n: f64) -> f64 {
    marginals
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(U, V) / √(H(U)·H(V))` in nats.
///
/// Both entropies zero gives 1; exactly one zero gives 0.
pub fn nmi(t: &ContingencyTable) -> Result<f64, MetricsError> {
    if t.total == 0 {
        return Err(MetricsError::UndefinedIndex);
    }
    let n = t.total as f64;
    let hu = entropy(&t.row_marginals, n);
    let hv = entropy(&t.col_marginals, n);
    if hu == 0.0 && hv == 0.0 {
        return Ok(1.0);
    }
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            let ratio = n * nij / (t.row_marginals[i] as f64 * t.col_marginals[j] as f64);
            mi += nij / n * ratio.ln();
        }
    }
    // rounding can push I slightly outside [0, min(H)]
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

/// All four indices for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub jaccard: f64,
    pub ari: f64,
    pub fm: f64,
    pub nmi: f64,
}

impl Scores {
    pub const NAMES: [&'static str; 4] = ["jaccard", "ari", "fm", "nmi"];

    /// Floor used for crashed runs.
    pub const ZERO: Scores = Scores {
        jaccard: 0.0,
        ari: 0.0,
        fm: 0.0,
        nmi: 0.0,
    };

    pub fn get(&self, index: Index) -> f64 {
        match index {
            Index::Jaccard => self.jaccard,
            Index::Ari => self.ari,
            Index::Fm => self.fm,
            Index::Nmi => self.nmi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Index {
    Jaccard,
    Ari,
    Fm,
    Nmi,
}

impl Index {
    pub const ALL: [Index; 4] = [Index::Jaccard, Index::Ari, Index::Fm, Index::Nmi];

    pub fn name(self) -> &'static str {
        match self {
            Index::Jaccard => "jaccard",
            Index::Ari => "ari",
            Index::Fm => "fm",
            Index::Nmi => "nmi",
        }
    }
}

pub fn score(truth: &Partition, found: &Partition) -> Result<Scores, MetricsError> {
    let t = build_contingency(truth, found)?;
    let p = pair_counts(&t);
    Ok(Scores {
        jaccard: jaccard(&p),
        ari: adjusted_rand(&t)?,
        fm: fowlkes_mallows(&p),
        nmi: nmi(&t)?,
    })
}

pub fn adjusted_rand_partitions(u: &Partition, v: &Partition) -> Result<f64, MetricsError> {
    adjusted_rand(&build_contingency(u, v)?)
}
