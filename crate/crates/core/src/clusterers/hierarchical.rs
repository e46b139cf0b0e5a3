//! Agglomerative clustering with Lance–Williams dissimilarity updates.

use std::str::FromStr;

use super::{canonical_labels, check_k, dissimilarity_matrix, ClusterError, ClusterResult, Metric};
use crate::linalg::{Matrix, SymmetricMatrix};
use crate::metrics::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    /// UPGMA: size-weighted mean of cross-cluster dissimilarities.
    Average,
    Single,
    Complete,
    /// Ward's criterion, updated on squared dissimilarities.
    Ward,
    /// WPGMA: unweighted mean of the two merged rows.
    Weighted,
}

impl FromStr for Linkage {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "ward" => Ok(Linkage::Ward),
            "weighted" => Ok(Linkage::Weighted),
            other => Err(ClusterError::InvalidParameter {
                name: "method".into(),
                reason: format!("unknown linkage `{other}`"),
            }),
        }
    }
}

impl Linkage {
    #[inline]
    fn update(self, d_ki: f64, d_kj: f64, d_ij: f64, n_i: f64, n_j: f64, n_k: f64) -> f64 {
        match self {
            Linkage::Single => d_ki.min(d_kj),
            Linkage::Complete => d_ki.max(d_kj),
            Linkage::Average => (n_i * d_ki + n_j * d_kj) / (n_i + n_j),
            Linkage::Weighted => 0.5 * (d_ki + d_kj),
            Linkage::Ward => {
                ((n_i + n_k) * d_ki + (n_j + n_k) * d_kj - n_k * d_ij) / (n_i + n_j + n_k)
            }
        }
    }
}

/// One merge: cluster slot `b` folds into slot `a` (`a < b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub num_objects: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Labels after applying the first `n - k` merges, numbered by first
    /// appearance in object order.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        let n = self.num_objects;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in self.merges.iter().take(n.saturating_sub(k)) {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[rb] = ra;
        }
        let roots: Vec<usize> = (0..n).map(|x| find(&mut parent, x)).collect();
        canonical_labels(&roots).0
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }
}

/// Full merge sequence for dissimilarities `d`. At each step the pair with
/// the smallest dissimilarity merges; ties go to the lowest `(i, j)`.
pub fn agglomerate(d: &SymmetricMatrix, linkage: Linkage) -> Dendrogram {
    let n = d.dim();
    let square = linkage == Linkage::Ward;
    let mut w: Vec<f64> = d
        .as_matrix()
        .as_slice()
        .iter()
        .map(|&v| if square { v * v } else { v })
        .collect();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];

    // nearest active partner with a larger index, per row
    let recompute = |w: &[f64], active: &[bool], row: usize| -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in row + 1..n {
            if active[j] && best.is_none_or(|(_, b)| w[row * n + j] < b) {
                best = Some((j, w[row * n + j]));
            }
        }
        best
    };
    let mut cache: Vec<Option<(usize, f64)>> = (0..n).map(|r| recompute(&w, &active, r)).collect();

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut pick: Option<(usize, usize, f64)> = None;
        for (row, c) in cache.iter().enumerate() {
            if !active[row] {
                continue;
            }
            if let Some((j, v)) = *c {
                if pick.is_none_or(|(_, _, b)| v < b) {
                    pick = Some((row, j, v));
                }
            }
        }
        let (i, j, dij) = pick.expect("two active clusters remain");
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for m in 0..n {
            if !active[m] || m == i || m == j {
                continue;
            }
            let v = linkage.update(w[m * n + i], w[m * n + j], dij, ni, nj, size[m] as f64);
            w[m * n + i] = v;
            w[i * n + m] = v;
        }
        active[j] = false;
        cache[j] = None;
        size[i] += size[j];
        merges.push(Merge {
            a: i,
            b: j,
            height: if square { dij.max(0.0).sqrt() } else { dij },
            size: size[i],
        });

        for m in 0..n {
            if !active[m] || m == i {
                continue;
            }
            if m < i {
                match cache[m] {
                    Some((t, _)) if t == i || t == j => cache[m] = recompute(&w, &active, m),
                    Some((t, v)) => {
                        let cand = w[m * n + i];
                        if cand < v || (cand == v && i < t) {
                            cache[m] = Some((i, cand));
                        }
                    }
                    None => cache[m] = recompute(&w, &active, m),
                }
            } else if m < j {
                if matches!(cache[m], Some((t, _)) if t == j) {
                    cache[m] = recompute(&w, &active, m);
                }
            } else {
                break;
            }
        }
        cache[i] = recompute(&w, &active, i);
    }
    Dendrogram {
        num_objects: n,
        merges,
    }
}

pub fn hierarchical(
    x: &Matrix,
    k: usize,
    metric: Metric,
    linkage: Linkage,
) -> Result<ClusterResult, ClusterError> {
    let n = x.rows();
    check_k(k, n)?;
    let tree = agglomerate(&dissimilarity_matrix(x, metric), linkage);
    let labels = tree.cut(k);
    let objective = if k < n {
        tree.merges[n - k - 1].height
    } else {
        0.0
    };
    Ok(ClusterResult {
        partition: Partition::new(labels, k).expect("cut yields k clusters"),
        objective,
        iterations_used: n - k,
        converged: true,
        trace: tree.heights(),
        flagged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusterers::testdata::random_matrix;

    const ALL: [Linkage; 5] = [
        Linkage::Average,
        Linkage::Single,
        Linkage::Complete,
        Linkage::Ward,
        Linkage::Weighted,
    ];

    /// Components after deleting the k-1 heaviest edges of the Euclidean MST.
    pub fn mst_cut(x: &Matrix, k: usize) -> Vec<usize> {
        let n = x.rows();
        let d = dissimilarity_matrix(x, Metric::Euclidean);
        let mut in_tree = vec![false; n];
        let mut best = vec![(f64::INFINITY, 0usize); n];
        let mut edges = Vec::new();
        in_tree[0] = true;
        for j in 1..n {
            best[j] = (d.get(0, j), 0);
        }
        for _ in 1..n {
            let next = (0..n)
                .filter(|&j| !in_tree[j])
                .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
                .unwrap();
            in_tree[next] = true;
            edges.push((best[next].0, best[next].1, next));
            for j in 0..n {
                if !in_tree[j] && d.get(next, j) < best[j].0 {
                    best[j] = (d.get(next, j), next);
                }
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        let keep = &edges[..n - k];
        let mut comp: Vec<usize> = (0..n).collect();
        fn find(c: &mut [usize], mut x: usize) -> usize {
            while c[x] != x {
                x = c[x];
            }
            x
        }
        for &(_, a, b) in keep {
            let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
            comp[rb] = ra;
        }
        let roots: Vec<usize> = (0..n).map(|x| find(&mut comp, x)).collect();
        canonical_labels(&roots).0
    }

    #[test]
    fn singletons_when_k_equals_n() {
        let x = random_matrix(9, 2, 1);
        let r = hierarchical(&x, 9, Metric::Euclidean, Linkage::Average).unwrap();
        assert_eq!(r.partition.non_empty_clusters(), 9);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn single_linkage_equals_mst_cut() {
        for seed in 0..20 {
            let n = 10 + 2 * seed as usize;
            let x = random_matrix(n, 3, seed);
            for k in [1, 2, 3, 5] {
                let r = hierarchical(&x, k, Metric::Euclidean, Linkage::Single).unwrap();
                assert_eq!(r.partition.assignments(), mst_cut(&x, k).as_slice(), "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn merge_heights_are_monotone() {
        for seed in 0..10 {
            let x = random_matrix(60, 4, seed);
            for linkage in ALL {
                let tree = agglomerate(&dissimilarity_matrix(&x, Metric::Euclidean), linkage);
                let h = tree.heights();
                assert_eq!(h.len(), 59);
                assert!(
                    h.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs()),
                    "{linkage:?} seed {seed}"
                );
            }
        }
    }

    #[test]
    fn cached_search_matches_naive_scan() {
        // naive O(n^3) reference with the same tie rule
        fn naive(d: &SymmetricMatrix, linkage: Linkage) -> Vec<(usize, usize)> {
            let n = d.dim();
            let sq = linkage == Linkage::Ward;
            let mut w: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| if sq { d.get(i, j).powi(2) } else { d.get(i, j) }).collect())
                .collect();
            let mut active = vec![true; n];
            let mut size = vec![1.0; n];
            let mut out = Vec::new();
            for _ in 1..n {
                let mut best = (0, 0, f64::INFINITY);
                for i in 0..n {
                    for j in i + 1..n {
                        if active[i] && active[j] && w[i][j] < best.2 {
                            best = (i, j, w[i][j]);
                        }
                    }
                }
                let (i, j, dij) = best;
                for m in 0..n {
                    if active[m] && m != i && m != j {
                        let v = linkage.update(w[m][i], w[m][j], dij, size[i], size[j], size[m]);
                        w[m][i] = v;
                        w[i][m] = v;
                    }
                }
                active[j] = false;
                size[i] += size[j];
                out.push((i, j));
            }
            out
        }
        for seed in 0..5 {
            // integer grid coordinates force many exact ties
            let raw = random_matrix(40, 2, seed);
            let rows: Vec<Vec<f64>> = raw.row_iter().map(|r| r.iter().map(|v| (v * 2.0).round()).collect()).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            for metric in [Metric::Euclidean, Metric::Manhattan] {
                let d = dissimilarity_matrix(&x, metric);
                for linkage in ALL {
                    let fast: Vec<(usize, usize)> =
                        agglomerate(&d, linkage).merges.iter().map(|m| (m.a, m.b)).collect();
                    assert_eq!(fast, naive(&d, linkage), "{linkage:?} {metric:?} seed {seed}");
                }
            }
        }
    }

    #[test]
    fn average_linkage_textbook_example() {
        // points on a line: 0, 1, 5, 6, 20
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0], vec![6.0], vec![20.0]]).unwrap();
        let tree = agglomerate(&dissimilarity_matrix(&x, Metric::Euclidean), Linkage::Average);
        let h = tree.heights();
        assert_eq!(h[0], 1.0);
        assert_eq!(h[1], 1.0);
        // mean of |{0,1} - {5,6}| = (5+6+4+5)/4
        assert_eq!(h[2], 5.0);
        assert_eq!(h[3], 17.0);
        assert_eq!(tree.cut(2), vec![0, 0, 0, 0, 1]);
    }
}
