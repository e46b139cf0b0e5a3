use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;

use super::{check_k, ClusterError, ClusterResult};
use crate::linalg::{squared_euclidean, Matrix};
use crate::metrics::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMeansVariant {
    /// Batch reassignment followed by a centroid update.
    Lloyd,
    /// Online: centroids move as soon as a point changes cluster.
    MacQueen,
}

impl FromStr for KMeansVariant {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lloyd" => Ok(Self::Lloyd),
            "macqueen" => Ok(Self::MacQueen),
            other => Err(ClusterError::InvalidParameter {
                name: "algorithm".into(),
                reason: format!("unknown k-means variant `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub iter_max: usize,
    pub nstart: usize,
    pub variant: KMeansVariant,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            iter_max: 10,
            nstart: 1,
            variant: KMeansVariant::Lloyd,
        }
    }
}

struct Run {
    labels: Vec<usize>,
    sse: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Best of `nstart` runs by within-cluster sum of squares, each started
/// from `k` distinct random objects.
pub fn kmeans<R: Rng + ?Sized>(
    x: &Matrix,
    k: usize,
    opts: &KMeansOptions,
    rng: &mut R,
) -> Result<ClusterResult, ClusterError> {
    let n = x.rows();
    check_k(k, n)?;
    let mut best: Option<Run> = None;
    for _ in 0..opts.nstart.max(1) {
        let init: Vec<usize> = sample(rng, n, k).into_vec();
        let run = match opts.variant {
            KMeansVariant::Lloyd => lloyd(x, k, &init, opts.iter_max),
            KMeansVariant::MacQueen => macqueen(x, k, &init, opts.iter_max),
        };
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(ClusterResult {
        partition: Partition::new(best.labels, k).expect("labels below k"),
        objective: best.sse,
        iterations_used: best.iterations,
        converged: best.converged,
        trace: best.trace,
        flagged: false,
    })
}

fn nearest(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.row_iter().enumerate() {
        let d = squared_euclidean(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(x: &Matrix, centroids: &Matrix) -> Vec<usize> {
    x.row_iter().map(|r| nearest(r, centroids).0).collect()
}

fn means(x: &Matrix, labels: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut centroids = Matrix::zeros(k, x.cols());
    let mut sizes = vec![0usize; k];
    for (row, &l) in x.row_iter().zip(labels) {
        sizes[l] += 1;
        for (c, v) in centroids.row_mut(l).iter_mut().zip(row) {
            *c += v;
        }
    }
    for (l, &s) in sizes.iter().enumerate() {
        if s > 0 {
            centroids.row_mut(l).iter_mut().for_each(|c| *c /= s as f64);
        }
    }
    (centroids, sizes)
}

pub(crate) fn sse(x: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    x.row_iter()
        .zip(labels)
        .map(|(r, &l)| squared_euclidean(r, centroids.row(l)))
        .sum()
}

/// Moves the point farthest from its own centroid into each empty cluster,
/// never emptying a donor cluster.
fn fill_empty(x: &Matrix, labels: &mut [usize], centroids: &Matrix, k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut pick: Option<(usize, f64)> = None;
        for (i, row) in x.row_iter().enumerate() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = squared_euclidean(row, centroids.row(labels[i]));
            if pick.is_none_or(|(_, pd)| d > pd) {
                pick = Some((i, d));
            }
        }
        if let Some((i, _)) = pick {
            sizes[labels[i]] -= 1;
            labels[i] = c;
            sizes[c] += 1;
        }
    }
}

fn seed_centroids(x: &Matrix, init: &[usize]) -> Matrix {
    let mut centroids = Matrix::zeros(init.len(), x.cols());
    for (c, &i) in init.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(x.row(i));
    }
    centroids
}

fn lloyd(x: &Matrix, k: usize, init: &[usize], iter_max: usize) -> Run {
    let mut centroids = seed_centroids(x, init);
    let mut labels = assign(x, &centroids);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_sse = f64::INFINITY;
    while iterations < iter_max.max(1) {
        iterations += 1;
        fill_empty(x, &mut labels, &centroids, k);
        centroids = means(x, &labels, k).0;
        last_sse = sse(x, &labels, &centroids);
        trace.push(last_sse);
        let next = assign(x, &centroids);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    if !converged {
        // labels were reassigned after the last centroid update
        fill_empty(x, &mut labels, &centroids, k);
        centroids = means(x, &labels, k).0;
        last_sse = sse(x, &labels, &centroids);
        trace.push(last_sse);
    }
    Run {
        labels,
        sse: last_sse,
        iterations,
        converged,
        trace,
    }
}

fn macqueen(x: &Matrix, k: usize, init: &[usize], iter_max: usize) -> Run {
    let seeds = seed_centroids(x, init);
    let mut labels = assign(x, &seeds);
    fill_empty(x, &mut labels, &seeds, k);
    let (mut centroids, mut sizes) = means(x, &labels, k);
    let mut trace = vec![sse(x, &labels, &centroids)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < iter_max.max(1) {
        iterations += 1;
        let mut moved = false;
        for (i, row) in x.row_iter().enumerate() {
            let from = labels[i];
            if sizes[from] < 2 {
                continue;
            }
            let (to, _) = nearest(row, &centroids);
            if to == from {
                continue;
            }
            moved = true;
            labels[i] = to;
            sizes[from] -= 1;
            sizes[to] += 1;
            let (nf, nt) = (sizes[from] as f64, sizes[to] as f64);
            for (c, &v) in centroids.row_mut(from).iter_mut().zip(row) {
                *c += (*c - v) / nf;
            }
            for (c, &v) in centroids.row_mut(to).iter_mut().zip(row) {
                *c += (v - *c) / nt;
            }
        }
        // refresh to exact means so drift does not accumulate
        centroids = means(x, &labels, k).0;
        trace.push(sse(x, &labels, &centroids));
        if !moved {
            converged = true;
            break;
        }
    }
    Run {
        sse: *trace.last().expect("non-empty trace"),
        labels,
        iterations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusterers::testdata::{blobs, random_matrix};
    use crate::metrics::adjusted_rand_partitions;
    use crate::seed::rng_from_seed;

    fn opts(iter_max: usize, nstart: usize, variant: KMeansVariant) -> KMeansOptions {
        KMeansOptions {
            iter_max,
            nstart,
            variant,
        }
    }

    #[test]
    fn single_cluster_objective_is_total_scatter() {
        let x = random_matrix(30, 3, 1);
        let r = kmeans(&x, 1, &KMeansOptions::default(), &mut rng_from_seed(2)).unwrap();
        assert!(r.partition.assignments().iter().all(|&l| l == 0));
        let mean: Vec<f64> = (0..3)
            .map(|j| x.row_iter().map(|r| r[j]).sum::<f64>() / 30.0)
            .collect();
        let scatter: f64 = x.row_iter().map(|r| squared_euclidean(r, &mean)).sum();
        assert!((r.objective - scatter).abs() < 1e-10);
    }

    #[test]
    fn separable_blobs_recovered() {
        let (x, truth) = blobs(&[&[0.0, 0.0], &[20.0, 20.0]], 40, 0.5, 3);
        for variant in [KMeansVariant::Lloyd, KMeansVariant::MacQueen] {
            let r = kmeans(&x, 2, &opts(10, 1, variant), &mut rng_from_seed(4)).unwrap();
            let truth = Partition::new(truth.clone(), 2).unwrap();
            assert_eq!(adjusted_rand_partitions(&truth, &r.partition).unwrap(), 1.0);
        }
    }

    #[test]
    fn four_seeds_on_two_blobs_reach_fixpoint() {
        let (x, _) = blobs(&[&[0.0, 0.0], &[8.0, 0.0]], 50, 1.0, 5);
        let r = kmeans(&x, 4, &opts(100, 1, KMeansVariant::Lloyd), &mut rng_from_seed(6)).unwrap();
        assert!(r.converged);
        assert_eq!(r.partition.non_empty_clusters(), 4);
    }

    #[test]
    fn lloyd_trace_is_non_increasing() {
        for seed in 0..20 {
            let x = random_matrix(60, 2, seed);
            let r = kmeans(&x, 5, &opts(50, 1, KMeansVariant::Lloyd), &mut rng_from_seed(seed)).unwrap();
            for w in r.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "seed {seed}: {:?}", r.trace);
            }
            assert_eq!(*r.trace.last().unwrap(), r.objective);
        }
    }

    #[test]
    fn more_starts_never_hurt() {
        let x = random_matrix(80, 3, 9);
        let one = kmeans(&x, 6, &opts(30, 1, KMeansVariant::Lloyd), &mut rng_from_seed(1)).unwrap();
        let many = kmeans(&x, 6, &opts(30, 10, KMeansVariant::Lloyd), &mut rng_from_seed(1)).unwrap();
        // the first start of `many` is the same draw as `one`
        assert!(many.objective <= one.objective);
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let x = random_matrix(7, 2, 4);
        let r = kmeans(&x, 7, &KMeansOptions::default(), &mut rng_from_seed(0)).unwrap();
        assert_eq!(r.partition.non_empty_clusters(), 7);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn invalid_k() {
        let x = random_matrix(3, 2, 4);
        assert!(matches!(
            kmeans(&x, 4, &KMeansOptions::default(), &mut rng_from_seed(0)),
            Err(ClusterError::InvalidK { k: 4, n: 3 })
        ));
    }

    #[test]
    fn empty_clusters_are_refilled() {
        // duplicate points make empty clusters likely after the first update
        let mut rows = vec![vec![0.0, 0.0]; 10];
        rows.extend(vec![vec![5.0, 5.0]; 10]);
        rows.push(vec![100.0, 100.0]);
        let x = Matrix::from_rows(&rows).unwrap();
        for seed in 0..10 {
            let r = kmeans(&x, 3, &KMeansOptions::default(), &mut rng_from_seed(seed)).unwrap();
            assert_eq!(r.partition.non_empty_clusters(), 3);
        }
    }
}
