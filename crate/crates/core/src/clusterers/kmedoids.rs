//! Partitioning around medoids (BUILD + SWAP) and its subsampling wrapper CLARA.

use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;

use super::{check_k, ClusterError, ClusterResult};
use crate::linalg::{manhattan, squared_euclidean, Matrix, SymmetricMatrix};
use crate::metrics::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Manhattan,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => squared_euclidean(a, b).sqrt(),
            Metric::Manhattan => manhattan(a, b),
        }
    }
}

impl FromStr for Metric {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(ClusterError::InvalidParameter {
                name: "metric".into(),
                reason: format!("unknown metric `{other}`"),
            }),
        }
    }
}

pub fn dissimilarity_matrix(x: &Matrix, metric: Metric) -> SymmetricMatrix {
    let n = x.rows();
    let mut d = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            d.set(i, j, metric.distance(x.row(i), x.row(j)));
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct PamResult {
    /// Medoid object indices in selection order; cluster `c` is `medoids[c]`.
    pub medoids: Vec<usize>,
    pub assignment: Vec<usize>,
    pub objective: f64,
    /// Objective after BUILD, then after each accepted swap.
    pub trace: Vec<f64>,
}

fn assign_to_medoids(d: &SymmetricMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let labels = (0..d.dim())
        .map(|j| {
            let mut best = (0, f64::INFINITY);
            for (c, &m) in medoids.iter().enumerate() {
                let v = d.get(j, m);
                if v < best.1 {
                    best = (c, v);
                }
            }
            total += best.1;
            best.0
        })
        .collect();
    (labels, total)
}

/// Greedy BUILD followed by best-improvement SWAP until no swap lowers the
/// total dissimilarity. Ties go to the lowest index.
pub fn pam(d: &SymmetricMatrix, k: usize) -> Result<PamResult, ClusterError> {
    let n = d.dim();
    check_k(k, n)?;

    // BUILD
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let first = (0..n)
        .map(|i| (i, d.row(i).iter().sum::<f64>()))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        .0;
    medoids.push(first);
    is_medoid[first] = true;
    for j in 0..n {
        nearest[j] = d.get(j, first);
    }
    while medoids.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !is_medoid[i]) {
            let gain: f64 = (0..n).map(|j| (nearest[j] - d.get(i, j)).max(0.0)).sum();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (pick, _) = best.expect("k <= n leaves a candidate");
        medoids.push(pick);
        is_medoid[pick] = true;
        for j in 0..n {
            nearest[j] = nearest[j].min(d.get(j, pick));
        }
    }

    let (_, mut objective) = assign_to_medoids(d, &medoids);
    let mut trace = vec![objective];
    // swaps must beat rounding noise to avoid cycling
    let eps = 1e-12 * objective.abs().max(f64::MIN_POSITIVE);

    // SWAP
    loop {
        let (first_d, second_d, owner) = nearest_two(d, &medoids);
        let mut best: Option<(usize, usize, f64)> = None;
        for mi in 0..medoids.len() {
            for h in (0..n).filter(|&h| !is_medoid[h]) {
                let mut delta = 0.0;
                for j in 0..n {
                    let djh = d.get(j, h);
                    if owner[j] == mi {
                        delta += djh.min(second_d[j]) - first_d[j];
                    } else if djh < first_d[j] {
                        delta += djh - first_d[j];
                    }
                }
                if best.is_none_or(|(_, _, b)| delta < b) {
                    best = Some((mi, h, delta));
                }
            }
        }
        match best {
            Some((mi, h, delta)) if delta < -eps => {
                is_medoid[medoids[mi]] = false;
                is_medoid[h] = true;
                medoids[mi] = h;
                let (_, total) = assign_to_medoids(d, &medoids);
                objective = total;
                trace.push(objective);
            }
            _ => break,
        }
    }
    let (assignment, objective) = assign_to_medoids(d, &medoids);
    Ok(PamResult {
        medoids,
        assignment,
        objective,
        trace,
    })
}

/// Distance to the nearest and second-nearest medoid, and the nearest's slot.
fn nearest_two(d: &SymmetricMatrix, medoids: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = d.dim();
    let mut first = vec![f64::INFINITY; n];
    let mut second = vec![f64::INFINITY; n];
    let mut owner = vec![0usize; n];
    for j in 0..n {
        for (c, &m) in medoids.iter().enumerate() {
            let v = d.get(j, m);
            if v < first[j] {
                second[j] = first[j];
                first[j] = v;
                owner[j] = c;
            } else if v < second[j] {
                second[j] = v;
            }
        }
    }
    (first, second, owner)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaraOptions {
    pub samples: usize,
    /// `None` means `min(N, 40 + 2k)`.
    pub sampsize: Option<usize>,
    pub metric: Metric,
}

impl Default for ClaraOptions {
    fn default() -> Self {
        Self {
            samples: 5,
            sampsize: None,
            metric: Metric::Euclidean,
        }
    }
}

pub fn default_sampsize(n: usize, k: usize) -> usize {
    n.min(40 + 2 * k)
}

/// PAM on `samples` random subsamples; the medoid set with the lowest total
/// dissimilarity over all `N` objects wins. Each subsample after the first
/// contains the best medoids found so far.
pub fn clara<R: Rng + ?Sized>(
    x: &Matrix,
    k: usize,
    opts: &ClaraOptions,
    rng: &mut R,
) -> Result<ClusterResult, ClusterError> {
    let n = x.rows();
    check_k(k, n)?;
    let sampsize = opts.sampsize.unwrap_or_else(|| default_sampsize(n, k));
    if sampsize <= k || sampsize > n {
        return Err(ClusterError::InvalidSampsize { sampsize, k, n });
    }
    let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
    let mut trace = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples.max(1) {
        let mut chosen: Vec<usize> = match &best {
            None => sample(rng, n, sampsize).into_vec(),
            Some((medoids, _, _)) => {
                let mut s = medoids.clone();
                let others: Vec<usize> = (0..n).filter(|i| !medoids.contains(i)).collect();
                s.extend(
                    sample(rng, others.len(), sampsize - medoids.len())
                        .into_iter()
                        .map(|i| others[i]),
                );
                s
            }
        };
        chosen.sort_unstable();
        let mut sub = Matrix::zeros(sampsize, x.cols());
        for (r, &i) in chosen.iter().enumerate() {
            sub.row_mut(r).copy_from_slice(x.row(i));
        }
        let local = pam(&dissimilarity_matrix(&sub, opts.metric), k)?;
        let medoids: Vec<usize> = local.medoids.iter().map(|&m| chosen[m]).collect();
        let (labels, total) = assign_full(x, &medoids, opts.metric);
        if best.as_ref().is_none_or(|(_, _, b)| total < *b) {
            best = Some((medoids, labels, total));
        }
        trace.push(best.as_ref().expect("set above").2);
    }
    let (_, labels, total) = best.expect("at least one sample");
    Ok(ClusterResult {
        partition: Partition::new(labels, k).expect("labels below k"),
        objective: total,
        iterations_used: trace.len(),
        converged: true,
        trace,
        flagged: false,
    })
}

fn assign_full(x: &Matrix, medoids: &[usize], metric: Metric) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let labels = x
        .row_iter()
        .map(|row| {
            let mut best = (0, f64::INFINITY);
            for (c, &m) in medoids.iter().enumerate() {
                let v = metric.distance(row, x.row(m));
                if v < best.1 {
                    best = (c, v);
                }
            }
            total += best.1;
            best.0
        })
        .collect();
    (labels, total)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::clusterers::testdata::{blobs, random_matrix};
    use crate::metrics::adjusted_rand_partitions;
    use crate::seed::rng_from_seed;

    /// Exhaustive minimum over all `C(n, k)` medoid sets.
    pub fn brute_force_medoid_cost(d: &SymmetricMatrix, k: usize) -> f64 {
        fn rec(d: &SymmetricMatrix, k: usize, start: usize, set: &mut Vec<usize>, best: &mut f64) {
            if set.len() == k {
                let cost: f64 = (0..d.dim())
                    .map(|j| set.iter().map(|&m| d.get(j, m)).fold(f64::INFINITY, f64::min))
                    .sum();
                *best = best.min(cost);
                return;
            }
            for i in start..d.dim() {
                set.push(i);
                rec(d, k, i + 1, set, best);
                set.pop();
            }
        }
        let mut best = f64::INFINITY;
        rec(d, k, 0, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn k_equal_n_has_zero_cost() {
        let x = random_matrix(6, 2, 1);
        let r = pam(&dissimilarity_matrix(&x, Metric::Euclidean), 6).unwrap();
        assert_eq!(r.objective, 0.0);
        let mut m = r.medoids.clone();
        m.sort_unstable();
        assert_eq!(m, (0..6).collect::<Vec<_>>());
    }

    fn medoid_cost(d: &SymmetricMatrix, medoids: &[usize]) -> f64 {
        (0..d.dim())
            .map(|j| medoids.iter().map(|&m| d.get(j, m)).fold(f64::INFINITY, f64::min))
            .sum()
    }

    #[test]
    fn single_medoid_is_exact() {
        for seed in 0..50 {
            let x = random_matrix(4 + seed as usize % 10, 2, seed);
            let d = dissimilarity_matrix(&x, Metric::Euclidean);
            assert_eq!(pam(&d, 1).unwrap().objective, brute_force_medoid_cost(&d, 1));
        }
    }

    #[test]
    fn result_is_swap_local_optimum() {
        for seed in 0..100 {
            let n = 4 + (seed as usize % 5);
            let k = 1 + (seed as usize % 3);
            let x = random_matrix(n, 2, seed);
            let d = dissimilarity_matrix(&x, Metric::Euclidean);
            let r = pam(&d, k).unwrap();
            let oracle = brute_force_medoid_cost(&d, k);
            assert!(r.objective >= oracle - 1e-12);
            for mi in 0..k {
                for h in (0..n).filter(|h| !r.medoids.contains(h)) {
                    let mut alt = r.medoids.clone();
                    alt[mi] = h;
                    assert!(medoid_cost(&d, &alt) >= r.objective - 1e-12, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn swaps_strictly_decrease_objective() {
        for seed in 0..10 {
            let x = random_matrix(40, 3, seed);
            let r = pam(&dissimilarity_matrix(&x, Metric::Manhattan), 4).unwrap();
            assert!(r.trace.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn clara_full_sample_equals_pam() {
        let x = random_matrix(30, 2, 3);
        let opts = ClaraOptions {
            samples: 1,
            sampsize: Some(30),
            metric: Metric::Euclidean,
        };
        let c = clara(&x, 3, &opts, &mut rng_from_seed(5)).unwrap();
        let p = pam(&dissimilarity_matrix(&x, Metric::Euclidean), 3).unwrap();
        assert_eq!(c.partition.assignments(), p.assignment.as_slice());
        assert!((c.objective - p.objective).abs() < 1e-12);
    }

    #[test]
    fn clara_separates_blobs() {
        let (x, truth) = blobs(&[&[0.0, 0.0, 0.0], &[10.0, 10.0, 10.0]], 60, 0.7, 8);
        let c = clara(&x, 2, &ClaraOptions::default(), &mut rng_from_seed(1)).unwrap();
        let truth = Partition::new(truth, 2).unwrap();
        assert_eq!(adjusted_rand_partitions(&truth, &c.partition).unwrap(), 1.0);
    }

    #[test]
    fn clara_running_best_is_monotone() {
        let x = random_matrix(200, 2, 4);
        let opts = ClaraOptions {
            samples: 12,
            ..ClaraOptions::default()
        };
        let c = clara(&x, 5, &opts, &mut rng_from_seed(2)).unwrap();
        assert_eq!(c.trace.len(), 12);
        assert!(c.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*c.trace.last().unwrap(), c.objective);
    }

    #[test]
    fn clara_sampsize_checks() {
        let x = random_matrix(20, 2, 4);
        let bad = |s| ClaraOptions {
            sampsize: Some(s),
            ..ClaraOptions::default()
        };
        assert!(matches!(
            clara(&x, 3, &bad(3), &mut rng_from_seed(0)),
            Err(ClusterError::InvalidSampsize { .. })
        ));
        assert!(clara(&x, 3, &bad(21), &mut rng_from_seed(0)).is_err());
        assert!(clara(&x, 3, &bad(4), &mut rng_from_seed(0)).is_ok());
        assert_eq!(default_sampsize(20, 3), 20);
        assert_eq!(default_sampsize(500, 10), 60);
    }
}
