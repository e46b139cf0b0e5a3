//! Normalized spectral clustering (Ng–Jordan–Weiss embedding + k-means).

use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;

use super::{check_k, kmeans, ClusterError, ClusterResult, KMeansOptions, KMeansVariant};
use crate::linalg::{dot, eigh_ql, squared_euclidean, Matrix, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `exp(−‖x−y‖² / 2σ²)`
    Rbf,
    /// `exp(−‖x−y‖ / σ)`
    Laplace,
    /// `(1 + ⟨x̃, ỹ⟩ / s²)²` on column-centered data.
    Polynomial,
    /// `max(0, ⟨x̃, ỹ⟩) / s²` on column-centered data.
    Linear,
}

impl FromStr for Kernel {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rbf" => Ok(Self::Rbf),
            "laplace" => Ok(Self::Laplace),
            "polynomial" => Ok(Self::Polynomial),
            "linear" => Ok(Self::Linear),
            other => Err(ClusterError::InvalidParameter {
                name: "kernel".into(),
                reason: format!("unknown kernel `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub kernel: Kernel,
    /// Bandwidth or scale; `None` estimates it from the data.
    pub kernel_param: Option<f64>,
    /// Iteration cap for the k-means step on the embedding.
    pub iter: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            kernel: Kernel::Rbf,
            kernel_param: None,
            iter: 200,
        }
    }
}

const DEGREE_FLOOR: f64 = 1e-12;
const EMBEDDING_STARTS: usize = 5;
const SEARCH_MIN_SAMPLE: usize = 100;

/// Candidate bandwidths are these quantiles of the subsample's pairwise
/// distances; 0.5 is the plain median.
const SCALE_QUANTILES: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80,
    0.85, 0.90, 0.95,
];

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Estimates the kernel scale from a random subsample of `⌈N/6⌉` objects
/// (at least 100, or all of them when fewer).
///
/// For the distance kernels every candidate quantile of the subsample's
/// pairwise distances is tried, and the one whose embedded subsample k-means
/// leaves the smallest within-cluster sum of squares wins (lowest quantile on
/// ties). The inner-product kernels, and subsamples
/// too small to have a `(k+1)`-th eigenvalue, use the median distance.
pub fn automatic_scale<R: Rng + ?Sized>(x: &Matrix, k: usize, kernel: Kernel, rng: &mut R) -> f64 {
    let n = x.rows();
    let m = n.div_ceil(6).max(SEARCH_MIN_SAMPLE).min(n);
    let mut idx: Vec<usize> = if m >= 2 {
        sample(rng, n, m).into_vec()
    } else {
        (0..n).collect()
    };
    idx.sort_unstable();
    let mut d = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push(squared_euclidean(x.row(i), x.row(j)).sqrt());
        }
    }
    d.retain(|&v| v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let median = quantile(&d, 0.5);
    if !matches!(kernel, Kernel::Rbf | Kernel::Laplace) || idx.len() <= k {
        return median;
    }

    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
    let sub = Matrix::from_rows(&rows).expect("rectangular subsample");
    let km = KMeansOptions {
        iter_max: 100,
        nstart: EMBEDDING_STARTS,
        variant: KMeansVariant::Lloyd,
    };
    let mut best = (median, f64::INFINITY);
    for q in SCALE_QUANTILES {
        let scale = quantile(&d, q);
        let Ok((y, _)) = embedding(&affinity_matrix(&sub, kernel, scale), k) else {
            continue;
        };
        let Ok(fit) = kmeans(&y, k, &km, rng) else {
            continue;
        };
        if fit.objective < best.1 {
            best = (scale, fit.objective);
        }
    }
    best.0
}

pub fn affinity_matrix(x: &Matrix, kernel: Kernel, scale: f64) -> SymmetricMatrix {
    let n = x.rows();
    let mut a = SymmetricMatrix::zeros(n);
    match kernel {
        Kernel::Rbf | Kernel::Laplace => {
            for i in 0..n {
                a.set(i, i, 1.0);
                for j in 0..i {
                    let d2 = squared_euclidean(x.row(i), x.row(j));
                    let v = if kernel == Kernel::Rbf {
                        (-d2 / (2.0 * scale * scale)).exp()
                    } else {
                        (-d2.sqrt() / scale).exp()
                    };
                    a.set(i, j, v);
                }
            }
        }
        Kernel::Polynomial | Kernel::Linear => {
            let f = x.cols();
            let mean: Vec<f64> = (0..f)
                .map(|j| x.row_iter().map(|r| r[j]).sum::<f64>() / n as f64)
                .collect();
            let centered: Vec<Vec<f64>> = x
                .row_iter()
                .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
                .collect();
            let s2 = scale * scale;
            for i in 0..n {
                for j in 0..=i {
                    let ip = dot(&centered[i], &centered[j]) / s2;
                    let v = if kernel == Kernel::Polynomial {
                        (1.0 + ip).powi(2)
                    } else {
                        ip.max(0.0)
                    };
                    a.set(i, j, v);
                }
            }
        }
    }
    a
}

/// `D^-½ A D^-½`, plus whether any degree had to be floored.
fn normalized_affinity(a: &SymmetricMatrix) -> Result<(SymmetricMatrix, bool), ClusterError> {
    let n = a.dim();
    let mut floored = false;
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d < DEGREE_FLOOR {
                floored = true;
                DEGREE_FLOOR.powf(-0.5)
            } else {
                d.powf(-0.5)
            }
        })
        .collect();
    let mut m = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            m.set(i, j, inv_sqrt[i] * a.get(i, j) * inv_sqrt[j]);
        }
    }
    Ok((m, floored))
}

/// Rows of the unit-normalized embedding into the `k` leading eigenvectors of
/// `D^-½ A D^-½`, plus whether any degree had to be floored.
pub fn embedding(a: &SymmetricMatrix, k: usize) -> Result<(Matrix, bool), ClusterError> {
    let n = a.dim();
    let (m, floored) = normalized_affinity(a)?;
    // smallest eigenvalues of I − M are the largest of M
    let eig = eigh_ql(&m)?;
    let mut y = Matrix::zeros(n, k);
    for c in 0..k {
        let col = n - 1 - c;
        for i in 0..n {
            y[(i, c)] = eig.vectors[(i, col)];
        }
    }
    for i in 0..n {
        let norm = dot(y.row(i), y.row(i)).sqrt();
        if norm > 0.0 {
            y.row_mut(i).iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok((y, floored))
}

pub fn spectral<R: Rng + ?Sized>(
    x: &Matrix,
    k: usize,
    opts: &SpectralOptions,
    rng: &mut R,
) -> Result<ClusterResult, ClusterError> {
    check_k(k, x.rows())?;
    let scale = match opts.kernel_param {
        Some(s) => s,
        None => automatic_scale(x, k, opts.kernel, rng),
    };
    let a = affinity_matrix(x, opts.kernel, scale);
    let (y, floored) = embedding(&a, k)?;
    let km = KMeansOptions {
        iter_max: opts.iter,
        nstart: EMBEDDING_STARTS,
        variant: KMeansVariant::Lloyd,
    };
    let mut result = kmeans(&y, k, &km, rng)?;
    result.flagged |= floored;
    Ok(result)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::clusterers::testdata::{blobs, random_matrix};
    use crate::metrics::{adjusted_rand_partitions, Partition};
    use crate::seed::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    /// Two noisy concentric circles of radius 1 and 4.
    pub fn rings(per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, radius) in [1.0, 4.0].into_iter().enumerate() {
            for _ in 0..per {
                let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                rows.push(vec![
                    radius * t.cos() + noise.sample(&mut rng),
                    radius * t.sin() + noise.sample(&mut rng),
                ]);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn rbf_affinity_range_and_diagonal() {
        let x = random_matrix(30, 3, 1);
        let a = affinity_matrix(&x, Kernel::Rbf, 0.7);
        for i in 0..30 {
            assert_eq!(a.get(i, i), 1.0);
            for j in 0..30 {
                let v = a.get(i, j);
                assert!(v > 0.0 && v <= 1.0);
                assert_eq!(v, a.get(j, i));
            }
        }
    }

    #[test]
    fn embedding_rows_are_unit_length() {
        let x = random_matrix(25, 2, 2);
        let (y, floored) = embedding(&affinity_matrix(&x, Kernel::Rbf, 1.0), 3).unwrap();
        assert!(!floored);
        for row in y.row_iter() {
            assert!((dot(row, row) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn concentric_rings_separated() {
        for seed in 0..5 {
            let (x, truth) = rings(100, 7 + seed);
            let truth = Partition::new(truth, 2).unwrap();
            let r = spectral(&x, 2, &SpectralOptions::default(), &mut rng_from_seed(seed)).unwrap();
            assert_eq!(adjusted_rand_partitions(&truth, &r.partition).unwrap(), 1.0, "seed {seed}");
            let raw = kmeans(&x, 2, &KMeansOptions::default(), &mut rng_from_seed(seed)).unwrap();
            assert!(adjusted_rand_partitions(&truth, &raw.partition).unwrap() < 0.2);
        }
    }

    #[test]
    fn blobs_recovered_with_every_kernel() {
        let (x, truth) = blobs(&[&[0.0, 0.0], &[12.0, 0.0]], 30, 1.0, 4);
        let truth = Partition::new(truth, 2).unwrap();
        for kernel in [Kernel::Rbf, Kernel::Laplace, Kernel::Polynomial, Kernel::Linear] {
            let opts = SpectralOptions {
                kernel,
                ..SpectralOptions::default()
            };
            let r = spectral(&x, 2, &opts, &mut rng_from_seed(5)).unwrap();
            assert!(adjusted_rand_partitions(&truth, &r.partition).unwrap() > 0.9, "{kernel:?}");
        }
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let x = random_matrix(8, 2, 9);
        let r = spectral(&x, 8, &SpectralOptions::default(), &mut rng_from_seed(1)).unwrap();
        assert_eq!(r.partition.non_empty_clusters(), 8);
    }

    #[test]
    fn zero_degree_is_floored_and_flagged() {
        // a point at the centroid has zero linear affinity to everything
        let x = Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0], vec![-1.1, 0.0], vec![1.1, 0.0]])
            .unwrap();
        let opts = SpectralOptions {
            kernel: Kernel::Linear,
            kernel_param: Some(1.0),
            iter: 10,
        };
        let r = spectral(&x, 2, &opts, &mut rng_from_seed(0)).unwrap();
        assert!(r.flagged);
    }
}

