//! The five clustering algorithms under benchmark, written from scratch, and
//! the parameter spaces they publish.

mod em;
mod hierarchical;
mod kmeans;
mod kmedoids;
mod params;
mod spectral;

pub use em::{em_gmm, CovarianceModel, EmInit, EmOptions};
pub use hierarchical::{agglomerate, hierarchical, Dendrogram, Linkage, Merge};
pub use kmeans::{kmeans, KMeansOptions, KMeansVariant};
pub use kmedoids::{clara, dissimilarity_matrix, pam, ClaraOptions, Metric, PamResult};
pub use params::{
    Algorithm, ClustererConfig, ParamDescriptor, ParamKind, ParamValue, Spacing, AUTO,
};
pub use spectral::{affinity_matrix, spectral, Kernel, SpectralOptions};

use thiserror::Error;

use crate::datagen::Dataset;
use crate::linalg::LinalgError;
use crate::metrics::Partition;
use crate::seed::rng_from_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("invalid cluster count k={k} for {n} objects")]
    InvalidK { k: usize, n: usize },
    #[error("sampsize {sampsize} must exceed k={k} and not exceed N={n}")]
    InvalidSampsize { sampsize: usize, k: usize, n: usize },
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("unknown parameter `{name}` for {algorithm}")]
    UnknownParameter { algorithm: String, name: String },
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("degenerate mixture fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub partition: Partition,
    /// SSE for k-means, total dissimilarity for clara, penalized
    /// log-likelihood for EM, last applied merge height for hierarchical.
    pub objective: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Objective after each iteration (merge heights for hierarchical).
    pub trace: Vec<f64>,
    /// Set when a numerical safeguard fired (floored degree, reseeded component).
    pub flagged: bool,
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<(), ClusterError> {
    if k == 0 || k > n {
        Err(ClusterError::InvalidK { k, n })
    } else {
        Ok(())
    }
}

/// Runs `config` on `data` with every random choice drawn from `seed`.
pub fn run(config: &ClustererConfig, data: &Dataset, seed: u64) -> Result<ClusterResult, ClusterError> {
    config.validate()?;
    let x = data.features();
    let k = config.k;
    let mut rng = rng_from_seed(seed);
    match config.algorithm {
        Algorithm::KMeans => {
            let opts = KMeansOptions {
                iter_max: config.int("iter_max")?.unwrap_or(10) as usize,
                nstart: config.int("nstart")?.unwrap_or(1) as usize,
                variant: config.choice("algorithm")?.parse()?,
            };
            kmeans(x, k, &opts, &mut rng)
        }
        Algorithm::Clara => {
            let opts = ClaraOptions {
                samples: config.int("samples")?.unwrap_or(5) as usize,
                sampsize: config.int("sampsize")?.map(|s| s as usize),
                metric: config.choice("metric")?.parse()?,
            };
            clara(x, k, &opts, &mut rng)
        }
        Algorithm::Hierarchical => {
            let metric: Metric = config.choice("metric")?.parse()?;
            let linkage: Linkage = config.choice("method")?.parse()?;
            hierarchical(x, k, metric, linkage)
        }
        Algorithm::Em => {
            let opts = EmOptions {
                model: config.choice("model")?.parse()?,
                init: config.choice("init")?.parse()?,
                ..EmOptions::default()
            };
            em_gmm(x, k, &opts, &mut rng)
        }
        Algorithm::Spectral => {
            let opts = SpectralOptions {
                kernel: config.choice("kernel")?.parse()?,
                kernel_param: config.real("kernel_param")?,
                iter: config.int("iter")?.unwrap_or(200) as usize,
            };
            spectral(x, k, &opts, &mut rng)
        }
    }
}

/// Relabels so clusters are numbered by first appearance.
pub(crate) fn canonical_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

#[cfg(test)]
pub(crate) mod testdata {
    use crate::linalg::Matrix;
    use crate::seed::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    /// `per` points around each center with isotropic noise `spread`.
    pub fn blobs(centers: &[&[f64]], per: usize, spread: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let f = centers[0].len();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                let row: Vec<f64> = (0..f)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        center[j] + spread * z
                    })
                    .collect();
                rows.push(row);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    pub fn random_matrix(n: usize, f: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_vec(
            n,
            f,
            (0..n * f).map(|_| StandardNormal.sample(&mut rng)).collect(),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, DatasetSpec};

    fn dataset() -> Dataset {
        generate_dataset(&DatasetSpec {
            num_classes: 3,
            num_features: 4,
            objects_per_class: 20,
            alpha: 2.0,
            seed: 5,
            realization_index: 0,
        })
        .unwrap()
    }

    #[test]
    fn every_algorithm_returns_valid_partition_deterministically() {
        let ds = dataset();
        for alg in Algorithm::ALL {
            let cfg = ClustererConfig::defaults(alg, 3);
            let a = run(&cfg, &ds, 17).unwrap();
            let b = run(&cfg, &ds, 17).unwrap();
            assert_eq!(a, b, "{alg} not deterministic");
            assert_eq!(a.partition.len(), ds.len());
            assert!(a.partition.assignments().iter().all(|&l| l < 3));
        }
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let ds = dataset();
        for alg in Algorithm::ALL {
            let cfg = ClustererConfig::defaults(alg, 61);
            assert!(run(&cfg, &ds, 1).is_err(), "{alg}");
        }
    }

    #[test]
    fn canonical_labels_by_first_appearance() {
        assert_eq!(canonical_labels(&[4, 4, 1, 7, 1]), (vec![0, 0, 1, 2, 1], 3));
    }
}
