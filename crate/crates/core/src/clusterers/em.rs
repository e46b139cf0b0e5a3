//! Gaussian mixture fitted by expectation–maximization.
//!
//! Covariances carry a small ridge: maximizing the log-likelihood plus
//! `-λ/2 · tr(Σ⁻¹)` per component gives closed-form M-steps with `λ` added to
//! the scatter diagonal, and EM stays monotone in that penalized objective.
//! The traced objective is exactly this quantity.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_k, kmeans, ClusterError, ClusterResult, KMeansOptions};
use crate::linalg::{cholesky, forward_substitute, Matrix, SymmetricMatrix};
use crate::metrics::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceModel {
    /// One `σ²·I` shared by all components.
    SphericalShared,
    /// `σ²ₖ·I` per component.
    SphericalVarying,
    DiagonalVarying,
    FullVarying,
}

impl FromStr for CovarianceModel {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spherical-shared" => Ok(Self::SphericalShared),
            "spherical-varying" => Ok(Self::SphericalVarying),
            "diagonal-varying" => Ok(Self::DiagonalVarying),
            "full-varying" => Ok(Self::FullVarying),
            other => Err(ClusterError::InvalidParameter {
                name: "model".into(),
                reason: format!("unknown covariance model `{other}`"),
            }),
        }
    }
}

/// How the first responsibilities are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmInit {
    /// Uniformly random hard assignment with every component non-empty.
    RandomZ,
    /// Hard assignment from a single k-means run.
    KMeansZ,
}

impl FromStr for EmInit {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-z" => Ok(Self::RandomZ),
            "kmeans-z" => Ok(Self::KMeansZ),
            other => Err(ClusterError::InvalidParameter {
                name: "init".into(),
                reason: format!("unknown initialization `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub model: CovarianceModel,
    pub init: EmInit,
    pub max_iter: usize,
    /// Stop once the objective gains less than `tol·(1 + |objective|)`.
    pub tol: f64,
    /// Ridge as a fraction of the mean feature variance; zero gives plain MLE.
    pub regularization: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            model: CovarianceModel::SphericalVarying,
            init: EmInit::RandomZ,
            max_iter: 200,
            tol: 1e-8,
            regularization: 1e-6,
        }
    }
}

/// A component whose total responsibility falls below this is considered empty.
const COLLAPSE_MASS: f64 = 1e-8;
/// More reseeds than this in one fit is reported as a degenerate fit.
const MAX_RESEEDS: usize = 3;

#[derive(Debug, Clone)]
enum Cov {
    Spherical(f64),
    Diagonal(Vec<f64>),
    /// Cholesky factor of Σ.
    Full(Matrix),
}

#[derive(Debug, Clone)]
struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    cov: Cov,
    log_det: f64,
    trace_inv: f64,
}

impl Component {
    fn new(weight: f64, mean: Vec<f64>, cov: Cov) -> Result<Self, ClusterError> {
        let f = mean.len() as f64;
        let (log_det, trace_inv) = match &cov {
            Cov::Spherical(v) => (f * v.ln(), f / v),
            Cov::Diagonal(vs) => (
                vs.iter().map(|v| v.ln()).sum(),
                vs.iter().map(|v| 1.0 / v).sum(),
            ),
            Cov::Full(l) => {
                let n = l.rows();
                let log_det = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
                // tr(Σ⁻¹) = ‖L⁻¹‖²_F
                let mut trace_inv = 0.0;
                let mut e = vec![0.0; n];
                for j in 0..n {
                    e.iter_mut().for_each(|v| *v = 0.0);
                    e[j] = 1.0;
                    forward_substitute(l, &mut e);
                    trace_inv += e.iter().map(|v| v * v).sum::<f64>();
                }
                (log_det, trace_inv)
            }
        };
        if !log_det.is_finite() {
            return Err(ClusterError::DegenerateFit("singular covariance".into()));
        }
        Ok(Self {
            log_weight: weight.ln(),
            mean,
            cov,
            log_det,
            trace_inv,
        })
    }

    fn log_density(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let f = x.len() as f64;
        let maha = match &self.cov {
            Cov::Spherical(v) => {
                x.iter().zip(&self.mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>() / v
            }
            Cov::Diagonal(vs) => x
                .iter()
                .zip(&self.mean)
                .zip(vs)
                .map(|((a, m), v)| (a - m) * (a - m) / v)
                .sum(),
            Cov::Full(l) => {
                scratch.clear();
                scratch.extend(x.iter().zip(&self.mean).map(|(a, m)| a - m));
                forward_substitute(l, scratch);
                scratch.iter().map(|v| v * v).sum()
            }
        };
        -0.5 * (f * (2.0 * PI).ln() + self.log_det + maha)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Responsibilities in place; returns per-object log-likelihoods.
fn e_step(x: &Matrix, comps: &[Component], z: &mut [f64]) -> Vec<f64> {
    let k = comps.len();
    let mut scratch = Vec::with_capacity(x.cols());
    let mut logp = vec![0.0; k];
    x.row_iter()
        .enumerate()
        .map(|(i, row)| {
            for (c, comp) in comps.iter().enumerate() {
                logp[c] = comp.log_weight + comp.log_density(row, &mut scratch);
            }
            let total = log_sum_exp(&logp);
            for c in 0..k {
                z[i * k + c] = (logp[c] - total).exp();
            }
            total
        })
        .collect()
}

/// Index of the first component with (numerically) no mass.
fn m_step(
    x: &Matrix,
    z: &[f64],
    k: usize,
    model: CovarianceModel,
    ridge: f64,
) -> Result<Result<Vec<Component>, usize>, ClusterError> {
    let (n, f) = (x.rows(), x.cols());
    let mut mass = vec![0.0; k];
    let mut means = vec![vec![0.0; f]; k];
    for (i, row) in x.row_iter().enumerate() {
        for c in 0..k {
            let w = z[i * k + c];
            mass[c] += w;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += w * v;
            }
        }
    }
    if let Some(c) = mass.iter().position(|&m| m < COLLAPSE_MASS) {
        return Ok(Err(c));
    }
    for (m, &nk) in means.iter_mut().zip(&mass) {
        m.iter_mut().for_each(|v| *v /= nk);
    }

    // weighted scatter, shape depending on what the model needs
    let covs: Vec<Cov> = match model {
        CovarianceModel::SphericalShared | CovarianceModel::SphericalVarying => {
            let mut w = vec![0.0; k];
            for (i, row) in x.row_iter().enumerate() {
                for c in 0..k {
                    let d: f64 = row.iter().zip(&means[c]).map(|(a, m)| (a - m) * (a - m)).sum();
                    w[c] += z[i * k + c] * d;
                }
            }
            let ff = f as f64;
            if model == CovarianceModel::SphericalShared {
                let v = (w.iter().sum::<f64>() + k as f64 * ridge * ff) / (ff * n as f64);
                vec![Cov::Spherical(v); k]
            } else {
                (0..k)
                    .map(|c| Cov::Spherical((w[c] + ridge * ff) / (ff * mass[c])))
                    .collect()
            }
        }
        CovarianceModel::DiagonalVarying => {
            let mut w = vec![vec![0.0; f]; k];
            for (i, row) in x.row_iter().enumerate() {
                for c in 0..k {
                    let zi = z[i * k + c];
                    for ((acc, a), m) in w[c].iter_mut().zip(row).zip(&means[c]) {
                        *acc += zi * (a - m) * (a - m);
                    }
                }
            }
            w.into_iter()
                .zip(&mass)
                .map(|(wc, &nk)| Cov::Diagonal(wc.into_iter().map(|v| (v + ridge) / nk).collect()))
                .collect()
        }
        CovarianceModel::FullVarying => {
            let mut out = Vec::with_capacity(k);
            let mut d = vec![0.0; f];
            for c in 0..k {
                let mut s = SymmetricMatrix::zeros(f);
                let mut acc = vec![0.0; f * f];
                for (i, row) in x.row_iter().enumerate() {
                    let zi = z[i * k + c];
                    for ((dv, a), m) in d.iter_mut().zip(row).zip(&means[c]) {
                        *dv = a - m;
                    }
                    for p in 0..f {
                        let zp = zi * d[p];
                        for q in 0..=p {
                            acc[p * f + q] += zp * d[q];
                        }
                    }
                }
                for p in 0..f {
                    for q in 0..=p {
                        let ridge_term = if p == q { ridge } else { 0.0 };
                        s.set(p, q, (acc[p * f + q] + ridge_term) / mass[c]);
                    }
                }
                out.push(Cov::Full(cholesky(&s)?));
            }
            out
        }
    };

    let comps = covs
        .into_iter()
        .zip(means)
        .zip(&mass)
        .map(|((cov, mean), &nk)| Component::new(nk / n as f64, mean, cov))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ok(comps))
}

fn objective(loglik: &[f64], comps: &[Component], ridge: f64) -> f64 {
    loglik.iter().sum::<f64>() - 0.5 * ridge * comps.iter().map(|c| c.trace_inv).sum::<f64>()
}

fn initial_responsibilities<R: Rng + ?Sized>(
    x: &Matrix,
    k: usize,
    init: EmInit,
    rng: &mut R,
) -> Result<Vec<f64>, ClusterError> {
    let n = x.rows();
    let labels: Vec<usize> = match init {
        EmInit::RandomZ => {
            // first k of a shuffled order seed each component once
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut labels = vec![0; n];
            for (pos, &i) in order.iter().enumerate() {
                labels[i] = if pos < k { pos } else { rng.random_range(0..k) };
            }
            labels
        }
        EmInit::KMeansZ => kmeans(x, k, &KMeansOptions::default(), rng)?
            .partition
            .assignments()
            .to_vec(),
    };
    let mut z = vec![0.0; n * k];
    for (i, &l) in labels.iter().enumerate() {
        z[i * k + l] = 1.0;
    }
    Ok(z)
}

fn ridge_for(x: &Matrix, regularization: f64) -> f64 {
    let (n, f) = (x.rows() as f64, x.cols());
    let mut total = 0.0;
    for j in 0..f {
        let mean = x.row_iter().map(|r| r[j]).sum::<f64>() / n;
        total += x.row_iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = total / f as f64;
    regularization * if mean_var > 0.0 { mean_var } else { 1.0 }
}

/// Fits a `k`-component mixture and labels each object by its most
/// responsible component (lowest index on ties).
pub fn em_gmm<R: Rng + ?Sized>(
    x: &Matrix,
    k: usize,
    opts: &EmOptions,
    rng: &mut R,
) -> Result<ClusterResult, ClusterError> {
    let n = x.rows();
    check_k(k, n)?;
    if x.cols() == 0 {
        return Err(ClusterError::InvalidParameter {
            name: "data".into(),
            reason: "no features".into(),
        });
    }
    let ridge = ridge_for(x, opts.regularization);
    let mut z = initial_responsibilities(x, k, opts.init, rng)?;
    let mut reseeds = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut comps = fit_with_reseed(x, &mut z, k, opts.model, ridge, &mut reseeds, None)?;
    let mut loglik = e_step(x, &comps, &mut z);
    trace.push(objective(&loglik, &comps, ridge));
    while iterations < opts.max_iter {
        iterations += 1;
        comps = fit_with_reseed(x, &mut z, k, opts.model, ridge, &mut reseeds, Some(&loglik))?;
        loglik = e_step(x, &comps, &mut z);
        let value = objective(&loglik, &comps, ridge);
        let prev = *trace.last().expect("non-empty trace");
        trace.push(value);
        if value - prev < opts.tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
    }

    let labels = (0..n)
        .map(|i| {
            let row = &z[i * k..(i + 1) * k];
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(ClusterResult {
        partition: Partition::new(labels, k).expect("labels below k"),
        objective: *trace.last().expect("non-empty trace"),
        iterations_used: iterations,
        converged,
        trace,
        flagged: reseeds > 0,
    })
}

/// M-step; an empty component takes over the object the current model
/// explains worst, then the step is retried.
fn fit_with_reseed(
    x: &Matrix,
    z: &mut [f64],
    k: usize,
    model: CovarianceModel,
    ridge: f64,
    reseeds: &mut usize,
    loglik: Option<&[f64]>,
) -> Result<Vec<Component>, ClusterError> {
    loop {
        match m_step(x, z, k, model, ridge)? {
            Ok(comps) => return Ok(comps),
            Err(empty) => {
                *reseeds += 1;
                if *reseeds > MAX_RESEEDS {
                    return Err(ClusterError::DegenerateFit(format!(
                        "component {empty} collapsed after {MAX_RESEEDS} reseeds"
                    )));
                }
                let worst = match loglik {
                    Some(ll) => (0..ll.len())
                        .min_by(|&a, &b| ll[a].total_cmp(&ll[b]))
                        .expect("non-empty data"),
                    None => 0,
                };
                for c in 0..k {
                    z[worst * k + c] = if c == empty { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusterers::testdata::{blobs, random_matrix};
    use crate::metrics::adjusted_rand_partitions;
    use crate::seed::rng_from_seed;

    const MODELS: [CovarianceModel; 4] = [
        CovarianceModel::SphericalShared,
        CovarianceModel::SphericalVarying,
        CovarianceModel::DiagonalVarying,
        CovarianceModel::FullVarying,
    ];

    #[test]
    fn single_component_full_model_is_sample_moments() {
        let x = random_matrix(50, 3, 8);
        let opts = EmOptions {
            model: CovarianceModel::FullVarying,
            regularization: 0.0,
            ..EmOptions::default()
        };
        let xs = x.clone();
        let ridge = ridge_for(&xs, 0.0);
        let z = vec![1.0; 50];
        let comps = m_step(&x, &z, 1, opts.model, ridge).unwrap().unwrap();
        let mean: Vec<f64> = (0..3).map(|j| x.row_iter().map(|r| r[j]).sum::<f64>() / 50.0).collect();
        for j in 0..3 {
            assert!((comps[0].mean[j] - mean[j]).abs() < 1e-9);
        }
        let Cov::Full(l) = &comps[0].cov else { panic!() };
        let sigma = l.matmul(&l.transpose()).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                let s = x.row_iter().map(|r| (r[p] - mean[p]) * (r[q] - mean[q])).sum::<f64>() / 50.0;
                assert!((sigma[(p, q)] - s).abs() < 1e-9);
            }
        }
        let r = em_gmm(&x, 1, &opts, &mut rng_from_seed(1)).unwrap();
        assert!(r.converged);
        assert!(r.partition.assignments().iter().all(|&l| l == 0));
    }

    #[test]
    fn objective_is_monotone() {
        for seed in 0..50 {
            let x = random_matrix(40 + seed as usize, 3, 100 + seed);
            let model = MODELS[seed as usize % 4];
            let init = if seed % 2 == 0 { EmInit::RandomZ } else { EmInit::KMeansZ };
            let opts = EmOptions {
                model,
                init,
                ..EmOptions::default()
            };
            let r = em_gmm(&x, 3, &opts, &mut rng_from_seed(seed)).unwrap();
            assert!(!r.flagged);
            for w in r.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "seed {seed} {model:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn separated_blobs_recovered() {
        let (x, truth) = blobs(&[&[0.0, 0.0, 0.0], &[15.0, 15.0, 15.0]], 40, 1.0, 2);
        let truth = Partition::new(truth, 2).unwrap();
        for seed in 0..5 {
            let r = em_gmm(&x, 2, &EmOptions::default(), &mut rng_from_seed(seed)).unwrap();
            assert_eq!(adjusted_rand_partitions(&truth, &r.partition).unwrap(), 1.0);
        }
    }

    #[test]
    fn every_model_fits_blobs() {
        let (x, truth) = blobs(&[&[0.0, 0.0], &[10.0, 0.0], &[0.0, 10.0]], 30, 1.0, 3);
        let truth = Partition::new(truth, 3).unwrap();
        for model in MODELS {
            for seed in 0..3 {
                let opts = EmOptions {
                    model,
                    ..EmOptions::default()
                };
                let r = em_gmm(&x, 3, &opts, &mut rng_from_seed(seed)).unwrap();
                assert!(adjusted_rand_partitions(&truth, &r.partition).unwrap() > 0.95, "{model:?} seed {seed}");
            }
        }
    }

    #[test]
    fn collapsed_component_is_reseeded() {
        let x = random_matrix(20, 2, 5);
        let mut z = vec![0.0; 40];
        for i in 0..20 {
            z[i * 2] = 1.0;
        }
        let mut reseeds = 0;
        let ll: Vec<f64> = (0..20).map(|i| if i == 7 { -50.0 } else { -1.0 }).collect();
        let comps = fit_with_reseed(&x, &mut z, 2, CovarianceModel::SphericalVarying, 1e-6, &mut reseeds, Some(&ll))
            .unwrap();
        assert_eq!(reseeds, 1);
        assert_eq!(comps[1].mean, x.row(7).to_vec());
    }

    #[test]
    fn k_equals_n_keeps_every_component() {
        let x = random_matrix(6, 2, 3);
        let r = em_gmm(&x, 6, &EmOptions::default(), &mut rng_from_seed(0)).unwrap();
        assert_eq!(r.partition.len(), 6);
    }
}
