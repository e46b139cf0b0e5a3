//! Labeled synthetic datasets: one multivariate normal per class with its own
//! random covariance `R = G·Gᵀ`, scaled down by the separation divisor α and
//! translated by a per-class shift drawn uniformly from `[-1, 1]^F`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clusterers::{self, ClusterError, ClustererConfig};
use crate::linalg::{self, psd_tolerance, LinalgError, Matrix, SymmetricMatrix};
use crate::metrics::{self, Partition};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid class model: {0}")]
    InvalidModel(String),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("alpha tuning failed; best alpha {best_alpha} gave mean ARI {best_score}")]
    TuningFailed { best_alpha: f64, best_score: f64 },
    #[error("probe clusterer failed: {0}")]
    Probe(#[from] ClusterError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Symmetric positive semi-definite feature covariance of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(SymmetricMatrix);

impl CovarianceMatrix {
    /// Accepts `m` when its smallest eigenvalue is above `-1e-8 · max diagonal`.
    pub fn new(m: SymmetricMatrix) -> Result<Self, DatagenError> {
        if m.dim() == 0 {
            return Err(DatagenError::InvalidDimension("covariance of dimension 0".into()));
        }
        let lowest = min_eigenvalue(&m)?;
        let tol = psd_tolerance(&m);
        if lowest < -tol {
            return Err(DatagenError::InvalidModel(format!(
                "covariance has eigenvalue {lowest:e} below -{tol:e}"
            )));
        }
        Ok(Self(m))
    }

    /// `G·Gᵀ` for an explicit factor; PSD by construction.
    pub fn from_factor(g: &Matrix) -> Self {
        Self(g.gram())
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.0
    }
}

pub fn min_eigenvalue(m: &SymmetricMatrix) -> Result<f64, LinalgError> {
    Ok(linalg::eigh(m)?.values[0])
}

/// Moment controls for the random covariance factor.
///
/// Each feature `i` receives a target variance `vᵢ ~ N(moment_mean, moment_sd²)`
/// (floored at `0.1 · moment_mean`), and row `i` of the `F × m` factor `G` is
/// drawn i.i.d. `N(0, vᵢ/m)`. The diagonal of `R` then averages `vᵢ` while the
/// off-diagonal correlations are random with spread about `1/√m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceParams {
    pub moment_mean: f64,
    pub moment_sd: f64,
    /// Columns of `G`; `None` means `m = F`.
    pub factor_columns: Option<usize>,
}

impl Default for CovarianceParams {
    fn default() -> Self {
        Self {
            moment_mean: 1.0,
            moment_sd: 0.5,
            factor_columns: None,
        }
    }
}

pub fn generate_covariance<R: Rng + ?Sized>(
    num_features: usize,
    params: &CovarianceParams,
    rng: &mut R,
) -> Result<CovarianceMatrix, DatagenError> {
    if num_features == 0 {
        return Err(DatagenError::InvalidDimension("F must be at least 1".into()));
    }
    if !(params.moment_mean > 0.0) || !(params.moment_sd >= 0.0) {
        return Err(DatagenError::InvalidDimension(format!(
            "moments must satisfy mean > 0 and sd >= 0, got ({}, {})",
            params.moment_mean, params.moment_sd
        )));
    }
    let m = params.factor_columns.unwrap_or(num_features).max(1);
    let floor = 0.1 * params.moment_mean;
    let variance_law = Normal::new(params.moment_mean, params.moment_sd)
        .map_err(|e| DatagenError::InvalidDimension(e.to_string()))?;
    let mut g = Matrix::zeros(num_features, m);
    for i in 0..num_features {
        let target = variance_law.sample(rng).max(floor);
        let scale = (target / m as f64).sqrt();
        for v in g.row_mut(i) {
            let z: f64 = StandardNormal.sample(rng);
            *v = scale * z;
        }
    }
    Ok(CovarianceMatrix::from_factor(&g))
}

/// One class: covariance, translation and separation divisor.
#[derive(Debug, Clone)]
pub struct ClassModel {
    covariance: CovarianceMatrix,
    shift: Vec<f64>,
    alpha: f64,
}

impl ClassModel {
    pub fn new(
        covariance: CovarianceMatrix,
        shift: Vec<f64>,
        alpha: f64,
    ) -> Result<Self, DatagenError> {
        if shift.len() != covariance.dim() {
            return Err(DatagenError::InvalidModel(format!(
                "shift has {} coordinates for a {}-feature covariance",
                shift.len(),
                covariance.dim()
            )));
        }
        if let Some(bad) = shift.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(DatagenError::InvalidModel(format!(
                "shift coordinate {bad} outside [-1, 1]"
            )));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(DatagenError::InvalidModel(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            covariance,
            shift,
            alpha,
        })
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.covariance
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `n` draws from `N(0, R)`, each divided by α and translated by the shift.
pub fn generate_class<R: Rng + ?Sized>(
    model: &ClassModel,
    n: usize,
    rng: &mut R,
) -> Result<Matrix, DatagenError> {
    if n == 0 {
        return Err(DatagenError::InvalidSpec("class size must be at least 1".into()));
    }
    let factor = linalg::psd_sqrt(model.covariance.matrix()).map_err(|e| match e {
        LinalgError::NotPsd { .. } => DatagenError::InvalidModel(e.to_string()),
        other => DatagenError::Linalg(other),
    })?;
    let f = model.covariance.dim();
    let mut out = Matrix::zeros(n, f);
    let mut z = vec![0.0; f];
    for r in 0..n {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let row = out.row_mut(r);
        for (j, x) in row.iter_mut().enumerate() {
            // factor is symmetric, so column j equals row j
            let draw = linalg::dot(factor.row(j), &z);
            *x = draw / model.alpha + model.shift[j];
        }
    }
    Ok(out)
}

/// Class translation: each coordinate uniform on `[-1, 1]`.
pub fn sample_shift<R: Rng + ?Sized>(num_features: usize, rng: &mut R) -> Vec<f64> {
    (0..num_features).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub num_classes: usize,
    pub num_features: usize,
    pub objects_per_class: usize,
    pub alpha: f64,
    pub seed: u64,
    pub realization_index: usize,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.num_classes == 0 || self.num_features == 0 || self.objects_per_class == 0 {
            return Err(DatagenError::InvalidSpec(format!(
                "C, F and Ne must be at least 1 (got C={}, F={}, Ne={})",
                self.num_classes, self.num_features, self.objects_per_class
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(DatagenError::InvalidSpec(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn num_objects(&self) -> usize {
        self.num_classes * self.objects_per_class
    }

    /// Family name shared by all realizations, e.g. `DB10C2F`.
    pub fn corpus_name(&self) -> String {
        format!("DB{}C{}F", self.num_classes, self.num_features)
    }

    /// Unique within a corpus, e.g. `DB10C2F-Ne50-r03`.
    pub fn dataset_id(&self) -> String {
        format!(
            "{}-Ne{}-r{:02}",
            self.corpus_name(),
            self.objects_per_class,
            self.realization_index
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    spec: DatasetSpec,
}

impl Dataset {
    /// Checks shape, label range and the equal-class-size invariant.
    pub fn new(features: Matrix, labels: Vec<usize>, spec: DatasetSpec) -> Result<Self, DatagenError> {
        spec.validate()?;
        let n = spec.num_objects();
        if features.rows() != n || labels.len() != n {
            return Err(DatagenError::InvalidSpec(format!(
                "expected {n} rows, got {} feature rows and {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() != spec.num_features {
            return Err(DatagenError::InvalidSpec(format!(
                "expected {} features, got {}",
                spec.num_features,
                features.cols()
            )));
        }
        let mut counts = vec![0usize; spec.num_classes];
        for &l in &labels {
            if l >= spec.num_classes {
                return Err(DatagenError::InvalidSpec(format!(
                    "label {l} outside [0, {})",
                    spec.num_classes
                )));
            }
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&c| c != spec.objects_per_class) {
            return Err(DatagenError::InvalidSpec(format!(
                "class {c} has {} objects, expected {}",
                counts[c], spec.objects_per_class
            )));
        }
        Ok(Self {
            features,
            labels,
            spec,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn ground_truth(&self) -> Partition {
        Partition::new(self.labels.clone(), self.spec.num_classes)
            .expect("labels validated on construction")
    }

    pub fn id(&self) -> String {
        self.spec.dataset_id()
    }
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, DatagenError> {
    generate_dataset_with(spec, &CovarianceParams::default())
}

pub fn generate_dataset_with(
    spec: &DatasetSpec,
    params: &CovarianceParams,
) -> Result<Dataset, DatagenError> {
    spec.validate()?;
    let f = spec.num_features;
    let ne = spec.objects_per_class;
    let mut features = Matrix::zeros(spec.num_objects(), f);
    let mut labels = Vec::with_capacity(spec.num_objects());
    for class in 0..spec.num_classes {
        let mut rng = rng_from_seed(derive_seed(
            spec.seed,
            &[spec.realization_index as u64, class as u64],
        ));
        let covariance = generate_covariance(f, params, &mut rng)?;
        let shift = sample_shift(f, &mut rng);
        let model = ClassModel::new(covariance, shift, spec.alpha)?;
        let block = generate_class(&model, ne, &mut rng)?;
        for r in 0..ne {
            features.row_mut(class * ne + r).copy_from_slice(block.row(r));
        }
        labels.extend(std::iter::repeat_n(class, ne));
    }
    Dataset::new(features, labels, *spec)
}

/// One cell of a corpus grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub num_classes: usize,
    pub num_features: usize,
    pub objects_per_class: usize,
    pub alpha: f64,
}

impl GridCell {
    pub fn spec(&self, base_seed: u64, realization: usize) -> DatasetSpec {
        DatasetSpec {
            num_classes: self.num_classes,
            num_features: self.num_features,
            objects_per_class: self.objects_per_class,
            alpha: self.alpha,
            seed: dataset_seed(
                base_seed,
                self.num_classes,
                self.num_features,
                self.objects_per_class,
                realization,
            ),
            realization_index: realization,
        }
    }
}

/// Child seed of one dataset; independent of α and of generation order.
pub fn dataset_seed(base_seed: u64, c: usize, f: usize, ne: usize, realization: usize) -> u64 {
    derive_seed(base_seed, &[c as u64, f as u64, ne as u64, realization as u64])
}

/// Values of C, F and Nₑ used for the full 270-dataset corpus.
pub const PAPER_CLASSES: [usize; 3] = [2, 10, 50];
pub const PAPER_FEATURES: [usize; 3] = [2, 10, 50];
pub const PAPER_OBJECTS_PER_CLASS: [usize; 3] = [5, 50, 100];
pub const PAPER_REALIZATIONS: usize = 10;

/// Cartesian product of the given axes, all with the same α.
pub fn grid(classes: &[usize], features: &[usize], per_class: &[usize], alpha: f64) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &c in classes {
        for &f in features {
            for &ne in per_class {
                cells.push(GridCell {
                    num_classes: c,
                    num_features: f,
                    objects_per_class: ne,
                    alpha,
                });
            }
        }
    }
    cells
}

pub fn corpus_specs(grid: &[GridCell], realizations: usize, base_seed: u64) -> Vec<DatasetSpec> {
    grid.iter()
        .flat_map(|cell| (0..realizations).map(move |r| cell.spec(base_seed, r)))
        .collect()
}

/// Generates every `(cell, realization)` pair in grid order.
pub fn generate_corpus(
    grid: &[GridCell],
    realizations: usize,
    base_seed: u64,
) -> Result<Vec<Dataset>, DatagenError> {
    if realizations == 0 && !grid.is_empty() {
        return Err(DatagenError::InvalidSpec("realizations must be at least 1".into()));
    }
    let specs = corpus_specs(grid, realizations, base_seed);
    crate::par::map(&specs, generate_dataset).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// Open interval of acceptable mean ARI.
    pub band: (f64, f64),
    /// ARI aimed at by the bisection; `None` means the band midpoint.
    pub target: Option<f64>,
    /// Stop once the pilot ARI is this close to the target.
    pub target_tolerance: f64,
    pub pilot_realizations: usize,
    pub initial_alpha: f64,
    pub max_iter: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            band: (0.05, 0.95),
            target: None,
            target_tolerance: 0.1,
            pilot_realizations: 3,
            initial_alpha: 1.0,
            max_iter: 30,
        }
    }
}

/// Picks α for a `(C, F, Nₑ)` cell so the probe clusterer's mean ARI lands
/// inside `options.band`.
///
/// Bisection runs on `log α`; pilot datasets share their seeds across α
/// values, so the pilot score is a deterministic function of α.
pub fn tune_alpha(
    cell: &GridCell,
    base_seed: u64,
    probe: &ClustererConfig,
    options: &TuneOptions,
) -> Result<f64, DatagenError> {
    let (low, high) = options.band;
    if !(low < high) || !(options.initial_alpha > 0.0) {
        return Err(DatagenError::InvalidSpec(format!(
            "bad tuning band ({low}, {high}) or initial alpha {}",
            options.initial_alpha
        )));
    }
    if low <= 0.0 && high >= 1.0 {
        return Ok(options.initial_alpha);
    }
    let target = options.target.unwrap_or(0.5 * (low + high));
    let pilots = options.pilot_realizations.max(1);
    let in_band = |s: f64| s > low && s < high;
    let done = |s: f64| in_band(s) && (s - target).abs() <= options.target_tolerance;

    let score = |alpha: f64| -> Result<f64, DatagenError> {
        let mut cell = *cell;
        cell.alpha = alpha;
        let mut total = 0.0;
        for r in 0..pilots {
            let ds = generate_dataset(&cell.spec(base_seed, r))?;
            let result = clusterers::run(probe, &ds, derive_seed(ds.spec().seed, &[0x7u64]))?;
            total += metrics::adjusted_rand_partitions(&ds.ground_truth(), &result.partition)
                .expect("N >= 2 for pilot datasets");
        }
        Ok(total / pilots as f64)
    };

    let mut best = (options.initial_alpha, f64::NAN);
    let consider = |alpha: f64, s: f64, best: &mut (f64, f64)| {
        if best.1.is_nan() || (s - target).abs() < (best.1 - target).abs() {
            *best = (alpha, s);
        }
    };

    let mut evals = 0;
    let mut alpha = options.initial_alpha;
    let mut s = score(alpha)?;
    evals += 1;
    consider(alpha, s, &mut best);
    if done(s) {
        return Ok(alpha);
    }

    // bracket the target: larger alpha means tighter classes and higher ARI
    let (mut lo, mut hi) = (alpha, alpha);
    if s < target {
        while s < target && evals < options.max_iter {
            lo = alpha;
            alpha *= 2.0;
            s = score(alpha)?;
            evals += 1;
            consider(alpha, s, &mut best);
            if done(s) {
                return Ok(alpha);
            }
        }
        hi = alpha;
    } else {
        while s >= target && evals < options.max_iter {
            hi = alpha;
            alpha *= 0.5;
            s = score(alpha)?;
            evals += 1;
            consider(alpha, s, &mut best);
            if done(s) {
                return Ok(alpha);
            }
        }
        lo = alpha;
    }

    while evals < options.max_iter {
        let mid = (lo * hi).sqrt();
        s = score(mid)?;
        evals += 1;
        consider(mid, s, &mut best);
        if done(s) {
            return Ok(mid);
        }
        if s < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    if in_band(best.1) {
        Ok(best.0)
    } else {
        Err(DatagenError::TuningFailed {
            best_alpha: best.0,
            best_score: best.1,
        })
    }
}
