//! Evaluation regimes: default parameters, varying the expected cluster
//! count, one-parameter sweeps, and random multi-parameter sampling.
//!
//! Every run of a given dataset uses the same clusterer seed whatever the
//! configuration, so differences between configurations are not masked by
//! differences in random starts.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clusterers::{self, Algorithm, ClusterError, ClustererConfig, ParamDescriptor, ParamKind, ParamValue, Spacing};
use crate::datagen::Dataset;
use crate::metrics::{self, Index, Scores};
use crate::par;
use crate::seed::{derive_seed, hash_str, rng_from_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("the corpus is empty")]
    EmptyCorpus,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no bounds given for parameter `{0}`")]
    MissingBounds(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Parameter assignments; anything absent takes its default.
pub type Setting = BTreeMap<String, ParamValue>;

/// One clusterer invocation on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub num_classes: usize,
    pub num_features: usize,
    pub objects_per_class: usize,
    pub algorithm: Algorithm,
    pub k: usize,
    /// Position of the configuration in its sweep (grid value or draw).
    pub task: usize,
    pub config: String,
    pub scores: Scores,
    /// Set when the run failed; `scores` are then zero.
    pub error: Option<String>,
    /// A numerical safeguard fired inside the clusterer.
    pub flagged: bool,
    /// Not serialized, so persisted records stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// A configuration to run against every dataset of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub index: usize,
    pub algorithm: Algorithm,
    /// Expected cluster count; `None` uses each dataset's true class count.
    pub k: Option<usize>,
    pub setting: Setting,
}

/// Seed shared by every configuration evaluated on `dataset`.
pub fn run_seed(master_seed: u64, dataset: &Dataset) -> u64 {
    derive_seed(master_seed, &[hash_str(&dataset.id())])
}

fn run_one(task: &Task, ds: &Dataset, master_seed: u64) -> RunRecord {
    let spec = ds.spec();
    let k = task.k.unwrap_or(spec.num_classes);
    let config = ClustererConfig {
        algorithm: task.algorithm,
        k,
        assignments: task.setting.clone(),
    };
    let start = Instant::now();
    let outcome = clusterers::run(&config, ds, run_seed(master_seed, ds)).and_then(|r| {
        let scores = metrics::score(&ds.ground_truth(), &r.partition).map_err(|e| {
            ClusterError::InvalidParameter {
                name: "partition".into(),
                reason: e.to_string(),
            }
        })?;
        Ok((scores, r.flagged))
    });
    let wall_time_secs = start.elapsed().as_secs_f64();
    let (scores, flagged, error) = match outcome {
        Ok((s, f)) => (s, f, None),
        Err(e) => (Scores::ZERO, true, Some(e.to_string())),
    };
    RunRecord {
        dataset: ds.id(),
        num_classes: spec.num_classes,
        num_features: spec.num_features,
        objects_per_class: spec.objects_per_class,
        algorithm: task.algorithm,
        k,
        task: task.index,
        config: config.describe(),
        scores,
        error,
        flagged,
        wall_time_secs,
    }
}

/// Runs every task on every dataset, in parallel when enabled. Records come
/// back sorted by (dataset id, task index).
pub fn evaluate(tasks: &[Task], corpus: &[Dataset], master_seed: u64) -> Vec<RunRecord> {
    let pairs: Vec<(&Task, &Dataset)> = corpus
        .iter()
        .flat_map(|ds| tasks.iter().map(move |t| (t, ds)))
        .collect();
    let mut records = par::map(&pairs, |(t, ds)| run_one(t, ds, master_seed));
    records.sort_by(|a, b| a.dataset.cmp(&b.dataset).then(a.task.cmp(&b.task)));
    records
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Standard deviation with the `1/n` normalization.
pub fn population_sd(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

// ---------------------------------------------------------------------------
// default parameters

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedMeans {
    pub algorithm: Algorithm,
    pub index: Index,
    pub by_features: BTreeMap<usize, f64>,
    pub by_objects_per_class: BTreeMap<usize, f64>,
    pub overall: f64,
    /// Successful runs entering the means.
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultSummary {
    pub algorithms: Vec<Algorithm>,
    pub means: Vec<GroupedMeans>,
    /// `difference[i][j]`: mean over shared datasets of ARIᵢ − ARIⱼ.
    pub difference: Vec<Vec<f64>>,
    /// Mean ARI per algorithm, in `algorithms` order.
    pub mean_accuracy: Vec<f64>,
    pub failures: Vec<Failure>,
}

/// Every algorithm once per dataset with default parameters and `k = C`.
pub fn run_default(
    corpus: &[Dataset],
    algorithms: &[Algorithm],
    master_seed: u64,
) -> Result<(DefaultSummary, Vec<RunRecord>), SweepError> {
    let selections: Vec<(Algorithm, Setting)> = algorithms.iter().map(|&a| (a, Setting::new())).collect();
    run_selected(corpus, &selections, master_seed)
}

/// Like [`run_default`], with per-algorithm parameter overrides.
pub fn run_selected(
    corpus: &[Dataset],
    selections: &[(Algorithm, Setting)],
    master_seed: u64,
) -> Result<(DefaultSummary, Vec<RunRecord>), SweepError> {
    if corpus.is_empty() {
        return Err(SweepError::EmptyCorpus);
    }
    let tasks: Vec<Task> = selections
        .iter()
        .enumerate()
        .map(|(i, (algorithm, setting))| Task {
            index: i,
            algorithm: *algorithm,
            k: None,
            setting: setting.clone(),
        })
        .collect();
    let records = evaluate(&tasks, corpus, master_seed);
    let algorithms: Vec<Algorithm> = selections.iter().map(|s| s.0).collect();
    Ok((summarize_default(&records, &algorithms), records))
}

/// Grouped means, difference matrix and failures from default-run records.
/// Failed runs are excluded from every mean.
pub fn summarize_default(records: &[RunRecord], algorithms: &[Algorithm]) -> DefaultSummary {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed()).collect();
    let mut means = Vec::new();
    for &alg in algorithms {
        let runs: Vec<&RunRecord> = ok.iter().copied().filter(|r| r.algorithm == alg).collect();
        for index in Index::ALL {
            let group = |key: fn(&RunRecord) -> usize| {
                let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for r in &runs {
                    acc.entry(key(r)).or_default().push(r.scores.get(index));
                }
                acc.into_iter().map(|(k, v)| (k, mean(&v))).collect::<BTreeMap<_, _>>()
            };
            let all: Vec<f64> = runs.iter().map(|r| r.scores.get(index)).collect();
            means.push(GroupedMeans {
                algorithm: alg,
                index,
                by_features: group(|r| r.num_features),
                by_objects_per_class: group(|r| r.objects_per_class),
                overall: mean(&all),
                runs: runs.len(),
            });
        }
    }

    let ari: Vec<BTreeMap<&str, f64>> = algorithms
        .iter()
        .map(|&alg| {
            ok.iter()
                .filter(|r| r.algorithm == alg)
                .map(|r| (r.dataset.as_str(), r.scores.ari))
                .collect()
        })
        .collect();
    let m = algorithms.len();
    let mut difference = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let diffs: Vec<f64> = ari[i]
                .iter()
                .filter_map(|(ds, a)| ari[j].get(ds).map(|b| a - b))
                .collect();
            difference[i][j] = mean(&diffs);
        }
    }
    let mean_accuracy = ari
        .iter()
        .map(|m| mean(&m.values().copied().collect::<Vec<_>>()))
        .collect();
    let failures = records
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| Failure {
                dataset: r.dataset.clone(),
                algorithm: r.algorithm,
                error: e.clone(),
            })
        })
        .collect();
    DefaultSummary {
        algorithms: algorithms.to_vec(),
        means,
        difference,
        mean_accuracy,
        failures,
    }
}

// ---------------------------------------------------------------------------
// expected cluster count

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: usize,
    pub mean_ari: f64,
    pub mean_jaccard: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaryKCurve {
    pub algorithm: Algorithm,
    /// Distinct true class counts in the corpus, for marking the curve.
    pub true_classes: Vec<usize>,
    pub points: Vec<KPoint>,
    /// `(dataset, k)` pairs skipped because k exceeded the object count.
    pub skipped: Vec<(String, usize)>,
}

pub fn vary_k(
    corpus: &[Dataset],
    algorithm: Algorithm,
    setting: &Setting,
    k_values: &[usize],
    master_seed: u64,
) -> Result<(VaryKCurve, Vec<RunRecord>), SweepError> {
    if corpus.is_empty() {
        return Err(SweepError::EmptyCorpus);
    }
    if k_values.is_empty() {
        return Err(SweepError::InvalidGrid("no k values".into()));
    }
    let mut skipped = Vec::new();
    let mut pairs = Vec::new();
    for ds in corpus {
        for (i, &k) in k_values.iter().enumerate() {
            if k == 0 || k > ds.len() {
                skipped.push((ds.id(), k));
                continue;
            }
            pairs.push((
                Task {
                    index: i,
                    algorithm,
                    k: Some(k),
                    setting: setting.clone(),
                },
                ds,
            ));
        }
    }
    let mut records = par::map(&pairs, |(t, ds)| run_one(t, ds, master_seed));
    records.sort_by(|a, b| a.dataset.cmp(&b.dataset).then(a.task.cmp(&b.task)));

    let points = k_values
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.task == i).collect();
            let ari: Vec<f64> = runs.iter().map(|r| r.scores.ari).collect();
            let jac: Vec<f64> = runs.iter().map(|r| r.scores.jaccard).collect();
            KPoint {
                k,
                mean_ari: mean(&ari),
                mean_jaccard: mean(&jac),
                runs: runs.len(),
            }
        })
        .collect();
    let mut true_classes: Vec<usize> = corpus.iter().map(|d| d.spec().num_classes).collect();
    true_classes.sort_unstable();
    true_classes.dedup();
    Ok((
        VaryKCurve {
            algorithm,
            true_classes,
            points,
            skipped,
        },
        records,
    ))
}

// ---------------------------------------------------------------------------
// one-dimensional sweeps

/// Numeric values per scanned parameter, before the default is added.
pub const GRID_POINTS: usize = 10;

/// Corpus facts that bound data-dependent parameter ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridContext {
    pub max_k: usize,
    pub min_objects: usize,
}

impl GridContext {
    pub fn of(corpus: &[Dataset]) -> Self {
        Self {
            max_k: corpus.iter().map(|d| d.spec().num_classes).max().unwrap_or(1),
            min_objects: corpus.iter().map(Dataset::len).min().unwrap_or(1),
        }
    }
}

/// Range scanned for a numeric parameter. Declared ranges are used except
/// where they are open-ended or depend on the data.
pub fn scan_range(algorithm: Algorithm, desc: &ParamDescriptor, ctx: &GridContext) -> Option<(f64, f64, Spacing)> {
    match (&desc.kind, algorithm, desc.name.as_str()) {
        (ParamKind::IntegerRange { spacing, .. }, Algorithm::Clara, "sampsize") => {
            let lo = (ctx.max_k + 1) as f64;
            Some((lo, (ctx.min_objects as f64).max(lo), *spacing))
        }
        (ParamKind::RealRange { spacing, .. }, Algorithm::Spectral, "kernel_param") => Some((0.1, 30.0, *spacing)),
        (ParamKind::IntegerRange { min, max, spacing }, _, _) => Some((*min as f64, *max as f64, *spacing)),
        (ParamKind::RealRange { min, max, spacing }, _, _) => Some((*min, *max, *spacing)),
        (ParamKind::Categorical { .. }, _, _) => None,
    }
}

fn spaced(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            match spacing {
                Spacing::Linear => lo + t * (hi - lo),
                Spacing::Geometric => (lo.ln() + t * (hi.ln() - lo.ln())).exp(),
            }
        })
        .collect()
}

/// The default plus [`GRID_POINTS`] values across the scan range (all choices
/// for categoricals). Numeric values come first in ascending order; an
/// `automatic` default goes last.
pub fn default_grid(algorithm: Algorithm, desc: &ParamDescriptor, ctx: &GridContext) -> Vec<ParamValue> {
    if let ParamKind::Categorical { choices } = &desc.kind {
        return choices.iter().cloned().map(ParamValue::Choice).collect();
    }
    let (lo, hi, spacing) = scan_range(algorithm, desc, ctx).expect("numeric parameter");
    let mut values: Vec<ParamValue> = match desc.kind {
        ParamKind::IntegerRange { .. } => {
            let mut ints: Vec<i64> = spaced(lo, hi, GRID_POINTS, spacing)
                .into_iter()
                .map(|v| v.round() as i64)
                .collect();
            if let ParamValue::Int(d) = desc.default {
                ints.push(d);
            }
            ints.sort_unstable();
            ints.dedup();
            ints.into_iter().map(ParamValue::Int).collect()
        }
        _ => {
            let mut reals = spaced(lo, hi, GRID_POINTS, spacing);
            if let ParamValue::Real(d) = desc.default {
                reals.push(d);
            }
            reals.sort_by(f64::total_cmp);
            reals.dedup();
            reals.into_iter().map(ParamValue::Real).collect()
        }
    };
    if desc.default.is_auto() {
        values.push(desc.default.clone());
    }
    values
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimTrace {
    pub algorithm: Algorithm,
    pub parameter: String,
    pub values: Vec<ParamValue>,
    /// Γ(x): mean ARI over the corpus for each grid value.
    pub gamma: Vec<f64>,
    pub default_index: usize,
}

impl OneDimTrace {
    pub fn gamma_default(&self) -> f64 {
        self.gamma[self.default_index]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimSummary {
    pub algorithm: Algorithm,
    pub parameter: String,
    pub n_values: usize,
    /// ⟨S⟩: mean of Γ(x) − Γ_def over the grid.
    pub mean_gain: f64,
    /// ΔS, population form.
    pub sd_gain: f64,
    pub max_gain: f64,
    /// ⟨max Acc⟩: mean over datasets of the best ARI across the grid.
    pub mean_best: f64,
}

/// `(⟨S⟩, ΔS, max S)` for grid accuracies `gamma` against `gamma_def`.
pub fn sensitivity(gamma_def: f64, gamma: &[f64]) -> (f64, f64, f64) {
    let gains: Vec<f64> = gamma.iter().map(|g| g - gamma_def).collect();
    let max = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean(&gains), population_sd(&gains), if gains.is_empty() { 0.0 } else { max })
}

/// Mean over datasets of the best ARI any task reached on it.
fn mean_best(records: &[RunRecord]) -> f64 {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for r in records {
        let e = best.entry(&r.dataset).or_insert(f64::NEG_INFINITY);
        *e = e.max(r.scores.ari);
    }
    mean(&best.values().copied().collect::<Vec<_>>())
}

/// Mean ARI per task index, failures counted as zero.
fn gamma_by_task(records: &[RunRecord], n_tasks: usize) -> Vec<f64> {
    let mut sums = vec![Vec::new(); n_tasks];
    for r in records {
        sums[r.task].push(r.scores.ari);
    }
    sums.iter().map(|v| mean(v)).collect()
}

/// Sweeps one parameter with all others at their defaults. The default
/// value is added to `grid` when missing.
pub fn one_dim_sweep(
    corpus: &[Dataset],
    algorithm: Algorithm,
    parameter: &str,
    grid: &[ParamValue],
    master_seed: u64,
) -> Result<(OneDimTrace, OneDimSummary, Vec<RunRecord>), SweepError> {
    if corpus.is_empty() {
        return Err(SweepError::EmptyCorpus);
    }
    if grid.is_empty() {
        return Err(SweepError::InvalidGrid(format!("empty grid for `{parameter}`")));
    }
    let desc = algorithm.descriptor(parameter)?;
    let mut values = Vec::with_capacity(grid.len() + 1);
    for v in grid {
        let v = desc.validate(v)?;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    let default_index = match values.iter().position(|v| *v == desc.default) {
        Some(i) => i,
        None => {
            values.push(desc.default.clone());
            values.len() - 1
        }
    };
    let tasks: Vec<Task> = values
        .iter()
        .enumerate()
        .map(|(i, v)| Task {
            index: i,
            algorithm,
            k: None,
            setting: Setting::from([(parameter.to_string(), v.clone())]),
        })
        .collect();
    let records = evaluate(&tasks, corpus, master_seed);
    let gamma = gamma_by_task(&records, tasks.len());
    let trace = OneDimTrace {
        algorithm,
        parameter: parameter.to_string(),
        values,
        gamma,
        default_index,
    };
    let (mean_gain, sd_gain, max_gain) = sensitivity(trace.gamma_default(), &trace.gamma);
    let summary = OneDimSummary {
        algorithm,
        parameter: parameter.to_string(),
        n_values: trace.values.len(),
        mean_gain,
        sd_gain,
        max_gain,
        mean_best: mean_best(&records),
    };
    Ok((trace, summary, records))
}

// ---------------------------------------------------------------------------
// parameter bounds

/// Stop expanding once two consecutive steps change Γ by less than this.
pub const PLATEAU_DELTA: f64 = 0.005;
/// Stop before any value whose Γ is this far below Γ_def.
pub const DEGRADATION_DROP: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundRange {
    Integer { low: i64, high: i64 },
    Real { low: f64, high: f64 },
    Choices { choices: Vec<String> },
    /// Always this value.
    Fixed { value: ParamValue },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub name: String,
    pub range: BoundRange,
}

/// Walks outward from `reference` over `gamma` (ordered grid) and returns
/// the inclusive index range kept.
///
/// A step is refused when it lands more than [`DEGRADATION_DROP`] below
/// `gamma_def`. Expansion also stops at the end of the first two-step
/// plateau (changes below [`PLATEAU_DELTA`]) that follows a real change; a
/// trace flat from the reference runs to the grid end.
pub fn expand_bounds(gamma: &[f64], reference: usize, gamma_def: f64) -> (usize, usize) {
    let walk = |indices: &mut dyn Iterator<Item = usize>| -> usize {
        let mut last = reference;
        let mut prev = gamma[reference];
        let mut changed = false;
        let mut flat_steps = 0;
        for i in indices {
            if gamma[i] < gamma_def - DEGRADATION_DROP {
                break;
            }
            let step = (gamma[i] - prev).abs();
            prev = gamma[i];
            last = i;
            if step < PLATEAU_DELTA {
                flat_steps += 1;
                if changed && flat_steps >= 2 {
                    break;
                }
            } else {
                changed = true;
                flat_steps = 0;
            }
        }
        last
    };
    let low = walk(&mut (0..reference).rev());
    let high = walk(&mut (reference + 1..gamma.len()));
    (low, high)
}

/// Bounds for the random sweep from a one-dimensional trace. Categorical
/// parameters keep every choice; an `automatic` default is anchored at the
/// numeric value whose Γ is closest to Γ_def.
pub fn derive_bounds(desc: &ParamDescriptor, trace: &OneDimTrace) -> ParamBounds {
    let name = desc.name.clone();
    if let ParamKind::Categorical { choices } = &desc.kind {
        return ParamBounds {
            name,
            range: BoundRange::Choices {
                choices: choices.clone(),
            },
        };
    }
    let numeric: Vec<(f64, f64)> = trace
        .values
        .iter()
        .zip(&trace.gamma)
        .filter_map(|(v, &g)| v.as_f64().map(|x| (x, g)))
        .collect();
    if numeric.is_empty() {
        return ParamBounds {
            name,
            range: BoundRange::Fixed {
                value: desc.default.clone(),
            },
        };
    }
    let gamma_def = trace.gamma_default();
    let gamma: Vec<f64> = numeric.iter().map(|p| p.1).collect();
    let reference = match desc.default.as_f64() {
        Some(d) => numeric.iter().position(|p| p.0 == d).unwrap_or(0),
        None => {
            let mut best = 0;
            for (i, g) in gamma.iter().enumerate() {
                if (g - gamma_def).abs() < (gamma[best] - gamma_def).abs() {
                    best = i;
                }
            }
            best
        }
    };
    let (lo, hi) = expand_bounds(&gamma, reference, gamma_def);
    let (low, high) = (numeric[lo].0, numeric[hi].0);
    let range = if numeric.len() == 1 && !desc.default.is_auto() {
        BoundRange::Fixed {
            value: desc.default.clone(),
        }
    } else {
        match desc.kind {
            ParamKind::IntegerRange { .. } => BoundRange::Integer {
                low: low as i64,
                high: high as i64,
            },
            _ => BoundRange::Real { low, high },
        }
    };
    ParamBounds { name, range }
}

// ---------------------------------------------------------------------------
// random sweeps

pub const HISTOGRAM_WIDTH: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Exclusive lower edge.
    pub low: f64,
    /// Inclusive upper edge.
    pub high: f64,
    pub count: usize,
}

/// Bins of fixed width with an edge at the default's value, so every draw
/// strictly better than the default lands in a bin with `low ≥ default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    pub default_value: f64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Draws in bins entirely above the default.
    pub fn improving(&self) -> usize {
        self.bins
            .iter()
            .filter(|b| b.low >= self.default_value)
            .map(|b| b.count)
            .sum()
    }
}

pub fn histogram(values: &[f64], default_value: f64, width: f64) -> Histogram {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &v in values {
        // bin j covers (default + (j−1)·w, default + j·w]
        let j = ((v - default_value) / width).ceil() as i64;
        *counts.entry(j).or_default() += 1;
    }
    let bins = match (counts.keys().next(), counts.keys().last()) {
        (Some(&first), Some(&last)) => (first..=last)
            .map(|j| HistogramBin {
                low: default_value + (j - 1) as f64 * width,
                high: default_value + j as f64 * width,
                count: counts.get(&j).copied().unwrap_or(0),
            })
            .collect(),
        _ => Vec::new(),
    };
    Histogram {
        width,
        default_value,
        bins,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSweepSummary {
    pub algorithm: Algorithm,
    pub n_draws: usize,
    pub gamma_default: f64,
    /// Percentage of draws strictly better than the default.
    pub p_value: f64,
    /// ⟨R⟩, ΔR and max R over the improving draws only; zero when none improve.
    pub mean_improvement: f64,
    pub sd_improvement: f64,
    pub max_improvement: f64,
    /// ⟨max ARI⟩: mean over datasets of the best ARI over all draws and the default.
    pub mean_best: f64,
    /// Draws with at least one failed run (scored as ARI 0).
    pub failed_draws: usize,
    pub histogram: Histogram,
}

/// Summary statistics of draw accuracies `gamma` against `gamma_def`.
pub fn summarize_random(
    algorithm: Algorithm,
    gamma_def: f64,
    gamma: &[f64],
    mean_best: f64,
    failed_draws: usize,
) -> RandomSweepSummary {
    let improvements: Vec<f64> = gamma
        .iter()
        .filter(|&&g| g > gamma_def)
        .map(|g| g - gamma_def)
        .collect();
    let n = gamma.len();
    let p_value = if n == 0 {
        0.0
    } else {
        100.0 * improvements.len() as f64 / n as f64
    };
    RandomSweepSummary {
        algorithm,
        n_draws: n,
        gamma_default: gamma_def,
        p_value,
        mean_improvement: mean(&improvements),
        sd_improvement: population_sd(&improvements),
        max_improvement: improvements.iter().copied().fold(0.0, f64::max),
        mean_best,
        failed_draws,
        histogram: histogram(gamma, gamma_def, HISTOGRAM_WIDTH),
    }
}

/// One uniform draw inside `bounds`, in descriptor order.
pub fn draw_setting<R: Rng + ?Sized>(bounds: &[ParamBounds], rng: &mut R) -> Setting {
    bounds
        .iter()
        .map(|b| {
            let v = match &b.range {
                BoundRange::Integer { low, high } => ParamValue::Int(rng.random_range(*low..=*high)),
                BoundRange::Real { low, high } => {
                    if low == high {
                        ParamValue::Real(*low)
                    } else {
                        ParamValue::Real(rng.random_range(*low..=*high))
                    }
                }
                BoundRange::Choices { choices } => {
                    ParamValue::Choice(choices[rng.random_range(0..choices.len())].clone())
                }
                BoundRange::Fixed { value } => value.clone(),
            };
            (b.name.clone(), v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSweepOutput {
    pub summary: RandomSweepSummary,
    pub draws: Vec<Setting>,
    /// Γ per draw, in draw order.
    pub gamma: Vec<f64>,
    /// Default runs are task 0; draw `i` is task `i + 1`.
    pub records: Vec<RunRecord>,
}

/// Samples `n_draws` configurations uniformly inside `bounds` and scores each
/// by its mean ARI over the corpus. Failed runs score 0 and are counted.
pub fn random_sweep(
    corpus: &[Dataset],
    algorithm: Algorithm,
    bounds: &[ParamBounds],
    n_draws: usize,
    master_seed: u64,
) -> Result<RandomSweepOutput, SweepError> {
    if corpus.is_empty() {
        return Err(SweepError::EmptyCorpus);
    }
    let mut ordered = Vec::new();
    for desc in algorithm.descriptors() {
        let b = bounds
            .iter()
            .find(|b| b.name == desc.name)
            .ok_or_else(|| SweepError::MissingBounds(desc.name.clone()))?;
        ordered.push(b.clone());
    }
    let mut rng = rng_from_seed(derive_seed(master_seed, &[hash_str("random-sweep"), hash_str(algorithm.name())]));
    let draws: Vec<Setting> = (0..n_draws).map(|_| draw_setting(&ordered, &mut rng)).collect();

    let mut tasks = vec![Task {
        index: 0,
        algorithm,
        k: None,
        setting: Setting::new(),
    }];
    tasks.extend(draws.iter().enumerate().map(|(i, s)| Task {
        index: i + 1,
        algorithm,
        k: None,
        setting: s.clone(),
    }));
    for t in &tasks {
        ClustererConfig {
            algorithm,
            k: 1,
            assignments: t.setting.clone(),
        }
        .validate()?;
    }
    let records = evaluate(&tasks, corpus, master_seed);
    let all = gamma_by_task(&records, tasks.len());
    let gamma_def = all[0];
    let gamma = all[1..].to_vec();
    let mut failed = vec![false; tasks.len()];
    for r in &records {
        failed[r.task] |= r.failed();
    }
    let failed_draws = failed[1..].iter().filter(|&&f| f).count();
    let summary = summarize_random(algorithm, gamma_def, &gamma, mean_best(&records), failed_draws);
    Ok(RandomSweepOutput {
        summary,
        draws,
        gamma,
        records,
    })
}
