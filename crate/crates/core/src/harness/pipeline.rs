//! The experiment stages behind each CLI subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clusterers::{Algorithm, ClustererConfig};
use crate::datagen::{self, Dataset, DatagenError, GridCell, TuneOptions};
use crate::metrics::Index;
use crate::par;
use crate::stats::{self, KruskalResult};
use crate::sweep::{
    self, derive_bounds, DefaultSummary, GridContext, OneDimSummary, OneDimTrace, ParamBounds,
    RandomSweepSummary, RunRecord, Setting, VaryKCurve,
};

use super::config::{RunConfig, Subset};
use super::dataset_io::{file_name, format_dataset, load_corpus};
use super::output::{fmt_f, read_jsonl, Header, Stage};
use super::HarnessError;

/// Files written by a stage plus anything worth telling the user.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub notes: Vec<String>,
}

pub const RUN_DIR: &str = "run";
pub const VARY_K_DIR: &str = "vary_k";
pub const SWEEP1D_DIR: &str = "sweep1d";
pub const SWEEPND_DIR: &str = "sweepnd";
pub const REPORT_DIR: &str = "report";

fn stage(cfg: &RunConfig, dir: PathBuf, name: &str, force: bool) -> Result<Stage, HarnessError> {
    Stage::open(dir, name, cfg.seed, &cfg.hash(), force)
}

fn load(cfg: &RunConfig, subset: &Subset) -> Result<Vec<Dataset>, HarnessError> {
    let dir = cfg.corpus_dir();
    let corpus = subset.apply(load_corpus(&dir)?);
    if corpus.is_empty() {
        return Err(HarnessError::EmptyCorpus(dir));
    }
    Ok(corpus)
}

fn timings(stage: &mut Stage, records: &[RunRecord]) -> Result<(), HarnessError> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.algorithm.to_string(),
                r.task.to_string(),
                format!("{:.6}", r.wall_time_secs),
            ]
        })
        .collect();
    stage.table("timings.tsv", &[], &["dataset", "algorithm", "task", "seconds"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dataset: String,
    pub cell: GridCell,
    pub seed: u64,
    pub realization: usize,
    /// False when automatic tuning could not reach the target band.
    pub tuned: bool,
}

/// Chooses α per cell (tuning when asked) and writes every dataset file.
pub fn generate(cfg: &RunConfig, force: bool) -> Result<Outcome, HarnessError> {
    let mut stage = stage(cfg, cfg.corpus_dir(), "corpus", force)?;
    let base = cfg.corpus_seed();
    let cells = cfg.cells();
    let mut notes = Vec::new();
    let tuned: Vec<(GridCell, bool)> = if cfg.corpus.alpha.is_auto() {
        let results = par::map(&cells, |cell| {
            let probe = ClustererConfig::defaults(Algorithm::KMeans, cell.num_classes);
            match datagen::tune_alpha(cell, base, &probe, &TuneOptions::default()) {
                Ok(alpha) => Ok((GridCell { alpha, ..*cell }, true)),
                Err(DatagenError::TuningFailed { best_alpha, .. }) => Ok((
                    GridCell {
                        alpha: best_alpha,
                        ..*cell
                    },
                    false,
                )),
                Err(e) => Err(e),
            }
        });
        results.into_iter().collect::<Result<_, _>>()?
    } else {
        cells.into_iter().map(|c| (c, true)).collect()
    };
    for (cell, ok) in &tuned {
        if !ok {
            notes.push(format!(
                "alpha tuning missed the target band for C={} F={} Ne={}; using alpha={}",
                cell.num_classes, cell.num_features, cell.objects_per_class, cell.alpha
            ));
        }
    }

    let specs: Vec<(datagen::DatasetSpec, bool, GridCell)> = tuned
        .iter()
        .flat_map(|(cell, ok)| (0..cfg.corpus.realizations).map(move |r| (cell.spec(base, r), *ok, *cell)))
        .collect();
    let datasets = par::map(&specs, |(spec, _, _)| datagen::generate_dataset(spec));
    let mut manifest = Vec::with_capacity(specs.len());
    for ((spec, ok, cell), ds) in specs.iter().zip(datasets) {
        let ds = ds?;
        stage.raw(&file_name(&ds), &format_dataset(&ds))?;
        manifest.push(vec![
            ds.id(),
            cell.num_classes.to_string(),
            cell.num_features.to_string(),
            cell.objects_per_class.to_string(),
            format!("{:?}", spec.alpha),
            spec.seed.to_string(),
            spec.realization_index.to_string(),
            ok.to_string(),
        ]);
    }
    stage.table(
        "manifest.tsv",
        &[],
        &["dataset", "C", "F", "Ne", "alpha", "seed", "realization", "tuned"],
        &manifest,
    )?;
    Ok(Outcome {
        written: stage.into_written(),
        notes,
    })
}

/// Default-parameter evaluation of every selected algorithm.
pub fn run_defaults(cfg: &RunConfig, force: bool) -> Result<Outcome, HarnessError> {
    let corpus = load(cfg, &Subset::default())?;
    let mut stage = stage(cfg, cfg.out.join(RUN_DIR), RUN_DIR, force)?;
    let (summary, records) = sweep::run_selected(&corpus, &cfg.selections(), cfg.seed)?;
    write_default(&mut stage, &summary, &records)?;
    let notes = summary
        .failures
        .iter()
        .map(|f| format!("{} failed on {}: {}", f.algorithm, f.dataset, f.error))
        .collect();
    Ok(Outcome {
        written: stage.into_written(),
        notes,
    })
}

fn write_default(stage: &mut Stage, summary: &DefaultSummary, records: &[RunRecord]) -> Result<(), HarnessError> {
    stage.jsonl("records.jsonl", records)?;
    stage.jsonl("summary.jsonl", std::slice::from_ref(summary))?;

    let names: Vec<&str> = summary.algorithms.iter().map(|a| a.name()).collect();
    let mut columns = vec!["algorithm"];
    columns.extend(&names);
    columns.push("macc");
    let rows: Vec<Vec<String>> = summary
        .algorithms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut row = vec![a.to_string()];
            row.extend(summary.difference[i].iter().map(|&d| fmt_f(d)));
            row.push(fmt_f(summary.mean_accuracy[i]));
            row
        })
        .collect();
    stage.table("differences.tsv", &[("entry", "mean ARI(row) - ARI(column)".into())], &columns, &rows)?;

    let mut by_f = Vec::new();
    let mut by_ne = Vec::new();
    for m in &summary.means {
        for (f, v) in &m.by_features {
            by_f.push(vec![m.algorithm.to_string(), m.index.name().into(), f.to_string(), fmt_f(*v)]);
        }
        for (ne, v) in &m.by_objects_per_class {
            by_ne.push(vec![m.algorithm.to_string(), m.index.name().into(), ne.to_string(), fmt_f(*v)]);
        }
    }
    stage.table("by_features.tsv", &[], &["algorithm", "index", "F", "mean"], &by_f)?;
    stage.table("by_objects_per_class.tsv", &[], &["algorithm", "index", "Ne", "mean"], &by_ne)?;
    let failures: Vec<Vec<String>> = summary
        .failures
        .iter()
        .map(|f| vec![f.dataset.clone(), f.algorithm.to_string(), f.error.clone()])
        .collect();
    stage.table("failures.tsv", &[], &["dataset", "algorithm", "error"], &failures)?;
    timings(stage, records)
}

/// Accuracy as a function of the requested cluster count.
pub fn run_vary_k(cfg: &RunConfig, force: bool) -> Result<Outcome, HarnessError> {
    let corpus = load(cfg, &cfg.vary_k.subset)?;
    let mut stage = stage(cfg, cfg.out.join(VARY_K_DIR), VARY_K_DIR, force)?;
    let mut curves: Vec<VaryKCurve> = Vec::new();
    let mut records = Vec::new();
    for (alg, setting) in cfg.selections() {
        let (curve, recs) = sweep::vary_k(&corpus, alg, &setting, &cfg.vary_k.k, cfg.seed)?;
        curves.push(curve);
        records.extend(recs);
    }
    stage.jsonl("records.jsonl", &records)?;
    stage.jsonl("summary.jsonl", &curves)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for c in &curves {
        for p in &c.points {
            rows.push(vec![
                c.algorithm.to_string(),
                p.k.to_string(),
                fmt_f(p.mean_ari),
                fmt_f(p.mean_jaccard),
                p.runs.to_string(),
                c.true_classes.contains(&p.k).to_string(),
            ]);
        }
        for (ds, k) in &c.skipped {
            skipped.push(vec![c.algorithm.to_string(), ds.clone(), k.to_string()]);
        }
    }
    stage.table(
        "curves.tsv",
        &[],
        &["algorithm", "k", "mean_ari", "mean_jaccard", "runs", "true_c"],
        &rows,
    )?;
    stage.table("skipped.tsv", &[], &["algorithm", "dataset", "k"], &skipped)?;
    timings(&mut stage, &records)?;
    let notes = if skipped.is_empty() {
        Vec::new()
    } else {
        vec![format!("{} (dataset, k) pairs skipped because k exceeded N", skipped.len())]
    };
    Ok(Outcome {
        written: stage.into_written(),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmBounds {
    pub algorithm: Algorithm,
    pub bounds: Vec<ParamBounds>,
}

/// Everything one-dimensional sweeps produce for the selected algorithms.
#[derive(Debug, Clone, Default)]
pub struct OneDimResults {
    pub traces: Vec<OneDimTrace>,
    pub summaries: Vec<OneDimSummary>,
    pub bounds: Vec<AlgorithmBounds>,
    pub records: Vec<RunRecord>,
}

/// Sweeps each declared parameter of each algorithm over its grid and
/// derives bounds for the random sweep.
pub fn one_dim_all(cfg: &RunConfig, corpus: &[Dataset]) -> Result<OneDimResults, HarnessError> {
    let ctx = GridContext::of(corpus);
    let mut out = OneDimResults::default();
    for sel in &cfg.algorithms {
        let alg = sel.name;
        let mut bounds = Vec::new();
        for desc in alg.descriptors() {
            let key = format!("{}.{}", alg, desc.name);
            let grid = match cfg.sweep1d.grids.get(&key) {
                Some(g) => g.clone(),
                None => sweep::default_grid(alg, &desc, &ctx),
            };
            let (trace, summary, records) = sweep::one_dim_sweep(corpus, alg, &desc.name, &grid, cfg.seed)?;
            bounds.push(derive_bounds(&desc, &trace));
            out.traces.push(trace);
            out.summaries.push(summary);
            out.records.extend(records);
        }
        out.bounds.push(AlgorithmBounds { algorithm: alg, bounds });
    }
    Ok(out)
}

pub fn run_sweep1d(cfg: &RunConfig, force: bool) -> Result<Outcome, HarnessError> {
    let corpus = load(cfg, &cfg.sweep1d.subset)?;
    let mut stage = stage(cfg, cfg.out.join(SWEEP1D_DIR), SWEEP1D_DIR, force)?;
    let res = one_dim_all(cfg, &corpus)?;
    stage.jsonl("records.jsonl", &res.records)?;
    stage.jsonl("summary.jsonl", &res.summaries)?;
    stage.jsonl("traces.jsonl", &res.traces)?;
    stage.jsonl("bounds.jsonl", &res.bounds)?;
    let sens: Vec<Vec<String>> = res
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.algorithm.to_string(),
                s.parameter.clone(),
                s.n_values.to_string(),
                fmt_f(s.mean_gain),
                fmt_f(s.sd_gain),
                fmt_f(s.max_gain),
                fmt_f(s.mean_best),
            ]
        })
        .collect();
    stage.table(
        "sensitivity.tsv",
        &[],
        &["algorithm", "parameter", "n_values", "mean_gain", "sd_gain", "max_gain", "mean_best"],
        &sens,
    )?;
    let mut rows = Vec::new();
    for t in &res.traces {
        for (i, (v, g)) in t.values.iter().zip(&t.gamma).enumerate() {
            rows.push(vec![
                t.algorithm.to_string(),
                t.parameter.clone(),
                v.to_string(),
                fmt_f(*g),
                (i == t.default_index).to_string(),
            ]);
        }
    }
    stage.table("traces.tsv", &[], &["algorithm", "parameter", "value", "mean_ari", "default"], &rows)?;
    timings(&mut stage, &res.records)?;
    let notes = if cfg.algorithms.iter().any(|s| !s.params.is_empty()) {
        vec!["parameter overrides are ignored by sweeps, which vary around declared defaults".into()]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        written: stage.into_written(),
        notes,
    })
}

/// Bounds persisted by a one-dimensional sweep of the same configuration.
fn stored_bounds(cfg: &RunConfig) -> Option<Vec<AlgorithmBounds>> {
    let path = cfg.out.join(SWEEP1D_DIR).join("bounds.jsonl");
    let (header, bounds): (Header, Vec<AlgorithmBounds>) = read_jsonl(&path).ok()?;
    (header.config_hash == cfg.hash() && header.seed == cfg.seed).then_some(bounds)
}

pub fn run_sweepnd(cfg: &RunConfig, force: bool) -> Result<Outcome, HarnessError> {
    let corpus = load(cfg, &cfg.sweepnd.subset)?;
    let mut stage = stage(cfg, cfg.out.join(SWEEPND_DIR), SWEEPND_DIR, force)?;
    let mut notes = Vec::new();
    let all_bounds = match stored_bounds(cfg) {
        Some(b) => b,
        None => {
            notes.push("no matching one-dimensional sweep on disk; deriving bounds now".into());
            one_dim_all(cfg, &load(cfg, &cfg.sweep1d.subset)?)?.bounds
        }
    };
    let mut summaries: Vec<RandomSweepSummary> = Vec::new();
    let mut records = Vec::new();
    let mut draws = Vec::new();
    for sel in &cfg.algorithms {
        let bounds = all_bounds
            .iter()
            .find(|b| b.algorithm == sel.name)
            .map(|b| b.bounds.clone())
            .unwrap_or_default();
        let out = sweep::random_sweep(&corpus, sel.name, &bounds, cfg.sweepnd.draws, cfg.seed)?;
        for (i, (setting, gamma)) in out.draws.iter().zip(&out.gamma).enumerate() {
            draws.push(Draw {
                algorithm: sel.name,
                draw: i,
                mean_ari: *gamma,
                setting: setting.clone(),
            });
        }
        let h = &out.summary.histogram;
        let rows: Vec<Vec<String>> = h
            .bins
            .iter()
            .map(|b| {
                vec![
                    fmt_f(b.low),
                    fmt_f(b.high),
                    b.count.to_string(),
                    (b.low >= h.default_value).to_string(),
                ]
            })
            .collect();
        stage.table(
            &format!("histogram_{}.tsv", sel.name),
            &[
                ("default_ari", format!("{:?}", h.default_value)),
                ("width", format!("{}", h.width)),
                ("draws", out.summary.n_draws.to_string()),
            ],
            &["low_exclusive", "high_inclusive", "count", "improving"],
            &rows,
        )?;
        if out.summary.failed_draws > 0 {
            notes.push(format!(
                "{}: {} draws had failing runs (scored 0)",
                sel.name, out.summary.failed_draws
            ));
        }
        summaries.push(out.summary);
        records.extend(out.records);
    }
    stage.jsonl("records.jsonl", &records)?;
    stage.jsonl("summary.jsonl", &summaries)?;
    stage.jsonl("draws.jsonl", &draws)?;
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.algorithm.to_string(),
                s.n_draws.to_string(),
                fmt_f(s.gamma_default),
                format!("{:.1}", s.p_value),
                fmt_f(s.mean_improvement),
                fmt_f(s.sd_improvement),
                fmt_f(s.max_improvement),
                fmt_f(s.mean_best),
                s.failed_draws.to_string(),
            ]
        })
        .collect();
    stage.table(
        "random.tsv",
        &[],
        &[
            "algorithm",
            "draws",
            "default_ari",
            "p_value",
            "mean_improvement",
            "sd_improvement",
            "max_improvement",
            "mean_best",
            "failed_draws",
        ],
        &rows,
    )?;
    timings(&mut stage, &records)?;
    Ok(Outcome {
        written: stage.into_written(),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub algorithm: Algorithm,
    pub draw: usize,
    pub mean_ari: f64,
    pub setting: Setting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KruskalRow {
    pub num_features: usize,
    pub algorithms: Vec<Algorithm>,
    pub group_sizes: Vec<usize>,
    pub result: Option<KruskalResult>,
    pub note: Option<String>,
}

/// Kruskal–Wallis across algorithms of per-dataset ARI, one test per
/// feature count. Failed runs are left out.
pub fn kruskal_by_features(records: &[RunRecord]) -> Vec<KruskalRow> {
    let mut groups: BTreeMap<usize, BTreeMap<Algorithm, Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.failed()) {
        groups
            .entry(r.num_features)
            .or_default()
            .entry(r.algorithm)
            .or_default()
            .push(r.scores.get(Index::Ari));
    }
    groups
        .into_iter()
        .map(|(f, by_alg)| {
            let algorithms: Vec<Algorithm> = by_alg.keys().copied().collect();
            let values: Vec<Vec<f64>> = by_alg.into_values().collect();
            let group_sizes = values.iter().map(Vec::len).collect();
            let (result, note) = match stats::kruskal_wallis(&values) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            KruskalRow {
                num_features: f,
                algorithms,
                group_sizes,
                result,
                note,
            }
        })
        .collect()
}

/// Merges stage summaries into one stream and runs the rank tests on the
/// default-parameter records.
pub fn report(cfg: &RunConfig, force: bool) -> Result<Outcome, HarnessError> {
    let run_records = cfg.out.join(RUN_DIR).join("records.jsonl");
    if !run_records.exists() {
        return Err(HarnessError::MissingStage {
            stage: RUN_DIR.into(),
            path: run_records,
        });
    }
    let mut stage = stage(cfg, cfg.out.join(REPORT_DIR), REPORT_DIR, force)?;
    let mut notes = Vec::new();
    let hash = cfg.hash();

    let (header, records): (Header, Vec<RunRecord>) = read_jsonl(&run_records)?;
    check_header(&header, cfg, &hash, &run_records, &mut notes);
    let tests = kruskal_by_features(&records);
    stage.jsonl("kruskal.jsonl", &tests)?;
    let rows: Vec<Vec<String>> = tests
        .iter()
        .map(|t| {
            let (h, df, p) = match &t.result {
                Some(r) => (fmt_f(r.h_statistic), r.degrees_of_freedom.to_string(), format!("{:.6e}", r.p_value)),
                None => ("NA".into(), "NA".into(), "NA".into()),
            };
            vec![
                t.num_features.to_string(),
                t.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>().join(","),
                t.group_sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
                h,
                df,
                p,
            ]
        })
        .collect();
    stage.table("kruskal.tsv", &[], &["F", "algorithms", "group_sizes", "H", "df", "p_value"], &rows)?;

    let mut merged = Vec::new();
    for name in [RUN_DIR, VARY_K_DIR, SWEEP1D_DIR, SWEEPND_DIR] {
        let path = cfg.out.join(name).join("summary.jsonl");
        if !path.exists() {
            continue;
        }
        let (header, items): (Header, Vec<serde_json::Value>) = read_jsonl(&path)?;
        check_header(&header, cfg, &hash, &path, &mut notes);
        merged.extend(items.into_iter().map(|summary| MergedSummary {
            stage: name.to_string(),
            summary,
        }));
    }
    stage.jsonl("summaries.jsonl", &merged)?;
    Ok(Outcome {
        written: stage.into_written(),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedSummary {
    pub stage: String,
    pub summary: serde_json::Value,
}

fn check_header(header: &Header, cfg: &RunConfig, hash: &str, path: &Path, notes: &mut Vec<String>) {
    if header.config_hash != hash || header.seed != cfg.seed {
        notes.push(format!(
            "{} was produced by a different configuration or seed",
            path.display()
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusterers::ParamValue;
    use crate::harness::config::AlphaSetting;
    use std::fs;

    fn tiny(out: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.out = out.to_path_buf();
        cfg.seed = 11;
        cfg.corpus.classes = vec![2, 3];
        cfg.corpus.features = vec![2];
        cfg.corpus.objects_per_class = vec![8];
        cfg.corpus.realizations = 2;
        cfg.corpus.alpha = AlphaSetting::Fixed(1.5);
        cfg.vary_k.k = vec![2, 3, 4];
        cfg.sweepnd.draws = 6;
        cfg.algorithms.retain(|a| matches!(a.name, Algorithm::KMeans | Algorithm::Hierarchical));
        cfg.sweep1d
            .grids
            .insert("kmeans.iter_max".into(), vec![ParamValue::Int(1), ParamValue::Int(10)]);
        cfg
    }

    #[test]
    fn run_without_corpus_writes_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        assert!(matches!(run_defaults(&cfg, false), Err(HarnessError::EmptyCorpus(_))));
        assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
        assert!(matches!(report(&cfg, false), Err(HarnessError::MissingStage { .. })));
    }

    #[test]
    fn full_pipeline_writes_headed_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        let gen = generate(&cfg, false).unwrap();
        assert_eq!(gen.written.len(), 4 + 1);
        assert!(matches!(generate(&cfg, false), Err(HarnessError::WouldOverwrite(_))));
        generate(&cfg, true).unwrap();

        let mut all = Vec::new();
        for step in [run_defaults, run_vary_k, run_sweep1d, run_sweepnd, report] {
            all.extend(step(&cfg, false).unwrap().written);
        }
        let hash = cfg.hash();
        for path in &all {
            let text = fs::read_to_string(path).unwrap();
            let first = text.lines().next().unwrap();
            assert!(first.contains(&hash), "{}: {first}", path.display());
        }
        let hist = fs::read_to_string(tmp.path().join("sweepnd/histogram_kmeans.tsv")).unwrap();
        let total: usize = hist
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("low"))
            .map(|l| l.split('\t').nth(2).unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 6);
        let (_, tests): (Header, Vec<KruskalRow>) = read_jsonl(&tmp.path().join("report/kruskal.jsonl")).unwrap();
        assert_eq!(tests.len(), 1);
        assert_eq!(tests[0].group_sizes, vec![4, 4]);
    }
}
