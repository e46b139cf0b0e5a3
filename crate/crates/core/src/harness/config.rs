//! Declarative run configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clusterers::{Algorithm, ClustererConfig, ParamValue};
use crate::datagen::{self, Dataset, GridCell, PAPER_CLASSES, PAPER_FEATURES, PAPER_OBJECTS_PER_CLASS};
use crate::seed::{derive_seed, hash_str};
use crate::sweep::Setting;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; absent means one per core.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<AlgorithmSelection>,
    #[serde(default)]
    pub vary_k: VaryKConfig,
    #[serde(default)]
    pub sweep1d: OneDimConfig,
    #[serde(default)]
    pub sweepnd: RandomConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn all_algorithms() -> Vec<AlgorithmSelection> {
    Algorithm::ALL
        .into_iter()
        .map(|algorithm| AlgorithmSelection {
            name: algorithm,
            params: Setting::new(),
        })
        .collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: default_out(),
            workers: None,
            corpus: CorpusConfig::default(),
            algorithms: all_algorithms(),
            vary_k: VaryKConfig::default(),
            sweep1d: OneDimConfig::default(),
            sweepnd: RandomConfig::default(),
        }
    }
}

/// Either a fixed α for every cell or `"auto"` to tune each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Fixed(f64),
    Named(String),
}

impl AlphaSetting {
    pub fn is_auto(&self) -> bool {
        matches!(self, AlphaSetting::Named(s) if s == "auto")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    /// Where dataset files live; defaults to `<out>/corpus`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    pub classes: Vec<usize>,
    pub features: Vec<usize>,
    pub objects_per_class: Vec<usize>,
    pub realizations: usize,
    pub alpha: AlphaSetting,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            dir: None,
            classes: PAPER_CLASSES.to_vec(),
            features: PAPER_FEATURES.to_vec(),
            objects_per_class: PAPER_OBJECTS_PER_CLASS.to_vec(),
            realizations: datagen::PAPER_REALIZATIONS,
            alpha: AlphaSetting::Named("auto".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSelection {
    pub name: Algorithm,
    /// Overrides applied in the default and vary-k regimes.
    #[serde(default)]
    pub params: Setting,
}

/// Restricts a regime to part of the corpus; empty lists keep everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subset {
    #[serde(default)]
    pub classes: Vec<usize>,
    #[serde(default)]
    pub features: Vec<usize>,
    #[serde(default)]
    pub objects_per_class: Vec<usize>,
}

impl Subset {
    pub fn contains(&self, ds: &Dataset) -> bool {
        let s = ds.spec();
        let ok = |list: &[usize], v: usize| list.is_empty() || list.contains(&v);
        ok(&self.classes, s.num_classes)
            && ok(&self.features, s.num_features)
            && ok(&self.objects_per_class, s.objects_per_class)
    }

    pub fn apply(&self, corpus: Vec<Dataset>) -> Vec<Dataset> {
        corpus.into_iter().filter(|d| self.contains(d)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaryKConfig {
    #[serde(default)]
    pub subset: Subset,
    pub k: Vec<usize>,
}

impl Default for VaryKConfig {
    fn default() -> Self {
        Self {
            subset: Subset::default(),
            k: (2..=20).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneDimConfig {
    #[serde(default)]
    pub subset: Subset,
    /// Explicit grids keyed `algorithm.parameter`; others use the built-in grid.
    #[serde(default)]
    pub grids: BTreeMap<String, Vec<ParamValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    #[serde(default)]
    pub subset: Subset,
    pub draws: usize,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self {
            subset: Subset::default(),
            draws: 500,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves every algorithm and parameter name against the published
    /// descriptors, so mistakes surface before any computation.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let c = &self.corpus;
        if c.classes.is_empty() || c.features.is_empty() || c.objects_per_class.is_empty() {
            return bad("corpus axes must be non-empty".into());
        }
        if c.classes.iter().chain(&c.features).chain(&c.objects_per_class).any(|&v| v == 0) {
            return bad("corpus axes must be positive".into());
        }
        if c.realizations == 0 {
            return bad("corpus.realizations must be at least 1".into());
        }
        match &c.alpha {
            AlphaSetting::Fixed(a) if !(*a > 0.0 && a.is_finite()) => {
                return bad(format!("corpus.alpha must be positive, got {a}"))
            }
            AlphaSetting::Named(s) if s != "auto" => {
                return bad(format!("corpus.alpha must be a number or \"auto\", got \"{s}\""))
            }
            _ => {}
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        let mut seen = Vec::new();
        for sel in &self.algorithms {
            if seen.contains(&sel.name) {
                return bad(format!("algorithm `{}` selected twice", sel.name));
            }
            seen.push(sel.name);
            ClustererConfig {
                algorithm: sel.name,
                k: 1,
                assignments: sel.params.clone(),
            }
            .validate()?;
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.vary_k.k.is_empty() || self.vary_k.k.contains(&0) {
            return bad("vary_k.k must list positive cluster counts".into());
        }
        for (key, grid) in &self.sweep1d.grids {
            let (alg, param) = key
                .split_once('.')
                .ok_or_else(|| HarnessError::Config(format!("grid key `{key}` is not `algorithm.parameter`")))?;
            let desc = alg.parse::<Algorithm>()?.descriptor(param)?;
            if grid.is_empty() {
                return bad(format!("grid `{key}` is empty"));
            }
            for v in grid {
                desc.validate(v)?;
            }
        }
        Ok(())
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus.dir.clone().unwrap_or_else(|| self.out.join("corpus"))
    }

    /// Seed of the dataset generator, derived from the master seed.
    pub fn corpus_seed(&self) -> u64 {
        derive_seed(self.seed, &[hash_str("corpus")])
    }

    pub fn cells(&self) -> Vec<GridCell> {
        let alpha = match self.corpus.alpha {
            AlphaSetting::Fixed(a) => a,
            AlphaSetting::Named(_) => 1.0,
        };
        let c = &self.corpus;
        datagen::grid(&c.classes, &c.features, &c.objects_per_class, alpha)
    }

    pub fn selections(&self) -> Vec<(Algorithm, Setting)> {
        self.algorithms.iter().map(|s| (s.name, s.params.clone())).collect()
    }

    /// SHA-256 of everything that determines results. Output location and
    /// worker count are excluded: they never change a number.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        canonical.workers = None;
        canonical.corpus.dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
out = "runs/a"

[corpus]
classes = [2, 10]
features = [10]
objects_per_class = [50]
realizations = 3
alpha = "auto"

[[algorithms]]
name = "kmeans"
params = { nstart = 5, algorithm = "macqueen" }

[[algorithms]]
name = "spectral"
params = { kernel_param = "automatic" }

[vary_k]
k = [2, 5, 10]
subset = { classes = [10] }

[sweep1d.grids]
"kmeans.nstart" = [1, 2, 4]

[sweepnd]
draws = 50
"#;

    #[test]
    fn parses_a_full_file() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(cfg.corpus.alpha.is_auto());
        assert_eq!(cfg.algorithms[0].params["nstart"], ParamValue::Int(5));
        assert_eq!(cfg.vary_k.subset.classes, vec![10]);
        assert_eq!(cfg.sweepnd.draws, 50);
        assert_eq!(cfg.corpus_dir(), PathBuf::from("runs/a/corpus"));
        assert_eq!(cfg.cells().len(), 2);
    }

    #[test]
    fn unknown_names_are_rejected() {
        let e = RunConfig::from_toml(&SAMPLE.replace("nstart = 5", "centres = 5")).unwrap_err();
        assert!(e.to_string().contains("centres"), "{e}");
        let e = RunConfig::from_toml(&SAMPLE.replace("\"kmeans.nstart\"", "\"kmeans.restarts\"")).unwrap_err();
        assert!(e.to_string().contains("restarts"), "{e}");
        let e = RunConfig::from_toml(&SAMPLE.replace("name = \"spectral\"", "name = \"dbscan\"")).unwrap_err();
        assert!(e.to_string().contains("dbscan"), "{e}");
        assert!(RunConfig::from_toml(&SAMPLE.replace("draws = 50", "draws = 50\nbogus = 1")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("\"auto\"", "\"tuned\"")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("nstart = 5", "nstart = 0")).is_err());
    }

    #[test]
    fn hash_ignores_location_and_workers() {
        let a = RunConfig::from_toml(SAMPLE).unwrap();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        b.workers = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.corpus.realizations = 4;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn shipped_configs_are_valid() {
        let desk = RunConfig::from_toml(include_str!("../../../../configs/desk.toml")).unwrap();
        assert_eq!(desk.cells().len() * desk.corpus.realizations, 40);
        let paper = RunConfig::from_toml(include_str!("../../../../configs/paper.toml")).unwrap();
        assert_eq!(paper.cells().len() * paper.corpus.realizations, 270);
    }

    #[test]
    fn defaults_cover_the_full_grid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.cells().len() * cfg.corpus.realizations, 270);
        assert_eq!(cfg.algorithms.len(), 5);
    }
}
