//! Experiment configuration, read from a JSON or TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ppmi_lowrank::{AnalogyMetric, EmbeddingMethod, Marginals, TokenizerConfig};
use serde::{Deserialize, Serialize};

/// Environment variable naming a directory holding `similarity.csv` and
/// `analogy.txt`.
pub const DATA_DIR_ENV: &str = "PPMI_LOWRANK_DATA_DIR";
pub const SIMILARITY_FILE: &str = "similarity.csv";
pub const ANALOGY_FILE: &str = "analogy.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus_path: PathBuf,
    pub splits: usize,
    pub window: usize,
    pub min_count: u64,
    pub methods: Vec<EmbeddingMethod>,
    pub dimensions: Vec<usize>,
    /// Replicate `r` is computed on split `r`; defaults to `splits`.
    pub replicates_per_cell: Option<usize>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub similarity_path: Option<PathBuf>,
    pub analogy_path: Option<PathBuf>,
    pub marginals: Marginals,
    pub tokenizer: TokenizerConfig,
    pub nmf_max_iter: usize,
    pub nmf_tol: f64,
    pub analogy_metric: AnalogyMetric,
    /// Concurrent cells; 0 uses every core.
    pub jobs: usize,
    pub emit_plot_data: bool,
    pub cache: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus_path: PathBuf::new(),
            splits: 2,
            window: 2,
            min_count: 300,
            methods: EmbeddingMethod::ALL.to_vec(),
            dimensions: vec![250, 500],
            replicates_per_cell: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
            similarity_path: None,
            analogy_path: None,
            marginals: Marginals::default(),
            tokenizer: TokenizerConfig::default(),
            nmf_max_iter: 200,
            nmf_tol: 1e-4,
            analogy_metric: AnalogyMetric::default(),
            jobs: 0,
            emit_plot_data: false,
            cache: true,
        }
    }
}

impl ExperimentConfig {
    /// `.toml` files are parsed as TOML, anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let cfg = if is_toml {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn replicates(&self) -> usize {
        self.replicates_per_cell.unwrap_or(self.splits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus_path.as_os_str().is_empty() {
            bail!("no corpus given");
        }
        if self.splits == 0 {
            bail!("splits must be at least 1");
        }
        if self.window == 0 {
            bail!("window must be at least 1");
        }
        if self.methods.is_empty() {
            bail!("no methods given");
        }
        if self.dimensions.is_empty() || self.dimensions.contains(&0) {
            bail!("dimensions must be non-empty and all at least 1");
        }
        let r = self.replicates();
        if r == 0 || r > self.splits {
            bail!("replicates_per_cell must be in 1..={} (one split per replicate), got {r}", self.splits);
        }
        Ok(())
    }

    pub fn similarity_dataset(&self) -> Result<PathBuf> {
        dataset_path(self.similarity_path.as_deref(), SIMILARITY_FILE)
    }

    pub fn analogy_dataset(&self) -> Result<PathBuf> {
        dataset_path(self.analogy_path.as_deref(), ANALOGY_FILE)
    }
}

/// An explicit path wins over the data directory variable.
pub fn dataset_path(explicit: Option<&Path>, file: &str) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => Ok(PathBuf::from(dir).join(file)),
        None => bail!("no path for {file}: set it in the config or point {DATA_DIR_ENV} at a dataset directory"),
    }
}
