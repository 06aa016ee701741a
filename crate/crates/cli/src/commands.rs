//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ppmi_lowrank::embed::{save_embeddings_with_metadata, EmbeddingMetadata};
use ppmi_lowrank::factorize::{load_factors, save_factors};
use ppmi_lowrank::{
    load_embeddings, tokenize_file, AnalogyMetric, EmbeddingMethod, Marginals, Method, SparseMatrix, Task,
    TokenizerConfig, Vocabulary,
};

use crate::config::{dataset_path, ExperimentConfig, ANALOGY_FILE, SIMILARITY_FILE};
use crate::logging::quote;
use crate::pipeline::run_pipeline;
use crate::report::run_anova;
use crate::stages::{self, write_json, FactorParams, PpmiParams, PPMI_FILE};

#[derive(Debug, Parser)]
#[command(name = "ppmi-lowrank", version, about = "PPMI word embeddings from SVD, pivoted QR and NMF")]
pub struct Cli {
    /// Default log filter when RUST_LOG is unset.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a corpus and write its vocabulary, counts and PPMI matrix.
    BuildPpmi(BuildPpmiArgs),
    /// Rank-d factorization of a PPMI matrix.
    Factorize(FactorizeArgs),
    /// Word vectors from saved factors.
    Embed(EmbedArgs),
    /// Score word vectors on similarity or analogy data.
    Eval(EvalArgs),
    /// Two-way ANOVA of a score table.
    Anova(AnovaArgs),
    /// Full repeated-measures experiment.
    Experiment(ExperimentArgs),
}

fn parse_method(s: &str) -> Result<EmbeddingMethod, String> {
    EmbeddingMethod::parse(s).map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> Result<Method, String> {
    match s.to_ascii_lowercase().as_str() {
        "svd" => Ok(Method::Svd),
        "qr" | "qr_q" | "qr_r" => Ok(Method::Qr),
        "nmf" => Ok(Method::Nmf),
        other => Err(format!("unknown factorization {other:?} (expected svd, qr or nmf)")),
    }
}

fn parse_task(s: &str) -> Result<Task, String> {
    Task::parse(s).map_err(|e| e.to_string())
}

fn parse_marginals(s: &str) -> Result<Marginals, String> {
    match s.to_ascii_lowercase().as_str() {
        "pair" | "pair-marginal" => Ok(Marginals::PairMarginal),
        "unigram" => Ok(Marginals::Unigram),
        other => Err(format!("unknown marginals {other:?} (expected pair-marginal or unigram)")),
    }
}

fn parse_metric(s: &str) -> Result<AnalogyMetric, String> {
    match s.to_ascii_lowercase().as_str() {
        "euclidean" => Ok(AnalogyMetric::Euclidean),
        "cosine" => Ok(AnalogyMetric::Cosine),
        other => Err(format!("unknown metric {other:?} (expected euclidean or cosine)")),
    }
}

#[derive(Debug, Args)]
pub struct BuildPpmiArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    #[arg(long, default_value_t = 300)]
    pub min_count: u64,
    #[arg(long, default_value = "pair-marginal", value_parser = parse_marginals)]
    pub marginals: Marginals,
    /// Keep the original letter case.
    #[arg(long)]
    pub keep_case: bool,
    /// Also write the matrix as `ppmi.txt` triplets.
    #[arg(long)]
    pub text: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    /// A PPMI matrix file, or a directory holding `ppmi.bin`.
    #[arg(long)]
    pub ppmi: PathBuf,
    #[arg(long, value_parser = parse_family)]
    pub method: Method,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub factors: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, value_parser = parse_method)]
    pub method: EmbeddingMethod,
    /// Corpus split recorded in the metadata sidecar.
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
    /// Defaults to the file in the dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "euclidean", value_parser = parse_metric)]
    pub metric: AnalogyMetric,
    /// JSON result file; printed to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnovaArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Analyse one task only.
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON or TOML configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub method: Vec<EmbeddingMethod>,
    #[arg(long, value_delimiter = ',')]
    pub dim: Vec<usize>,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub similarity: Option<PathBuf>,
    #[arg(long)]
    pub analogy: Option<PathBuf>,
    #[arg(long, value_parser = parse_marginals)]
    pub marginals: Option<Marginals>,
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<AnalogyMetric>,
    /// Analyse one task only.
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,
    #[arg(long)]
    pub emit_plot_data: bool,
    /// Recompute every stage even if cached.
    #[arg(long)]
    pub no_cache: bool,
    /// Skip the ANOVA reports.
    #[arg(long)]
    pub no_anova: bool,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.corpus {
            c.corpus_path = v.clone();
        }
        if let Some(v) = self.window {
            c.window = v;
        }
        if let Some(v) = self.min_count {
            c.min_count = v;
        }
        if !self.method.is_empty() {
            c.methods = self.method.clone();
        }
        if !self.dim.is_empty() {
            c.dimensions = self.dim.clone();
        }
        if let Some(v) = self.splits {
            c.splits = v;
        }
        if let Some(v) = self.replicates {
            c.replicates_per_cell = Some(v);
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.jobs {
            c.jobs = v;
        }
        if let Some(v) = &self.similarity {
            c.similarity_path = Some(v.clone());
        }
        if let Some(v) = &self.analogy {
            c.analogy_path = Some(v.clone());
        }
        if let Some(v) = self.marginals {
            c.marginals = v;
        }
        if let Some(v) = self.metric {
            c.analogy_metric = v;
        }
        c.emit_plot_data |= self.emit_plot_data;
        c.cache &= !self.no_cache;
        c.validate()?;
        Ok(c)
    }
}

/// Whether every requested output was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Incomplete { missing: usize },
}

pub fn exit_code(r: &Result<Outcome>) -> ExitCode {
    match r {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Incomplete { .. }) => ExitCode::from(2),
        Err(_) => ExitCode::FAILURE,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::BuildPpmi(a) => build_ppmi(a),
        Command::Factorize(a) => factorize(a),
        Command::Embed(a) => embed(a),
        Command::Eval(a) => eval(a),
        Command::Anova(a) => anova(a.task, &a.scores, &a.out),
        Command::Experiment(a) => experiment(a),
    }
}

fn build_ppmi(a: &BuildPpmiArgs) -> Result<Outcome> {
    let tok = TokenizerConfig {
        lowercase: !a.keep_case,
        ..TokenizerConfig::default()
    };
    let corpus = tokenize_file(&a.corpus, &tok)?;
    let params = PpmiParams {
        window: a.window,
        min_count: a.min_count,
        marginals: a.marginals,
    };
    let (_, ppmi) = stages::build_ppmi(&corpus, &params, &a.out)?;
    if a.text {
        ppmi.save_text(a.out.join("ppmi.txt"))?;
    }
    Ok(Outcome::Complete)
}

fn factorize(a: &FactorizeArgs) -> Result<Outcome> {
    let path = if a.ppmi.is_dir() { a.ppmi.join(PPMI_FILE) } else { a.ppmi.clone() };
    let m = SparseMatrix::load(&path)?;
    let params = FactorParams {
        method: a.method,
        d: a.dim,
        seed: a.seed,
        nmf_max_iter: a.max_iter,
        nmf_tol: a.tol,
    };
    let f = stages::factorize(&m, &params)?;
    save_factors(&a.out, &f, a.seed)?;
    log::info!(
        "event=factorized method={} dim={} iterations={} out={}",
        a.method.as_str(),
        a.dim,
        f.iterations(),
        quote(a.out.display())
    );
    Ok(Outcome::Complete)
}

fn embed(a: &EmbedArgs) -> Result<Outcome> {
    let (f, sidecar) = load_factors(&a.factors)?;
    let vocab = Arc::new(Vocabulary::load_tsv(&a.vocab)?);
    let e = stages::embeddings(&f, a.method, vocab)?;
    let meta = EmbeddingMetadata::for_embeddings(&e, a.split, Some(sidecar.seed));
    save_embeddings_with_metadata(&e, &a.out, &meta)?;
    log::info!("event=embedded method={} n={} d={} out={}", a.method, e.len(), e.d(), quote(a.out.display()));
    Ok(Outcome::Complete)
}

fn eval(a: &EvalArgs) -> Result<Outcome> {
    let e = load_embeddings(&a.embeddings)?;
    let file = match a.task {
        Task::Similarity => SIMILARITY_FILE,
        Task::Analogy => ANALOGY_FILE,
    };
    let dataset = dataset_path(a.dataset.as_deref(), file)?;
    let value = match a.task {
        Task::Similarity => {
            let ds = ppmi_lowrank::SimilarityDataset::load(&dataset, true)?;
            serde_json::to_value(ppmi_lowrank::eval_similarity(&e, &ds)?)?
        }
        Task::Analogy => {
            let ds = ppmi_lowrank::AnalogyDataset::load(&dataset, true)?;
            let report = ppmi_lowrank::eval::eval_analogy_with(&e, &ds, a.metric)?;
            if e.method() == Some(EmbeddingMethod::Nmf) {
                let n = ppmi_lowrank::negativity_check(&e, &ds);
                serde_json::json!({ "analogy": report, "negativity": n })
            } else {
                serde_json::to_value(report)?
            }
        }
    };
    match &a.out {
        Some(p) => write_json(p, &value)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{}", serde_json::to_string_pretty(&value)?) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(Outcome::Complete)
}

fn anova(task: Option<Task>, scores: &Path, out: &Path) -> Result<Outcome> {
    let tasks = task.map_or(Task::ALL.to_vec(), |t| vec![t]);
    let mut missing = 0;
    for t in tasks {
        match run_anova(scores, t, out) {
            Ok(o) => log::info!("event=anova_written task={t} report={}", quote(o.text.display())),
            Err(e) => {
                log::error!("event=anova_failed task={t} reason={}", quote(format!("{e:#}")));
                missing += 1;
            }
        }
    }
    Ok(if missing == 0 {
        Outcome::Complete
    } else {
        Outcome::Incomplete { missing }
    })
}

fn experiment(a: &ExperimentArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    write_json(&cfg.output_dir.join("config.json"), &cfg)?;
    let output = run_pipeline(&cfg)?;
    let mut missing = output.missing();
    if !a.no_anova {
        if let Outcome::Incomplete { missing: m } = anova(a.task, &output.scores_path, &cfg.output_dir.join("anova"))? {
            missing += m;
        }
    }
    Ok(if missing == 0 {
        Outcome::Complete
    } else {
        Outcome::Incomplete { missing }
    })
}
