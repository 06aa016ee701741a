//! The repeated-measures experiment: every split x method x dimension cell.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use ppmi_lowrank::embed::{save_embeddings_with_metadata, EmbeddingMetadata};
use ppmi_lowrank::factorize::{load_factors, save_factors};
use ppmi_lowrank::stats::{observations, write_scores, ScoreRow};
use ppmi_lowrank::{
    split_corpus_aligned, tokenize_file, EmbeddingMethod, FactorizationResult, Method, Observation, SparseMatrix,
    Task, TokenizedCorpus, Vocabulary,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{hash_file, stage_key, Cache};
use crate::config::ExperimentConfig;
use crate::logging::quote;
use crate::stages::{
    build_ppmi, embeddings, evaluate, factorize, load_ppmi, read_json, write_json, Datasets, FactorParams, PpmiParams,
    Scores, EMBEDDINGS_FILE, EVAL_FILE,
};

pub const SCORES_FILE: &str = "scores.csv";
pub const CELLS_FILE: &str = "cells.json";
pub const RANKING_FILE: &str = "ranking.json";
pub const PLOT_DIR: &str = "plot";

/// Outcome of one split x method x dimension cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub replicate: usize,
    pub method: EmbeddingMethod,
    pub dimension: usize,
    pub ppmi_dir: Option<PathBuf>,
    pub factors_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub scores: Option<Scores>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// One row per method x dimension x replicate, in configuration order.
    pub rows: Vec<ScoreRow>,
    pub cells: Vec<CellRecord>,
    pub scores_path: PathBuf,
}

impl PipelineOutput {
    pub fn missing(&self) -> usize {
        self.cells.iter().filter(|c| c.scores.is_none()).count()
    }

    pub fn observations(&self, task: Task) -> Result<Vec<Observation>> {
        Ok(observations(&self.rows, task)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMean {
    pub method: String,
    pub mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub task: Task,
    /// Best first.
    pub methods: Vec<MethodMean>,
}

struct SplitData {
    key: String,
    dir: PathBuf,
    vocab: Arc<Vocabulary>,
    ppmi: SparseMatrix,
}

/// Runs every cell and writes `scores.csv`, `cells.json` and
/// `ranking.json` (plus plot data when asked) under the output directory.
/// A failing cell is logged and left empty in the table.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let datasets = Datasets::load(&cfg.similarity_dataset()?, &cfg.analogy_dataset()?)?;
    let out = cfg.output_dir.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cache = Cache::new(out.join("cache"), cfg.cache);

    let corpus_hash = hash_file(&cfg.corpus_path)?;
    let dataset_key = stage_key(
        "datasets",
        &cfg.analogy_metric,
        &[&hash_file(&datasets.similarity_path)?, &hash_file(&datasets.analogy_path)?],
    )?;
    log::info!(
        "event=experiment_start corpus={} splits={} replicates={} methods={} dims={:?} seed={}",
        quote(cfg.corpus_path.display()),
        cfg.splits,
        cfg.replicates(),
        cfg.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","),
        cfg.dimensions,
        cfg.seed
    );

    let splits = prepare_splits(cfg, &cache, &corpus_hash)?;

    let mut families: Vec<Method> = Vec::new();
    for m in &cfg.methods {
        let f = crate::stages::family(*m);
        if !families.contains(&f) {
            families.push(f);
        }
    }
    let mut units = Vec::new();
    for r in 0..splits.len() {
        for &fam in &families {
            for &d in &cfg.dimensions {
                units.push((r, fam, d));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("building the worker pool")?;
    let cells: Vec<CellRecord> = pool.install(|| {
        units
            .par_iter()
            .flat_map_iter(|&(r, fam, d)| {
                let methods: Vec<EmbeddingMethod> = cfg
                    .methods
                    .iter()
                    .copied()
                    .filter(|m| crate::stages::family(*m) == fam)
                    .collect();
                run_unit(cfg, &cache, &datasets, &dataset_key, r, splits[r].as_ref(), fam, d, &methods)
            })
            .collect()
    });

    let mut by_cell = HashMap::new();
    for c in &cells {
        by_cell.insert((c.method, c.dimension, c.replicate), c);
    }
    let mut rows = Vec::new();
    for &m in &cfg.methods {
        for &d in &cfg.dimensions {
            for r in 1..=splits.len() {
                let s = by_cell.get(&(m, d, r)).and_then(|c| c.scores.as_ref());
                rows.push(ScoreRow {
                    method: m.as_str().to_string(),
                    dimension: d,
                    replicate: r,
                    similarity: s.map(|s| s.similarity.score),
                    analogy: s.map(|s| s.analogy.overall.score),
                });
            }
        }
    }
    let scores_path = out.join(SCORES_FILE);
    write_scores(&scores_path, &rows)?;
    write_json(&out.join(CELLS_FILE), &cells)?;

    let rankings: Vec<Ranking> = Task::ALL.iter().map(|&t| ranking(&rows, t)).collect();
    for r in &rankings {
        let order: Vec<&str> = r.methods.iter().map(|m| m.method.as_str()).collect();
        log::info!(
            "event=method_ranking task={} order={} svd_best={}",
            r.task,
            order.join(">"),
            order.first() == Some(&"svd")
        );
    }
    write_json(&out.join(RANKING_FILE), &rankings)?;
    if cfg.emit_plot_data {
        write_plot_data(&out.join(PLOT_DIR), &rows)?;
    }

    let output = PipelineOutput {
        rows,
        cells,
        scores_path,
    };
    log::info!(
        "event=experiment_done cells={} missing={} seconds={:.3} scores={}",
        output.cells.len(),
        output.missing(),
        started.elapsed().as_secs_f64(),
        quote(output.scores_path.display())
    );
    Ok(output)
}

/// Builds or loads the PPMI matrix of every replicate's split. The corpus
/// is only tokenized when some split is not cached.
fn prepare_splits(cfg: &ExperimentConfig, cache: &Cache, corpus_hash: &str) -> Result<Vec<Option<SplitData>>> {
    let params = PpmiParams {
        window: cfg.window,
        min_count: cfg.min_count,
        marginals: cfg.marginals,
    };
    let mut parts: Option<Vec<TokenizedCorpus>> = None;
    let mut splits = Vec::new();
    for r in 0..cfg.replicates() {
        let key = stage_key("ppmi", &(&params, &cfg.tokenizer, cfg.splits, r), &[corpus_hash])?;
        let dir = cache.dir("ppmi", &key);
        let built = if cache.is_complete(&dir) {
            load_ppmi(&dir)
        } else {
            if parts.is_none() {
                let corpus = tokenize_file(&cfg.corpus_path, &cfg.tokenizer)?;
                log::info!(
                    "event=corpus_tokenized tokens={} sentences={}",
                    corpus.len(),
                    corpus.n_sentences()
                );
                parts = Some(split_corpus_aligned(&corpus, cfg.splits)?);
            }
            let part = &parts.as_ref().expect("tokenized above")[r];
            cache.begin(&dir)?;
            build_ppmi(part, &params, &dir).and_then(|v| cache.finish(&dir).map(|_| v))
        };
        splits.push(match built {
            Ok((vocab, ppmi)) => Some(SplitData {
                key,
                dir,
                vocab: Arc::new(vocab),
                ppmi,
            }),
            Err(e) => {
                log::error!("event=split_failed replicate={} reason={}", r + 1, quote(format!("{e:#}")));
                None
            }
        });
    }
    Ok(splits)
}

#[allow(clippy::too_many_arguments)]
fn run_unit(
    cfg: &ExperimentConfig,
    cache: &Cache,
    datasets: &Datasets,
    dataset_key: &str,
    r: usize,
    split: Option<&SplitData>,
    fam: Method,
    d: usize,
    methods: &[EmbeddingMethod],
) -> Vec<CellRecord> {
    let replicate = r + 1;
    let record = |m: EmbeddingMethod| CellRecord {
        replicate,
        method: m,
        dimension: d,
        ppmi_dir: split.map(|s| s.dir.clone()),
        factors_dir: None,
        embeddings: None,
        scores: None,
        error: None,
    };
    let Some(split) = split else {
        return methods
            .iter()
            .map(|&m| CellRecord {
                error: Some("split could not be prepared".into()),
                ..record(m)
            })
            .collect();
    };
    let params = FactorParams {
        method: fam,
        d,
        seed: cfg.seed,
        nmf_max_iter: cfg.nmf_max_iter,
        nmf_tol: cfg.nmf_tol,
    };
    let factor_key = match stage_key("factors", &params, &[&split.key]) {
        Ok(k) => k,
        Err(e) => {
            return methods
                .iter()
                .map(|&m| CellRecord {
                    error: Some(format!("{e:#}")),
                    ..record(m)
                })
                .collect()
        }
    };
    let factors_dir = cache.dir(fam.as_str(), &factor_key);
    let mut factors: Option<Result<FactorizationResult, String>> = None;

    let mut out = Vec::new();
    for &m in methods {
        let started = Instant::now();
        let mut rec = CellRecord {
            factors_dir: Some(factors_dir.clone()),
            ..record(m)
        };
        let result = (|| -> Result<(Scores, PathBuf, bool)> {
            let key = stage_key("embed", &m, &[&factor_key, dataset_key])?;
            let dir = cache.dir(m.as_str(), &key);
            let path = dir.join(EMBEDDINGS_FILE);
            if cache.is_complete(&dir) {
                return Ok((read_json(&dir.join(EVAL_FILE))?, path, true));
            }
            let f = factors
                .get_or_insert_with(|| factor_stage(cache, &factors_dir, &split.ppmi, &params).map_err(|e| format!("{e:#}")))
                .as_ref()
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let e = embeddings(f, m, split.vocab.clone())?;
            cache.begin(&dir)?;
            let meta = EmbeddingMetadata::for_embeddings(&e, Some(replicate), Some(cfg.seed));
            save_embeddings_with_metadata(&e, &path, &meta)?;
            let scores = evaluate(&e, datasets, cfg.analogy_metric)?;
            write_json(&dir.join(EVAL_FILE), &scores)?;
            cache.finish(&dir)?;
            Ok((scores, path, false))
        })();
        match result {
            Ok((scores, path, cached)) => {
                log::info!(
                    "event=cell_done replicate={replicate} method={m} dim={d} similarity={:.6} analogy={:.6} cached={cached} seconds={:.3}",
                    scores.similarity.score,
                    scores.analogy.overall.score,
                    started.elapsed().as_secs_f64()
                );
                if let Some(n) = &scores.negativity {
                    log::info!(
                        "event=negativity replicate={replicate} method={m} dim={d} fraction={:.6} used={}",
                        n.fraction,
                        n.n_used
                    );
                }
                rec.embeddings = Some(path);
                rec.scores = Some(scores);
            }
            Err(e) => {
                let msg = format!("{e:#}");
                log::error!("event=cell_failed replicate={replicate} method={m} dim={d} reason={}", quote(&msg));
                rec.error = Some(msg);
            }
        }
        out.push(rec);
    }
    out
}

fn factor_stage(cache: &Cache, dir: &Path, a: &SparseMatrix, p: &FactorParams) -> Result<FactorizationResult> {
    if cache.is_complete(dir) {
        return Ok(load_factors(dir)?.0);
    }
    let started = Instant::now();
    let f = factorize(a, p)?;
    cache.begin(dir)?;
    save_factors(dir, &f, p.seed)?;
    cache.finish(dir)?;
    log::info!(
        "event=factorized method={} dim={} iterations={} seconds={:.3}",
        p.method.as_str(),
        p.d,
        f.iterations(),
        started.elapsed().as_secs_f64()
    );
    Ok(f)
}

/// Methods ordered by mean score over their available cells, best first.
pub fn ranking(rows: &[ScoreRow], task: Task) -> Ranking {
    let mut sums: Vec<(String, f64, usize)> = Vec::new();
    for row in rows {
        let Some(s) = row.score(task) else { continue };
        match sums.iter_mut().find(|(m, _, _)| *m == row.method) {
            Some(e) => {
                e.1 += s;
                e.2 += 1;
            }
            None => sums.push((row.method.clone(), s, 1)),
        }
    }
    let mut methods: Vec<MethodMean> = sums
        .into_iter()
        .map(|(method, sum, n)| MethodMean {
            method,
            mean: sum / n as f64,
            n,
        })
        .collect();
    methods.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    Ranking { task, methods }
}

/// Per-cell mean, minimum and maximum for interaction plots.
fn write_plot_data(dir: &Path, rows: &[ScoreRow]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for task in Task::ALL {
        let mut cells: Vec<((String, usize), Vec<f64>)> = Vec::new();
        for row in rows {
            let Some(s) = row.score(task) else { continue };
            let key = (row.method.clone(), row.dimension);
            match cells.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(s),
                None => cells.push((key, vec![s])),
            }
        }
        let mut csv = String::from("method,dimension,n,mean,min,max\n");
        for ((m, d), v) in &cells {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(csv, "{m},{d},{},{mean},{min},{max}", v.len());
        }
        let path = dir.join(format!("cell_means_{task}.csv"));
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
