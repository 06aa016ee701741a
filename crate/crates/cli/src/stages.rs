//! Single pipeline stages, shared by the subcommands and the experiment
//! runner.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use ppmi_lowrank::factorize::{nmf_with, truncated_svd_with, NmfConfig, SvdConfig};
use ppmi_lowrank::{
    build_vocabulary, count_cooccurrences, eval_similarity, negativity_check, nmf_embeddings, pivoted_qr,
    qr_q_embeddings, qr_r_embeddings, svd_embeddings, AnalogyDataset, AnalogyMetric, AnalogyReport,
    EmbeddingMatrix, EmbeddingMethod, EvalResult, FactorizationResult, Marginals, Method, NegativityReport,
    ProbabilityModel, SimilarityDataset, SparseMatrix, TokenizedCorpus, Vocabulary,
};
use serde::{Deserialize, Serialize};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const COUNTS_FILE: &str = "counts.txt";
pub const PPMI_FILE: &str = "ppmi.bin";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpmiParams {
    pub window: usize,
    pub min_count: u64,
    pub marginals: Marginals,
}

/// Vocabulary, counts and PPMI matrix for one corpus, written into `dir`.
pub fn build_ppmi(corpus: &TokenizedCorpus, p: &PpmiParams, dir: &Path) -> Result<(Vocabulary, SparseMatrix)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let vocab = build_vocabulary(corpus, p.min_count)?;
    let counts = count_cooccurrences(corpus, &vocab, p.window)?;
    let model = match p.marginals {
        Marginals::PairMarginal => ProbabilityModel::pair_marginal(&counts)?,
        Marginals::Unigram => ProbabilityModel::unigram(&counts, &vocab)?,
    };
    let ppmi = model.ppmi()?;
    vocab.save_tsv(dir.join(VOCAB_FILE))?;
    counts.save(dir.join(COUNTS_FILE))?;
    ppmi.save_binary(dir.join(PPMI_FILE))?;
    log::info!(
        "event=ppmi_built dir={} n={} tokens={} pairs={} nnz={}",
        dir.display(),
        vocab.len(),
        corpus.len(),
        counts.total_pairs(),
        ppmi.nnz()
    );
    Ok((vocab, ppmi))
}

pub fn load_ppmi(dir: &Path) -> Result<(Vocabulary, SparseMatrix)> {
    Ok((Vocabulary::load_tsv(dir.join(VOCAB_FILE))?, SparseMatrix::load(dir.join(PPMI_FILE))?))
}

/// Factorization family producing an embedding method.
pub fn family(m: EmbeddingMethod) -> Method {
    match m {
        EmbeddingMethod::Svd => Method::Svd,
        EmbeddingMethod::QrQ | EmbeddingMethod::QrR => Method::Qr,
        EmbeddingMethod::Nmf => Method::Nmf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub method: Method,
    pub d: usize,
    pub seed: u64,
    pub nmf_max_iter: usize,
    pub nmf_tol: f64,
}

pub fn factorize(a: &SparseMatrix, p: &FactorParams) -> Result<FactorizationResult> {
    let svd = SvdConfig {
        seed: p.seed,
        ..SvdConfig::default()
    };
    let f: FactorizationResult = match p.method {
        Method::Svd => truncated_svd_with(a, p.d, &svd)?.into(),
        Method::Qr => pivoted_qr(a, p.d)?.into(),
        Method::Nmf => nmf_with(
            a,
            p.d,
            &NmfConfig {
                max_iter: p.nmf_max_iter,
                tol: p.nmf_tol,
                svd,
            },
        )?
        .into(),
    };
    Ok(f)
}

pub fn embeddings(f: &FactorizationResult, method: EmbeddingMethod, vocab: Arc<Vocabulary>) -> Result<EmbeddingMatrix> {
    let e = match (method, f) {
        (EmbeddingMethod::Svd, FactorizationResult::Svd(s)) => svd_embeddings(s, vocab)?,
        (EmbeddingMethod::QrQ, FactorizationResult::Qr(q)) => qr_q_embeddings(q, vocab)?,
        (EmbeddingMethod::QrR, FactorizationResult::Qr(q)) => qr_r_embeddings(q, vocab)?,
        (EmbeddingMethod::Nmf, FactorizationResult::Nmf(n)) => nmf_embeddings(n, vocab)?,
        (m, f) => anyhow::bail!("{m} embeddings cannot be taken from {} factors", f.method().as_str()),
    };
    Ok(e)
}

/// Loaded evaluation datasets.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub similarity: SimilarityDataset,
    pub analogy: AnalogyDataset,
    pub similarity_path: PathBuf,
    pub analogy_path: PathBuf,
}

impl Datasets {
    pub fn load(similarity: &Path, analogy: &Path) -> Result<Self> {
        Ok(Self {
            similarity: SimilarityDataset::load(similarity, true)?,
            analogy: AnalogyDataset::load(analogy, true)?,
            similarity_path: similarity.to_path_buf(),
            analogy_path: analogy.to_path_buf(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub similarity: EvalResult,
    pub analogy: AnalogyReport,
    /// Only computed for non-negative embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negativity: Option<NegativityReport>,
}

pub fn evaluate(e: &EmbeddingMatrix, ds: &Datasets, metric: AnalogyMetric) -> Result<Scores> {
    let similarity = eval_similarity(e, &ds.similarity)?;
    let analogy = ppmi_lowrank::eval::eval_analogy_with(e, &ds.analogy, metric)?;
    let negativity = (e.method() == Some(EmbeddingMethod::Nmf)).then(|| negativity_check(e, &ds.analogy));
    Ok(Scores {
        similarity,
        analogy,
        negativity,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
