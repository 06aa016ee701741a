//! Word vectors extracted from factorizations, and their word2vec-style
//! text persistence.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::factorize::{NmfFactors, QrFactors, SvdFactors};

/// Entries below this are counted as zero in NMF sparsity reports.
pub const SPARSITY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMethod {
    Svd,
    QrQ,
    QrR,
    Nmf,
}

impl EmbeddingMethod {
    pub const ALL: [EmbeddingMethod; 4] = [
        EmbeddingMethod::Svd,
        EmbeddingMethod::Nmf,
        EmbeddingMethod::QrR,
        EmbeddingMethod::QrQ,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EmbeddingMethod::Svd => "svd",
            EmbeddingMethod::QrQ => "qr_q",
            EmbeddingMethod::QrR => "qr_r",
            EmbeddingMethod::Nmf => "nmf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(EmbeddingMethod::Svd),
            "qr_q" | "qr-q" | "qrq" => Ok(EmbeddingMethod::QrQ),
            "qr_r" | "qr-r" | "qrr" => Ok(EmbeddingMethod::QrR),
            "nmf" => Ok(EmbeddingMethod::Nmf),
            other => Err(Error::Argument(format!(
                "unknown method {other:?} (expected svd, nmf, qr_q or qr_r)"
            ))),
        }
    }
}

impl std::fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type RowView<'a> = nalgebra::MatrixView<'a, f64, nalgebra::U1, nalgebra::Dyn, nalgebra::U1, nalgebra::Dyn>;

/// One row per vocabulary word. `method` is unknown for files loaded
/// without a metadata sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Arc<Vocabulary>,
    vectors: DMatrix<f64>,
    method: Option<EmbeddingMethod>,
}

impl EmbeddingMatrix {
    pub fn new(
        vocab: Arc<Vocabulary>,
        vectors: DMatrix<f64>,
        method: Option<EmbeddingMethod>,
    ) -> Result<Self> {
        if vectors.nrows() != vocab.len() {
            return Err(Error::Dimension(format!(
                "{} vectors for {} vocabulary words",
                vectors.nrows(),
                vocab.len()
            )));
        }
        if vectors.ncols() == 0 {
            return Err(Error::Argument("embedding dimension must be at least 1".into()));
        }
        if let Some(k) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite entry for word {}",
                vocab.word(k % vectors.nrows())
            )));
        }
        if method == Some(EmbeddingMethod::Nmf) && vectors.min() < 0.0 {
            return Err(Error::Consistency("NMF embeddings contain negative entries".into()));
        }
        Ok(Self {
            vocab,
            vectors,
            method,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_arc(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn method(&self) -> Option<EmbeddingMethod> {
        self.method
    }

    pub fn d(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, i: usize) -> RowView<'_> {
        self.vectors.row(i)
    }

    pub fn vector_of(&self, word: &str) -> Option<RowView<'_>> {
        self.vocab.index_of(word).map(|i| self.vector(i))
    }

    /// Fraction of entries below `SPARSITY_THRESHOLD` in magnitude.
    pub fn sparsity(&self) -> f64 {
        let zeros = self.vectors.iter().filter(|v| v.abs() < SPARSITY_THRESHOLD).count();
        zeros as f64 / self.vectors.len() as f64
    }
}

/// `U diag(sqrt(S))`.
pub fn svd_embeddings(f: &SvdFactors, vocab: Arc<Vocabulary>) -> Result<EmbeddingMatrix> {
    if let Some(s) = f.s.iter().find(|&&s| s < 0.0) {
        return Err(Error::Argument(format!("negative singular value {s}")));
    }
    let mut vectors = f.u.clone();
    for (c, &s) in f.s.iter().enumerate() {
        vectors.column_mut(c).scale_mut(s.sqrt());
    }
    EmbeddingMatrix::new(vocab, vectors, Some(EmbeddingMethod::Svd))
}

/// Rows of `Q`.
pub fn qr_q_embeddings(f: &QrFactors, vocab: Arc<Vocabulary>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::new(vocab, f.q.clone(), Some(EmbeddingMethod::QrQ))
}

/// Columns of `[R P^T]` over the first `d` rows, in the original word order.
pub fn qr_r_embeddings(f: &QrFactors, vocab: Arc<Vocabulary>) -> Result<EmbeddingMatrix> {
    let vectors = f.r_unpermuted(f.rank()).transpose();
    EmbeddingMatrix::new(vocab, vectors, Some(EmbeddingMethod::QrR))
}

/// Rows of `W`.
pub fn nmf_embeddings(f: &NmfFactors, vocab: Arc<Vocabulary>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::new(vocab, f.w.clone(), Some(EmbeddingMethod::Nmf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetadata {
    pub method: Option<EmbeddingMethod>,
    pub d: usize,
    pub corpus_split: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<f64>,
}

impl EmbeddingMetadata {
    pub fn for_embeddings(e: &EmbeddingMatrix, corpus_split: Option<usize>, seed: Option<u64>) -> Self {
        Self {
            method: e.method(),
            d: e.d(),
            corpus_split,
            seed,
            sparsity: (e.method() == Some(EmbeddingMethod::Nmf)).then(|| e.sparsity()),
        }
    }
}

/// `<path>.meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `n d`, then `word v_1 ... v_d` per row with 9 significant digits.
pub fn save_embeddings(e: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|err| Error::io(path, err))?;
    let mut out = BufWriter::new(file);
    let mut line = String::new();
    writeln!(line, "{} {}", e.len(), e.d()).unwrap();
    for i in 0..e.len() {
        line.push_str(e.vocab.word(i));
        for v in e.vectors.row(i).iter() {
            write!(line, " {v:.8e}").unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(|err| Error::io(path, err))?;
        line.clear();
    }
    out.write_all(line.as_bytes()).map_err(|err| Error::io(path, err))?;
    out.flush().map_err(|err| Error::io(path, err))
}

/// Saves the vectors and a JSON metadata sidecar next to them.
pub fn save_embeddings_with_metadata(
    e: &EmbeddingMatrix,
    path: impl AsRef<Path>,
    meta: &EmbeddingMetadata,
) -> Result<()> {
    let path = path.as_ref();
    if meta.d != e.d() || meta.method != e.method() {
        return Err(Error::Consistency(format!(
            "metadata ({:?}, d = {}) does not describe the matrix ({:?}, d = {})",
            meta.method,
            meta.d,
            e.method(),
            e.d()
        )));
    }
    save_embeddings(e, path)?;
    let meta_path = metadata_path(path);
    let json = serde_json::to_string_pretty(meta)
        .map_err(|err| Error::Consistency(format!("metadata serialization: {err}")))?;
    fs::write(&meta_path, json).map_err(|err| Error::io(&meta_path, err))
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<Option<EmbeddingMetadata>> {
    let meta_path = metadata_path(path.as_ref());
    if !meta_path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&meta_path).map_err(|err| Error::io(&meta_path, err))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|err| Error::parse(meta_path.display().to_string(), err.line(), err.to_string()))
}

/// Loads a word2vec text file. A metadata sidecar, if present, supplies
/// the method tag and must agree with the file's dimension.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let what = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|err| Error::io(path, err))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&what, 1, "missing `n d` header"))?;
    let mut fields = header.split_whitespace();
    let mut header_field = |name: &str| -> Result<usize> {
        fields
            .next()
            .ok_or_else(|| Error::parse(&what, 1, format!("header lacks {name}")))?
            .parse()
            .map_err(|err| Error::parse(&what, 1, format!("bad {name}: {err}")))
    };
    let n = header_field("n")?;
    let d = header_field("d")?;
    if d == 0 {
        return Err(Error::parse(&what, 1, "dimension d must be at least 1"));
    }

    let mut words = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * d);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == n {
            return Err(Error::parse(&what, lineno, format!("more than the declared {n} rows")));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap();
        let before = data.len();
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|err| Error::parse(&what, lineno, format!("bad value {p:?}: {err}")))?;
            data.push(v);
        }
        let got = data.len() - before;
        if got != d {
            return Err(Error::parse(&what, lineno, format!("expected {d} values, found {got}")));
        }
        words.push(word.to_string());
    }
    if words.len() != n {
        return Err(Error::parse(
            &what,
            text.lines().count(),
            format!("header declares {n} rows, file has {}", words.len()),
        ));
    }
    let vocab = Vocabulary::from_words(words)?;
    let vectors = DMatrix::from_row_slice(n, d, &data);

    let method = match load_metadata(path)? {
        Some(meta) => {
            if meta.d != d {
                return Err(Error::Consistency(format!(
                    "metadata declares d = {}, file has d = {d}",
                    meta.d
                )));
            }
            meta.method
        }
        None => None,
    };
    EmbeddingMatrix::new(Arc::new(vocab), vectors, method)
}
