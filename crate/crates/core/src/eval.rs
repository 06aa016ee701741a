//! Similarity and analogy benchmarks, plus the non-negativity analyses for
//! analogy targets.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::stats::special::normal_cdf;
use crate::stats::Task;

/// Components below this count as strictly negative.
pub const NEGATIVITY_THRESHOLD: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityDataset {
    pub pairs: Vec<SimilarityPair>,
}

impl SimilarityDataset {
    pub fn new(pairs: Vec<SimilarityPair>) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite score for ({}, {})",
                p.word1, p.word2
            )));
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `word1,word2,score` lines (tab-separated also accepted). A first
    /// line whose score field is not numeric is taken as a header.
    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let what = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let sep = if line.contains(',') { ',' } else { '\t' };
            let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
            if fields.len() < 3 {
                return Err(Error::parse(&what, lineno, "expected word1, word2, score"));
            }
            let score = match fields[2].parse::<f64>() {
                Ok(s) => s,
                Err(_) if pairs.is_empty() && lineno == 1 => continue,
                Err(e) => return Err(Error::parse(&what, lineno, format!("bad score: {e}"))),
            };
            if !score.is_finite() {
                return Err(Error::parse(&what, lineno, "score is not finite"));
            }
            let norm = |w: &str| if lowercase { w.to_lowercase() } else { w.to_string() };
            pairs.push(SimilarityPair {
                word1: norm(fields[0]),
                word2: norm(fields[1]),
                score,
            });
        }
        Ok(Self { pairs })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    /// Index into `AnalogyDataset::sections`.
    pub section: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnalogyDataset {
    pub sections: Vec<String>,
    pub questions: Vec<AnalogyQuestion>,
}

impl AnalogyDataset {
    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    /// Google analogy format: `: section` lines, then `a b c d` lines.
    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), lowercase)
    }

    pub fn parse(text: &str, what: &str, lowercase: bool) -> Result<Self> {
        let mut ds = AnalogyDataset::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                ds.sections.push(name.trim().to_string());
                continue;
            }
            let words: Vec<String> = line
                .split_whitespace()
                .map(|w| if lowercase { w.to_lowercase() } else { w.to_string() })
                .collect();
            let [a, b, c, d]: [String; 4] = words.try_into().map_err(|w: Vec<String>| {
                Error::parse(what, idx + 1, format!("expected 4 words, found {}", w.len()))
            })?;
            if ds.sections.is_empty() {
                ds.sections.push(String::new());
            }
            ds.questions.push(AnalogyQuestion {
                a,
                b,
                c,
                d,
                section: ds.sections.len() - 1,
            });
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task: Task,
    /// Spearman rho for similarity, accuracy for analogy.
    pub score: f64,
    pub n_used: usize,
    pub n_skipped_oov: usize,
}

/// Ranks starting at 1, ties sharing the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!("{} paired values", x.len())));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("a ranking has zero variance".into()))
}

/// Cosine similarity; zero if either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Row-major copy of the vectors for fast scans.
struct Rows {
    d: usize,
    data: Vec<f64>,
}

impl Rows {
    fn new(e: &EmbeddingMatrix) -> Self {
        let v = e.vectors();
        let d = v.ncols();
        let mut data = Vec::with_capacity(v.len());
        for i in 0..v.nrows() {
            data.extend(v.row(i).iter());
        }
        Self { d, data }
    }

    fn normalized(e: &EmbeddingMatrix) -> Self {
        let mut rows = Self::new(e);
        let d = rows.d;
        for r in rows.data.chunks_mut(d) {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                r.iter_mut().for_each(|x| *x /= n);
            }
        }
        rows
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    fn len(&self) -> usize {
        self.data.len() / self.d
    }
}

pub fn eval_similarity(e: &EmbeddingMatrix, ds: &SimilarityDataset) -> Result<EvalResult> {
    let rows = Rows::new(e);
    let vocab = e.vocab();
    let mut model = Vec::new();
    let mut human = Vec::new();
    for p in &ds.pairs {
        if let (Some(i), Some(j)) = (vocab.index_of(&p.word1), vocab.index_of(&p.word2)) {
            model.push(cosine(rows.row(i), rows.row(j)));
            human.push(p.score);
        }
    }
    if model.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} of {} similarity pairs are in the vocabulary; need at least 2",
            model.len(),
            ds.len()
        )));
    }
    Ok(EvalResult {
        task: Task::Similarity,
        score: spearman(&model, &human)?,
        n_used: model.len(),
        n_skipped_oov: ds.len() - model.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalogyMetric {
    /// `argmin_d ||b - a + c - d||`.
    #[default]
    Euclidean,
    /// `argmax_d cos(d, b^ - a^ + c^)` over unit-normalized vectors.
    Cosine,
}

/// Precomputed scan state for answering many questions.
pub struct AnalogySolver<'a> {
    e: &'a EmbeddingMatrix,
    rows: Rows,
    metric: AnalogyMetric,
}

impl<'a> AnalogySolver<'a> {
    pub fn new(e: &'a EmbeddingMatrix, metric: AnalogyMetric) -> Self {
        let rows = match metric {
            AnalogyMetric::Euclidean => Rows::new(e),
            AnalogyMetric::Cosine => Rows::normalized(e),
        };
        Self { e, rows, metric }
    }

    fn index(&self, w: &str) -> Result<usize> {
        self.e
            .vocab()
            .index_of(w)
            .ok_or_else(|| Error::OutOfVocabulary(w.to_string()))
    }

    fn target(&self, a: usize, b: usize, c: usize) -> Vec<f64> {
        let (ra, rb, rc) = (self.rows.row(a), self.rows.row(b), self.rows.row(c));
        (0..self.rows.d).map(|k| rb[k] - ra[k] + rc[k]).collect()
    }

    /// Best candidate index other than `a`, `b`, `c`; ties go to the
    /// lowest index. `None` if the vocabulary has no other word.
    pub fn solve_indices(&self, a: usize, b: usize, c: usize) -> Option<usize> {
        let t = self.target(a, b, c);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.rows.len() {
            if j == a || j == b || j == c {
                continue;
            }
            let r = self.rows.row(j);
            // lower is better in both modes
            let score = match self.metric {
                AnalogyMetric::Euclidean => t.iter().zip(r).map(|(x, y)| (x - y) * (x - y)).sum::<f64>(),
                AnalogyMetric::Cosine => -t.iter().zip(r).map(|(x, y)| x * y).sum::<f64>(),
            };
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    pub fn solve(&self, a: &str, b: &str, c: &str) -> Result<String> {
        let (ia, ib, ic) = (self.index(a)?, self.index(b)?, self.index(c)?);
        let j = self.solve_indices(ia, ib, ic).ok_or_else(|| {
            Error::InsufficientData("vocabulary has no candidate besides the query words".into())
        })?;
        Ok(self.e.vocab().word(j).to_string())
    }
}

/// Euclidean analogy answer for `a : b :: c : ?`.
pub fn solve_analogy(e: &EmbeddingMatrix, a: &str, b: &str, c: &str) -> Result<String> {
    AnalogySolver::new(e, AnalogyMetric::Euclidean).solve(a, b, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionResult {
    pub name: String,
    pub correct: usize,
    pub n_used: usize,
    pub n_skipped_oov: usize,
    /// Absent when every question in the section was skipped.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyReport {
    pub overall: EvalResult,
    pub correct: usize,
    pub sections: Vec<SectionResult>,
}

/// Per-question indices when all four words are known.
fn resolve(e: &EmbeddingMatrix, q: &AnalogyQuestion) -> Option<[usize; 4]> {
    let v = e.vocab();
    Some([
        v.index_of(&q.a)?,
        v.index_of(&q.b)?,
        v.index_of(&q.c)?,
        v.index_of(&q.d)?,
    ])
}

pub fn eval_analogy(e: &EmbeddingMatrix, ds: &AnalogyDataset) -> Result<AnalogyReport> {
    eval_analogy_with(e, ds, AnalogyMetric::Euclidean)
}

pub fn eval_analogy_with(
    e: &EmbeddingMatrix,
    ds: &AnalogyDataset,
    metric: AnalogyMetric,
) -> Result<AnalogyReport> {
    let solver = AnalogySolver::new(e, metric);
    // None: skipped; Some(hit)
    let outcomes: Vec<Option<bool>> = ds
        .questions
        .par_iter()
        .map(|q| {
            resolve(e, q).map(|[a, b, c, d]| solver.solve_indices(a, b, c) == Some(d))
        })
        .collect();

    let mut sections: Vec<SectionResult> = ds
        .sections
        .iter()
        .map(|name| SectionResult {
            name: name.clone(),
            correct: 0,
            n_used: 0,
            n_skipped_oov: 0,
            accuracy: None,
        })
        .collect();
    for (q, o) in ds.questions.iter().zip(&outcomes) {
        let s = &mut sections[q.section];
        match o {
            Some(hit) => {
                s.n_used += 1;
                s.correct += usize::from(*hit);
            }
            None => s.n_skipped_oov += 1,
        }
    }
    for s in &mut sections {
        s.accuracy = (s.n_used > 0).then(|| s.correct as f64 / s.n_used as f64);
    }
    let n_used: usize = sections.iter().map(|s| s.n_used).sum();
    let correct: usize = sections.iter().map(|s| s.correct).sum();
    if n_used == 0 {
        return Err(Error::InsufficientData(format!(
            "none of the {} analogy questions is fully in the vocabulary",
            ds.len()
        )));
    }
    Ok(AnalogyReport {
        overall: EvalResult {
            task: Task::Analogy,
            score: correct as f64 / n_used as f64,
            n_used,
            n_skipped_oov: ds.len() - n_used,
        },
        correct,
        sections,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    /// Share of usable triplets whose `b - a + c` has a component below
    /// `NEGATIVITY_THRESHOLD`; zero when nothing was usable.
    pub fraction: f64,
    pub n_negative: usize,
    pub n_used: usize,
    pub n_skipped_oov: usize,
}

/// Only `a`, `b`, `c` need to be in the vocabulary.
pub fn negativity_check(e: &EmbeddingMatrix, ds: &AnalogyDataset) -> NegativityReport {
    if e.vectors().min() < 0.0 {
        log::warn!("event=negativity_check_on_signed_embeddings min={:e}", e.vectors().min());
    }
    let rows = Rows::new(e);
    let v = e.vocab();
    let outcomes: Vec<Option<bool>> = ds
        .questions
        .par_iter()
        .map(|q| {
            let (a, b, c) = (v.index_of(&q.a)?, v.index_of(&q.b)?, v.index_of(&q.c)?);
            let (ra, rb, rc) = (rows.row(a), rows.row(b), rows.row(c));
            Some((0..rows.d).any(|k| rb[k] - ra[k] + rc[k] < NEGATIVITY_THRESHOLD))
        })
        .collect();
    let n_used = outcomes.iter().flatten().count();
    let n_negative = outcomes.iter().flatten().filter(|&&neg| neg).count();
    NegativityReport {
        fraction: if n_used > 0 { n_negative as f64 / n_used as f64 } else { 0.0 },
        n_negative,
        n_used,
        n_skipped_oov: ds.len() - n_used,
    }
}

/// Probability that every component of `N(mean * 1, variance * I_d)` is
/// non-negative: `Phi(mean / sigma)^d`.
pub fn gaussian_nonneg_prob(mean: f64, variance: f64, d: usize) -> Result<f64> {
    if variance.is_nan() || variance <= 0.0 || !variance.is_finite() || !mean.is_finite() {
        return Err(Error::Argument(format!(
            "need finite mean and positive variance, got mean {mean}, variance {variance}"
        )));
    }
    if d == 0 {
        return Err(Error::Argument("dimension must be at least 1".into()));
    }
    let phi = normal_cdf(mean / variance.sqrt());
    Ok(phi.powf(d as f64))
}
