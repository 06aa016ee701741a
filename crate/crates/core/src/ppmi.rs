//! Pointwise mutual information over co-occurrence counts.

use serde::{Deserialize, Serialize};

use crate::corpus::{CooccurrenceCounts, Vocabulary};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// How the single-word probabilities are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marginals {
    /// `row_marginals[i] / total_pairs`.
    #[default]
    PairMarginal,
    /// Corpus frequency of the word over the summed vocabulary frequency.
    Unigram,
}

/// Joint and marginal probabilities derived from counts.
#[derive(Debug, Clone)]
pub struct ProbabilityModel<'a> {
    counts: &'a CooccurrenceCounts,
    p_word: Vec<f64>,
}

impl<'a> ProbabilityModel<'a> {
    pub fn pair_marginal(counts: &'a CooccurrenceCounts) -> Result<Self> {
        let total = counts.total_pairs();
        if total == 0 {
            return Err(Error::Argument("co-occurrence table is empty".into()));
        }
        let t = total as f64;
        let p_word = counts.row_marginals().iter().map(|&m| m as f64 / t).collect();
        Ok(Self { counts, p_word })
    }

    pub fn unigram(counts: &'a CooccurrenceCounts, vocab: &Vocabulary) -> Result<Self> {
        if counts.total_pairs() == 0 {
            return Err(Error::Argument("co-occurrence table is empty".into()));
        }
        if vocab.len() != counts.n() {
            return Err(Error::Dimension(format!(
                "vocabulary has {} words, counts have n = {}",
                vocab.len(),
                counts.n()
            )));
        }
        let total: u64 = vocab.counts().iter().sum();
        if total == 0 {
            return Err(Error::Consistency("vocabulary carries no frequencies".into()));
        }
        let t = total as f64;
        let p_word = vocab.counts().iter().map(|&c| c as f64 / t).collect();
        Ok(Self { counts, p_word })
    }

    pub fn new(
        counts: &'a CooccurrenceCounts,
        marginals: Marginals,
        vocab: Option<&Vocabulary>,
    ) -> Result<Self> {
        match (marginals, vocab) {
            (Marginals::PairMarginal, _) => Self::pair_marginal(counts),
            (Marginals::Unigram, Some(v)) => Self::unigram(counts, v),
            (Marginals::Unigram, None) => Err(Error::Argument(
                "unigram marginals need the vocabulary counts".into(),
            )),
        }
    }

    pub fn p_pair(&self, i: usize, j: usize) -> f64 {
        self.counts.get(i, j) as f64 / self.counts.total_pairs() as f64
    }

    pub fn p_word(&self, i: usize) -> f64 {
        self.p_word[i]
    }

    pub fn p_words(&self) -> &[f64] {
        &self.p_word
    }

    /// PMI of an observed pair, evaluated with the smaller index first so
    /// that `(i, j)` and `(j, i)` produce identical bits.
    fn pmi_of(&self, i: usize, j: usize, count: u64) -> Result<f64> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let (pl, ph) = (self.p_word[lo], self.p_word[hi]);
        if pl <= 0.0 || ph <= 0.0 {
            let idx = if pl <= 0.0 { lo } else { hi };
            return Err(Error::Consistency(format!(
                "word {idx} has zero marginal probability but observed pairs"
            )));
        }
        let joint = count as f64 / self.counts.total_pairs() as f64;
        Ok((joint / (pl * ph)).ln())
    }

    fn build(&self, keep_positive_only: bool) -> Result<SparseMatrix> {
        let n = self.counts.n();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(self.counts.nnz());
        let mut values = Vec::with_capacity(self.counts.nnz());
        row_offsets.push(0);
        let mut row = 0;
        for (i, j, c) in self.counts.iter() {
            while row < i {
                row_offsets.push(col_indices.len());
                row += 1;
            }
            let v = self.pmi_of(i, j, c)?;
            if !keep_positive_only || v > 0.0 {
                col_indices.push(j);
                values.push(v);
            }
        }
        while row < n {
            row_offsets.push(col_indices.len());
            row += 1;
        }
        SparseMatrix::new(n, n, row_offsets, col_indices, values)
    }

    /// PMI over observed pairs; unobserved pairs are absent.
    pub fn pmi(&self) -> Result<SparseMatrix> {
        self.build(false)
    }

    /// `max(PMI, 0)` with non-positive entries dropped.
    pub fn ppmi(&self) -> Result<SparseMatrix> {
        self.build(true)
    }
}

/// PMI of every observed pair with pair-marginal probabilities.
pub fn compute_pmi(counts: &CooccurrenceCounts) -> Result<SparseMatrix> {
    ProbabilityModel::pair_marginal(counts)?.pmi()
}

/// Positive PMI with pair-marginal probabilities.
pub fn compute_ppmi(counts: &CooccurrenceCounts) -> Result<SparseMatrix> {
    ProbabilityModel::pair_marginal(counts)?.ppmi()
}
