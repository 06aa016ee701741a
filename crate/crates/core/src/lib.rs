//! PPMI word embeddings from low-rank factorizations, with similarity and
//! analogy evaluation and two-way ANOVA of the resulting scores.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod factorize;
pub mod ppmi;
pub mod sparse;
pub mod stats;

pub use nalgebra::{DMatrix, DVector};

pub use corpus::{
    build_vocabulary, count_cooccurrences, split_corpus, split_corpus_aligned, tokenize, tokenize_file,
    CooccurrenceCounts, TokenizedCorpus, TokenizerConfig, Vocabulary,
};
pub use embed::{
    load_embeddings, nmf_embeddings, qr_q_embeddings, qr_r_embeddings, save_embeddings, svd_embeddings,
    EmbeddingMatrix, EmbeddingMetadata, EmbeddingMethod,
};
pub use error::{Error, Result};
pub use eval::{
    eval_analogy, eval_similarity, gaussian_nonneg_prob, negativity_check, solve_analogy, spearman,
    AnalogyDataset, AnalogyMetric, AnalogyReport, EvalResult, NegativityReport, SimilarityDataset,
};
pub use factorize::{
    approximation_error, nmf, nndsvd_init, pivoted_qr, pivoted_qr_full, rrqr_spectrum_check, truncated_svd,
    FactorizationResult, Method, NmfFactors, QrFactors, SvdFactors,
};
pub use ppmi::{compute_pmi, compute_ppmi, Marginals, ProbabilityModel};
pub use sparse::SparseMatrix;
pub use stats::{
    f_pvalue, residuals, shapiro_wilk, two_way_anova, AnovaTable, Observation, ShapiroWilk, Task,
    TwoWayAnova,
};
