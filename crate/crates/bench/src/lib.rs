//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use ppmi_lowrank::{build_vocabulary, count_cooccurrences, tokenize_file, SparseMatrix, TokenizedCorpus, TokenizerConfig, Vocabulary};

pub fn fixture_corpus() -> TokenizedCorpus {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus.txt");
    tokenize_file(path, &TokenizerConfig::default()).expect("fixture corpus")
}

/// Vocabulary and PPMI matrix of the fixture corpus at `min_count`, window 2.
pub fn fixture_ppmi(min_count: u64) -> (TokenizedCorpus, Vocabulary, SparseMatrix) {
    let corpus = fixture_corpus();
    let vocab = build_vocabulary(&corpus, min_count).expect("vocabulary");
    let counts = count_cooccurrences(&corpus, &vocab, 2).expect("counts");
    let ppmi = ppmi_lowrank::compute_ppmi(&counts).expect("ppmi");
    (corpus, vocab, ppmi)
}
