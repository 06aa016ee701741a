//! Corpus ingestion: tokenization, vocabulary construction, replicate
//! splitting and windowed co-occurrence counting.
//!
//! Sentences are kept as explicit boundaries in [`TokenizedCorpus`];
//! co-occurrence windows never cross them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Drop markup tags, character entities and URLs before tokenizing.
    pub strip_non_textual: bool,
    pub min_token_length: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_non_textual: true,
            min_token_length: 1,
        }
    }
}

/// A token sequence with sentence boundaries.
///
/// `offsets` has one more entry than there are sentences; sentence `s`
/// spans `tokens[offsets[s]..offsets[s + 1]]`. Empty sentences are never
/// stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedCorpus {
    tokens: Vec<String>,
    offsets: Vec<usize>,
}

impl TokenizedCorpus {
    pub fn new() -> Self {
        Self {
            tokens: Vec::new(),
            offsets: vec![0],
        }
    }

    pub fn from_sentences<I, S, T>(sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let mut corpus = Self::new();
        for sentence in sentences {
            corpus.push_sentence(sentence.into_iter().map(Into::into));
        }
        corpus
    }

    pub fn push_sentence(&mut self, tokens: impl IntoIterator<Item = String>) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.tokens.extend(tokens);
        if self.tokens.len() > *self.offsets.last().unwrap() {
            self.offsets.push(self.tokens.len());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_sentences(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token offsets of sentence starts, terminated by `len()`.
    pub fn sentence_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn sentence(&self, s: usize) -> &[String] {
        &self.tokens[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[String]> + '_ {
        self.offsets.windows(2).map(|w| &self.tokens[w[0]..w[1]])
    }

    /// Copy of the token range `[start, end)`, cutting sentences at the ends.
    fn slice(&self, start: usize, end: usize) -> TokenizedCorpus {
        let mut out = TokenizedCorpus::new();
        for w in self.offsets.windows(2) {
            let (a, b) = (w[0].max(start), w[1].min(end));
            if a < b {
                out.push_sentence(self.tokens[a..b].iter().cloned());
            }
        }
        out
    }
}

/// Tokenize raw bytes. Invalid UTF-8 sequences are replaced, not rejected.
pub fn tokenize(raw: &[u8], config: &TokenizerConfig) -> TokenizedCorpus {
    let text = String::from_utf8_lossy(raw);
    let text = if config.strip_non_textual {
        strip_non_textual(&text)
    } else {
        text.into_owned()
    };

    let min_len = config.min_token_length.max(1);
    let mut corpus = TokenizedCorpus::new();
    let mut sentence: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut pending_end = false;

    let flush_token = |current: &mut String, sentence: &mut Vec<String>| {
        if !current.is_empty() {
            if current.chars().count() >= min_len {
                let tok = if config.lowercase {
                    current.to_lowercase()
                } else {
                    current.clone()
                };
                sentence.push(tok);
            }
            current.clear();
        }
    };

    for ch in text.chars() {
        if ch.is_alphanumeric() {
            pending_end = false;
            current.push(ch);
            continue;
        }
        flush_token(&mut current, &mut sentence);
        if ch.is_whitespace() {
            if pending_end {
                corpus.push_sentence(sentence.drain(..));
                pending_end = false;
            }
        } else {
            pending_end = matches!(ch, '.' | '!' | '?');
        }
    }
    flush_token(&mut current, &mut sentence);
    corpus.push_sentence(sentence);
    corpus
}

pub fn tokenize_file(path: impl AsRef<Path>, config: &TokenizerConfig) -> Result<TokenizedCorpus> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(tokenize(&raw, config))
}

/// Removes `<...>` tags, `&name;` / `&#nnn;` entities and bare URLs.
fn strip_non_textual(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            if let Some(end) = chars[i + 1..].iter().take(512).position(|&x| x == '>') {
                out.push(' ');
                i += end + 2;
                continue;
            }
        } else if c == '&' {
            let tail = &chars[i + 1..];
            if let Some(end) = tail.iter().take(10).position(|&x| x == ';') {
                let body = &tail[..end];
                let is_entity = !body.is_empty()
                    && (body.iter().all(|x| x.is_ascii_alphabetic())
                        || (body[0] == '#' && body[1..].iter().all(|x| x.is_ascii_alphanumeric())));
                if is_entity {
                    out.push(' ');
                    i += end + 2;
                    continue;
                }
            }
        } else if starts_url(&chars[i..]) {
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
            out.push(' ');
            continue;
        }
        out.push(c);
        i += 1;
    }
    out
}

fn starts_url(s: &[char]) -> bool {
    ["http://", "https://", "www."]
        .iter()
        .any(|p| p.chars().count() <= s.len() && p.chars().zip(s).all(|(a, &b)| a == b))
}

/// Word/index bijection with frequency counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, count)` entries kept in the given order.
    pub fn from_entries(entries: Vec<(String, u64)>, min_count: u64) -> Result<Self> {
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (w, c)) in entries.into_iter().enumerate() {
            if w.is_empty() {
                return Err(Error::Argument(format!("empty word at index {i}")));
            }
            if c < min_count {
                return Err(Error::Argument(format!(
                    "word {w:?} has count {c} below minimum {min_count}"
                )));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Argument(format!("duplicate word {w:?}")));
            }
            words.push(w);
            counts.push(c);
        }
        Ok(Self {
            words,
            counts,
            index,
            min_count,
        })
    }

    /// Vocabulary for word lists without known frequencies (counts are zero).
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Result<Self> {
        Self::from_entries(words.into_iter().map(|w| (w, 0)).collect(), 0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count_of(&self, word: &str) -> Option<u64> {
        self.index_of(word).map(|i| self.counts[i])
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Writes `word<TAB>count` lines in vocabulary order.
    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(w, "{word}\t{count}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a TSV vocabulary; the minimum count is taken as the smallest count present.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let what = path.display().to_string();
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(&what, lineno + 1, "expected word<TAB>count"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(&what, lineno + 1, format!("bad count {count:?}")))?;
            entries.push((word.to_string(), count));
        }
        let min = entries.iter().map(|e| e.1).min().unwrap_or(0);
        Self::from_entries(entries, min)
    }
}

/// Keeps words with frequency `>= min_count`, ordered by descending
/// frequency with lexicographic tie-breaking.
pub fn build_vocabulary(corpus: &TokenizedCorpus, min_count: u64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Argument("min_count must be at least 1".into()));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for tok in corpus.tokens() {
        *freq.entry(tok.as_str()).or_insert(0) += 1;
    }
    let mut kept: Vec<(String, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_entries(kept, min_count)
}

/// Splits into `k` contiguous chunks of near-equal token count (sizes
/// differ by at most one, larger chunks first). A cut inside a sentence
/// ends that sentence in both chunks.
pub fn split_corpus(corpus: &TokenizedCorpus, k: usize) -> Result<Vec<TokenizedCorpus>> {
    let n = corpus.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!(
            "cannot split {n} tokens into {k} chunks"
        )));
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let size = base + usize::from(c < extra);
        out.push(corpus.slice(start, start + size));
        start += size;
    }
    Ok(out)
}

/// Splits into `k` chunks, cutting only at the sentence boundary nearest
/// each ideal token cut point. Every chunk holds at least one sentence.
pub fn split_corpus_aligned(corpus: &TokenizedCorpus, k: usize) -> Result<Vec<TokenizedCorpus>> {
    let n_sent = corpus.n_sentences();
    if k == 0 || k > n_sent {
        return Err(Error::Argument(format!(
            "cannot split {n_sent} sentences into {k} chunks"
        )));
    }
    let offsets = corpus.sentence_offsets();
    let n = corpus.len() as f64;
    let mut cuts = vec![0usize];
    for m in 1..k {
        let target = n * m as f64 / k as f64;
        let lo = cuts[m - 1] + 1;
        let hi = n_sent - (k - m);
        let best = (lo..=hi)
            .min_by(|&a, &b| {
                let da = (offsets[a] as f64 - target).abs();
                let db = (offsets[b] as f64 - target).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("non-empty boundary range");
        cuts.push(best);
    }
    cuts.push(n_sent);
    Ok(cuts
        .windows(2)
        .map(|w| corpus.slice(offsets[w[0]], offsets[w[1]]))
        .collect())
}

/// Symmetric sparse word-pair counts from windowed scanning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    n: usize,
    window: usize,
    /// Sorted by `(i, j)`, counts >= 1.
    pairs: Vec<(u32, u32, u64)>,
    total_pairs: u64,
    row_marginals: Vec<u64>,
}

impl CooccurrenceCounts {
    /// Builds counts from `(i, j, count)` triples. Duplicates are summed;
    /// the result must be symmetric.
    pub fn from_pairs(
        n: usize,
        window: usize,
        pairs: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self> {
        let mut map: HashMap<(u32, u32), u64> = HashMap::new();
        for (i, j, c) in pairs {
            if i >= n || j >= n {
                return Err(Error::Argument(format!("pair ({i}, {j}) outside n = {n}")));
            }
            if c > 0 {
                *map.entry((i as u32, j as u32)).or_insert(0) += c;
            }
        }
        for (&(i, j), &c) in &map {
            if map.get(&(j, i)) != Some(&c) {
                return Err(Error::Consistency(format!(
                    "asymmetric counts at ({i}, {j})"
                )));
            }
        }
        Ok(Self::from_map(n, window, map))
    }

    fn from_map(n: usize, window: usize, map: HashMap<(u32, u32), u64>) -> Self {
        let mut pairs: Vec<(u32, u32, u64)> = map.into_iter().map(|((i, j), c)| (i, j, c)).collect();
        pairs.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_marginals = vec![0u64; n];
        let mut total_pairs = 0u64;
        for &(i, _, c) in &pairs {
            row_marginals[i as usize] += c;
            total_pairs += c;
        }
        Self {
            n,
            window,
            pairs,
            total_pairs,
            row_marginals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    pub fn row_marginals(&self) -> &[u64] {
        &self.row_marginals
    }

    /// Number of stored `(i, j)` entries.
    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.pairs
            .binary_search_by_key(&(i as u32, j as u32), |&(a, b, _)| (a, b))
            .map(|k| self.pairs[k].2)
            .unwrap_or(0)
    }

    /// Stored entries in `(i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.pairs
            .iter()
            .map(|&(i, j, c)| (i as usize, j as usize, c))
    }

    /// Entry-wise sum of count tables over the same vocabulary.
    pub fn merged(parts: &[CooccurrenceCounts]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("nothing to merge".into()))?;
        let mut map: HashMap<(u32, u32), u64> = HashMap::new();
        for p in parts {
            if p.n != first.n || p.window != first.window {
                return Err(Error::Dimension(format!(
                    "cannot merge counts with n={} window={} into n={} window={}",
                    p.n, p.window, first.n, first.window
                )));
            }
            for &(i, j, c) in &p.pairs {
                *map.entry((i, j)).or_insert(0) += c;
            }
        }
        Ok(Self::from_map(first.n, first.window, map))
    }

    /// Text coordinate format: header `n total_pairs`, then `i j count`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut buf = String::new();
        writeln!(buf, "{} {}", self.n, self.total_pairs).unwrap();
        for &(i, j, c) in &self.pairs {
            writeln!(buf, "{i} {j} {c}").unwrap();
            if buf.len() > 1 << 16 {
                w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
                buf.clear();
            }
        }
        w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads the text coordinate format; `window` is not stored in the file.
    pub fn load(path: impl AsRef<Path>, window: usize) -> Result<Self> {
        let path = path.as_ref();
        let what = path.display().to_string();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(&what, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let nums: Vec<u64> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(&what, 1, "header must be `n total_pairs`"))?;
        let [n, total] = nums[..] else {
            return Err(Error::parse(&what, 1, "header must be `n total_pairs`"));
        };
        let mut triples = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<u64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(&what, k + 2, "expected `i j count`"))?;
            let [i, j, c] = v[..] else {
                return Err(Error::parse(&what, k + 2, "expected `i j count`"));
            };
            triples.push((i as usize, j as usize, c));
        }
        let counts = Self::from_pairs(n as usize, window, triples)?;
        if counts.total_pairs != total {
            return Err(Error::parse(
                &what,
                1,
                format!("header total {total} but entries sum to {}", counts.total_pairs),
            ));
        }
        Ok(counts)
    }
}

/// Counts `(focus, context)` pairs for in-vocabulary tokens within
/// `window` positions on either side, inside a sentence. Out-of-vocabulary
/// tokens keep their positions.
pub fn count_cooccurrences(
    corpus: &TokenizedCorpus,
    vocab: &Vocabulary,
    window: usize,
) -> Result<CooccurrenceCounts> {
    if window == 0 {
        return Err(Error::Argument("window must be at least 1".into()));
    }
    let ids: Vec<Option<u32>> = corpus
        .tokens()
        .iter()
        .map(|t| vocab.index_of(t).map(|i| i as u32))
        .collect();
    let offsets = corpus.sentence_offsets();
    let n_sent = corpus.n_sentences();
    let shard = (n_sent / (4 * rayon::current_num_threads()).max(1)).max(1024);

    let map = (0..n_sent)
        .into_par_iter()
        .with_min_len(shard)
        .fold(HashMap::<(u32, u32), u64>::new, |mut acc, s| {
            let sent = &ids[offsets[s]..offsets[s + 1]];
            for (t, focus) in sent.iter().enumerate() {
                let Some(f) = *focus else { continue };
                let lo = t.saturating_sub(window);
                let hi = (t + window).min(sent.len() - 1);
                for (u, ctx) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                    if u == t {
                        continue;
                    }
                    if let Some(c) = *ctx {
                        *acc.entry((f, c)).or_insert(0) += 1;
                    }
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, std::mem::take(&mut a)) };
            for (k, v) in small {
                *big.entry(k).or_insert(0) += v;
            }
            big
        });

    Ok(CooccurrenceCounts::from_map(vocab.len(), window, map))
}
