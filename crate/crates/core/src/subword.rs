//! Character n-gram extraction, hashing, and the word-to-input-rows index.
//!
//! Each word is bracketed as `<word>` and its n-grams for n in
//! `[minn, maxn]` are hashed into `bucket_count` rows that follow the
//! vocabulary rows in the input matrix. The word keeps its own dedicated row
//! distinct from any hashed n-gram, so `rows(word)` always has
//! `1 + #ngrams` entries for in-vocabulary words. A `bucket_count` of zero
//! disables subwords entirely (word-only models).

use crate::vocab::Vocabulary;

/// Character n-grams of `<word>` for each n in `[minn, maxn]`, in n order
/// then left to right. Empty when `minn > maxn` or the bracketed word is
/// shorter than `minn`.
pub fn char_ngrams(word: &str, minn: u32, maxn: u32) -> Vec<String> {
    let bracketed: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    let mut n = minn as usize;
    while n <= maxn as usize && n <= bracketed.len() {
        for window in bracketed.windows(n) {
            out.push(window.iter().collect());
        }
        n += 1;
    }
    out
}

/// The n-grams of `word` plus the full-word token itself (last).
pub fn extract_subwords(word: &str, minn: u32, maxn: u32) -> Vec<String> {
    let mut out = char_ngrams(word, minn, maxn);
    out.push(word.to_string());
    out
}

/// FNV-1a 32-bit over the n-gram's UTF-8 bytes, modulo `bucket_count`.
/// Stable across runs and platforms.
pub fn hash_subword(ngram: &str, bucket_count: u32) -> u32 {
    debug_assert!(bucket_count >= 1);
    let mut h: u32 = 0x811c_9dc5;
    for b in ngram.as_bytes() {
        h ^= *b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h % bucket_count
}

/// Precomputed input-matrix row lists per vocabulary word.
#[derive(Debug, Clone)]
pub struct SubwordIndex {
    minn: u32,
    maxn: u32,
    bucket_count: u32,
    vocab_size: u32,
    rows: Vec<Vec<u32>>,
}

impl SubwordIndex {
    pub fn build(vocab: &Vocabulary, minn: u32, maxn: u32, bucket_count: u32) -> SubwordIndex {
        let vocab_size = vocab.len() as u32;
        let rows = vocab
            .words()
            .iter()
            .enumerate()
            .map(|(id, word)| {
                let mut rows = vec![id as u32];
                if bucket_count > 0 {
                    rows.extend(
                        char_ngrams(word, minn, maxn)
                            .iter()
                            .map(|g| vocab_size + hash_subword(g, bucket_count)),
                    );
                }
                rows
            })
            .collect();
        SubwordIndex {
            minn,
            maxn,
            bucket_count,
            vocab_size,
            rows,
        }
    }

    /// Input rows for an in-vocabulary word: its own row plus hashed n-grams.
    pub fn rows(&self, word_id: u32) -> &[u32] {
        &self.rows[word_id as usize]
    }

    /// Input rows for an out-of-vocabulary word: hashed n-grams only. Empty
    /// when subwords are disabled or the word yields no n-grams.
    pub fn oov_rows(&self, word: &str) -> Vec<u32> {
        if self.bucket_count == 0 {
            return Vec::new();
        }
        char_ngrams(word, self.minn, self.maxn)
            .iter()
            .map(|g| self.vocab_size + hash_subword(g, self.bucket_count))
            .collect()
    }

    /// Total input-matrix rows: vocabulary words plus hash buckets.
    pub fn input_rows(&self) -> usize {
        self.vocab_size as usize + self.bucket_count as usize
    }

    pub fn minn(&self) -> u32 {
        self.minn
    }

    pub fn maxn(&self) -> u32 {
        self.maxn
    }

    pub fn bucket_count(&self) -> u32 {
        self.bucket_count
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }
}
