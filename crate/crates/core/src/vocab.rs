//! Vocabulary construction over confusion networks, frequent-word
//! subsampling, and the unigram^0.75 negative-sampling table.
//!
//! Counts accumulate one per alternative occurrence: every word on every arc
//! counts once, posterior-unweighted. `<eps>` is never counted. Word ids are
//! dense `0..V-1`, sorted by descending count with lexicographic tie-breaks.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;

use crate::cn::{is_eps, ConfusionNetwork};
use crate::error::{Error, Result};

/// Default number of entries in the negative-sampling table.
pub const DEFAULT_NEG_TABLE_SIZE: usize = 10_000_000;

/// Subsampling keep probability for a word with `count` occurrences out of
/// `total`, at rejection threshold `t`: with `f = count/total`,
/// `keep = min(1, (sqrt(f/t) + 1) * (t/f))`, the form used by the reference
/// skip-gram implementation.
pub fn keep_probability(count: u64, total: u64, t: f64) -> f64 {
    debug_assert!(count >= 1 && t > 0.0);
    let f = count as f64 / total as f64;
    if f <= t {
        return 1.0;
    }
    (((f / t).sqrt() + 1.0) * (t / f)).min(1.0)
}

/// Immutable word inventory with counts and per-word keep probabilities.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
    keep_prob: Vec<f64>,
    subsample_t: f64,
}

/// Streaming count accumulator; feed networks, then [`VocabBuilder::finish`].
#[derive(Debug, Default)]
pub struct VocabBuilder {
    counts: HashMap<String, u64>,
    saw_tokens: bool,
}

impl VocabBuilder {
    pub fn new() -> Self {
        VocabBuilder::default()
    }

    pub fn add_network(&mut self, cn: &ConfusionNetwork) {
        for slot in &cn.slots {
            for alt in &slot.alternatives {
                if is_eps(&alt.word) {
                    continue;
                }
                self.saw_tokens = true;
                *self.counts.entry(alt.word.clone()).or_insert(0) += 1;
            }
        }
    }

    /// Prunes words below `min_count`, assigns dense ids, and computes keep
    /// probabilities at rejection threshold `subsample_t`.
    pub fn finish(self, min_count: u64, subsample_t: f64) -> Result<Vocabulary> {
        if !self.saw_tokens {
            return Err(Error::EmptyCorpus);
        }
        let mut retained: Vec<(String, u64)> = self
            .counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        if retained.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        retained.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let total_tokens: u64 = retained.iter().map(|&(_, c)| c).sum();
        let mut words = Vec::with_capacity(retained.len());
        let mut counts = Vec::with_capacity(retained.len());
        let mut index = HashMap::with_capacity(retained.len());
        let mut keep_prob = Vec::with_capacity(retained.len());
        for (id, (word, count)) in retained.into_iter().enumerate() {
            index.insert(word.clone(), id as u32);
            keep_prob.push(keep_probability(count, total_tokens, subsample_t));
            words.push(word);
            counts.push(count);
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
            keep_prob,
            subsample_t,
        })
    }
}

impl Vocabulary {
    /// Builds a vocabulary from a network stream in one pass.
    pub fn build<I>(networks: I, min_count: u64, subsample_t: f64) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = Result<ConfusionNetwork>>,
    {
        let mut builder = VocabBuilder::new();
        for net in networks {
            builder.add_network(&net?);
        }
        builder.finish(min_count, subsample_t)
    }

    /// Reconstructs a vocabulary from an id-ordered `(word, count)` list, as
    /// stored in model files. The list must already be id-ordered.
    pub(crate) fn from_sorted_counts(
        pairs: Vec<(String, u64)>,
        subsample_t: f64,
    ) -> Result<Vocabulary> {
        if pairs.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let total_tokens: u64 = pairs.iter().map(|&(_, c)| c).sum();
        let mut words = Vec::with_capacity(pairs.len());
        let mut counts = Vec::with_capacity(pairs.len());
        let mut index = HashMap::with_capacity(pairs.len());
        let mut keep_prob = Vec::with_capacity(pairs.len());
        for (id, (word, count)) in pairs.into_iter().enumerate() {
            index.insert(word.clone(), id as u32);
            keep_prob.push(keep_probability(count.max(1), total_tokens, subsample_t));
            words.push(word);
            counts.push(count);
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
            keep_prob,
            subsample_t,
        })
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

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// Sum of retained word counts.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn keep_prob(&self, id: u32) -> f64 {
        self.keep_prob[id as usize]
    }

    pub fn subsample_threshold(&self) -> f64 {
        self.subsample_t
    }

    /// Diagnostic dump: TSV `word<TAB>count` in descending-count order.
    pub fn write_counts<W: Write>(&self, w: &mut W) -> Result<()> {
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(w, "{word}\t{count}")?;
        }
        Ok(())
    }
}

/// Word2vec-style negative-sampling table: draws word ids with probability
/// proportional to `count^power`.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    table: Vec<u32>,
}

impl NegativeTable {
    pub fn build(vocab: &Vocabulary, power: f64, table_size: usize) -> Result<NegativeTable> {
        if table_size < vocab.len() {
            return Err(Error::invalid(format!(
                "negative table size {table_size} smaller than vocabulary {}",
                vocab.len()
            )));
        }
        let weights: Vec<f64> = (0..vocab.len())
            .map(|i| (vocab.count(i as u32) as f64).powf(power))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut table = Vec::with_capacity(table_size);
        let mut word = 0usize;
        let mut cumulative = weights[0] / total;
        for slot in 0..table_size {
            table.push(word as u32);
            if (slot + 1) as f64 / table_size as f64 > cumulative && word + 1 < vocab.len() {
                word += 1;
                cumulative += weights[word] / total;
            }
        }
        Ok(NegativeTable { table })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> u32 {
        self.table[rng.random_range(0..self.table.len())]
    }

    pub fn size(&self) -> usize {
        self.table.len()
    }

    /// Fraction of table entries assigned to `id`.
    pub fn proportion(&self, id: u32) -> f64 {
        self.table.iter().filter(|&&w| w == id).count() as f64 / self.table.len() as f64
    }
}
