//! Pronunciation lexicon, phone edit distance, acoustic similarity,
//! confusable lookup, synthetic confusion-network generation, and acoustic
//! task-set generation.
//!
//! Acoustic similarity between two words is the maximum over their
//! pronunciation pairs of `1 - edit_distance / max(len_p, len_q)`: 1.0 means
//! the words sound identical, 0.0 means nothing in common.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cn::{Alternative, ConfusionNetwork, Slot};
use crate::error::{Error, Result};
use crate::eval::{AnalogyQuadruple, ScoredPair};
use crate::util::mix64;

/// A pronunciation: a non-empty list of phone symbols without stress digits.
pub type Pronunciation = Vec<String>;

/// Word-to-pronunciation map, immutable after construction.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Vec<Pronunciation>>,
    words: Vec<String>,
    skipped_lines: usize,
}

impl Lexicon {
    /// Builds a lexicon from `(word, pronunciation)` pairs. Words are
    /// lowercased; repeated words accumulate pronunciation variants.
    pub fn from_entries<I, S>(entries: I) -> Lexicon
    where
        I: IntoIterator<Item = (S, Pronunciation)>,
        S: Into<String>,
    {
        let mut lex = Lexicon::default();
        for (word, pron) in entries {
            lex.add(word.into().to_lowercase(), pron);
        }
        lex.finish();
        lex
    }

    /// Parses a CMUdict-style lexicon: `WORD  PH1 PH2 ...`, pronunciation
    /// variants as `WORD(2)`, comments starting with `;;;`. Stress digits are
    /// stripped from phones and words are lowercased. Lines without phones
    /// are rejected and counted in [`Lexicon::skipped_lines`].
    pub fn parse<R: Read>(reader: R) -> Result<Lexicon> {
        let mut lex = Lexicon::default();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with(";;;") {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let head = fields.next().expect("non-empty line has a first field");
            let word = strip_variant_marker(head).to_lowercase();
            let phones: Vec<String> = fields
                .map(|p| p.trim_end_matches(|c: char| c.is_ascii_digit()).to_uppercase())
                .collect();
            if word.is_empty() || phones.is_empty() || phones.iter().any(|p| p.is_empty()) {
                lex.skipped_lines += 1;
                continue;
            }
            lex.add(word, phones);
        }
        lex.finish();
        Ok(lex)
    }

    fn add(&mut self, word: String, pron: Pronunciation) {
        if pron.is_empty() {
            return;
        }
        let prons = self.entries.entry(word).or_default();
        if !prons.contains(&pron) {
            prons.push(pron);
        }
    }

    fn finish(&mut self) {
        self.words = self.entries.keys().cloned().collect();
        self.words.sort_unstable();
    }

    pub fn pronunciations(&self, word: &str) -> Option<&[Pronunciation]> {
        self.entries.get(word).map(|v| v.as_slice())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// All words in sorted order; scans over this list are deterministic.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of input lines rejected during [`Lexicon::parse`].
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }
}

fn strip_variant_marker(word: &str) -> &str {
    if let Some(open) = word.rfind('(') {
        if word.ends_with(')') && word[open + 1..word.len() - 1].chars().all(|c| c.is_ascii_digit())
        {
            return &word[..open];
        }
    }
    word
}

/// Levenshtein distance with unit insert/delete/substitute costs.
pub fn phone_edit_distance(p: &[String], q: &[String]) -> usize {
    debug_assert!(!p.is_empty() && !q.is_empty(), "pronunciations are non-empty");
    let mut prev: Vec<usize> = (0..=q.len()).collect();
    let mut cur = vec![0usize; q.len() + 1];
    for (i, pp) in p.iter().enumerate() {
        cur[0] = i + 1;
        for (j, qq) in q.iter().enumerate() {
            let sub = prev[j] + usize::from(pp != qq);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q.len()]
}

fn pron_similarity(p: &[String], q: &[String]) -> f64 {
    let denom = p.len().max(q.len());
    1.0 - phone_edit_distance(p, q) as f64 / denom as f64
}

/// Similarity in [0,1] over the best pronunciation pair; 1.0 iff some
/// pronunciation pair is identical.
pub fn acoustic_similarity(w1: &str, w2: &str, lex: &Lexicon) -> Result<f64> {
    let p1 = lex
        .pronunciations(w1)
        .ok_or_else(|| Error::MissingWord(w1.to_string()))?;
    let p2 = lex
        .pronunciations(w2)
        .ok_or_else(|| Error::MissingWord(w2.to_string()))?;
    let mut best = 0.0f64;
    for p in p1 {
        for q in p2 {
            best = best.max(pron_similarity(p, q));
        }
    }
    Ok(best)
}

/// Best similarity between two pronunciation lists, skipping pairs the
/// length pre-filter proves are below `threshold`.
fn similarity_at_least(p1: &[Pronunciation], p2: &[Pronunciation], threshold: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for p in p1 {
        for q in p2 {
            let max_len = p.len().max(q.len());
            let len_gap = p.len().abs_diff(q.len());
            // dist >= |len(p) - len(q)|, so this pair cannot reach threshold.
            if (len_gap as f64) > (1.0 - threshold) * max_len as f64 {
                continue;
            }
            let sim = pron_similarity(p, q);
            if sim >= threshold && best.is_none_or(|b| sim > b) {
                best = Some(sim);
            }
        }
    }
    best
}

/// All lexicon words other than `word` with similarity at least `threshold`,
/// sorted by similarity descending, ties lexicographic.
pub fn confusable_set(word: &str, lex: &Lexicon, threshold: f64) -> Result<Vec<(String, f64)>> {
    let prons = lex
        .pronunciations(word)
        .ok_or_else(|| Error::MissingWord(word.to_string()))?;
    let mut out = Vec::new();
    for other in lex.words() {
        if other == word {
            continue;
        }
        let other_prons = lex.pronunciations(other).expect("word listed in lexicon");
        if let Some(sim) = similarity_at_least(prons, other_prons, threshold) {
            out.push((other.clone(), sim));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Knobs for synthetic confusion-network generation.
#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Probability that a token's slot receives confusable alternatives.
    pub confusion_prob: f64,
    /// Total alternatives per slot, the true word included.
    pub max_alternatives: usize,
    /// Minimum acoustic similarity for a candidate alternative.
    pub similarity_threshold: f64,
    /// Posterior softmax temperature over similarity weights.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        // Calibrated so lexicons with broad confusable coverage land near
        // 3.34 mean alternatives per slot.
        SynthesisConfig {
            confusion_prob: 0.85,
            max_alternatives: 5,
            similarity_threshold: 0.6,
            temperature: 0.25,
            seed: 1,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confusion_prob) {
            return Err(Error::invalid("confusion_prob must be in [0,1]"));
        }
        if self.max_alternatives < 1 {
            return Err(Error::invalid("max_alternatives must be >= 1"));
        }
        if !self.similarity_threshold.is_finite()
            || self.similarity_threshold <= 0.0
            || self.similarity_threshold > 1.0
        {
            return Err(Error::invalid("similarity_threshold must be in (0,1]"));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::invalid("temperature must be positive"));
        }
        Ok(())
    }
}

/// Aggregate statistics emitted by the synthesizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct SynthesisReport {
    pub utterances: usize,
    pub slots: usize,
    pub arcs: usize,
    /// Tokens absent from the lexicon, passed through as single arcs.
    pub oov_tokens: usize,
}

impl SynthesisReport {
    pub fn mean_alternatives(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.arcs as f64 / self.slots as f64
        }
    }
}

/// Turns clean token sequences into confusion networks by sampling
/// acoustically confusable alternatives per slot.
///
/// Deterministic per `(seed, utterance index)`, so utterances may be
/// generated in any order or in parallel.
pub struct Synthesizer<'a> {
    lex: &'a Lexicon,
    cfg: SynthesisConfig,
    confusables: HashMap<String, Vec<(String, f64)>>,
    report: SynthesisReport,
}

impl<'a> Synthesizer<'a> {
    pub fn new(lex: &'a Lexicon, cfg: SynthesisConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Synthesizer {
            lex,
            cfg,
            confusables: HashMap::new(),
            report: SynthesisReport::default(),
        })
    }

    pub fn report(&self) -> SynthesisReport {
        self.report
    }

    fn candidates(&mut self, token: &str) -> &[(String, f64)] {
        if !self.confusables.contains_key(token) {
            let set = confusable_set(token, self.lex, self.cfg.similarity_threshold)
                .unwrap_or_default();
            self.confusables.insert(token.to_string(), set);
        }
        &self.confusables[token]
    }

    /// Builds the confusion network for one utterance. `utt_index` drives
    /// the per-utterance random stream.
    pub fn synthesize_network(
        &mut self,
        utt_index: u64,
        utterance_id: &str,
        tokens: &[&str],
    ) -> ConfusionNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(self.cfg.seed, 0x53, utt_index));
        let mut slots = Vec::with_capacity(tokens.len());
        for token in tokens {
            let token = token.to_lowercase();
            let slot = self.synthesize_slot(&token, &mut rng);
            self.report.slots += 1;
            self.report.arcs += slot.alternatives.len();
            slots.push(slot);
        }
        self.report.utterances += 1;
        ConfusionNetwork {
            utterance_id: utterance_id.to_string(),
            slots,
        }
    }

    fn synthesize_slot(&mut self, token: &str, rng: &mut ChaCha8Rng) -> Slot {
        if !self.lex.contains(token) {
            self.report.oov_tokens += 1;
            return single_arc(token);
        }
        let max_alternatives = self.cfg.max_alternatives;
        let temperature = self.cfg.temperature;
        let expand = max_alternatives > 1 && rng.random::<f64>() < self.cfg.confusion_prob;
        if !expand {
            return single_arc(token);
        }
        let candidates = self.candidates(token);
        if candidates.is_empty() {
            return single_arc(token);
        }
        let draw_count = (max_alternatives - 1).min(candidates.len());
        let drawn = weighted_sample_without_replacement(candidates, draw_count, rng);

        // Posterior softmax over similarity weights; the true word carries
        // weight 1.0 and is listed first, so it wins posterior ties.
        let mut weights = Vec::with_capacity(drawn.len() + 1);
        weights.push(1.0f64);
        weights.extend(drawn.iter().map(|&(_, sim)| sim));
        let posteriors = softmax_six_places(&weights, temperature);

        let mut alternatives = Vec::with_capacity(drawn.len() + 1);
        alternatives.push(Alternative {
            word: token.to_string(),
            posterior: posteriors[0],
        });
        for (i, (word, _)) in drawn.iter().enumerate() {
            alternatives.push(Alternative {
                word: (*word).clone(),
                posterior: posteriors[i + 1],
            });
        }
        Slot::new(alternatives)
    }

    /// Synthesizes every utterance of a plain-text corpus.
    pub fn synthesize_corpus<I>(&mut self, corpus: I) -> Result<Vec<ConfusionNetwork>>
    where
        I: IntoIterator<Item = Result<ConfusionNetwork>>,
    {
        let mut out = Vec::new();
        for (idx, net) in corpus.into_iter().enumerate() {
            let net = net?;
            let tokens: Vec<&str> = net
                .slots
                .iter()
                .map(|s| s.alternatives[0].word.as_str())
                .collect();
            out.push(self.synthesize_network(idx as u64, &net.utterance_id, &tokens));
        }
        Ok(out)
    }
}

fn single_arc(token: &str) -> Slot {
    Slot::new(vec![Alternative {
        word: token.to_string(),
        posterior: 1.0,
    }])
}

/// Draws `count` items without replacement, weighted by similarity.
fn weighted_sample_without_replacement<'c>(
    candidates: &'c [(String, f64)],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(&'c String, f64)> {
    let mut remaining: Vec<(usize, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(i, (_, sim))| (i, *sim))
        .collect();
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        let total: f64 = remaining.iter().map(|(_, w)| w).sum();
        if total <= 0.0 || remaining.is_empty() {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut chosen = remaining.len() - 1;
        for (pos, (_, w)) in remaining.iter().enumerate() {
            target -= w;
            if target <= 0.0 {
                chosen = pos;
                break;
            }
        }
        let (idx, sim) = remaining.swap_remove(chosen);
        picked.push((&candidates[idx].0, sim));
    }
    picked
}

/// Softmax over `weights / temperature`, rounded to six decimal places with
/// the rounding residual folded back so the sum is exactly 1. The residual
/// never lands on a non-leading entry in a way that could outrank the first
/// entry, which carries the true word's mass.
fn softmax_six_places(weights: &[f64], temperature: f64) -> Vec<f64> {
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|w| ((w - max) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut micros: Vec<i64> = exps
        .iter()
        .map(|e| (e / total * 1e6).round() as i64)
        .collect();
    let residual = 1_000_000 - micros.iter().sum::<i64>();
    if residual >= 0 || micros.len() == 1 {
        micros[0] += residual;
    } else {
        // Shave the deficit off the largest non-leading entry.
        let victim = micros
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("len > 1");
        micros[victim] += residual;
    }
    micros.iter().map(|m| (*m).max(0) as f64 / 1e6).collect()
}

/// Generated acoustic evaluation tasks.
#[derive(Debug, Clone)]
pub struct AcousticTasks {
    pub analogies: Vec<AnalogyQuadruple>,
    pub pairs: Vec<ScoredPair>,
}

/// Builds homophone analogy quadruples and similarity pairs spanning the
/// full [0,1] similarity range. Deterministic per seed.
pub fn generate_acoustic_tasks(
    lex: &Lexicon,
    homophone_threshold: f64,
    pair_count: usize,
    seed: u64,
) -> Result<AcousticTasks> {
    let homophones = homophone_pairs(lex, homophone_threshold);
    if homophones.is_empty() {
        return Err(Error::invalid(format!(
            "lexicon yields no word pair with similarity >= {homophone_threshold}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed, 0x7a, 0));

    let mut analogies = Vec::with_capacity(pair_count);
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0usize;
    while analogies.len() < pair_count && attempts < pair_count * 50 {
        attempts += 1;
        let i = rng.random_range(0..homophones.len());
        let j = rng.random_range(0..homophones.len());
        if i == j {
            continue;
        }
        let (w1, w2) = &homophones[i];
        let (w3, w4) = &homophones[j];
        if w1 == w3 || w4 == w1 || w4 == w2 || w4 == w3 {
            continue;
        }
        if !seen.insert((i, j)) {
            continue;
        }
        analogies.push(AnalogyQuadruple {
            w1: w1.clone(),
            w2: w2.clone(),
            w3: w3.clone(),
            w4: w4.clone(),
            section: "acoustic".to_string(),
        });
    }

    // Similarity pairs: seed the top band from homophones, then fill ten
    // bins across [0,1] from random word pairs.
    let words = lex.words();
    let per_bin = (pair_count / 10).max(1);
    let mut bins = [0usize; 10];
    let mut pairs: Vec<ScoredPair> = Vec::with_capacity(pair_count);
    for (w1, w2) in homophones.iter() {
        if bins[9] >= per_bin || pairs.len() >= pair_count {
            break;
        }
        let score = acoustic_similarity(w1, w2, lex)?;
        bins[9] += 1;
        pairs.push(ScoredPair {
            w1: w1.clone(),
            w2: w2.clone(),
            score,
        });
    }
    let mut attempts = 0usize;
    while pairs.len() < pair_count && attempts < pair_count * 400 {
        attempts += 1;
        let w1 = &words[rng.random_range(0..words.len())];
        let w2 = &words[rng.random_range(0..words.len())];
        if w1 == w2 {
            continue;
        }
        let score = acoustic_similarity(w1, w2, lex)?;
        let bin = ((score * 10.0) as usize).min(9);
        if bins[bin] >= per_bin {
            continue;
        }
        bins[bin] += 1;
        pairs.push(ScoredPair {
            w1: w1.clone(),
            w2: w2.clone(),
            score,
        });
    }

    Ok(AcousticTasks { analogies, pairs })
}

fn homophone_pairs(lex: &Lexicon, threshold: f64) -> Vec<(String, String)> {
    let words = lex.words();
    let mut out = Vec::new();
    for (i, w) in words.iter().enumerate() {
        let prons = lex.pronunciations(w).expect("listed word");
        for other in &words[i + 1..] {
            let other_prons = lex.pronunciations(other).expect("listed word");
            if similarity_at_least(prons, other_prons, threshold).is_some() {
                out.push((w.clone(), other.clone()));
            }
        }
    }
    out
}
