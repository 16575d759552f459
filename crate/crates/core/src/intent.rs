//! Intent-classification robustness probe: a linear classifier over
//! mean-pooled embedding features, trained on clean text and evaluated on
//! synthetically corrupted text.
//!
//! The probe is deliberately simple so the comparison isolates embedding
//! quality: the feature is a length-insensitive L2-normalized mean of the
//! composed word vectors, and corruption is substitution-only, replacing
//! tokens with acoustically confusable lexicon words.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acoustics::{confusable_set, Lexicon};
use crate::error::{Error, Result};
use crate::model::VectorSource;
use crate::util::normalize_in_place;

/// Minimum acoustic similarity for a corruption substitute.
pub const CORRUPT_SIMILARITY_THRESHOLD: f64 = 0.6;

/// One labeled training or evaluation utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledUtterance {
    pub tokens: Vec<String>,
    pub label: usize,
}

/// Reads TSV `label<TAB>token token ...`; label ids are assigned by first
/// appearance. Returns the data plus the label names in id order.
pub fn read_intent_file<R: Read>(r: R) -> Result<(Vec<LabeledUtterance>, Vec<String>)> {
    let mut labels: Vec<String> = Vec::new();
    let mut data = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (label, rest) = trimmed
            .split_once('\t')
            .ok_or_else(|| Error::parse(line_no, "expected `label<TAB>tokens`"))?;
        let tokens: Vec<String> = rest.split_whitespace().map(|t| t.to_lowercase()).collect();
        if tokens.is_empty() {
            return Err(Error::parse(line_no, "utterance has no tokens"));
        }
        let label_id = match labels.iter().position(|l| l == label) {
            Some(id) => id,
            None => {
                labels.push(label.to_string());
                labels.len() - 1
            }
        };
        data.push(LabeledUtterance {
            tokens,
            label: label_id,
        });
    }
    Ok((data, labels))
}

/// L2-normalized mean of the composed token vectors. Unrepresentable tokens
/// are left out of the mean; a zero-norm mean passes through as the zero
/// vector. Returns the feature plus the skipped-token count.
pub fn featurize(src: &impl VectorSource, tokens: &[String]) -> (Vec<f32>, usize) {
    let dim = src.dim();
    let mut mean = vec![0.0f32; dim];
    let mut used = 0usize;
    let mut skipped = 0usize;
    for token in tokens {
        match src.vector(token) {
            Some(v) => {
                for (m, x) in mean.iter_mut().zip(&v) {
                    *m += x;
                }
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used > 0 {
        for m in &mut mean {
            *m /= used as f32;
        }
    }
    normalize_in_place(&mut mean);
    (mean, skipped)
}

/// Multinomial logistic regression, `classes x dim` weights plus bias.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearClassifier {
    fn zeros(classes: usize, dim: usize) -> Self {
        LinearClassifier {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn scores(&self, x: &[f32]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * self.dim..(c + 1) * self.dim];
                self.bias[c]
                    + row
                        .iter()
                        .zip(x)
                        .map(|(w, xi)| w * *xi as f64)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &[f32]) -> usize {
        let scores = self.scores(x);
        let mut best = 0usize;
        for (c, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = c;
            }
        }
        best
    }

    /// Cross-entropy loss of one sample; used by the gradient tests.
    pub fn sample_loss(&self, x: &[f32], label: usize) -> f64 {
        let p = softmax(&self.scores(x));
        -p[label].max(f64::MIN_POSITIVE).ln()
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Fits the classifier by SGD with per-epoch fixed-seed shuffling.
/// Deterministic for a given seed.
pub fn fit_logistic(
    features: &[Vec<f32>],
    labels: &[usize],
    classes: usize,
    epochs: u32,
    lr: f64,
    seed: u64,
) -> Result<LinearClassifier> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid("features and labels must align and be non-empty"));
    }
    if classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range")));
    }
    let distinct = {
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::invalid("training data covers a single class"));
    }
    let dim = features[0].len();
    let mut clf = LinearClassifier::zeros(classes, dim);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &features[i];
            let p = softmax(&clf.scores(x));
            for (c, pc) in p.iter().enumerate() {
                let g = pc - if c == labels[i] { 1.0 } else { 0.0 };
                let row = &mut clf.weights[c * dim..(c + 1) * dim];
                for (w, xi) in row.iter_mut().zip(x) {
                    *w -= lr * g * *xi as f64;
                }
                clf.bias[c] -= lr * g;
            }
        }
    }
    Ok(clf)
}

/// Featurizes the data set and fits the probe.
pub fn train_probe(
    data: &[LabeledUtterance],
    src: &impl VectorSource,
    classes: usize,
    epochs: u32,
    lr: f64,
    seed: u64,
) -> Result<LinearClassifier> {
    let features: Vec<Vec<f32>> = data.iter().map(|u| featurize(src, &u.tokens).0).collect();
    let labels: Vec<usize> = data.iter().map(|u| u.label).collect();
    fit_logistic(&features, &labels, classes, epochs, lr, seed)
}

/// Replaces each token independently, with probability `rate`, by a
/// confusable lexicon word (similarity at least 0.6) sampled by similarity
/// weight. Tokens without a confusable stay unchanged. Deterministic per
/// seed.
pub fn corrupt(
    data: &[LabeledUtterance],
    lex: &Lexicon,
    rate: f64,
    seed: u64,
) -> Vec<LabeledUtterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: HashMap<String, Vec<(String, f64)>> = HashMap::new();
    data.iter()
        .map(|utt| {
            let tokens = utt
                .tokens
                .iter()
                .map(|token| {
                    if rate == 0.0 || rng.random::<f64>() >= rate {
                        return token.clone();
                    }
                    let candidates = cache.entry(token.clone()).or_insert_with(|| {
                        confusable_set(token, lex, CORRUPT_SIMILARITY_THRESHOLD)
                            .unwrap_or_default()
                    });
                    if candidates.is_empty() {
                        return token.clone();
                    }
                    let total: f64 = candidates.iter().map(|(_, s)| s).sum();
                    let mut target = rng.random::<f64>() * total;
                    for (word, sim) in candidates.iter() {
                        target -= sim;
                        if target <= 0.0 {
                            return word.clone();
                        }
                    }
                    candidates.last().expect("non-empty").0.clone()
                })
                .collect();
            LabeledUtterance {
                tokens,
                label: utt.label,
            }
        })
        .collect()
}

/// Classification error rate in percent.
pub fn evaluate_probe(
    clf: &LinearClassifier,
    data: &[LabeledUtterance],
    src: &impl VectorSource,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("no evaluation utterances"));
    }
    let mut wrong = 0usize;
    for utt in data {
        let (x, _) = featurize(src, &utt.tokens);
        if clf.predict(&x) != utt.label {
            wrong += 1;
        }
    }
    Ok(100.0 * wrong as f64 / data.len() as f64)
}
