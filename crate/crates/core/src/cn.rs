//! Confusion network data model and text I/O.
//!
//! A confusion network ("sausage") is an ordered sequence of slots; each slot
//! holds alternative words with posterior probabilities that sum to one. The
//! text format is one utterance per line:
//!
//! ```text
//! utt_id word:prob word:prob | word:prob | word:prob word:prob
//! ```
//!
//! Slots are separated by ` | `, alternatives by single spaces, and each
//! alternative is `word:posterior`. Lines starting with `#` are comments.
//! Words may not contain spaces, `|`, or `:`. The deletion arc is spelled
//! `<eps>`; it stays in the data model but is never a training token.

use std::io::{BufRead, BufReader, Lines, Read, Write};

use crate::error::{Error, Result};

/// The epsilon (deletion) arc label.
pub const EPS: &str = "<eps>";

/// Absolute tolerance on the posterior sum of a slot.
pub const POSTERIOR_SUM_TOLERANCE: f64 = 1e-3;

/// Returns true for the epsilon (deletion) arc label.
pub fn is_eps(word: &str) -> bool {
    word == EPS
}

/// One alternative on a confusion-network slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub word: String,
    pub posterior: f64,
}

/// One time slot: a non-empty list of unique alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub alternatives: Vec<Alternative>,
}

impl Slot {
    pub fn new(alternatives: Vec<Alternative>) -> Self {
        Slot { alternatives }
    }

    /// Alternatives excluding the epsilon arc.
    pub fn non_eps(&self) -> impl Iterator<Item = &Alternative> {
        self.alternatives.iter().filter(|a| !is_eps(&a.word))
    }

    /// The most probable alternative over the whole slot, epsilon included.
    /// Ties are broken by earlier position. Returns `None` when the winner is
    /// the epsilon arc (the most probable path has no word here).
    pub fn top1(&self) -> Option<&Alternative> {
        let mut best: Option<&Alternative> = None;
        for alt in &self.alternatives {
            match best {
                Some(b) if alt.posterior <= b.posterior => {}
                _ => best = Some(alt),
            }
        }
        best.filter(|a| !is_eps(&a.word))
    }
}

/// An utterance: identifier plus time-ordered slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionNetwork {
    pub utterance_id: String,
    pub slots: Vec<Slot>,
}

impl ConfusionNetwork {
    /// Builds a single-path network from plain tokens, one slot per token at
    /// posterior 1.0.
    pub fn from_tokens(utterance_id: impl Into<String>, tokens: &[&str]) -> Self {
        ConfusionNetwork {
            utterance_id: utterance_id.into(),
            slots: tokens
                .iter()
                .map(|t| {
                    Slot::new(vec![Alternative {
                        word: t.to_lowercase(),
                        posterior: 1.0,
                    }])
                })
                .collect(),
        }
    }

    /// The most probable path: per slot the winning alternative, skipping
    /// slots where the epsilon arc wins.
    pub fn top1_path(&self) -> Vec<&str> {
        self.slots
            .iter()
            .filter_map(|s| s.top1().map(|a| a.word.as_str()))
            .collect()
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<ConfusionNetwork> {
    let line = line.trim_end_matches(['\r', '\n']);
    let (utt_id, rest) = line
        .split_once(' ')
        .ok_or_else(|| Error::parse(line_no, "expected `utt_id <slots>`"))?;
    if utt_id.is_empty() {
        return Err(Error::parse(line_no, "empty utterance id"));
    }

    let mut slots = Vec::new();
    for slot_text in rest.split(" | ") {
        let mut alternatives: Vec<Alternative> = Vec::new();
        let mut sum = 0.0f64;
        for alt_text in slot_text.split(' ').filter(|s| !s.is_empty()) {
            let (word, prob_text) = alt_text.split_once(':').ok_or_else(|| {
                Error::parse(line_no, format!("alternative {alt_text:?} missing `:posterior`"))
            })?;
            if word.is_empty() || word.contains([':', '|']) {
                return Err(Error::parse(line_no, format!("invalid word {word:?}")));
            }
            let posterior: f64 = prob_text.parse().map_err(|_| {
                Error::parse(line_no, format!("cannot parse posterior {prob_text:?}"))
            })?;
            if !(0.0..=1.0).contains(&posterior) {
                return Err(Error::parse(
                    line_no,
                    format!("posterior {posterior} outside [0,1]"),
                ));
            }
            let word = word.to_lowercase();
            if alternatives.iter().any(|a| a.word == word) {
                return Err(Error::parse(
                    line_no,
                    format!("duplicate word {word:?} in slot"),
                ));
            }
            sum += posterior;
            alternatives.push(Alternative { word, posterior });
        }
        if alternatives.is_empty() {
            return Err(Error::parse(line_no, "empty slot"));
        }
        if (sum - 1.0).abs() > POSTERIOR_SUM_TOLERANCE {
            return Err(Error::parse(
                line_no,
                format!("slot posteriors sum to {sum}, expected 1.0 +/- {POSTERIOR_SUM_TOLERANCE}"),
            ));
        }
        slots.push(Slot::new(alternatives));
    }
    if slots.is_empty() {
        return Err(Error::parse(line_no, "network has no slots"));
    }
    Ok(ConfusionNetwork {
        utterance_id: utt_id.to_string(),
        slots,
    })
}

/// Streaming reader over the confusion-network text format.
pub struct CnReader<R: BufRead> {
    lines: Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Iterator for CnReader<R> {
    type Item = Result<ConfusionNetwork>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(parse_line(&line, self.line_no));
        }
    }
}

/// Lazily parses confusion networks from a byte stream.
pub fn parse_cn_file<R: Read>(reader: R) -> CnReader<BufReader<R>> {
    CnReader {
        lines: BufReader::new(reader).lines(),
        line_no: 0,
    }
}

/// Streaming reader that turns plain text into single-path networks.
pub struct PlainCorpusReader<R: BufRead> {
    lines: Lines<R>,
    line_no: usize,
    emitted: usize,
}

impl<R: BufRead> Iterator for PlainCorpusReader<R> {
    type Item = Result<ConfusionNetwork>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            self.emitted += 1;
            return Some(Ok(ConfusionNetwork::from_tokens(
                format!("u{}", self.emitted),
                &tokens,
            )));
        }
    }
}

/// Lazily parses a whitespace-tokenized corpus, one sentence per line; every
/// token becomes a single-alternative slot at posterior 1.0. Empty lines are
/// skipped.
pub fn parse_plain_corpus<R: Read>(reader: R) -> PlainCorpusReader<BufReader<R>> {
    PlainCorpusReader {
        lines: BufReader::new(reader).lines(),
        line_no: 0,
        emitted: 0,
    }
}

/// Formats a posterior as the shortest decimal within six places.
pub fn format_posterior(p: f64) -> String {
    let mut s = format!("{p:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

fn check_writable_word(word: &str) -> Result<()> {
    if word.is_empty() || word.contains([' ', '|', ':']) {
        return Err(Error::invalid(format!(
            "word {word:?} cannot be written to the CN format (space, `|`, and `:` are reserved)"
        )));
    }
    Ok(())
}

/// Writes one network in the text format.
pub fn write_cn<W: Write>(w: &mut W, cn: &ConfusionNetwork) -> Result<()> {
    if cn.utterance_id.is_empty() || cn.utterance_id.contains(' ') {
        return Err(Error::invalid(format!(
            "utterance id {:?} cannot contain spaces",
            cn.utterance_id
        )));
    }
    let mut line = String::with_capacity(cn.slots.len() * 16);
    line.push_str(&cn.utterance_id);
    for (i, slot) in cn.slots.iter().enumerate() {
        line.push_str(if i == 0 { " " } else { " | " });
        for (j, alt) in slot.alternatives.iter().enumerate() {
            check_writable_word(&alt.word)?;
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&alt.word);
            line.push(':');
            line.push_str(&format_posterior(alt.posterior));
        }
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    Ok(())
}

/// Writes networks so that they round-trip through [`parse_cn_file`].
pub fn write_cn_file<'a, W: Write, I>(w: &mut W, networks: I) -> Result<()>
where
    I: IntoIterator<Item = &'a ConfusionNetwork>,
{
    for cn in networks {
        write_cn(w, cn)?;
    }
    Ok(())
}
