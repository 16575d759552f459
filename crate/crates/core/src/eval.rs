//! Analogy and similarity benchmarks.
//!
//! Analogy questions follow the questions-words file format: `: section`
//! headers, then four space-separated words per line. A question
//! `(w1, w2, w3, w4)` is answered by ranking vocabulary words against
//! `vec(w1) - vec(w2) + vec(w3)` by cosine, excluding `{w1, w2, w3}`; it is
//! correct when `w4` lands in the top k. Similarity files are TSV
//! `word1<TAB>word2<TAB>score`, scored by Spearman rank correlation between
//! annotated scores and model cosines.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::model::VectorSource;
use crate::util::{cosine, l2_norm};

/// One analogy question: `w1 : w2 :: w3 : w4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuadruple {
    pub w1: String,
    pub w2: String,
    pub w3: String,
    pub w4: String,
    pub section: String,
}

/// A word pair with an annotated similarity score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub w1: String,
    pub w2: String,
    pub score: f64,
}

/// Reads the questions-words format. Questions whose answer word repeats a
/// cue word (`w4` in `{w1, w2, w3}`) are rejected at load. Words are
/// lowercased.
pub fn read_analogy_file<R: Read>(r: R) -> Result<Vec<AnalogyQuadruple>> {
    let mut out = Vec::new();
    let mut section = String::from("default");
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix(':') {
            section = name.trim().to_string();
            continue;
        }
        let words: Vec<String> = trimmed
            .split_whitespace()
            .map(|w| w.to_lowercase())
            .collect();
        if words.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 words, found {}", words.len()),
            ));
        }
        let [w1, w2, w3, w4] = match <[String; 4]>::try_from(words) {
            Ok(ws) => ws,
            Err(_) => unreachable!("length checked"),
        };
        if w4 == w1 || w4 == w2 || w4 == w3 {
            continue;
        }
        out.push(AnalogyQuadruple {
            w1,
            w2,
            w3,
            w4,
            section: section.clone(),
        });
    }
    Ok(out)
}

/// Writes questions grouped into their sections, questions-words style.
pub fn write_analogy_file<W: Write>(w: &mut W, questions: &[AnalogyQuadruple]) -> Result<()> {
    let mut current: Option<&str> = None;
    for q in questions {
        if current != Some(q.section.as_str()) {
            writeln!(w, ": {}", q.section)?;
            current = Some(q.section.as_str());
        }
        writeln!(w, "{} {} {} {}", q.w1, q.w2, q.w3, q.w4)?;
    }
    Ok(())
}

/// Reads TSV `word1<TAB>word2<TAB>score` pairs.
pub fn read_pairs_file<R: Read>(r: R) -> Result<Vec<ScoredPair>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                line_no,
                format!("expected `w1<TAB>w2<TAB>score`, found {} fields", fields.len()),
            ));
        }
        let score: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad score {:?}", fields[2])))?;
        out.push(ScoredPair {
            w1: fields[0].to_lowercase(),
            w2: fields[1].to_lowercase(),
            score,
        });
    }
    Ok(out)
}

/// Writes TSV similarity pairs.
pub fn write_pairs_file<W: Write>(w: &mut W, pairs: &[ScoredPair]) -> Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}\t{}", p.w1, p.w2, p.score)?;
    }
    Ok(())
}

/// Answers one analogy question. Returns `None` when any of the four words
/// is outside the candidate vocabulary (the question is skipped), otherwise
/// the 0-based rank of `w4` among candidates excluding `{w1, w2, w3}`.
pub fn analogy_rank(src: &impl VectorSource, q: &AnalogyQuadruple) -> Option<usize> {
    let i1 = src.word_index(&q.w1)?;
    let i2 = src.word_index(&q.w2)?;
    let i3 = src.word_index(&q.w3)?;
    let i4 = src.word_index(&q.w4)?;
    let dim = src.dim();
    let mut query = vec![0.0f32; dim];
    {
        let v1 = src.candidate_vector(i1);
        let v2 = src.candidate_vector(i2);
        let v3 = src.candidate_vector(i3);
        for d in 0..dim {
            query[d] = v1[d] - v2[d] + v3[d];
        }
    }
    if l2_norm(&query) == 0.0 {
        // Degenerate query: cosine undefined, the answer cannot rank.
        return Some(usize::MAX);
    }
    let target_cos = cosine(&query, src.candidate_vector(i4))?;
    let mut rank = 0usize;
    for idx in 0..src.words().len() {
        if idx == i4 || idx == i1 || idx == i2 || idx == i3 {
            continue;
        }
        if let Some(cos) = cosine(&query, src.candidate_vector(idx)) {
            // Ties at the answer's cosine break toward the smaller word id.
            if cos > target_cos || (cos == target_cos && idx < i4) {
                rank += 1;
            }
        }
    }
    Some(rank)
}

/// True when `w4` is within the `top_k` nearest candidates; `None` when the
/// question is skipped.
pub fn answer_analogy(src: &impl VectorSource, q: &AnalogyQuadruple, top_k: usize) -> Option<bool> {
    analogy_rank(src, q).map(|rank| rank < top_k)
}

/// Per-section tallies of an analogy run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogySection {
    pub name: String,
    pub attempted: usize,
    pub skipped: usize,
    pub correct_top1: usize,
    pub correct_topk: usize,
}

impl AnalogySection {
    pub fn accuracy_top1(&self) -> f64 {
        percent(self.correct_top1, self.attempted)
    }

    pub fn accuracy_topk(&self) -> f64 {
        percent(self.correct_topk, self.attempted)
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Full analogy report: per-section rows plus the aggregate, top-1 and
/// top-k accuracies both included.
#[derive(Debug, Clone)]
pub struct AnalogyReport {
    pub top_k: usize,
    pub sections: Vec<AnalogySection>,
}

impl AnalogyReport {
    pub fn overall(&self) -> AnalogySection {
        let mut total = AnalogySection {
            name: "total".to_string(),
            attempted: 0,
            skipped: 0,
            correct_top1: 0,
            correct_topk: 0,
        };
        for s in &self.sections {
            total.attempted += s.attempted;
            total.skipped += s.skipped;
            total.correct_top1 += s.correct_top1;
            total.correct_topk += s.correct_topk;
        }
        total
    }

    /// TSV rows: `section  attempted  skipped  top1%  top<k>%`.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "section\tattempted\tskipped\taccuracy_top1\taccuracy_top{}",
            self.top_k
        )?;
        for s in self.sections.iter().chain(std::iter::once(&self.overall())) {
            writeln!(
                w,
                "{}\t{}\t{}\t{:.2}\t{:.2}",
                s.name,
                s.attempted,
                s.skipped,
                s.accuracy_top1(),
                s.accuracy_topk()
            )?;
        }
        Ok(())
    }
}

/// Evaluates a question set; accuracy is `correct / attempted` and skipped
/// questions are tallied separately.
pub fn eval_analogy(
    src: &impl VectorSource,
    questions: &[AnalogyQuadruple],
    top_k: usize,
) -> Result<AnalogyReport> {
    if questions.is_empty() {
        return Err(Error::invalid("no analogy questions"));
    }
    let mut sections: Vec<AnalogySection> = Vec::new();
    for q in questions {
        let section = match sections.iter_mut().find(|s| s.name == q.section) {
            Some(s) => s,
            None => {
                sections.push(AnalogySection {
                    name: q.section.clone(),
                    attempted: 0,
                    skipped: 0,
                    correct_top1: 0,
                    correct_topk: 0,
                });
                sections.last_mut().expect("just pushed")
            }
        };
        match analogy_rank(src, q) {
            None => section.skipped += 1,
            Some(rank) => {
                section.attempted += 1;
                if rank == 0 {
                    section.correct_top1 += 1;
                }
                if rank < top_k {
                    section.correct_topk += 1;
                }
            }
        }
    }
    Ok(AnalogyReport { top_k, sections })
}

/// Parses and evaluates a questions-words file.
pub fn eval_analogy_file<R: Read>(
    src: &impl VectorSource,
    reader: R,
    top_k: usize,
) -> Result<AnalogyReport> {
    let questions = read_analogy_file(reader)?;
    if questions.is_empty() {
        return Err(Error::invalid("analogy file contains no questions"));
    }
    eval_analogy(src, &questions, top_k)
}

/// Average ranks (1-based), ties shared.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::invalid("Spearman correlation needs n >= 3"));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    if dx == 0.0 || dy == 0.0 {
        return Err(Error::invalid("constant ranks; correlation undefined"));
    }
    Ok(num / (dx * dy).sqrt())
}

/// Rank correlation with its t-approximation significance.
#[derive(Debug, Clone, Copy)]
pub struct SpearmanTest {
    pub rho: f64,
    pub n: usize,
    pub t: f64,
    pub p_two_sided: f64,
}

pub fn spearman_test(xs: &[f64], ys: &[f64]) -> Result<SpearmanTest> {
    let rho = spearman_rho(xs, ys)?;
    let n = xs.len();
    let df = (n - 2) as f64;
    let t = if rho.abs() >= 1.0 {
        f64::INFINITY
    } else {
        rho * (df / (1.0 - rho * rho)).sqrt()
    };
    let p_two_sided = if t.is_infinite() {
        0.0
    } else {
        student_t_two_sided_p(t, df)
    };
    Ok(SpearmanTest {
        rho,
        n,
        t,
        p_two_sided,
    })
}

/// Two-sided p-value of the Student t distribution via the regularized
/// incomplete beta function.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Regularized incomplete beta `I_x(a, b)` by continued fraction.
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-14;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0f64;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos log-gamma.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COEFFS {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Similarity evaluation summary.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityReport {
    pub used: usize,
    pub skipped: usize,
    pub rho: f64,
    pub t: f64,
    pub p_two_sided: f64,
}

impl SimilarityReport {
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "pairs\tskipped\trho\tt\tp")?;
        writeln!(
            w,
            "{}\t{}\t{:.4}\t{:.4}\t{:.3e}",
            self.used, self.skipped, self.rho, self.t, self.p_two_sided
        )?;
        Ok(())
    }
}

/// Spearman correlation between model cosines and annotated scores. Pairs
/// with an unrepresentable word (or a zero-norm vector) are skipped and
/// tallied; subword models compose out-of-vocabulary words instead of
/// skipping.
pub fn eval_similarity(src: &impl VectorSource, pairs: &[ScoredPair]) -> Result<SimilarityReport> {
    let mut cosines = Vec::with_capacity(pairs.len());
    let mut scores = Vec::with_capacity(pairs.len());
    let mut skipped = 0usize;
    for p in pairs {
        let cos = src
            .vector(&p.w1)
            .zip(src.vector(&p.w2))
            .and_then(|(v1, v2)| cosine(&v1, &v2));
        match cos {
            Some(c) => {
                cosines.push(c);
                scores.push(p.score);
            }
            None => skipped += 1,
        }
    }
    if cosines.is_empty() {
        return Err(Error::invalid("every pair was skipped"));
    }
    let test = spearman_test(&cosines, &scores)?;
    Ok(SimilarityReport {
        used: cosines.len(),
        skipped,
        rho: test.rho,
        t: test.t,
        p_two_sided: test.p_two_sided,
    })
}

/// Parses and evaluates a TSV pairs file.
pub fn eval_similarity_file<R: Read>(
    src: &impl VectorSource,
    reader: R,
) -> Result<SimilarityReport> {
    let pairs = read_pairs_file(reader)?;
    if pairs.is_empty() {
        return Err(Error::invalid("similarity file contains no pairs"));
    }
    eval_similarity(src, &pairs)
}
