//! Embedding storage, word-vector composition, nearest-neighbor queries,
//! serialization, text export, model concatenation, and 2-D PCA.
//!
//! Binary model format, all little-endian:
//!
//! ```text
//! magic "C2V2" | u32 version=1 | u32 dim | u32 V | u32 bucket_count
//! | u8 minn | u8 maxn
//! | V x (u32 word_len, word bytes, u64 count)
//! | (V + bucket_count) x dim input f32
//! | V x dim output f32
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::subword::SubwordIndex;
use crate::util::{cosine, l2_norm, normalize_in_place};
use crate::vocab::Vocabulary;

const MAGIC: [u8; 4] = *b"C2V2";
const FORMAT_VERSION: u32 = 1;

/// Dense row-major f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// A trained embedding model: input rows for vocabulary words plus hashed
/// n-gram buckets, output rows for vocabulary words.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    dim: usize,
    vocab: Vocabulary,
    subwords: SubwordIndex,
    input: Matrix,
    output: Matrix,
}

impl EmbeddingModel {
    /// Assembles a model from raw parts. Row counts must match the
    /// vocabulary and subword index geometry.
    pub fn from_parts(
        dim: usize,
        vocab: Vocabulary,
        subwords: SubwordIndex,
        input: Matrix,
        output: Matrix,
    ) -> EmbeddingModel {
        assert_eq!(input.rows(), subwords.input_rows());
        assert_eq!(output.rows(), vocab.len());
        assert_eq!(input.cols(), dim);
        assert_eq!(output.cols(), dim);
        EmbeddingModel {
            dim,
            vocab,
            subwords,
            input,
            output,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn subwords(&self) -> &SubwordIndex {
        &self.subwords
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Mutable matrix access for model surgery and tests.
    pub fn input_mut(&mut self) -> &mut Matrix {
        &mut self.input
    }

    pub fn output_mut(&mut self) -> &mut Matrix {
        &mut self.output
    }

    /// Composed vector: the sum of the word's input rows. Out-of-vocabulary
    /// words compose from hashed n-gram rows alone; `None` when the word has
    /// no rows at all (word-only models, or no n-grams at the configured
    /// range).
    pub fn word_vector(&self, word: &str) -> Option<Vec<f32>> {
        let mut v = vec![0.0f32; self.dim];
        match self.vocab.id(word) {
            Some(id) => {
                for &r in self.subwords.rows(id) {
                    add_row(&mut v, self.input.row(r as usize));
                }
            }
            None => {
                let rows = self.subwords.oov_rows(word);
                if rows.is_empty() {
                    return None;
                }
                for &r in &rows {
                    add_row(&mut v, self.input.row(r as usize));
                }
            }
        }
        Some(v)
    }

    pub fn save_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)
    }

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.vocab.len() as u32).to_le_bytes())?;
        w.write_all(&self.subwords.bucket_count().to_le_bytes())?;
        w.write_all(&[self.subwords.minn() as u8, self.subwords.maxn() as u8])?;
        for (id, word) in self.vocab.words().iter().enumerate() {
            let bytes = word.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&self.vocab.count(id as u32).to_le_bytes())?;
        }
        write_matrix(w, &self.input)?;
        write_matrix(w, &self.output)?;
        Ok(())
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
        let mut r = BufReader::new(File::open(path)?);
        Self::load(&mut r)
    }

    pub fn load<R: Read>(r: &mut R) -> Result<EmbeddingModel> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = read_u32(r)? as usize;
        let vocab_len = read_u32(r)? as usize;
        let bucket_count = read_u32(r)?;
        let mut nn = [0u8; 2];
        read_exact(r, &mut nn)?;
        let (minn, maxn) = (nn[0] as u32, nn[1] as u32);

        let mut pairs = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = read_u32(r)? as usize;
            let mut bytes = vec![0u8; len];
            read_exact(r, &mut bytes)?;
            let word = String::from_utf8(bytes)
                .map_err(|_| Error::invalid("model vocabulary is not valid UTF-8"))?;
            let count = read_u64(r)?;
            pairs.push((word, count));
        }
        let vocab = Vocabulary::from_sorted_counts(pairs, 1e-4)?;
        let subwords = SubwordIndex::build(&vocab, minn, maxn, bucket_count);
        let input = read_matrix(r, subwords.input_rows(), dim)?;
        let output = read_matrix(r, vocab_len, dim)?;
        Ok(EmbeddingModel::from_parts(dim, vocab, subwords, input, output))
    }

    /// Writes the `.vec` text format: header `V dim`, then one line per word
    /// with the composed vector at six significant digits.
    pub fn export_text<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        writeln!(w, "{} {}", self.vocab.len(), self.dim)?;
        let mut line = String::new();
        for word in self.vocab.words() {
            let v = self.word_vector(word).expect("in-vocabulary word");
            line.clear();
            line.push_str(word);
            for x in &v {
                line.push(' ');
                line.push_str(&format_sig6(*x));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn add_row(acc: &mut [f32], row: &[f32]) {
    for (a, b) in acc.iter_mut().zip(row) {
        *a += b;
    }
}

fn write_matrix<W: Write>(w: &mut W, m: &Matrix) -> Result<()> {
    let mut buf = Vec::with_capacity(m.cols() * 4);
    for r in 0..m.rows() {
        buf.clear();
        for x in m.row(r) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(rows, cols);
    let mut buf = vec![0u8; cols * 4];
    for row in 0..rows {
        read_exact(r, &mut buf)?;
        let out = m.row_mut(row);
        for (i, chunk) in buf.chunks_exact(4).enumerate() {
            out[i] = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
    }
    Ok(m)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Formats with six significant digits in plain decimal.
pub fn format_sig6(x: f32) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let exp = (x.abs() as f64).log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// A queryable set of word vectors: a fixed candidate vocabulary plus
/// optional composition for out-of-vocabulary words.
pub trait VectorSource {
    fn dim(&self) -> usize;

    /// Candidate words in id order: the ranking universe for
    /// [`nearest_neighbors`] and analogy answers.
    fn words(&self) -> &[String];

    fn word_index(&self, word: &str) -> Option<usize>;

    /// Precomputed composed vector of candidate `idx`.
    fn candidate_vector(&self, idx: usize) -> &[f32];

    /// Vector for any word, composing out-of-vocabulary words when the
    /// source supports it; `None` when unrepresentable.
    fn vector(&self, word: &str) -> Option<Vec<f32>>;
}

/// Composed vocabulary vectors of a single model.
pub struct ModelVectors<'a> {
    model: &'a EmbeddingModel,
    words: &'a [String],
    index: HashMap<&'a str, usize>,
    table: Matrix,
}

impl<'a> ModelVectors<'a> {
    pub fn new(model: &'a EmbeddingModel) -> ModelVectors<'a> {
        let words = model.vocab().words();
        let mut table = Matrix::zeros(words.len(), model.dim());
        for (id, word) in words.iter().enumerate() {
            let v = model.word_vector(word).expect("in-vocabulary word");
            table.row_mut(id).copy_from_slice(&v);
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect();
        ModelVectors {
            model,
            words,
            index,
            table,
        }
    }
}

impl VectorSource for ModelVectors<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn words(&self) -> &[String] {
        self.words
    }

    fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    fn candidate_vector(&self, idx: usize) -> &[f32] {
        self.table.row(idx)
    }

    fn vector(&self, word: &str) -> Option<Vec<f32>> {
        match self.word_index(word) {
            Some(i) => Some(self.candidate_vector(i).to_vec()),
            None => self.model.word_vector(word),
        }
    }
}

/// Two models joined over their vocabulary intersection: each part is
/// L2-normalized, then concatenated, so neither subspace dominates cosine
/// geometry.
pub struct ConcatVectors<'a> {
    a: &'a EmbeddingModel,
    b: &'a EmbeddingModel,
    words: Vec<String>,
    index: HashMap<String, usize>,
    table: Matrix,
}

/// Builds the concatenated provider over the intersection vocabulary,
/// ordered by the first model's word ids.
pub fn concatenate<'a>(
    a: &'a EmbeddingModel,
    b: &'a EmbeddingModel,
) -> Result<ConcatVectors<'a>> {
    let words: Vec<String> = a
        .vocab()
        .words()
        .iter()
        .filter(|w| b.vocab().id(w).is_some())
        .cloned()
        .collect();
    if words.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let dim = a.dim() + b.dim();
    let mut table = Matrix::zeros(words.len(), dim);
    for (i, word) in words.iter().enumerate() {
        let v = concat_vector(a, b, word).expect("intersection word");
        table.row_mut(i).copy_from_slice(&v);
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(ConcatVectors {
        a,
        b,
        words,
        index,
        table,
    })
}

fn concat_vector(a: &EmbeddingModel, b: &EmbeddingModel, word: &str) -> Option<Vec<f32>> {
    let mut va = a.word_vector(word)?;
    let mut vb = b.word_vector(word)?;
    normalize_in_place(&mut va);
    normalize_in_place(&mut vb);
    va.extend_from_slice(&vb);
    Some(va)
}

impl VectorSource for ConcatVectors<'_> {
    fn dim(&self) -> usize {
        self.a.dim() + self.b.dim()
    }

    fn words(&self) -> &[String] {
        &self.words
    }

    fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    fn candidate_vector(&self, idx: usize) -> &[f32] {
        self.table.row(idx)
    }

    fn vector(&self, word: &str) -> Option<Vec<f32>> {
        match self.word_index(word) {
            Some(i) => Some(self.candidate_vector(i).to_vec()),
            None => concat_vector(self.a, self.b, word),
        }
    }
}

/// Vectors loaded from the `.vec` text format; no subword composition.
pub struct TextVectors {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    table: Matrix,
}

impl VectorSource for TextVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn words(&self) -> &[String] {
        &self.words
    }

    fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    fn candidate_vector(&self, idx: usize) -> &[f32] {
        self.table.row(idx)
    }

    fn vector(&self, word: &str) -> Option<Vec<f32>> {
        self.word_index(word).map(|i| self.candidate_vector(i).to_vec())
    }
}

/// Writes any vector source in the `.vec` text format.
pub fn export_source_text<W: Write>(src: &impl VectorSource, w: &mut W) -> Result<()> {
    if src.words().is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    writeln!(w, "{} {}", src.words().len(), src.dim())?;
    let mut line = String::new();
    for (i, word) in src.words().iter().enumerate() {
        line.clear();
        line.push_str(word);
        for x in src.candidate_vector(i) {
            line.push(' ');
            line.push_str(&format_sig6(*x));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses the `.vec` text format.
pub fn read_text_vectors<R: Read>(r: R) -> Result<TextVectors> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    std::io::BufRead::read_line(&mut reader, &mut header)?;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(1, "expected `V dim` header"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(1, "expected `V dim` header"))?;
    let mut words = Vec::with_capacity(count);
    let mut table = Matrix::zeros(count, dim);
    let mut line = String::new();
    for i in 0..count {
        line.clear();
        if std::io::BufRead::read_line(&mut reader, &mut line)? == 0 {
            return Err(Error::parse(i + 2, "unexpected end of file"));
        }
        let mut fields = line.split_whitespace();
        let word = fields
            .next()
            .ok_or_else(|| Error::parse(i + 2, "empty line"))?;
        let row = table.row_mut(i);
        for slot in row.iter_mut() {
            *slot = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(i + 2, format!("expected {dim} values")))?;
        }
        words.push(word.to_string());
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(TextVectors {
        dim,
        words,
        index,
        table,
    })
}

/// Top-k candidate words by cosine similarity to `query`, excluding the
/// given words. Ties break toward the smaller word id; zero-norm candidates
/// never rank.
pub fn nearest_neighbors(
    src: &impl VectorSource,
    query: &[f32],
    k: usize,
    exclude: &[&str],
) -> Result<Vec<(String, f32)>> {
    let qnorm = l2_norm(query);
    if qnorm == 0.0 {
        return Err(Error::ZeroNormQuery);
    }
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(src.words().len());
    for (i, word) in src.words().iter().enumerate() {
        if exclude.contains(&word.as_str()) {
            continue;
        }
        if let Some(cos) = cosine(query, src.candidate_vector(i)) {
            scored.push((i, cos));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(i, cos)| (src.words()[i].clone(), cos as f32))
        .collect())
}

/// Mean-centered projection onto the top two principal components, computed
/// by power iteration with deflation (tolerance 1e-8, at most 1000
/// iterations per component).
pub fn pca_2d(data: &[Vec<f32>]) -> Result<Vec<(f64, f64)>> {
    if data.len() < 3 {
        return Err(Error::invalid("PCA needs at least 3 points"));
    }
    let dim = data[0].len();
    if data.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("PCA rows must share one dimension"));
    }
    let n = data.len();
    let mut mean = vec![0.0f64; dim];
    for v in data {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += *x as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered: Vec<Vec<f64>> = data
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| *x as f64 - m).collect())
        .collect();

    let (v1, lambda1) = power_iteration(&centered, 0xC2)?;
    if lambda1 <= 0.0 {
        return Err(Error::RankDeficient);
    }
    // Deflate: remove the first component from the data.
    for row in &mut centered {
        let proj: f64 = row.iter().zip(&v1).map(|(x, v)| x * v).sum();
        for (x, v) in row.iter_mut().zip(&v1) {
            *x -= proj * v;
        }
    }
    let (v2, lambda2) = power_iteration(&centered, 0xC3)?;
    if lambda2 <= lambda1 * 1e-10 {
        return Err(Error::RankDeficient);
    }

    Ok(data
        .iter()
        .map(|v| {
            let x: f64 = v
                .iter()
                .zip(&mean)
                .zip(&v1)
                .map(|((x, m), e)| (*x as f64 - m) * e)
                .sum();
            let y: f64 = v
                .iter()
                .zip(&mean)
                .zip(&v2)
                .map(|((x, m), e)| (*x as f64 - m) * e)
                .sum();
            (x, y)
        })
        .collect())
}

const PCA_TOLERANCE: f64 = 1e-8;
const PCA_MAX_ITERATIONS: usize = 1000;

/// Leading eigenvector and eigenvalue of `X^T X` via matrix-free power
/// iteration on the centered data `X`. Converges when the estimated
/// eigenvector error drops below the tolerance: successive iterate changes
/// shrink geometrically at the eigenvalue ratio, so the remaining error is
/// about `delta * r / (1 - r)` with `r` the observed contraction rate.
fn power_iteration(centered: &[Vec<f64>], seed: u64) -> Result<(Vec<f64>, f64)> {
    let dim = centered[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize_f64(&mut v);
    let mut lambda = 0.0f64;
    let mut prev_delta = f64::INFINITY;
    for _ in 0..PCA_MAX_ITERATIONS {
        // u = X^T (X v)
        let mut u = vec![0.0f64; dim];
        for row in centered {
            let proj: f64 = row.iter().zip(&v).map(|(x, e)| x * e).sum();
            for (uu, x) in u.iter_mut().zip(row) {
                *uu += proj * x;
            }
        }
        lambda = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lambda == 0.0 {
            return Ok((v, 0.0));
        }
        for x in &mut u {
            *x /= lambda;
        }
        let delta = v
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            .min(
                v.iter()
                    .zip(&u)
                    .map(|(a, b)| (a + b).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            );
        v = u;
        let rate = if prev_delta.is_finite() && prev_delta > 0.0 {
            (delta / prev_delta).clamp(0.0, 0.9999)
        } else {
            0.9999
        };
        prev_delta = delta;
        if delta * rate / (1.0 - rate) < PCA_TOLERANCE {
            break;
        }
    }
    Ok((v, lambda))
}

fn normalize_f64(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
