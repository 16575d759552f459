//! Skip-gram pair generation over confusion networks in four configurations
//! and negative-sampling SGD.
//!
//! Modes:
//! - `top`: standard skip-gram over the most-probable path;
//! - `intra`: pairs across alternatives inside one slot, no cross-slot pairs;
//! - `inter`: each alternative paired with every alternative of every slot in
//!   its context window;
//! - `hybrid`: intra and inter pair streams interleaved in slot order.
//!
//! On single-alternative networks inter degenerates to standard skip-gram,
//! intra to the empty stream, and top and hybrid to inter.
//!
//! Parallel training follows the hogwild contract: workers update the shared
//! matrices without locks and lost updates are tolerated. Training is
//! bit-reproducible when `workers == 1`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cn::ConfusionNetwork;
use crate::error::{Error, Result};
use crate::model::{EmbeddingModel, Matrix};
use crate::subword::SubwordIndex;
use crate::util::{mix64, sigmoid};
use crate::vocab::{NegativeTable, Vocabulary, DEFAULT_NEG_TABLE_SIZE};

/// Pair-generation configuration over the confusion network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Top,
    Intra,
    Inter,
    Hybrid,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "top" => Ok(Mode::Top),
            "intra" => Ok(Mode::Intra),
            "inter" => Ok(Mode::Inter),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Top => "top",
            Mode::Intra => "intra",
            Mode::Inter => "inter",
            Mode::Hybrid => "hybrid",
        })
    }
}

/// Training hyperparameters. Defaults follow the standard recipe for this
/// model family: dim 300, window 5, 64 negatives, lr 0.01, 15 epochs,
/// 3..6-grams over 2M buckets, min count 5, subsampling 1e-4.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub mode: Mode,
    pub dim: usize,
    /// Per-slot window width is drawn uniformly from `1..=window_max`.
    pub window_max: u32,
    /// Negative samples per training pair.
    pub negatives: usize,
    pub lr0: f64,
    pub epochs: u32,
    pub minn: u32,
    pub maxn: u32,
    /// Zero disables subwords (word-only model).
    pub bucket_count: u32,
    pub min_count: u64,
    pub subsample_t: f64,
    /// Keep only the most probable alternatives of each slot when set.
    pub max_alternatives_cap: Option<usize>,
    /// Scale the accumulated input gradient by 1/|rows|; off by default, the
    /// unscaled update is the exact gradient of the row sum.
    pub scale_input_grad: bool,
    pub workers: usize,
    pub seed: u64,
    /// Emit a progress line per 2^16 pairs on stderr.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Inter,
            dim: 300,
            window_max: 5,
            negatives: 64,
            lr0: 0.01,
            epochs: 15,
            minn: 3,
            maxn: 6,
            bucket_count: 2_000_000,
            min_count: 5,
            subsample_t: 1e-4,
            max_alternatives_cap: None,
            scale_input_grad: false,
            workers: 1,
            seed: 1,
            verbose: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if self.window_max < 1 {
            return Err(Error::invalid("window_max must be >= 1"));
        }
        if !self.lr0.is_finite() || self.lr0 <= 0.0 {
            return Err(Error::invalid("lr0 must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be >= 1"));
        }
        if !self.subsample_t.is_finite() || self.subsample_t <= 0.0 {
            return Err(Error::invalid("subsample_t must be positive"));
        }
        if self.max_alternatives_cap == Some(0) {
            return Err(Error::invalid("max_alternatives_cap must be >= 1"));
        }
        Ok(())
    }
}

/// One skip-gram training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainingPair {
    pub input: u32,
    pub target: u32,
}

/// Source of per-slot window widths; a trait so tests can replay a recorded
/// stream through an independent generator.
pub trait WindowSampler {
    fn next_window(&mut self) -> u32;
}

/// Uniform draw from `1..=max` per center slot.
pub struct UniformWindow<R: Rng> {
    rng: R,
    max: u32,
}

impl<R: Rng> UniformWindow<R> {
    pub fn new(rng: R, max: u32) -> Self {
        UniformWindow { rng, max }
    }
}

impl<R: Rng> WindowSampler for UniformWindow<R> {
    fn next_window(&mut self) -> u32 {
        if self.max <= 1 {
            1
        } else {
            self.rng.random_range(1..=self.max)
        }
    }
}

/// Constant window width.
pub struct FixedWindow(pub u32);

impl WindowSampler for FixedWindow {
    fn next_window(&mut self) -> u32 {
        self.0
    }
}

/// Records widths drawn from an inner sampler, for replay into an oracle.
pub struct RecordingWindow<S: WindowSampler> {
    pub inner: S,
    pub drawn: Vec<u32>,
}

impl<S: WindowSampler> RecordingWindow<S> {
    pub fn new(inner: S) -> Self {
        RecordingWindow {
            inner,
            drawn: Vec::new(),
        }
    }
}

impl<S: WindowSampler> WindowSampler for RecordingWindow<S> {
    fn next_window(&mut self) -> u32 {
        let w = self.inner.next_window();
        self.drawn.push(w);
        w
    }
}

/// Replays a recorded width stream.
pub struct ReplayWindow {
    widths: Vec<u32>,
    pos: usize,
}

impl ReplayWindow {
    pub fn new(widths: Vec<u32>) -> Self {
        ReplayWindow { widths, pos: 0 }
    }
}

impl WindowSampler for ReplayWindow {
    fn next_window(&mut self) -> u32 {
        let w = self.widths[self.pos];
        self.pos += 1;
        w
    }
}

/// A network with arcs mapped to vocabulary ids; epsilon and pruned words
/// are already gone. Slots left empty by the mapping are dropped.
#[derive(Debug, Clone, Default)]
pub struct EncodedNetwork {
    pub slots: Vec<Vec<EncodedArc>>,
}

#[derive(Debug, Clone, Copy)]
pub struct EncodedArc {
    pub word: u32,
    pub posterior: f32,
}

/// Maps a parsed network onto vocabulary ids.
pub fn encode_network(cn: &ConfusionNetwork, vocab: &Vocabulary) -> EncodedNetwork {
    let slots = cn
        .slots
        .iter()
        .filter_map(|slot| {
            let arcs: Vec<EncodedArc> = slot
                .non_eps()
                .filter_map(|alt| {
                    vocab.id(&alt.word).map(|word| EncodedArc {
                        word,
                        posterior: alt.posterior as f32,
                    })
                })
                .collect();
            (!arcs.is_empty()).then_some(arcs)
        })
        .collect();
    EncodedNetwork { slots }
}

/// Encodes a whole corpus; parse errors propagate.
pub fn encode_corpus<I>(networks: I, vocab: &Vocabulary) -> Result<Vec<EncodedNetwork>>
where
    I: IntoIterator<Item = Result<ConfusionNetwork>>,
{
    networks
        .into_iter()
        .map(|net| Ok(encode_network(&net?, vocab)))
        .collect()
}

/// One slot after per-epoch filtering: surviving alternatives plus the index
/// of the most probable one (for top mode).
#[derive(Debug, Clone)]
pub struct PreparedSlot {
    pub alternatives: Vec<u32>,
    pub top: usize,
}

/// A network ready for pair generation: capped, subsampled, no empty slots.
#[derive(Debug, Clone, Default)]
pub struct PreparedNetwork {
    pub slots: Vec<PreparedSlot>,
}

/// Applies the per-epoch filters: the optional alternatives cap (keeping the
/// most probable arcs, ties to earlier positions) and frequent-word
/// subsampling, each arc rejected independently with probability
/// `1 - keep_prob`. Slots left empty are dropped.
pub fn prepare_network<R: Rng>(
    enc: &EncodedNetwork,
    vocab: &Vocabulary,
    cap: Option<usize>,
    rng: &mut R,
) -> PreparedNetwork {
    let mut slots = Vec::with_capacity(enc.slots.len());
    let mut capped: Vec<usize> = Vec::new();
    for arcs in &enc.slots {
        capped.clear();
        match cap {
            Some(cap) if arcs.len() > cap => {
                // Indices of the `cap` most probable arcs, original order kept.
                let mut ranked: Vec<usize> = (0..arcs.len()).collect();
                ranked.sort_by(|&a, &b| {
                    arcs[b]
                        .posterior
                        .total_cmp(&arcs[a].posterior)
                        .then(a.cmp(&b))
                });
                ranked.truncate(cap);
                ranked.sort_unstable();
                capped.extend(ranked);
            }
            _ => capped.extend(0..arcs.len()),
        }

        let mut alternatives = Vec::with_capacity(capped.len());
        let mut top = 0usize;
        let mut top_posterior = f32::NEG_INFINITY;
        for &i in &capped {
            let arc = arcs[i];
            let keep = vocab.keep_prob(arc.word);
            if keep < 1.0 && rng.random::<f64>() >= keep {
                continue;
            }
            if arc.posterior > top_posterior {
                top_posterior = arc.posterior;
                top = alternatives.len();
            }
            alternatives.push(arc.word);
        }
        if !alternatives.is_empty() {
            slots.push(PreparedSlot { alternatives, top });
        }
    }
    PreparedNetwork { slots }
}

fn window_range(center: usize, width: u32, len: usize) -> std::ops::Range<usize> {
    let lo = center.saturating_sub(width as usize);
    let hi = (center + width as usize + 1).min(len);
    lo..hi
}

/// Generates the pair stream for one prepared network. One window width is
/// drawn per slot, in slot order, for every mode that uses context windows.
pub fn generate_pairs_into(
    prep: &PreparedNetwork,
    mode: Mode,
    windows: &mut impl WindowSampler,
    out: &mut Vec<TrainingPair>,
) {
    let slots = &prep.slots;
    let len = slots.len();
    match mode {
        Mode::Top => {
            for t in 0..len {
                let width = windows.next_window();
                let input = slots[t].alternatives[slots[t].top];
                for c in window_range(t, width, len) {
                    if c == t {
                        continue;
                    }
                    out.push(TrainingPair {
                        input,
                        target: slots[c].alternatives[slots[c].top],
                    });
                }
            }
        }
        Mode::Intra => {
            for slot in slots {
                intra_slot_pairs(slot, out);
            }
        }
        Mode::Inter => {
            for t in 0..len {
                let width = windows.next_window();
                inter_slot_pairs(slots, t, width, out);
            }
        }
        Mode::Hybrid => {
            for t in 0..len {
                let width = windows.next_window();
                intra_slot_pairs(&slots[t], out);
                inter_slot_pairs(slots, t, width, out);
            }
        }
    }
}

fn intra_slot_pairs(slot: &PreparedSlot, out: &mut Vec<TrainingPair>) {
    for (i, &input) in slot.alternatives.iter().enumerate() {
        for (j, &target) in slot.alternatives.iter().enumerate() {
            if i != j {
                out.push(TrainingPair { input, target });
            }
        }
    }
}

fn inter_slot_pairs(slots: &[PreparedSlot], t: usize, width: u32, out: &mut Vec<TrainingPair>) {
    for &input in &slots[t].alternatives {
        for c in window_range(t, width, slots.len()) {
            if c == t {
                continue;
            }
            for &target in &slots[c].alternatives {
                out.push(TrainingPair { input, target });
            }
        }
    }
}

/// Convenience wrapper returning the pair stream as a vector.
pub fn generate_pairs(
    prep: &PreparedNetwork,
    mode: Mode,
    windows: &mut impl WindowSampler,
) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    generate_pairs_into(prep, mode, windows, &mut out);
    out
}

/// Counts the pairs [`generate_pairs_into`] would produce, consuming the
/// window sampler identically but materializing nothing.
pub fn count_pairs(prep: &PreparedNetwork, mode: Mode, windows: &mut impl WindowSampler) -> u64 {
    let slots = &prep.slots;
    let len = slots.len();
    let mut total = 0u64;
    match mode {
        Mode::Top => {
            for t in 0..len {
                let width = windows.next_window();
                total += (window_range(t, width, len).len() - 1) as u64;
            }
        }
        Mode::Intra => {
            for slot in slots {
                let m = slot.alternatives.len() as u64;
                total += m * (m - 1);
            }
        }
        Mode::Inter | Mode::Hybrid => {
            for t in 0..len {
                let width = windows.next_window();
                let m = slots[t].alternatives.len() as u64;
                if mode == Mode::Hybrid {
                    total += m * (m - 1);
                }
                let context: u64 = window_range(t, width, len)
                    .filter(|&c| c != t)
                    .map(|c| slots[c].alternatives.len() as u64)
                    .sum();
                total += m * context;
            }
        }
    }
    total
}

/// Negative-sampling binary logistic loss of one pair:
/// `-log s(h.o_t) - sum_k log s(-h.o_k)` with `h` the sum of the input
/// word's subword rows. All arithmetic in f64 over the f32 parameters.
pub fn pair_loss(model: &EmbeddingModel, pair: TrainingPair, negatives: &[u32]) -> f64 {
    let rows = model.subwords().rows(pair.input);
    let h = sum_rows(model.input(), rows, model.dim());
    let mut loss = -sigmoid(dot_row(&h, model.output().row(pair.target as usize))).ln();
    for &k in negatives {
        loss += -sigmoid(-dot_row(&h, model.output().row(k as usize))).ln();
    }
    loss
}

/// Analytic gradients of [`pair_loss`] at the current parameters:
/// `grad_input` applies to every row in `rows(input)` (unscaled), and
/// `grad_outputs[i]` to the output row of target (i = 0) then negatives.
pub fn pair_gradients(
    model: &EmbeddingModel,
    pair: TrainingPair,
    negatives: &[u32],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = model.dim();
    let rows = model.subwords().rows(pair.input);
    let h = sum_rows(model.input(), rows, dim);
    let mut grad_input = vec![0.0f64; dim];
    let mut grad_outputs = Vec::with_capacity(negatives.len() + 1);
    for (slot, &w) in std::iter::once(&pair.target).chain(negatives).enumerate() {
        let label = if slot == 0 { 1.0 } else { 0.0 };
        let row = model.output().row(w as usize);
        let g = sigmoid(dot_row(&h, row)) - label; // d loss / d dot
        for d in 0..dim {
            grad_input[d] += g * row[d] as f64;
        }
        grad_outputs.push(h.iter().map(|hd| g * hd).collect());
    }
    (grad_input, grad_outputs)
}

fn sum_rows(matrix: &Matrix, rows: &[u32], dim: usize) -> Vec<f64> {
    let mut h = vec![0.0f64; dim];
    for &r in rows {
        let row = matrix.row(r as usize);
        for d in 0..dim {
            h[d] += row[d] as f64;
        }
    }
    h
}

fn dot_row(h: &[f64], row: &[f32]) -> f64 {
    h.iter().zip(row).map(|(a, b)| a * *b as f64).sum()
}

/// Raw shared view of a matrix for hogwild updates.
///
/// Workers read and write rows without synchronization; racing updates may
/// be lost or mixed, which the training contract tolerates. Row indices must
/// stay in bounds.
struct SharedMatrix {
    ptr: *mut f32,
    cols: usize,
    #[cfg(debug_assertions)]
    rows: usize,
}

unsafe impl Send for SharedMatrix {}
unsafe impl Sync for SharedMatrix {}

impl SharedMatrix {
    fn new(m: &mut Matrix) -> Self {
        SharedMatrix {
            ptr: m.data_mut().as_mut_ptr(),
            cols: m.cols(),
            #[cfg(debug_assertions)]
            rows: m.rows(),
        }
    }

    /// Callers must keep the backing matrix alive and in place; aliased
    /// mutable access is part of the hogwild contract.
    #[allow(clippy::mut_from_ref)]
    unsafe fn row_mut(&self, r: usize) -> &mut [f32] {
        #[cfg(debug_assertions)]
        debug_assert!(r < self.rows);
        std::slice::from_raw_parts_mut(self.ptr.add(r * self.cols), self.cols)
    }
}

/// Per-worker scratch buffers.
struct Scratch {
    h: Vec<f32>,
    grad_h: Vec<f32>,
    gains: Vec<f32>,
    negatives: Vec<u32>,
    pairs: Vec<TrainingPair>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            h: vec![0.0; dim],
            grad_h: vec![0.0; dim],
            gains: Vec::new(),
            negatives: Vec::new(),
            pairs: Vec::new(),
        }
    }
}

/// One SGD step on the shared matrices. Dots for the target and every
/// negative are computed before any update, so the step applies the
/// simultaneous gradient of [`pair_loss`]. The hot loops run in f32; the
/// returned pre-update loss is accumulated in f64.
#[allow(clippy::too_many_arguments)]
unsafe fn train_pair(
    input: &SharedMatrix,
    output: &SharedMatrix,
    rows: &[u32],
    target: u32,
    negatives: &[u32],
    lr: f32,
    scale_input_grad: bool,
    scratch: &mut Scratch,
) -> f64 {
    let h = &mut scratch.h;
    h.iter_mut().for_each(|x| *x = 0.0);
    for &r in rows {
        let row = &*input.row_mut(r as usize);
        for (hd, xd) in h.iter_mut().zip(row) {
            *hd += *xd;
        }
    }

    let mut loss = 0.0f64;
    let grad_h = &mut scratch.grad_h;
    grad_h.iter_mut().for_each(|x| *x = 0.0);
    scratch.gains.clear();
    for (slot, &w) in std::iter::once(&target).chain(negatives).enumerate() {
        let row = &*output.row_mut(w as usize);
        let dot: f32 = h.iter().zip(row).map(|(a, b)| a * b).sum();
        let label = if slot == 0 { 1.0 } else { 0.0 };
        let p = sigmoid(dot as f64);
        loss += if slot == 0 {
            -p.max(f64::MIN_POSITIVE).ln()
        } else {
            -(1.0 - p).max(f64::MIN_POSITIVE).ln()
        };
        let g = (label - p) as f32; // ascent direction on the log-likelihood
        scratch.gains.push(g);
        for (gd, od) in grad_h.iter_mut().zip(row) {
            *gd += g * od;
        }
    }
    for (slot, &w) in std::iter::once(&target).chain(negatives).enumerate() {
        let g = scratch.gains[slot] * lr;
        let row = output.row_mut(w as usize);
        for (od, hd) in row.iter_mut().zip(h.iter()) {
            *od += g * hd;
        }
    }
    let scale = if scale_input_grad {
        lr / rows.len() as f32
    } else {
        lr
    };
    for &r in rows {
        let row = input.row_mut(r as usize);
        for (xd, gd) in row.iter_mut().zip(grad_h.iter()) {
            *xd += scale * gd;
        }
    }
    loss
}

fn sample_negatives<R: Rng>(
    table: &NegativeTable,
    rng: &mut R,
    target: u32,
    k: usize,
    out: &mut Vec<u32>,
) {
    out.clear();
    for _ in 0..k {
        let mut w = table.draw(rng);
        let mut tries = 0;
        while w == target && tries < 64 {
            w = table.draw(rng);
            tries += 1;
        }
        if w != target {
            out.push(w);
        }
    }
}

/// Learning rate at a given processed-pair fraction: linear decay from `lr0`
/// to the `lr0 * 1e-4` floor.
pub fn learning_rate(lr0: f64, processed: u64, total_estimate: u64) -> f64 {
    let fraction = processed as f64 / total_estimate.max(1) as f64;
    lr0 * (1.0 - fraction).max(1e-4)
}

const PROGRESS_EVERY: u64 = 1 << 16;

/// Trains an embedding model over a pre-encoded corpus.
///
/// Input rows start uniform in `[-1/dim, 1/dim]`, output rows at zero;
/// `warm_start` replaces the random initialization with rows copied from a
/// compatible model (same dim, bucket count, and n-gram range), matching
/// vocabulary rows by word string. The learning rate decays linearly over
/// the processed-pair fraction, estimated from a counting pass that replays
/// the first epoch's random streams.
pub fn train(
    corpus: &[EncodedNetwork],
    vocab: &Vocabulary,
    index: &SubwordIndex,
    cfg: &TrainConfig,
    warm_start: Option<&EmbeddingModel>,
) -> Result<EmbeddingModel> {
    cfg.validate()?;
    debug_assert_eq!(index.vocab_size() as usize, vocab.len());

    let dim = cfg.dim;
    let vocab_len = vocab.len();
    let mut input = Matrix::zeros(index.input_rows(), dim);
    let mut output = Matrix::zeros(vocab_len, dim);

    let mut init_rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed, 0x1417, 0));
    let bound = 1.0 / dim as f32;
    for x in input.data_mut() {
        *x = init_rng.random_range(-bound..bound);
    }

    if let Some(warm) = warm_start {
        if warm.dim() != dim {
            return Err(Error::WarmStartMismatch(format!(
                "dim {} != {}",
                warm.dim(),
                dim
            )));
        }
        if warm.subwords().bucket_count() != cfg.bucket_count
            || warm.subwords().minn() != cfg.minn
            || warm.subwords().maxn() != cfg.maxn
        {
            return Err(Error::WarmStartMismatch(format!(
                "subword hashing ({}, {}, {} buckets) != ({}, {}, {} buckets)",
                warm.subwords().minn(),
                warm.subwords().maxn(),
                warm.subwords().bucket_count(),
                cfg.minn,
                cfg.maxn,
                cfg.bucket_count
            )));
        }
        // Hash buckets align one-to-one; vocabulary rows match by word.
        let warm_vocab_len = warm.vocab().len();
        if cfg.bucket_count > 0 {
            let bucket_floats = cfg.bucket_count as usize * dim;
            input.data_mut()[vocab_len * dim..][..bucket_floats]
                .copy_from_slice(&warm.input().data()[warm_vocab_len * dim..][..bucket_floats]);
        }
        for (id, word) in vocab.words().iter().enumerate() {
            if let Some(old_id) = warm.vocab().id(word) {
                input
                    .row_mut(id)
                    .copy_from_slice(warm.input().row(old_id as usize));
                output
                    .row_mut(id)
                    .copy_from_slice(warm.output().row(old_id as usize));
            }
        }
    }

    // Table size scales with the vocabulary: enough entries to resolve rare
    // words, small enough to stay cache-friendly.
    let table_size = (vocab_len * 200).clamp(1_000_000, DEFAULT_NEG_TABLE_SIZE.max(vocab_len));
    let table = NegativeTable::build(vocab, 0.75, table_size)?;

    // Pair-count estimate: replay epoch 0's per-utterance streams.
    let mut epoch_pairs = 0u64;
    for (utt, enc) in corpus.iter().enumerate() {
        let mut rng = utterance_rng(cfg.seed, 0, utt as u64);
        let prep = prepare_network(enc, vocab, cfg.max_alternatives_cap, &mut rng);
        let mut windows = UniformWindow::new(&mut rng, cfg.window_max);
        epoch_pairs += count_pairs(&prep, cfg.mode, &mut windows);
    }
    let total_estimate = (epoch_pairs * cfg.epochs as u64).max(1);

    let processed = AtomicU64::new(0);
    let loss_stats = Mutex::new((0.0f64, 0u64));
    let next_report = AtomicU64::new(PROGRESS_EVERY);
    let shared_input = SharedMatrix::new(&mut input);
    let shared_output = SharedMatrix::new(&mut output);

    for epoch in 0..cfg.epochs {
        std::thread::scope(|scope| {
            for worker in 0..cfg.workers {
                let processed = &processed;
                let loss_stats = &loss_stats;
                let next_report = &next_report;
                let shared_input = &shared_input;
                let shared_output = &shared_output;
                let table = &table;
                scope.spawn(move || {
                    let mut scratch = Scratch::new(dim);
                    let mut local_loss = 0.0f64;
                    let mut local_pairs = 0u64;
                    for utt in (worker..corpus.len()).step_by(cfg.workers) {
                        let mut rng = utterance_rng(cfg.seed, epoch as u64, utt as u64);
                        let prep = prepare_network(
                            &corpus[utt],
                            vocab,
                            cfg.max_alternatives_cap,
                            &mut rng,
                        );
                        let mut pairs = std::mem::take(&mut scratch.pairs);
                        pairs.clear();
                        {
                            let mut windows = UniformWindow::new(&mut rng, cfg.window_max);
                            generate_pairs_into(&prep, cfg.mode, &mut windows, &mut pairs);
                        }
                        let done = processed.load(Ordering::Relaxed);
                        let lr = learning_rate(cfg.lr0, done, total_estimate) as f32;
                        for pair in &pairs {
                            sample_negatives(
                                table,
                                &mut rng,
                                pair.target,
                                cfg.negatives,
                                &mut scratch.negatives,
                            );
                            let negatives = std::mem::take(&mut scratch.negatives);
                            let rows = index.rows(pair.input);
                            local_loss += unsafe {
                                train_pair(
                                    shared_input,
                                    shared_output,
                                    rows,
                                    pair.target,
                                    &negatives,
                                    lr,
                                    cfg.scale_input_grad,
                                    &mut scratch,
                                )
                            };
                            scratch.negatives = negatives;
                        }
                        local_pairs += pairs.len() as u64;
                        scratch.pairs = pairs;

                        if local_pairs >= 4096 {
                            flush_progress(
                                cfg,
                                processed,
                                loss_stats,
                                next_report,
                                &mut local_loss,
                                &mut local_pairs,
                                total_estimate,
                            );
                        }
                    }
                    flush_progress(
                        cfg,
                        processed,
                        loss_stats,
                        next_report,
                        &mut local_loss,
                        &mut local_pairs,
                        total_estimate,
                    );
                });
            }
        });
    }

    Ok(EmbeddingModel::from_parts(
        dim,
        vocab.clone(),
        index.clone(),
        input,
        output,
    ))
}

fn utterance_rng(seed: u64, epoch: u64, utt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed, epoch.wrapping_add(0x9e37), utt))
}

#[allow(clippy::too_many_arguments)]
fn flush_progress(
    cfg: &TrainConfig,
    processed: &AtomicU64,
    loss_stats: &Mutex<(f64, u64)>,
    next_report: &AtomicU64,
    local_loss: &mut f64,
    local_pairs: &mut u64,
    total_estimate: u64,
) {
    if *local_pairs == 0 {
        return;
    }
    let done = processed.fetch_add(*local_pairs, Ordering::Relaxed) + *local_pairs;
    let (mean_loss, report_due) = {
        let mut stats = loss_stats.lock().expect("loss stats lock");
        stats.0 += *local_loss;
        stats.1 += *local_pairs;
        let due = done >= next_report.load(Ordering::Relaxed);
        (stats.0 / stats.1.max(1) as f64, due)
    };
    if cfg.verbose && report_due {
        let mut target = next_report.load(Ordering::Relaxed);
        while done >= target {
            match next_report.compare_exchange(
                target,
                target + PROGRESS_EVERY,
                Ordering::Relaxed,
                Ordering::Relaxed,
            ) {
                Ok(_) => {
                    eprintln!(
                        "{:.4}\t{:.6}\t{:.4}",
                        done as f64 / total_estimate as f64,
                        learning_rate(cfg.lr0, done, total_estimate),
                        mean_loss
                    );
                    target += PROGRESS_EVERY;
                }
                Err(current) => target = current,
            }
        }
    }
    *local_loss = 0.0;
    *local_pairs = 0;
}
