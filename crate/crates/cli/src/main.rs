//! `c2v`: train and evaluate subword embeddings over confusion networks.
//!
//! Exit codes: 0 success, 2 usage (bad flags, missing input files), 3 I/O
//! failures, 4 data-format errors. Reports go to stdout as UTF-8 TSV; logs
//! and progress to stderr.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use c2v_core::acoustics::{generate_acoustic_tasks, Lexicon, SynthesisConfig, Synthesizer};
use c2v_core::cn::{parse_cn_file, parse_plain_corpus, write_cn};
use c2v_core::eval::{eval_analogy_file, eval_similarity_file, write_analogy_file, write_pairs_file};
use c2v_core::intent::{corrupt, evaluate_probe, read_intent_file, train_probe};
use c2v_core::model::{
    concatenate, export_source_text, nearest_neighbors, pca_2d, read_text_vectors, ModelVectors,
    TextVectors, VectorSource,
};
use c2v_core::subword::SubwordIndex;
use c2v_core::trainer::{encode_network, train};
use c2v_core::vocab::VocabBuilder;
use c2v_core::{EmbeddingModel, Mode, TrainConfig};

#[derive(Parser)]
#[command(
    name = "c2v",
    about = "Subword skip-gram embeddings over ASR confusion networks",
    version
)]
struct Cli {
    /// Random seed shared by all stochastic stages.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker threads for training (and evaluation fan-out).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a confusion-network corpus from plain text and a lexicon.
    SynthCn(SynthArgs),
    /// Train an embedding model on a confusion-network corpus.
    Train(TrainArgs),
    /// Run a questions-words analogy benchmark.
    EvalAnalogy(EvalAnalogyArgs),
    /// Run a TSV word-similarity benchmark.
    EvalSim(EvalSimArgs),
    /// Nearest neighbors of a word.
    Nn(NnArgs),
    /// Concatenate two models over their shared vocabulary into a .vec file.
    Concat(ConcatArgs),
    /// Export a model to the .vec text format.
    Export(ExportArgs),
    /// Project selected word vectors to 2-D by PCA.
    Pca(PcaArgs),
    /// Generate acoustic analogy and similarity task files from a lexicon.
    GenTasks(GenTasksArgs),
    /// Intent-classification robustness probe: train clean, evaluate corrupted.
    Intent(IntentArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Plain-text corpus, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Pronunciation lexicon (CMUdict format).
    #[arg(long)]
    lexicon: PathBuf,
    /// Output confusion-network file.
    #[arg(long)]
    out: PathBuf,
    /// Probability that a token receives confusable alternatives.
    #[arg(long, default_value_t = 0.85)]
    confusion_prob: f64,
    /// Maximum alternatives per slot, the true word included.
    #[arg(long, default_value_t = 5)]
    max_alternatives: usize,
    /// Minimum acoustic similarity for sampled alternatives.
    #[arg(long, default_value_t = 0.6)]
    similarity_threshold: f64,
    /// Posterior softmax temperature.
    #[arg(long, default_value_t = 0.25)]
    temperature: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Confusion-network corpus file.
    #[arg(long)]
    cn: PathBuf,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
    /// Pair generation mode over the network.
    #[arg(long, value_enum, default_value_t = ModeArg::Inter)]
    mode: ModeArg,
    /// Vector dimension.
    #[arg(long, default_value_t = 300)]
    dim: usize,
    /// Max context window; per-slot width is sampled from 1..=ws.
    #[arg(long, alias = "window", default_value_t = 5)]
    ws: u32,
    /// Training epochs.
    #[arg(long, alias = "epochs", default_value_t = 15)]
    epoch: u32,
    /// Initial learning rate (linear decay to lr * 1e-4).
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Negative samples per pair.
    #[arg(long, alias = "negatives", default_value_t = 64)]
    neg: usize,
    /// Prune words rarer than this.
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// Frequent-word subsampling threshold.
    #[arg(long = "t", alias = "subsample", default_value_t = 1e-4)]
    subsample_t: f64,
    /// Shortest character n-gram.
    #[arg(long, default_value_t = 3)]
    minn: u32,
    /// Longest character n-gram.
    #[arg(long, default_value_t = 6)]
    maxn: u32,
    /// Subword hash buckets; 0 trains a word-only model.
    #[arg(long, default_value_t = 2_000_000)]
    bucket: u32,
    /// Keep only the most probable alternatives of each slot.
    #[arg(long)]
    max_alternatives: Option<usize>,
    /// Scale the input gradient by 1/#rows (off: exact sum gradient).
    #[arg(long, default_value_t = false)]
    scale_input_grad: bool,
    /// Warm-start from a compatible model instead of random init.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Write the vocabulary as TSV `word<TAB>count`, descending.
    #[arg(long)]
    dump_vocab: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Top,
    Intra,
    Inter,
    Hybrid,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Top => Mode::Top,
            ModeArg::Intra => Mode::Intra,
            ModeArg::Inter => Mode::Inter,
            ModeArg::Hybrid => Mode::Hybrid,
        }
    }
}

#[derive(Args)]
struct EvalAnalogyArgs {
    /// Model file (.bin) or text vectors (.vec).
    #[arg(long)]
    model: PathBuf,
    /// Questions-words file.
    #[arg(long)]
    questions: PathBuf,
    #[arg(long, default_value_t = 2)]
    top_k: usize,
}

#[derive(Args)]
struct EvalSimArgs {
    #[arg(long)]
    model: PathBuf,
    /// TSV file: word1<TAB>word2<TAB>score.
    #[arg(long)]
    pairs: PathBuf,
}

#[derive(Args)]
struct NnArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Args)]
struct ConcatArgs {
    /// First model (.bin).
    a: PathBuf,
    /// Second model (.bin).
    b: PathBuf,
    /// Output .vec file over the intersection vocabulary.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    model: PathBuf,
    /// File with one word per line.
    #[arg(long)]
    words: PathBuf,
}

#[derive(Args)]
struct GenTasksArgs {
    #[arg(long)]
    lexicon: PathBuf,
    /// Output questions-words file for the acoustic analogy task.
    #[arg(long)]
    analogy_out: PathBuf,
    /// Output TSV file for the acoustic similarity task.
    #[arg(long)]
    pairs_out: PathBuf,
    /// Similarity floor for homophone pairs.
    #[arg(long, default_value_t = 1.0)]
    homophone_threshold: f64,
    /// Target number of quadruples and of scored pairs.
    #[arg(long, default_value_t = 300)]
    count: usize,
}

#[derive(Args)]
struct IntentArgs {
    #[arg(long)]
    model: PathBuf,
    /// TSV data: label<TAB>token token ... One in five utterances is held
    /// out for evaluation unless --eval is given.
    #[arg(long)]
    data: PathBuf,
    /// Optional separate evaluation TSV.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long)]
    lexicon: PathBuf,
    /// Per-token substitution probability for the corrupted evaluation.
    #[arg(long, default_value_t = 0.18)]
    rate: f64,
    #[arg(long, default_value_t = 80)]
    probe_epochs: u32,
    #[arg(long, default_value_t = 0.5)]
    probe_lr: f64,
    /// Also train on corrupted text and report its CERs.
    #[arg(long, default_value_t = false)]
    train_on_corrupt: bool,
}

enum CliError {
    Usage(String),
    Core(c2v_core::Error),
}

impl From<c2v_core::Error> for CliError {
    fn from(e: c2v_core::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(0),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                c2v_core::Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(4),
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::SynthCn(args) => cmd_synth(args, cli.seed),
        Command::Train(args) => cmd_train(args, cli.seed, cli.threads),
        Command::EvalAnalogy(args) => cmd_eval_analogy(args),
        Command::EvalSim(args) => cmd_eval_sim(args),
        Command::Nn(args) => cmd_nn(args),
        Command::Concat(args) => cmd_concat(args),
        Command::Export(args) => cmd_export(args),
        Command::Pca(args) => cmd_pca(args),
        Command::GenTasks(args) => cmd_gen_tasks(args, cli.seed),
        Command::Intent(args) => cmd_intent(args, cli.seed),
    }
}

/// Input files are validated before any work; a missing input is a usage
/// error.
fn ensure_input(path: &Path) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "input file {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(c2v_core::Error::Io)?))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(c2v_core::Error::Io)?,
    ))
}

/// Loaded vectors: a binary model (with subword composition) or a .vec
/// table. Sniffed by magic bytes.
enum VectorsData {
    Model(Box<EmbeddingModel>),
    Text(TextVectors),
}

impl VectorsData {
    fn load(path: &Path) -> CliResult<VectorsData> {
        ensure_input(path)?;
        let mut reader = open(path)?;
        let mut magic = [0u8; 4];
        let n = reader.read(&mut magic).map_err(c2v_core::Error::Io)?;
        let whole: Vec<u8> = magic[..n]
            .iter()
            .copied()
            .chain(reader.bytes().collect::<Result<Vec<u8>, _>>().map_err(c2v_core::Error::Io)?)
            .collect();
        if n == 4 && &magic == b"C2V2" {
            Ok(VectorsData::Model(Box::new(EmbeddingModel::load(
                &mut &whole[..],
            )?)))
        } else {
            Ok(VectorsData::Text(read_text_vectors(&whole[..])?))
        }
    }

    fn source(&self) -> AnyVectors<'_> {
        match self {
            VectorsData::Model(m) => AnyVectors::Model(ModelVectors::new(m)),
            VectorsData::Text(t) => AnyVectors::Text(t),
        }
    }
}

enum AnyVectors<'a> {
    Model(ModelVectors<'a>),
    Text(&'a TextVectors),
}

impl VectorSource for AnyVectors<'_> {
    fn dim(&self) -> usize {
        match self {
            AnyVectors::Model(m) => m.dim(),
            AnyVectors::Text(t) => t.dim(),
        }
    }

    fn words(&self) -> &[String] {
        match self {
            AnyVectors::Model(m) => m.words(),
            AnyVectors::Text(t) => t.words(),
        }
    }

    fn word_index(&self, word: &str) -> Option<usize> {
        match self {
            AnyVectors::Model(m) => m.word_index(word),
            AnyVectors::Text(t) => t.word_index(word),
        }
    }

    fn candidate_vector(&self, idx: usize) -> &[f32] {
        match self {
            AnyVectors::Model(m) => m.candidate_vector(idx),
            AnyVectors::Text(t) => t.candidate_vector(idx),
        }
    }

    fn vector(&self, word: &str) -> Option<Vec<f32>> {
        match self {
            AnyVectors::Model(m) => m.vector(word),
            AnyVectors::Text(t) => t.vector(word),
        }
    }
}

fn cmd_synth(args: SynthArgs, seed: u64) -> CliResult<()> {
    ensure_input(&args.corpus)?;
    ensure_input(&args.lexicon)?;
    let lexicon = Lexicon::parse(open(&args.lexicon)?)?;
    if lexicon.skipped_lines() > 0 {
        eprintln!("lexicon: skipped {} malformed lines", lexicon.skipped_lines());
    }
    let cfg = SynthesisConfig {
        confusion_prob: args.confusion_prob,
        max_alternatives: args.max_alternatives,
        similarity_threshold: args.similarity_threshold,
        temperature: args.temperature,
        seed,
    };
    let mut synth = Synthesizer::new(&lexicon, cfg)?;
    let mut out = create(&args.out)?;
    for (idx, net) in parse_plain_corpus(open(&args.corpus)?).enumerate() {
        let net = net?;
        let tokens: Vec<&str> = net
            .slots
            .iter()
            .map(|s| s.alternatives[0].word.as_str())
            .collect();
        let synthesized = synth.synthesize_network(idx as u64, &net.utterance_id, &tokens);
        write_cn(&mut out, &synthesized)?;
    }
    out.flush().map_err(c2v_core::Error::Io)?;
    let report = synth.report();
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "utterances\t{}", report.utterances).map_err(c2v_core::Error::Io)?;
    writeln!(stdout, "slots\t{}", report.slots).map_err(c2v_core::Error::Io)?;
    writeln!(stdout, "arcs\t{}", report.arcs).map_err(c2v_core::Error::Io)?;
    writeln!(stdout, "oov_tokens\t{}", report.oov_tokens).map_err(c2v_core::Error::Io)?;
    writeln!(stdout, "mean_alternatives\t{:.4}", report.mean_alternatives())
        .map_err(c2v_core::Error::Io)?;
    Ok(())
}

fn cmd_train(args: TrainArgs, seed: u64, threads: usize) -> CliResult<()> {
    ensure_input(&args.cn)?;
    if let Some(p) = &args.pretrained {
        ensure_input(p)?;
    }
    let cfg = TrainConfig {
        mode: args.mode.into(),
        dim: args.dim,
        window_max: args.ws,
        negatives: args.neg,
        lr0: args.lr,
        epochs: args.epoch,
        minn: args.minn,
        maxn: args.maxn,
        bucket_count: args.bucket,
        min_count: args.min_count,
        subsample_t: args.subsample_t,
        max_alternatives_cap: args.max_alternatives,
        scale_input_grad: args.scale_input_grad,
        workers: threads.max(1),
        seed,
        verbose: true,
    };
    cfg.validate()?;

    // Pass 1: vocabulary.
    let mut builder = VocabBuilder::new();
    for net in parse_cn_file(open(&args.cn)?) {
        builder.add_network(&net?);
    }
    let vocab = builder.finish(cfg.min_count, cfg.subsample_t)?;
    eprintln!(
        "vocabulary: {} words, {} tokens retained",
        vocab.len(),
        vocab.total_tokens()
    );
    if let Some(path) = &args.dump_vocab {
        let mut out = create(path)?;
        vocab.write_counts(&mut out)?;
        out.flush().map_err(c2v_core::Error::Io)?;
    }

    // Pass 2: encode.
    let mut corpus = Vec::new();
    for net in parse_cn_file(open(&args.cn)?) {
        corpus.push(encode_network(&net?, &vocab));
    }
    let index = SubwordIndex::build(&vocab, cfg.minn, cfg.maxn, cfg.bucket_count);

    let warm = match &args.pretrained {
        Some(p) => Some(EmbeddingModel::load_path(p)?),
        None => None,
    };
    let model = train(&corpus, &vocab, &index, &cfg, warm.as_ref())?;
    model.save_path(&args.out)?;
    eprintln!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_eval_analogy(args: EvalAnalogyArgs) -> CliResult<()> {
    ensure_input(&args.questions)?;
    let data = VectorsData::load(&args.model)?;
    let report = eval_analogy_file(&data.source(), open(&args.questions)?, args.top_k)?;
    report
        .write_tsv(&mut io::stdout().lock())
        .map_err(CliError::from)
}

fn cmd_eval_sim(args: EvalSimArgs) -> CliResult<()> {
    ensure_input(&args.pairs)?;
    let data = VectorsData::load(&args.model)?;
    let report = eval_similarity_file(&data.source(), open(&args.pairs)?)?;
    report
        .write_tsv(&mut io::stdout().lock())
        .map_err(CliError::from)
}

fn cmd_nn(args: NnArgs) -> CliResult<()> {
    let data = VectorsData::load(&args.model)?;
    let source = data.source();
    let word = args.word.to_lowercase();
    let query = source
        .vector(&word)
        .ok_or_else(|| c2v_core::Error::MissingWord(word.clone()))?;
    let neighbors = nearest_neighbors(&source, &query, args.k, &[word.as_str()])?;
    let mut stdout = io::stdout().lock();
    for (w, cos) in neighbors {
        writeln!(stdout, "{w}\t{cos:.4}").map_err(c2v_core::Error::Io)?;
    }
    Ok(())
}

fn cmd_concat(args: ConcatArgs) -> CliResult<()> {
    ensure_input(&args.a)?;
    ensure_input(&args.b)?;
    let a = EmbeddingModel::load_path(&args.a)?;
    let b = EmbeddingModel::load_path(&args.b)?;
    let joined = concatenate(&a, &b)?;
    let mut out = create(&args.out)?;
    export_source_text(&joined, &mut out)?;
    out.flush().map_err(c2v_core::Error::Io)?;
    eprintln!(
        "concatenated {} words at dim {} into {}",
        joined.words().len(),
        joined.dim(),
        args.out.display()
    );
    Ok(())
}

fn cmd_export(args: ExportArgs) -> CliResult<()> {
    ensure_input(&args.model)?;
    let model = EmbeddingModel::load_path(&args.model)?;
    let mut out = create(&args.out)?;
    model.export_text(&mut out)?;
    out.flush().map_err(c2v_core::Error::Io)?;
    Ok(())
}

fn cmd_pca(args: PcaArgs) -> CliResult<()> {
    ensure_input(&args.words)?;
    let data = VectorsData::load(&args.model)?;
    let source = data.source();
    let mut words = Vec::new();
    let mut vectors = Vec::new();
    let mut content = String::new();
    open(&args.words)?
        .read_to_string(&mut content)
        .map_err(c2v_core::Error::Io)?;
    for raw in content.split_whitespace() {
        let word = raw.to_lowercase();
        match source.vector(&word) {
            Some(v) => {
                words.push(word);
                vectors.push(v);
            }
            None => eprintln!("pca: {word:?} has no representation, skipped"),
        }
    }
    let coords = pca_2d(&vectors)?;
    let mut stdout = io::stdout().lock();
    for (word, (x, y)) in words.iter().zip(coords) {
        writeln!(stdout, "{word}\t{x:.6}\t{y:.6}").map_err(c2v_core::Error::Io)?;
    }
    Ok(())
}

fn cmd_gen_tasks(args: GenTasksArgs, seed: u64) -> CliResult<()> {
    ensure_input(&args.lexicon)?;
    let lexicon = Lexicon::parse(open(&args.lexicon)?)?;
    let tasks = generate_acoustic_tasks(&lexicon, args.homophone_threshold, args.count, seed)?;
    let mut analogy_out = create(&args.analogy_out)?;
    write_analogy_file(&mut analogy_out, &tasks.analogies)?;
    analogy_out.flush().map_err(c2v_core::Error::Io)?;
    let mut pairs_out = create(&args.pairs_out)?;
    write_pairs_file(&mut pairs_out, &tasks.pairs)?;
    pairs_out.flush().map_err(c2v_core::Error::Io)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "analogies\t{}", tasks.analogies.len()).map_err(c2v_core::Error::Io)?;
    writeln!(stdout, "pairs\t{}", tasks.pairs.len()).map_err(c2v_core::Error::Io)?;
    Ok(())
}

fn cmd_intent(args: IntentArgs, seed: u64) -> CliResult<()> {
    ensure_input(&args.data)?;
    ensure_input(&args.lexicon)?;
    if let Some(p) = &args.eval {
        ensure_input(p)?;
    }
    let data = VectorsData::load(&args.model)?;
    let source = data.source();
    let lexicon = Lexicon::parse(open(&args.lexicon)?)?;
    let (all, labels) = read_intent_file(open(&args.data)?)?;
    let (train_set, eval_set) = match &args.eval {
        Some(p) => {
            let (eval_set, _) = read_intent_file(open(p)?)?;
            (all, eval_set)
        }
        None => {
            // Deterministic 4:1 split.
            let mut train_set = Vec::new();
            let mut eval_set = Vec::new();
            for (i, utt) in all.into_iter().enumerate() {
                if i % 5 == 4 {
                    eval_set.push(utt);
                } else {
                    train_set.push(utt);
                }
            }
            (train_set, eval_set)
        }
    };
    let corrupted = corrupt(&eval_set, &lexicon, args.rate, seed);

    let mut stdout = io::stdout().lock();
    let clf = train_probe(
        &train_set,
        &source,
        labels.len(),
        args.probe_epochs,
        args.probe_lr,
        seed,
    )?;
    let cer_clean = evaluate_probe(&clf, &eval_set, &source)?;
    let cer_corrupt = evaluate_probe(&clf, &corrupted, &source)?;
    writeln!(stdout, "cer_clean\t{cer_clean:.2}").map_err(c2v_core::Error::Io)?;
    writeln!(stdout, "cer_corrupt\t{cer_corrupt:.2}").map_err(c2v_core::Error::Io)?;
    writeln!(stdout, "delta\t{:.2}", cer_corrupt - cer_clean).map_err(c2v_core::Error::Io)?;

    if args.train_on_corrupt {
        let corrupted_train = corrupt(&train_set, &lexicon, args.rate, seed.wrapping_add(1));
        let clf2 = train_probe(
            &corrupted_train,
            &source,
            labels.len(),
            args.probe_epochs,
            args.probe_lr,
            seed,
        )?;
        let cer2_clean = evaluate_probe(&clf2, &eval_set, &source)?;
        let cer2_corrupt = evaluate_probe(&clf2, &corrupted, &source)?;
        writeln!(stdout, "corrupt_trained_cer_clean\t{cer2_clean:.2}")
            .map_err(c2v_core::Error::Io)?;
        writeln!(stdout, "corrupt_trained_cer_corrupt\t{cer2_corrupt:.2}")
            .map_err(c2v_core::Error::Io)?;
    }
    Ok(())
}
