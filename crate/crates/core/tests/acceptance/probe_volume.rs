// Temporary calibration probe; removed once the desk configs are pinned.
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use c2v_core::acoustics::{SynthesisConfig, Synthesizer};
use c2v_core::trainer::{
    count_pairs, encode_network, prepare_network, Mode, UniformWindow,
};
use c2v_core::vocab::VocabBuilder;

use crate::desk;

#[test]
#[ignore]
fn measure_desk_volume() {
    let t0 = Instant::now();
    let lang = desk::build_language(0xC2C2);
    println!(
        "language: {} clusters, {} tokens, lexicon {} ({:.1?})",
        lang.cluster_count,
        lang.token_count,
        lang.lexicon.len(),
        t0.elapsed()
    );

    let seed = 11u64;
    let synth_cfg = SynthesisConfig {
        confusion_prob: 0.83,
        max_alternatives: 4,
        similarity_threshold: 0.6,
        temperature: 0.35,
        seed,
    };
    let t0 = Instant::now();
    let mut synth = Synthesizer::new(&lang.lexicon, synth_cfg).unwrap();
    let mut builder = VocabBuilder::new();
    let mut nets = Vec::with_capacity(lang.sentences.len());
    for (idx, sentence) in lang.sentences.iter().enumerate() {
        let tokens: Vec<&str> = sentence
            .iter()
            .map(|&id| lang.words[id as usize].as_str())
            .collect();
        let net = synth.synthesize_network(idx as u64, "u", &tokens);
        builder.add_network(&net);
        nets.push(net);
    }
    println!(
        "synth: mean alts {:.3}, {} arcs ({:.1?})",
        synth.report().mean_alternatives(),
        synth.report().arcs,
        t0.elapsed()
    );

    let vocab = builder.finish(5, 1e-4).unwrap();
    println!("vocab: {} words", vocab.len());

    let t0 = Instant::now();
    let corpus: Vec<_> = nets.iter().map(|n| encode_network(n, &vocab)).collect();
    println!("encode ({:.1?})", t0.elapsed());

    for mode in [Mode::Top, Mode::Intra, Mode::Inter] {
        let t0 = Instant::now();
        let mut total = 0u64;
        let mut surviving_arcs = 0u64;
        let mut surviving_slots = 0u64;
        for (idx, enc) in corpus.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ idx as u64);
            let prep = prepare_network(enc, &vocab, None, &mut rng);
            surviving_slots += prep.slots.len() as u64;
            surviving_arcs += prep.slots.iter().map(|s| s.alternatives.len() as u64).sum::<u64>();
            let mut w = UniformWindow::new(&mut rng, 3);
            total += count_pairs(&prep, mode, &mut w);
        }
        println!(
            "{mode}: {total} pairs/epoch, {surviving_arcs} arcs, {surviving_slots} slots ({:.1?})",
            t0.elapsed()
        );
    }

    // Time one real training per mode at the desk config.
    use c2v_core::subword::SubwordIndex;
    use c2v_core::trainer::train;
    use c2v_core::TrainConfig;
    let index = SubwordIndex::build(&vocab, 3, 6, 100_000);
    for mode in [Mode::Top, Mode::Intra, Mode::Inter] {
        let cfg = TrainConfig {
            mode,
            dim: 100,
            window_max: 3,
            negatives: 5,
            lr0: 0.03,
            epochs: 5,
            minn: 3,
            maxn: 6,
            bucket_count: 100_000,
            min_count: 5,
            subsample_t: 1e-4,
            max_alternatives_cap: None,
            scale_input_grad: false,
            workers: 4,
            seed,
            verbose: false,
        };
        let t0 = Instant::now();
        let model = train(&corpus, &vocab, &index, &cfg, None).unwrap();
        println!("train {mode}: {:.1?} (dim {})", t0.elapsed(), model.dim());
    }
}
