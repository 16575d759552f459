//! Desk-scale synthetic benchmark: a generated language whose lexicon plants
//! homophone/confusable clusters and whose corpus carries an additive
//! category-by-slot semantic structure, so semantic analogies and acoustic
//! analogies are both measurable on a model trained in minutes.
//!
//! Words are consonant-vowel strings; the base pronunciation is one phone
//! per letter. A homophone variant respells a word while keeping its
//! pronunciation; a near variant mutates one letter in both spelling and
//! pronunciation.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use c2v_core::acoustics::Lexicon;
use c2v_core::eval::AnalogyQuadruple;
use c2v_core::intent::LabeledUtterance;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

pub const CATEGORIES: usize = 12;
pub const SLOTS: usize = 12;
const CTX_PER_CATEGORY: usize = 10;
const CTX_PER_SLOT: usize = 10;
const FILLERS: usize = 2200;
const SENTENCES: usize = 125_000;
const INTENTS: usize = 4;
const INTENT_UTTERANCES: usize = 2000;
const INTENT_TRAIN: usize = 1500;

pub struct DeskLanguage {
    pub lexicon: Lexicon,
    /// Base tokens by id; sentences index into this list.
    pub words: Vec<String>,
    pub sentences: Vec<Vec<u32>>,
    pub semantic_questions: Vec<AnalogyQuadruple>,
    pub intent_train: Vec<LabeledUtterance>,
    pub intent_test: Vec<LabeledUtterance>,
    /// Planted confusable clusters (bases with at least one variant).
    pub cluster_count: usize,
    pub token_count: usize,
}

struct WordFactory {
    rng: ChaCha8Rng,
    taken: HashSet<String>,
}

impl WordFactory {
    fn new(seed: u64) -> Self {
        WordFactory {
            rng: ChaCha8Rng::seed_from_u64(seed),
            taken: HashSet::new(),
        }
    }

    fn fresh_word(&mut self) -> String {
        loop {
            let syllables = self.rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONSONANTS[self.rng.random_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[self.rng.random_range(0..VOWELS.len())] as char);
            }
            if self.rng.random::<f64>() < 0.4 {
                w.push(CONSONANTS[self.rng.random_range(0..CONSONANTS.len())] as char);
            }
            if self.taken.insert(w.clone()) {
                return w;
            }
        }
    }

    /// Respells `base` at one position without touching its pronunciation.
    fn homophone_spelling(&mut self, base: &str) -> Option<String> {
        let bytes = base.as_bytes();
        for _ in 0..40 {
            let pos = self.rng.random_range(0..bytes.len());
            let pool: &[u8] = if VOWELS.contains(&bytes[pos]) {
                VOWELS
            } else {
                CONSONANTS
            };
            let repl = pool[self.rng.random_range(0..pool.len())];
            if repl == bytes[pos] {
                continue;
            }
            let mut w = bytes.to_vec();
            w[pos] = repl;
            let w = String::from_utf8(w).expect("ascii");
            if self.taken.insert(w.clone()) {
                return Some(w);
            }
        }
        None
    }
}

fn phones_of(spelling: &str) -> Vec<String> {
    spelling
        .bytes()
        .map(|b| (b as char).to_uppercase().to_string())
        .collect()
}

/// Mutates one position of both spelling and pronunciation.
fn near_variant(factory: &mut WordFactory, base: &str) -> Option<(String, Vec<String>)> {
    let bytes = base.as_bytes();
    for _ in 0..40 {
        let pos = factory.rng.random_range(0..bytes.len());
        let pool: &[u8] = if VOWELS.contains(&bytes[pos]) {
            VOWELS
        } else {
            CONSONANTS
        };
        let repl = pool[factory.rng.random_range(0..pool.len())];
        if repl == bytes[pos] {
            continue;
        }
        let mut w = bytes.to_vec();
        w[pos] = repl;
        let w = String::from_utf8(w).expect("ascii");
        if factory.taken.insert(w.clone()) {
            let phones = phones_of(&w);
            return Some((w, phones));
        }
    }
    None
}

pub fn build_language(master_seed: u64) -> DeskLanguage {
    let mut factory = WordFactory::new(master_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ 0xD5);

    // Base inventory.
    let grid: Vec<Vec<String>> = (0..CATEGORIES)
        .map(|_| (0..SLOTS).map(|_| factory.fresh_word()).collect())
        .collect();
    let cat_ctx: Vec<Vec<String>> = (0..CATEGORIES)
        .map(|_| (0..CTX_PER_CATEGORY).map(|_| factory.fresh_word()).collect())
        .collect();
    let slot_ctx: Vec<Vec<String>> = (0..SLOTS)
        .map(|_| (0..CTX_PER_SLOT).map(|_| factory.fresh_word()).collect())
        .collect();
    let fillers: Vec<String> = (0..FILLERS).map(|_| factory.fresh_word()).collect();

    // Lexicon: every base plus planted variants. Grid and context words all
    // get a homophone and a near variant; most fillers get one or two.
    let mut entries: Vec<(String, Vec<String>)> = Vec::new();
    let mut cluster_count = 0usize;
    {
        let mut plant = |factory: &mut WordFactory,
                         entries: &mut Vec<(String, Vec<String>)>,
                         base: &str,
                         homophones: usize,
                         nears: usize| {
            let base_phones = phones_of(base);
            entries.push((base.to_string(), base_phones.clone()));
            let mut planted = false;
            for _ in 0..homophones {
                if let Some(spelling) = factory.homophone_spelling(base) {
                    entries.push((spelling, base_phones.clone()));
                    planted = true;
                }
            }
            for _ in 0..nears {
                if let Some((spelling, phones)) = near_variant(factory, base) {
                    entries.push((spelling, phones));
                    planted = true;
                }
            }
            if planted {
                cluster_count += 1;
            }
        };

        for row in &grid {
            for w in row {
                plant(&mut factory, &mut entries, w, 1, 1);
            }
        }
        for group in cat_ctx.iter().chain(&slot_ctx) {
            for w in group {
                plant(&mut factory, &mut entries, w, 1, 1);
            }
        }
        for (i, w) in fillers.iter().enumerate() {
            match i % 10 {
                0..=3 => plant(&mut factory, &mut entries, w, 1, 0),
                4..=6 => plant(&mut factory, &mut entries, w, 0, 1),
                7 => plant(&mut factory, &mut entries, w, 1, 1),
                _ => plant(&mut factory, &mut entries, w, 0, 0),
            }
        }
    }
    let lexicon = Lexicon::from_entries(entries);

    // Token ids for sentence encoding.
    let mut words: Vec<String> = Vec::new();
    let mut id_of = std::collections::HashMap::new();
    let mut intern = |w: &str, words: &mut Vec<String>| -> u32 {
        *id_of.entry(w.to_string()).or_insert_with(|| {
            words.push(w.to_string());
            (words.len() - 1) as u32
        })
    };
    let grid_ids: Vec<Vec<u32>> = grid
        .iter()
        .map(|row| row.iter().map(|w| intern(w, &mut words)).collect())
        .collect();
    let cat_ctx_ids: Vec<Vec<u32>> = cat_ctx
        .iter()
        .map(|g| g.iter().map(|w| intern(w, &mut words)).collect())
        .collect();
    let slot_ctx_ids: Vec<Vec<u32>> = slot_ctx
        .iter()
        .map(|g| g.iter().map(|w| intern(w, &mut words)).collect())
        .collect();
    let filler_ids: Vec<u32> = fillers.iter().map(|w| intern(w, &mut words)).collect();

    // Zipf weights over fillers.
    let filler_cdf: Vec<f64> = {
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(filler_ids.len());
        for i in 0..filler_ids.len() {
            acc += 1.0 / (i as f64 + 1.0);
            cdf.push(acc);
        }
        let total = acc;
        cdf.into_iter().map(|x| x / total).collect()
    };
    let draw_filler = |rng: &mut ChaCha8Rng| -> u32 {
        let x = rng.random::<f64>();
        let idx = filler_cdf.partition_point(|&c| c < x);
        filler_ids[idx.min(filler_ids.len() - 1)]
    };

    // Corpus: each sentence carries one grid word with two category-context
    // and two slot-context words, padded with Zipf fillers. A fraction of
    // the context tokens is mislabeled noise so the additive structure is
    // learnable but not saturated.
    const CTX_NOISE: f64 = 0.15;
    let mut sentences = Vec::with_capacity(SENTENCES);
    let mut token_count = 0usize;
    for _ in 0..SENTENCES {
        let c = rng.random_range(0..CATEGORIES);
        let s = rng.random_range(0..SLOTS);
        let pick_cat = |rng: &mut ChaCha8Rng| {
            let cc = if rng.random::<f64>() < CTX_NOISE {
                rng.random_range(0..CATEGORIES)
            } else {
                c
            };
            cat_ctx_ids[cc][rng.random_range(0..CTX_PER_CATEGORY)]
        };
        let pick_slot = |rng: &mut ChaCha8Rng| {
            let ss = if rng.random::<f64>() < CTX_NOISE {
                rng.random_range(0..SLOTS)
            } else {
                s
            };
            slot_ctx_ids[ss][rng.random_range(0..CTX_PER_SLOT)]
        };
        let mut tokens: Vec<u32> = vec![
            grid_ids[c][s],
            pick_cat(&mut rng),
            pick_cat(&mut rng),
            pick_slot(&mut rng),
            pick_slot(&mut rng),
        ];
        for _ in 0..3 {
            tokens.push(draw_filler(&mut rng));
        }
        tokens.shuffle(&mut rng);
        token_count += tokens.len();
        sentences.push(tokens);
    }

    // Semantic analogies over the grid: vec(w_cs) - vec(w_cs') + vec(w_c's')
    // should land on w_c's.
    let mut semantic_questions = Vec::with_capacity(300);
    let mut qrng = ChaCha8Rng::seed_from_u64(master_seed ^ 0x5E);
    let mut seen = HashSet::new();
    while semantic_questions.len() < 300 {
        let c1 = qrng.random_range(0..CATEGORIES);
        let c2 = qrng.random_range(0..CATEGORIES);
        let s1 = qrng.random_range(0..SLOTS);
        let s2 = qrng.random_range(0..SLOTS);
        if c1 == c2 || s1 == s2 || !seen.insert((c1, s1, c2, s2)) {
            continue;
        }
        semantic_questions.push(AnalogyQuadruple {
            w1: grid[c1][s1].clone(),
            w2: grid[c1][s2].clone(),
            w3: grid[c2][s2].clone(),
            w4: grid[c2][s1].clone(),
            section: "semantic".to_string(),
        });
    }

    // Intent data: four intents mapped to four categories. Classification
    // hinges on two signal tokens per utterance, so corrupting one matters.
    let mut irng = ChaCha8Rng::seed_from_u64(master_seed ^ 0x17);
    let mut intent_train = Vec::with_capacity(INTENT_TRAIN);
    let mut intent_test = Vec::with_capacity(INTENT_UTTERANCES - INTENT_TRAIN);
    for i in 0..INTENT_UTTERANCES {
        let k = i % INTENTS;
        let mut tokens: Vec<String> = Vec::with_capacity(8);
        tokens.push(grid[k][irng.random_range(0..SLOTS)].clone());
        tokens.push(cat_ctx[k][irng.random_range(0..CTX_PER_CATEGORY)].clone());
        for _ in 0..6 {
            let f = draw_filler(&mut irng) as usize;
            tokens.push(words[f].clone());
        }
        tokens.shuffle(&mut irng);
        let utt = LabeledUtterance { tokens, label: k };
        if i < INTENT_TRAIN {
            intent_train.push(utt);
        } else {
            intent_test.push(utt);
        }
    }

    DeskLanguage {
        lexicon,
        words,
        sentences,
        semantic_questions,
        intent_train,
        intent_test,
        cluster_count,
        token_count,
    }
}
