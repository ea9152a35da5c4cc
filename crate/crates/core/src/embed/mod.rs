//! Paragraph-vector document embeddings, distributed bag-of-words variant.
//!
//! During training every document owns a vector that is pushed towards the
//! output vectors of its own tokens and away from tokens drawn from a
//! unigram^(3/4) noise distribution. Only the output vectors are kept;
//! document vectors for new sequences are re-derived by the same updates
//! with the output vectors frozen.

mod io;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ast::TokenSequence;
use crate::error::EmbedError;
use crate::tokens::{apply_oov, build_vocabulary, normalize_sequence, OovPolicy, Vocabulary, DEFAULT_OOV};

pub use io::FORMAT_VERSION;

/// Learning rate decays linearly to this fraction of its initial value.
pub const MIN_LEARNING_RATE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub infer_epochs: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 100,
            epochs: 20,
            negative_samples: 5,
            learning_rate: 0.025,
            seed: 0,
            infer_epochs: 50,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_owned()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.negative_samples == 0 {
            return bad("negative_samples must be at least 1");
        }
        if self.infer_epochs == 0 {
            return bad("infer_epochs must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// Cumulative unigram^(3/4) weights.
#[derive(Debug, Clone, PartialEq)]
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("noise table is nonempty");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Trained document embedder.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    config: EmbedConfig,
    oov_symbol: String,
    vocab_ref: [u8; 16],
    terms: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    /// Row-major `terms.len() x dim`.
    output: Vec<f32>,
    noise: NoiseTable,
}

impl EmbeddingModel {
    fn from_parts(
        config: EmbedConfig,
        oov_symbol: String,
        vocab_ref: [u8; 16],
        terms: Vec<String>,
        counts: Vec<u64>,
        output: Vec<f32>,
    ) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let noise = NoiseTable::new(&counts);
        EmbeddingModel {
            config,
            oov_symbol,
            vocab_ref,
            terms,
            counts,
            index,
            output,
            noise,
        }
    }

    pub fn config(&self) -> &EmbedConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn oov_symbol(&self) -> &str {
        &self.oov_symbol
    }

    /// Fingerprint of the vocabulary the training corpus was filtered with;
    /// all zeros when none was recorded.
    pub fn vocab_ref(&self) -> [u8; 16] {
        self.vocab_ref
    }

    pub fn output_vector(&self, term: &str) -> Option<&[f32]> {
        let dim = self.config.dim;
        self.index.get(term).map(|&i| &self.output[i * dim..(i + 1) * dim])
    }

    /// Normalizes `seq` and replaces items unknown to the model with its OOV
    /// symbol. The model's terms are the vocabulary of its training corpus,
    /// so this matches the preprocessing that corpus went through.
    pub fn preprocess(&self, seq: &TokenSequence) -> TokenSequence {
        let items = normalize_sequence(seq)
            .into_items()
            .into_iter()
            .map(|item| {
                if self.index.contains_key(&item) {
                    item
                } else {
                    self.oov_symbol.clone()
                }
            })
            .collect();
        TokenSequence::from_items(items)
    }

    /// Preprocesses and infers in one step.
    pub fn embed(&self, seq: &TokenSequence) -> Vec<f32> {
        self.infer(&self.preprocess(seq))
    }

    /// Infers a document vector for a preprocessed sequence. Empty sequences,
    /// and sequences without a single known term, map to the zero vector.
    pub fn infer(&self, seq: &TokenSequence) -> Vec<f32> {
        let dim = self.config.dim;
        let tokens: Vec<usize> = seq
            .iter()
            .filter_map(|t| self.index.get(t.as_str()).copied())
            .collect();
        if tokens.is_empty() {
            return vec![0.0; dim];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ fnv1a(seq));
        let mut doc = random_vector(&mut rng, dim);
        let mut grad = vec![0.0f32; dim];
        let total = (self.config.infer_epochs * tokens.len()) as f64;
        let mut done = 0usize;
        for _ in 0..self.config.infer_epochs {
            for &target in &tokens {
                let alpha = decayed_rate(self.config.learning_rate, done as f64 / total);
                infer_step(
                    &mut doc,
                    &self.output,
                    &mut grad,
                    target,
                    alpha,
                    self.config.negative_samples,
                    &self.noise,
                    &mut rng,
                );
                done += 1;
            }
        }
        doc
    }
}

fn decayed_rate(initial: f64, progress: f64) -> f32 {
    (initial * (1.0 - (1.0 - MIN_LEARNING_RATE_FRACTION) * progress)) as f32
}

fn random_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    (0..dim)
        .map(|_| (rng.gen::<f32>() - 0.5) / dim as f32)
        .collect()
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Positive target plus sampled noise words for one update.
fn targets<R: Rng>(target: usize, negative: usize, noise: &NoiseTable, rng: &mut R) -> Vec<(usize, f32)> {
    let mut out = Vec::with_capacity(negative + 1);
    out.push((target, 1.0));
    for _ in 0..negative {
        let w = noise.sample(rng);
        if w != target {
            out.push((w, 0.0));
        }
    }
    out
}

/// One negative-sampling update of `doc` and the output rows it touches.
#[allow(clippy::too_many_arguments)]
fn train_step<R: Rng>(
    doc: &mut [f32],
    output: &mut [f32],
    grad: &mut [f32],
    target: usize,
    alpha: f32,
    negative: usize,
    noise: &NoiseTable,
    rng: &mut R,
) {
    let dim = doc.len();
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (word, label) in targets(target, negative, noise, rng) {
        let row = &mut output[word * dim..(word + 1) * dim];
        let dot: f32 = row.iter().zip(doc.iter()).map(|(a, b)| a * b).sum();
        let g = (label - sigmoid(dot)) * alpha;
        for ((gr, r), d) in grad.iter_mut().zip(row.iter_mut()).zip(doc.iter()) {
            *gr += g * *r;
            *r += g * d;
        }
    }
    for (d, g) in doc.iter_mut().zip(grad.iter()) {
        *d += g;
    }
}

/// Same update with the output rows frozen.
#[allow(clippy::too_many_arguments)]
fn infer_step<R: Rng>(
    doc: &mut [f32],
    output: &[f32],
    grad: &mut [f32],
    target: usize,
    alpha: f32,
    negative: usize,
    noise: &NoiseTable,
    rng: &mut R,
) {
    let dim = doc.len();
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (word, label) in targets(target, negative, noise, rng) {
        let row = &output[word * dim..(word + 1) * dim];
        let dot: f32 = row.iter().zip(doc.iter()).map(|(a, b)| a * b).sum();
        let g = (label - sigmoid(dot)) * alpha;
        for (gr, r) in grad.iter_mut().zip(row) {
            *gr += g * r;
        }
    }
    for (d, g) in doc.iter_mut().zip(grad.iter()) {
        *d += g;
    }
}

fn fnv1a(seq: &TokenSequence) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for item in seq {
        for b in item.bytes().chain(std::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Trains a model on preprocessed sequences. Runs single-threaded and is
/// deterministic for a fixed seed.
///
/// `vocab` is the vocabulary the corpus was filtered with; only its
/// fingerprint is recorded.
pub fn train(
    corpus: &[TokenSequence],
    config: &EmbedConfig,
    vocab: Option<&Vocabulary>,
) -> Result<EmbeddingModel, EmbedError> {
    config.validate()?;
    if corpus.iter().all(TokenSequence::is_empty) {
        return Err(EmbedError::EmptyCorpus);
    }

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for item in seq {
            *freq.entry(item.as_str()).or_insert(0) += 1;
        }
    }
    if freq.len() < 2 {
        return Err(EmbedError::DegenerateVocabulary {
            distinct: freq.len(),
        });
    }
    let mut terms: Vec<String> = freq.keys().map(|t| t.to_string()).collect();
    terms.sort_unstable();
    let counts: Vec<u64> = terms.iter().map(|t| freq[t.as_str()]).collect();
    let index: HashMap<&str, usize> = terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let docs: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().map(|t| index[t.as_str()]).collect())
        .collect();

    let dim = config.dim;
    let noise = NoiseTable::new(&counts);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut doc_vectors: Vec<Vec<f32>> = docs.iter().map(|_| random_vector(&mut rng, dim)).collect();
    let mut output = vec![0.0f32; terms.len() * dim];
    let mut grad = vec![0.0f32; dim];

    let total_tokens: usize = docs.iter().map(Vec::len).sum();
    let total = (config.epochs * total_tokens) as f64;
    let mut done = 0usize;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    for _ in 0..config.epochs {
        shuffle(&mut order, &mut rng);
        for &d in &order {
            for &target in &docs[d] {
                let alpha = decayed_rate(config.learning_rate, done as f64 / total);
                train_step(
                    &mut doc_vectors[d],
                    &mut output,
                    &mut grad,
                    target,
                    alpha,
                    config.negative_samples,
                    &noise,
                    &mut rng,
                );
                done += 1;
            }
        }
    }

    Ok(EmbeddingModel::from_parts(
        config.clone(),
        DEFAULT_OOV.to_owned(),
        vocab.map_or([0; 16], Vocabulary::fingerprint),
        terms,
        counts,
        output,
    ))
}

/// The whole preparation pipeline on raw flattened sequences: normalize,
/// build the document-frequency vocabulary, replace rare terms and train.
pub fn fit(
    raw: &[TokenSequence],
    min_df_fraction: f64,
    config: &EmbedConfig,
) -> crate::Result<(Vocabulary, EmbeddingModel)> {
    let normalized: Vec<TokenSequence> = raw.iter().map(normalize_sequence).collect();
    let vocab = build_vocabulary(&normalized, min_df_fraction)?;
    let policy = OovPolicy::default();
    let corpus: Vec<TokenSequence> = normalized.iter().map(|s| apply_oov(s, &vocab, &policy)).collect();
    let model = train(&corpus, config, Some(&vocab))?;
    Ok((vocab, model))
}

fn shuffle<R: Rng>(items: &mut [usize], rng: &mut R) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
