use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Barrier, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{TermSequence, Variant};
use crate::embedding::sgns::{sgns_step_raw, StepScratch};
use crate::embedding::{build_vocab, EmbeddingMatrix, SamplerTable, Vocabulary};
use crate::error::{Error, Result};

/// Hyperparameters for skip-gram training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Vector length.
    pub dim: usize,
    /// Maximum context size `c`; the effective window per position is drawn
    /// uniformly from `1..=c`.
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to `lr_initial / 1e4`.
    pub lr_initial: f64,
    /// Frequency threshold for subsampling frequent terms; 0 disables.
    pub subsample_t: f64,
    /// Terms occurring fewer times are dropped from the vocabulary.
    pub min_count: u64,
    pub rng_seed: u64,
    /// Concurrent updaters sharing the matrices without locking. Results are
    /// bit-reproducible only for `workers = 1`.
    pub workers: usize,
    /// Exponent of the unigram noise distribution for negative draws.
    pub negative_power: f64,
}

impl Default for TrainingConfig {
    fn default() -> TrainingConfig {
        TrainingConfig {
            dim: 200,
            window: 5,
            negatives: 25,
            epochs: 5,
            lr_initial: 0.025,
            subsample_t: 0.0,
            min_count: 1,
            rng_seed: 1,
            workers: 1,
            negative_power: 0.75,
        }
    }
}

impl TrainingConfig {
    /// Per-variant defaults: word training uses a small window with
    /// subsampling and pruning, heading and entity sequences are short and
    /// get wide windows with no pruning.
    pub fn for_variant(variant: Variant) -> TrainingConfig {
        let mut config = TrainingConfig::default();
        match variant {
            Variant::Words => {
                config.window = 5;
                config.min_count = 5;
                config.subsample_t = 1e-5;
            }
            Variant::Headings => config.window = 20,
            Variant::Entities | Variant::CoreEntities => config.window = 50,
        }
        config
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if !self.lr_initial.is_finite() || self.lr_initial <= 0.0 {
            return Err(Error::Config("lr_initial must be > 0".into()));
        }
        if self.workers < 1 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Builds the vocabulary from the sequences and trains.
pub fn train(sequences: &[TermSequence], config: &TrainingConfig) -> Result<EmbeddingMatrix> {
    config.validate()?;
    let vocab = build_vocab(sequences, config.min_count);
    train_with_vocab(vocab, sequences, config)
}

/// Trains with a pre-built vocabulary.
///
/// Input vectors start uniform in `[-0.5/dim, +0.5/dim]`, output vectors at
/// zero. Out-of-vocabulary tokens are dropped from the sequences before
/// windowing. With `workers = 1` and a fixed seed the result is
/// bit-reproducible.
pub fn train_with_vocab(
    vocab: Vocabulary,
    sequences: &[TermSequence],
    config: &TrainingConfig,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }

    let encoded: Vec<Vec<u32>> = sequences
        .iter()
        .filter_map(|seq| {
            let ids: Vec<u32> = seq
                .tokens
                .iter()
                .filter_map(|tok| vocab.id(tok).map(|id| id as u32))
                .collect();
            (!ids.is_empty()).then_some(ids)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let dim = config.dim;
    let mut input = vec![0.0f64; vocab.len() * dim];
    for x in &mut input {
        *x = (rng.gen::<f64>() - 0.5) / dim as f64;
    }
    let mut output = vec![0.0f64; vocab.len() * dim];

    if config.epochs == 0 {
        return EmbeddingMatrix::from_parts(vocab, dim, input, output);
    }

    let sampler = SamplerTable::new(&vocab, config.negative_power)?;
    let total_expected = config.epochs as u64 * vocab.total_terms() + 1;

    let shared = SharedParams {
        input: input.as_mut_ptr(),
        output: output.as_mut_ptr(),
    };
    let tokens_seen = AtomicU64::new(0);

    if config.workers == 1 {
        let mut worker =
            WorkerState::new(config, &vocab, &sampler, shared, &tokens_seen, total_expected, rng);
        for epoch in 1..=config.epochs {
            let (loss, steps) = worker.run_epoch(&encoded);
            report_epoch(epoch, &tokens_seen, loss, steps);
        }
    } else {
        let chunks = split_chunks(&encoded, config.workers);
        let barrier = Barrier::new(config.workers);
        let epoch_losses = Mutex::new(Vec::<(f64, u64)>::new());
        std::thread::scope(|scope| {
            for (w, chunk) in chunks.into_iter().enumerate() {
                let worker_rng = ChaCha8Rng::seed_from_u64(
                    config
                        .rng_seed
                        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(w as u64 + 1)),
                );
                let tokens_seen = &tokens_seen;
                let barrier = &barrier;
                let epoch_losses = &epoch_losses;
                let vocab = &vocab;
                let sampler = &sampler;
                scope.spawn(move || {
                    let mut worker = WorkerState::new(
                        config,
                        vocab,
                        sampler,
                        shared,
                        tokens_seen,
                        total_expected,
                        worker_rng,
                    );
                    for epoch in 1..=config.epochs {
                        let (loss, steps) = worker.run_epoch(chunk);
                        epoch_losses.lock().unwrap().push((loss, steps));
                        if barrier.wait().is_leader() {
                            let mut acc = epoch_losses.lock().unwrap();
                            let (loss, steps) = acc
                                .drain(..)
                                .fold((0.0, 0), |(l, s), (dl, ds)| (l + dl, s + ds));
                            report_epoch(epoch, tokens_seen, loss, steps);
                        }
                        barrier.wait();
                    }
                });
            }
        });
    }

    let matrix = EmbeddingMatrix::from_parts(vocab, dim, input, output)?;
    if !matrix.all_finite() {
        return Err(Error::Internal(
            "training produced non-finite vector entries".into(),
        ));
    }
    Ok(matrix)
}

fn report_epoch(epoch: usize, tokens_seen: &AtomicU64, loss: f64, steps: u64) {
    let mean = if steps > 0 { loss / steps as f64 } else { 0.0 };
    eprintln!("{epoch}\t{}\t{mean}", tokens_seen.load(Ordering::Relaxed));
}

fn split_chunks(encoded: &[Vec<u32>], workers: usize) -> Vec<&[Vec<u32>]> {
    let per = encoded.len().div_ceil(workers).max(1);
    let mut chunks: Vec<&[Vec<u32>]> = encoded.chunks(per).collect();
    while chunks.len() < workers {
        chunks.push(&[]);
    }
    chunks
}

/// Raw pointers into the parameter matrices, shared across updaters without
/// locking. Concurrent row updates may lose gradients; the accuracy contract
/// for multi-worker training is statistical, not bitwise. The owning `Vec`s
/// outlive every worker (scoped threads).
#[derive(Clone, Copy)]
struct SharedParams {
    input: *mut f64,
    output: *mut f64,
}

unsafe impl Send for SharedParams {}
unsafe impl Sync for SharedParams {}

struct WorkerState<'a> {
    config: &'a TrainingConfig,
    vocab: &'a Vocabulary,
    sampler: &'a SamplerTable,
    shared: SharedParams,
    tokens_seen: &'a AtomicU64,
    total_expected: u64,
    rng: ChaCha8Rng,
    scratch: StepScratch,
    negatives: Vec<usize>,
}

impl<'a> WorkerState<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        config: &'a TrainingConfig,
        vocab: &'a Vocabulary,
        sampler: &'a SamplerTable,
        shared: SharedParams,
        tokens_seen: &'a AtomicU64,
        total_expected: u64,
        rng: ChaCha8Rng,
    ) -> WorkerState<'a> {
        WorkerState {
            config,
            vocab,
            sampler,
            shared,
            tokens_seen,
            total_expected,
            rng,
            scratch: StepScratch::new(config.dim),
            negatives: Vec::with_capacity(config.negatives),
        }
    }

    /// Keep probability of the standard frequency subsampling rule.
    fn keep_probability(&self, id: u32) -> f64 {
        let f = self.vocab.count(id as usize) as f64;
        let k = self.config.subsample_t * self.vocab.total_terms() as f64;
        ((f / k).sqrt() + 1.0) * k / f
    }

    fn run_epoch(&mut self, sequences: &[Vec<u32>]) -> (f64, u64) {
        let window = self.config.window;
        let mut loss_sum = 0.0;
        let mut steps = 0u64;
        let mut kept: Vec<u32> = Vec::new();
        for seq in sequences {
            kept.clear();
            for &id in seq {
                self.tokens_seen.fetch_add(1, Ordering::Relaxed);
                if self.config.subsample_t > 0.0 {
                    let p = self.keep_probability(id);
                    if p < 1.0 && self.rng.gen::<f64>() > p {
                        continue;
                    }
                }
                kept.push(id);
            }
            let seen = self.tokens_seen.load(Ordering::Relaxed);
            let progress = 1.0 - seen as f64 / self.total_expected as f64;
            let lr = self.config.lr_initial * progress.max(1e-4);
            for i in 0..kept.len() {
                let b = self.rng.gen_range(1..=window);
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(kept.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let center = kept[i] as usize;
                    let context = kept[j] as usize;
                    self.negatives.clear();
                    for _ in 0..self.config.negatives {
                        let n = self.sampler.sample(&mut self.rng);
                        if n != context {
                            self.negatives.push(n);
                        }
                    }
                    loss_sum += unsafe {
                        sgns_step_raw(
                            self.shared.input,
                            self.shared.output,
                            self.config.dim,
                            center,
                            context,
                            &self.negatives,
                            lr,
                            &mut self.scratch,
                        )
                    };
                    steps += 1;
                }
            }
        }
        (loss_sum, steps)
    }
}
