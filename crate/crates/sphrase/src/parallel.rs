//! Multi-threaded training drivers.
//!
//! * [`train_deterministic`]: pairs for each batch are generated in parallel
//!   on a rayon pool and handed, in batch order, through a bounded queue to a
//!   single optimizer thread. The result is bit-identical to
//!   [`sphrase_core::trainer::train`] for any thread count.
//! * [`train_hogwild`]: several workers claim batches and update a shared
//!   model without locks. Parameters and their Adam moments live in
//!   `AtomicU32` cells holding `f32` bits; concurrent read-modify-write of
//!   the same cell may lose updates, which is tolerated. With one worker
//!   the result equals the deterministic driver.

use std::ops::Range;
use std::sync::atomic::{AtomicU32, AtomicU64, AtomicUsize, Ordering::Relaxed};
use std::sync::mpsc::sync_channel;

use rayon::prelude::*;
use sphrase_core::trainer::{
    adam_update, batch_ranges, batch_loss_and_grads, lr_schedule, sentence_pairs, stream_rng, AdamConfig, CandidateSet,
    EpochAccumulator, ParamRows, RowGrads, SparseGrads, Stream,
};
use sphrase_core::{EmbeddingModel, EncodedSentence, EpochStats, TrainConfig, Trainer, TrainingPair, Vocabulary};

/// Batches generated ahead of the optimizer.
const QUEUE_DEPTH: usize = 4;

fn batch_pairs(config: &TrainConfig, epoch: u32, corpus: &[EncodedSentence], range: Range<usize>) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for i in range {
        sentence_pairs(config, epoch, i, &corpus[i], &mut out);
    }
    out
}

fn batch_pairs_par(config: &TrainConfig, epoch: u32, corpus: &[EncodedSentence], range: Range<usize>) -> Vec<TrainingPair> {
    let start = range.start;
    let per_sentence: Vec<Vec<TrainingPair>> = corpus[range]
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            let mut v = Vec::new();
            sentence_pairs(config, epoch, start + j, s, &mut v);
            v
        })
        .collect();
    per_sentence.concat()
}

fn pool(threads: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

/// Single optimizer thread fed by parallel pair generation.
pub fn train_deterministic<F>(
    corpus: &[EncodedSentence],
    vocab: &Vocabulary,
    config: TrainConfig,
    threads: usize,
    mut on_epoch: F,
) -> anyhow::Result<EmbeddingModel>
where
    F: FnMut(&EpochStats, &EmbeddingModel) -> anyhow::Result<()>,
{
    let pool = pool(threads)?;
    let mut trainer = Trainer::new(config.clone(), vocab)?;
    for epoch in 0..config.epochs {
        let ranges = batch_ranges(corpus, config.batch_tokens);
        let mut acc = EpochAccumulator::new(epoch, &config);
        std::thread::scope(|s| -> anyhow::Result<()> {
            let (tx, rx) = sync_channel::<Vec<TrainingPair>>(QUEUE_DEPTH);
            let (pool, config) = (&pool, &config);
            s.spawn(move || {
                for r in ranges {
                    let pairs = pool.install(|| batch_pairs_par(config, epoch, corpus, r));
                    if tx.send(pairs).is_err() {
                        break;
                    }
                }
            });
            for (b, pairs) in rx.iter().enumerate() {
                let loss = trainer.train_batch(epoch, b, &pairs)?;
                acc.add(loss, pairs.len());
            }
            Ok(())
        })?;
        let stats = acc.finish()?;
        on_epoch(&stats, trainer.model())?;
    }
    Ok(trainer.into_model())
}

fn atomics(xs: &[f32]) -> Vec<AtomicU32> {
    xs.iter().map(|x| AtomicU32::new(x.to_bits())).collect()
}

fn zeros(n: usize) -> Vec<AtomicU32> {
    (0..n).map(|_| AtomicU32::new(0)).collect()
}

#[inline]
fn load(c: &AtomicU32) -> f32 {
    f32::from_bits(c.load(Relaxed))
}

#[inline]
fn store(c: &AtomicU32, x: f32) {
    c.store(x.to_bits(), Relaxed)
}

/// One parameter block with its first and second moments, indexed alike.
struct Block {
    param: Vec<AtomicU32>,
    m: Vec<AtomicU32>,
    v: Vec<AtomicU32>,
}

impl Block {
    fn new(init: &[f32]) -> Self {
        Self { param: atomics(init), m: zeros(init.len()), v: zeros(init.len()) }
    }

    fn read(&self, start: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.param[start..]) {
            *o = load(c) as f64;
        }
    }

    fn apply(&self, rows: &RowGrads, width: usize, lr: f64, corr: (f64, f64), cfg: &AdamConfig) {
        for (id, g) in rows.iter() {
            let base = id as usize * width;
            for (j, &gj) in g.iter().enumerate() {
                let i = base + j;
                let (p, m, v) = adam_update(load(&self.param[i]) as f64, gj, load(&self.m[i]) as f64, load(&self.v[i]) as f64, lr, corr, cfg);
                store(&self.param[i], p as f32);
                store(&self.m[i], m as f32);
                store(&self.v[i], v as f32);
            }
        }
    }

    fn snapshot(&self) -> Vec<f32> {
        self.param.iter().map(load).collect()
    }
}

/// Lock-free shared model plus optimizer state.
pub struct SharedModel {
    vocab_size: usize,
    dim: usize,
    input: Block,
    output: Block,
    bias: Block,
    step: AtomicU64,
    adam: AdamConfig,
}

impl SharedModel {
    pub fn new(model: &EmbeddingModel, adam: AdamConfig) -> Self {
        Self {
            vocab_size: model.vocab_size(),
            dim: model.dim(),
            input: Block::new(&model.input),
            output: Block::new(&model.output),
            bias: Block::new(&model.bias),
            step: AtomicU64::new(0),
            adam,
        }
    }

    pub fn step(&self) -> u64 {
        self.step.load(Relaxed)
    }

    /// One Adam step over the rows in `grads`, with a fresh global step.
    pub fn apply(&self, grads: &SparseGrads, lr: f64) {
        let t = self.step.fetch_add(1, Relaxed) + 1;
        let corr = self.adam.bias_corrections(t);
        self.input.apply(&grads.input, self.dim, lr, corr, &self.adam);
        self.output.apply(&grads.output, self.dim, lr, corr, &self.adam);
        self.bias.apply(&grads.bias, 1, lr, corr, &self.adam);
    }

    pub fn snapshot(&self) -> EmbeddingModel {
        EmbeddingModel::from_parts(self.vocab_size, self.dim, self.input.snapshot(), self.output.snapshot(), self.bias.snapshot())
            .expect("shapes are fixed at construction")
    }
}

impl ParamRows for SharedModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn read_input(&self, id: u32, out: &mut [f64]) {
        self.input.read(id as usize * self.dim, out)
    }

    fn read_output(&self, id: u32, out: &mut [f64]) {
        self.output.read(id as usize * self.dim, out)
    }

    fn read_bias(&self, id: u32) -> f64 {
        load(&self.bias.param[id as usize]) as f64
    }
}

/// Lock-free training with `threads` workers claiming batches in order.
pub fn train_hogwild<F>(
    corpus: &[EncodedSentence],
    vocab: &Vocabulary,
    config: TrainConfig,
    threads: usize,
    mut on_epoch: F,
) -> anyhow::Result<EmbeddingModel>
where
    F: FnMut(&EpochStats, &EmbeddingModel) -> anyhow::Result<()>,
{
    let init = Trainer::new(config.clone(), vocab)?;
    let noise = init.noise().clone();
    let shared = SharedModel::new(init.model(), init.adam().config);
    drop(init);
    let workers = threads.max(1);
    let mut last = None;
    for epoch in 0..config.epochs {
        let ranges = batch_ranges(corpus, config.batch_tokens);
        let lr = lr_schedule(epoch, config.initial_lr, config.decay);
        let next = AtomicUsize::new(0);
        let results: Vec<anyhow::Result<Vec<(usize, f64, usize)>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    let (ranges, next, shared, noise, config) = (&ranges, &next, &shared, &noise, &config);
                    s.spawn(move || -> anyhow::Result<Vec<(usize, f64, usize)>> {
                        let mut done = Vec::new();
                        loop {
                            let b = next.fetch_add(1, Relaxed);
                            let Some(r) = ranges.get(b) else { break };
                            let pairs = batch_pairs(config, epoch, corpus, r.clone());
                            if pairs.is_empty() {
                                done.push((b, 0.0, 0));
                                continue;
                            }
                            let mut rng = stream_rng(config.seed, Stream::Noise, epoch as u64, b as u64);
                            let cands = CandidateSet::sample(noise, config.num_sampled, &mut rng);
                            let (loss, grads) = batch_loss_and_grads(shared, &pairs, &cands)?;
                            shared.apply(&grads, lr);
                            done.push((b, loss, pairs.len()));
                        }
                        Ok(done)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut batches = Vec::new();
        for r in results {
            batches.extend(r?);
        }
        batches.sort_by_key(|x| x.0);
        let mut acc = EpochAccumulator::new(epoch, &config);
        for (_, loss, n) in batches {
            acc.add(loss, n);
        }
        let stats = acc.finish()?;
        let model = shared.snapshot();
        on_epoch(&stats, &model)?;
        last = Some(model);
    }
    Ok(last.unwrap_or_else(|| shared.snapshot()))
}
