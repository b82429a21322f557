//! Sampled-softmax skip-gram training with sparse Adam.
//!
//! Each batch shares one draw of `k` noise classes. For a pair `(t, c)` the
//! candidate logits are
//!
//! ```text
//! logit(s) = <in[t], out[s]> + bias[s] - ln E(s)
//! ```
//!
//! with `E(c) = 1` for the true class and `E(s) = k * p_noise(s)` for noise
//! draws. Noise draws that collide with the pair's own true class are
//! masked out of that pair's softmax. The loss is the batch mean of
//! `-ln softmax(logits)[c]`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use hashbrown::HashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::{extend_pairs, ContextSpec, Regime, TrainingPair};
use crate::error::{Error, Result};
use crate::math;
use crate::vocab::{noise_distribution, EncodedSentence, NoiseDistribution, Vocabulary, DEFAULT_NOISE_POWER};

/// Input vectors, output vectors and output biases, row-major `V x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab_size: usize,
    dim: usize,
    pub input: Vec<f32>,
    pub output: Vec<f32>,
    pub bias: Vec<f32>,
}

impl EmbeddingModel {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            vocab_size,
            dim,
            input: vec![0.0; vocab_size * dim],
            output: vec![0.0; vocab_size * dim],
            bias: vec![0.0; vocab_size],
        }
    }

    pub fn from_parts(vocab_size: usize, dim: usize, input: Vec<f32>, output: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if input.len() != vocab_size * dim || output.len() != vocab_size * dim || bias.len() != vocab_size {
            return Err(Error::InvalidConfig("parameter block sizes do not match V and d".into()));
        }
        Ok(Self { vocab_size, dim, input, output, bias })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_row(&self, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.input[i..i + self.dim]
    }

    pub fn output_row(&self, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.output[i..i + self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).chain(&self.bias).all(|x| x.is_finite())
    }
}

/// Input vectors uniform in `[-0.5/d, 0.5/d]`; output side zero.
pub fn init_model<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> EmbeddingModel {
    assert!(vocab_size >= 1 && dim >= 1, "model needs V >= 1 and d >= 1");
    let mut model = EmbeddingModel::zeros(vocab_size, dim);
    let half = 0.5 / dim as f64;
    for x in &mut model.input {
        *x = rng.gen_range(-half..=half) as f32;
    }
    model
}

/// Read access to model parameters, widened to `f64`.
pub trait ParamRows {
    fn vocab_size(&self) -> usize;
    fn dim(&self) -> usize;
    fn read_input(&self, id: u32, out: &mut [f64]);
    fn read_output(&self, id: u32, out: &mut [f64]);
    fn read_bias(&self, id: u32) -> f64;
}

impl ParamRows for EmbeddingModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn read_input(&self, id: u32, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(self.input_row(id)) {
            *o = x as f64;
        }
    }

    fn read_output(&self, id: u32, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(self.output_row(id)) {
            *o = x as f64;
        }
    }

    fn read_bias(&self, id: u32) -> f64 {
        self.bias[id as usize] as f64
    }
}

/// Gradient rows keyed by word id, kept in first-touch order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowGrads {
    width: usize,
    slots: HashMap<u32, usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl RowGrads {
    pub fn new(width: usize) -> Self {
        Self { width, ..Default::default() }
    }

    pub fn row_mut(&mut self, id: u32) -> &mut [f64] {
        let slot = match self.slots.get(&id) {
            Some(&s) => s,
            None => {
                let s = self.rows.len();
                self.slots.insert(id, s);
                self.rows.push(id);
                self.values.resize(self.values.len() + self.width, 0.0);
                s
            }
        };
        &mut self.values[slot * self.width..(slot + 1) * self.width]
    }

    pub fn get(&self, id: u32) -> Option<&[f64]> {
        self.slots.get(&id).map(|&s| &self.values[s * self.width..(s + 1) * self.width])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.rows.iter().copied().zip(self.values.chunks_exact(self.width.max(1)))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Gradients of one batch over the rows it touched.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrads {
    pub input: RowGrads,
    pub output: RowGrads,
    pub bias: RowGrads,
}

impl SparseGrads {
    pub fn new(dim: usize) -> Self {
        Self { input: RowGrads::new(dim), output: RowGrads::new(dim), bias: RowGrads::new(1) }
    }
}

/// The shared noise draw of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub ids: Vec<u32>,
    /// `ln(k * p_noise(id))` per draw.
    pub log_expected: Vec<f64>,
}

impl CandidateSet {
    /// `k` draws with replacement.
    pub fn sample<R: Rng + ?Sized>(noise: &NoiseDistribution, k: usize, rng: &mut R) -> Self {
        let ids = (0..k).map(|_| noise.sample(rng)).collect();
        Self::from_ids(ids, noise)
    }

    pub fn from_ids(ids: Vec<u32>, noise: &NoiseDistribution) -> Self {
        let k = ids.len() as f64;
        let log_expected = ids.iter().map(|&s| math::ln(k * noise.probability(s))).collect();
        Self { ids, log_expected }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Corrected logits per pair; column 0 is the true class, column `j + 1`
/// the `j`-th noise draw (accidental hits are not masked here).
pub fn candidate_scores<P: ParamRows + ?Sized>(
    params: &P,
    pairs: &[TrainingPair],
    candidates: &CandidateSet,
) -> Result<Vec<Vec<f64>>> {
    let d = params.dim();
    let mut x = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        params.read_input(pair.target, &mut x);
        let mut row = Vec::with_capacity(candidates.len() + 1);
        params.read_output(pair.context, &mut w);
        row.push(dot(&x, &w) + params.read_bias(pair.context));
        for (&s, &le) in candidates.ids.iter().zip(&candidates.log_expected) {
            params.read_output(s, &mut w);
            row.push(dot(&x, &w) + params.read_bias(s) - le);
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalError("candidate logits"));
        }
        out.push(row);
    }
    Ok(out)
}

/// Mean sampled-softmax loss over the batch and its analytic gradients.
pub fn batch_loss_and_grads<P: ParamRows + ?Sized>(
    params: &P,
    pairs: &[TrainingPair],
    candidates: &CandidateSet,
) -> Result<(f64, SparseGrads)> {
    let d = params.dim();
    let k = candidates.len();
    let mut grads = SparseGrads::new(d);
    if pairs.is_empty() {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / pairs.len() as f64;

    let mut noise_out = vec![0.0; k * d];
    let mut noise_logit_base = vec![0.0; k];
    for (j, (&s, &le)) in candidates.ids.iter().zip(&candidates.log_expected).enumerate() {
        params.read_output(s, &mut noise_out[j * d..(j + 1) * d]);
        noise_logit_base[j] = params.read_bias(s) - le;
    }
    let mut noise_grad_out = vec![0.0; k * d];
    let mut noise_grad_bias = vec![0.0; k];

    let mut x = vec![0.0; d];
    let mut w_true = vec![0.0; d];
    let mut logits = vec![0.0; k];
    let mut total = 0.0;
    for pair in pairs {
        params.read_input(pair.target, &mut x);
        params.read_output(pair.context, &mut w_true);
        let true_logit = dot(&x, &w_true) + params.read_bias(pair.context);
        let mut max = true_logit;
        for j in 0..k {
            if candidates.ids[j] == pair.context {
                logits[j] = f64::NEG_INFINITY;
                continue;
            }
            logits[j] = dot(&x, &noise_out[j * d..(j + 1) * d]) + noise_logit_base[j];
            if !logits[j].is_finite() {
                return Err(Error::NumericalError("candidate logits"));
            }
            max = max.max(logits[j]);
        }
        if !true_logit.is_finite() {
            return Err(Error::NumericalError("candidate logits"));
        }
        let mut sum = math::exp(true_logit - max);
        for &l in &logits {
            sum += math::exp(l - max);
        }
        let lse = max + math::ln(sum);
        let loss = lse - true_logit;
        if !loss.is_finite() {
            return Err(Error::NumericalError("batch loss"));
        }
        total += loss;

        // d loss / d logit = softmax - one_hot(true)
        let g_true = (math::exp(true_logit - lse) - 1.0) * scale;
        let gin = grads.input.row_mut(pair.target);
        for (g, w) in gin.iter_mut().zip(&w_true) {
            *g += g_true * w;
        }
        for j in 0..k {
            if logits[j] == f64::NEG_INFINITY {
                continue;
            }
            let g = math::exp(logits[j] - lse) * scale;
            let w = &noise_out[j * d..(j + 1) * d];
            for (gi, wi) in gin.iter_mut().zip(w) {
                *gi += g * wi;
            }
            for (go, xi) in noise_grad_out[j * d..(j + 1) * d].iter_mut().zip(&x) {
                *go += g * xi;
            }
            noise_grad_bias[j] += g;
        }
        for (go, xi) in grads.output.row_mut(pair.context).iter_mut().zip(&x) {
            *go += g_true * xi;
        }
        grads.bias.row_mut(pair.context)[0] += g_true;
    }
    for (j, &s) in candidates.ids.iter().enumerate() {
        for (go, g) in grads.output.row_mut(s).iter_mut().zip(&noise_grad_out[j * d..(j + 1) * d]) {
            *go += g;
        }
        grads.bias.row_mut(s)[0] += noise_grad_bias[j];
    }
    Ok((total * scale, grads))
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    /// `(1 - beta1^t, 1 - beta2^t)` for step `t >= 1`.
    pub fn bias_corrections(&self, step: u64) -> (f64, f64) {
        (1.0 - math::powi(self.beta1, step), 1.0 - math::powi(self.beta2, step))
    }
}

/// One bias-corrected Adam update of a scalar. Returns the new
/// `(param, m, v)`.
#[inline]
pub fn adam_update(param: f64, grad: f64, m: f64, v: f64, lr: f64, corrections: (f64, f64), cfg: &AdamConfig) -> (f64, f64, f64) {
    let m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    let v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
    let m_hat = m / corrections.0;
    let v_hat = v / corrections.1;
    (param - lr * m_hat / (math::sqrt(v_hat) + cfg.epsilon), m, v)
}

/// Moment accumulators shaped like the model, plus the global step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m_input: Vec<f32>,
    v_input: Vec<f32>,
    m_output: Vec<f32>,
    v_output: Vec<f32>,
    m_bias: Vec<f32>,
    v_bias: Vec<f32>,
}

fn apply_rows(rows: &RowGrads, width: usize, params: &mut [f32], m: &mut [f32], v: &mut [f32], lr: f64, corr: (f64, f64), cfg: &AdamConfig) {
    for (id, g) in rows.iter() {
        let base = id as usize * width;
        for (j, &gj) in g.iter().enumerate() {
            let i = base + j;
            let (p, mi, vi) = adam_update(params[i] as f64, gj, m[i] as f64, v[i] as f64, lr, corr, cfg);
            params[i] = p as f32;
            m[i] = mi as f32;
            v[i] = vi as f32;
        }
    }
}

impl AdamState {
    pub fn new(vocab_size: usize, dim: usize, config: AdamConfig) -> Self {
        let n = vocab_size * dim;
        Self {
            config,
            step: 0,
            m_input: vec![0.0; n],
            v_input: vec![0.0; n],
            m_output: vec![0.0; n],
            v_output: vec![0.0; n],
            m_bias: vec![0.0; vocab_size],
            v_bias: vec![0.0; vocab_size],
        }
    }

    /// Applies one update to the rows present in `grads`; every other row
    /// and its moments are left untouched.
    pub fn apply(&mut self, model: &mut EmbeddingModel, grads: &SparseGrads, lr: f64) {
        assert!(lr > 0.0, "learning rate must be positive");
        self.step += 1;
        let corr = self.config.bias_corrections(self.step);
        let d = model.dim;
        let cfg = self.config;
        apply_rows(&grads.input, d, &mut model.input, &mut self.m_input, &mut self.v_input, lr, corr, &cfg);
        apply_rows(&grads.output, d, &mut model.output, &mut self.m_output, &mut self.v_output, lr, corr, &cfg);
        apply_rows(&grads.bias, 1, &mut model.bias, &mut self.m_bias, &mut self.v_bias, lr, corr, &cfg);
    }
}

fn round_significant(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp10 = libm::floor(libm::log10(libm::fabs(x))) as i32;
    let shift = digits - 1 - exp10;
    if shift >= 0 {
        let scale = libm::pow(10.0, shift as f64);
        libm::round(x * scale) / scale
    } else {
        let scale = libm::pow(10.0, (-shift) as f64);
        libm::round(x / scale) * scale
    }
}

/// `initial_lr * decay^epoch`, rounded to 15 significant digits so decimal
/// schedules stay decimal (`0.001 * 0.9` gives `0.0009`, not
/// `0.0009000000000000001`).
pub fn lr_schedule(epoch: u32, initial_lr: f64, decay: f64) -> f64 {
    round_significant(initial_lr * math::powi(decay, epoch as u64), 15)
}

/// Training hyper-parameters. Defaults follow the reference protocol:
/// 20 epochs, Adam at 0.001 decayed by 0.9 per epoch, 60,000-token batches
/// sharing 5,000 sampled classes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub regime: Regime,
    pub epochs: u32,
    pub initial_lr: f64,
    pub decay: f64,
    pub batch_tokens: usize,
    pub num_sampled: usize,
    pub noise_power: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            window: 5,
            regime: Regime::SPhraseR,
            epochs: 20,
            initial_lr: 0.001,
            decay: 0.9,
            batch_tokens: 60_000,
            num_sampled: 5_000,
            noise_power: DEFAULT_NOISE_POWER,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.batch_tokens == 0 {
            return bad("batch_tokens must be at least 1");
        }
        if self.num_sampled == 0 {
            return bad("num_sampled must be at least 1");
        }
        if self.num_sampled >= vocab_size {
            return Err(Error::InvalidConfig(alloc::format!(
                "num_sampled ({}) must be smaller than the vocabulary ({vocab_size})",
                self.num_sampled
            )));
        }
        if !(self.noise_power >= 0.0) {
            return bad("noise power must be non-negative");
        }
        Ok(())
    }

    pub fn context_spec(&self) -> ContextSpec {
        ContextSpec::new(self.regime, self.window)
    }
}

/// Per-epoch progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: u32,
    pub mean_loss: f64,
    pub lr: f64,
    pub pairs: u64,
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Pairs = 2,
    Noise = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream for `(seed, stream, a, b)`.
pub fn stream_rng(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed ^ splitmix(stream as u64)) ^ a) ^ b);
    ChaCha8Rng::seed_from_u64(key)
}

/// Splits sentence indices into consecutive batches holding at least
/// `batch_tokens` target tokens each (the last batch may hold fewer).
pub fn batch_ranges(sentences: &[EncodedSentence], batch_tokens: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut tokens = 0;
    for (i, s) in sentences.iter().enumerate() {
        tokens += s.len();
        if tokens >= batch_tokens {
            out.push(start..i + 1);
            start = i + 1;
            tokens = 0;
        }
    }
    if start < sentences.len() {
        out.push(start..sentences.len());
    }
    out
}

/// Pairs of sentence `index` in `epoch`. Pure in its arguments, so
/// sentences can be processed in any order or in parallel.
pub fn sentence_pairs(config: &TrainConfig, epoch: u32, index: usize, sentence: &EncodedSentence, out: &mut Vec<TrainingPair>) {
    let mut rng = stream_rng(config.seed, Stream::Pairs, epoch as u64, index as u64);
    extend_pairs(sentence, &config.context_spec(), &mut rng, out);
}

/// Single-threaded trainer state: model, optimizer and noise law.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    model: EmbeddingModel,
    adam: AdamState,
    noise: NoiseDistribution,
}

impl Trainer {
    pub fn new(config: TrainConfig, vocab: &Vocabulary) -> Result<Self> {
        let noise = noise_distribution(vocab, config.noise_power);
        Self::with_noise(config, noise)
    }

    pub fn with_noise(config: TrainConfig, noise: NoiseDistribution) -> Result<Self> {
        let v = noise.len();
        config.validate(v)?;
        let model = init_model(v, config.dim, &mut stream_rng(config.seed, Stream::Init, 0, 0));
        let adam = AdamState::new(v, config.dim, AdamConfig::default());
        Ok(Self { config, model, adam, noise })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &EmbeddingModel {
        &self.model
    }

    pub fn into_model(self) -> EmbeddingModel {
        self.model
    }

    pub fn noise(&self) -> &NoiseDistribution {
        &self.noise
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    /// Noise draw for batch `batch` of `epoch`.
    pub fn candidates(&self, epoch: u32, batch: usize) -> CandidateSet {
        let mut rng = stream_rng(self.config.seed, Stream::Noise, epoch as u64, batch as u64);
        CandidateSet::sample(&self.noise, self.config.num_sampled, &mut rng)
    }

    /// One optimizer step on `pairs`. Returns the batch mean loss.
    pub fn train_batch(&mut self, epoch: u32, batch: usize, pairs: &[TrainingPair]) -> Result<f64> {
        if pairs.is_empty() {
            return Ok(0.0);
        }
        let candidates = self.candidates(epoch, batch);
        let (loss, grads) = batch_loss_and_grads(&self.model, pairs, &candidates)?;
        let lr = lr_schedule(epoch, self.config.initial_lr, self.config.decay);
        self.adam.apply(&mut self.model, &grads, lr);
        Ok(loss)
    }

    /// Runs one epoch, generating pairs sentence by sentence.
    pub fn run_epoch(&mut self, epoch: u32, corpus: &[EncodedSentence]) -> Result<EpochStats> {
        let mut acc = EpochAccumulator::new(epoch, &self.config);
        let mut pairs = Vec::new();
        for (b, range) in batch_ranges(corpus, self.config.batch_tokens).into_iter().enumerate() {
            pairs.clear();
            for i in range {
                sentence_pairs(&self.config, epoch, i, &corpus[i], &mut pairs);
            }
            let loss = self.train_batch(epoch, b, &pairs)?;
            acc.add(loss, pairs.len());
        }
        acc.finish()
    }
}

/// Pair-weighted running mean of batch losses.
#[derive(Debug, Clone)]
pub struct EpochAccumulator {
    epoch: u32,
    lr: f64,
    loss_sum: f64,
    pairs: u64,
}

impl EpochAccumulator {
    pub fn new(epoch: u32, config: &TrainConfig) -> Self {
        Self { epoch, lr: lr_schedule(epoch, config.initial_lr, config.decay), loss_sum: 0.0, pairs: 0 }
    }

    pub fn add(&mut self, batch_loss: f64, batch_pairs: usize) {
        self.loss_sum += batch_loss * batch_pairs as f64;
        self.pairs += batch_pairs as u64;
    }

    pub fn finish(self) -> Result<EpochStats> {
        if self.pairs == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(EpochStats { epoch: self.epoch, mean_loss: self.loss_sum / self.pairs as f64, lr: self.lr, pairs: self.pairs })
    }
}

/// Trains for `config.epochs` epochs, calling `on_epoch` after each.
pub fn train<F>(corpus: &[EncodedSentence], vocab: &Vocabulary, config: TrainConfig, mut on_epoch: F) -> Result<EmbeddingModel>
where
    F: FnMut(&EpochStats, &EmbeddingModel),
{
    let mut trainer = Trainer::new(config, vocab)?;
    for epoch in 0..trainer.config.epochs {
        let stats = trainer.run_epoch(epoch, corpus)?;
        on_epoch(&stats, trainer.model());
    }
    Ok(trainer.into_model())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PhraseSpan;
    use crate::vocab::noise_from_counts;
    use alloc::string::ToString;

    fn noise(counts: &[u64]) -> NoiseDistribution {
        noise_from_counts(counts.iter().copied(), 1.0)
    }

    #[test]
    fn init_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = init_model(3, 4, &mut rng);
        assert!(m.output.iter().all(|&x| x == 0.0));
        assert!(m.bias.iter().all(|&x| x == 0.0));
        let m = init_model(1000, 50, &mut rng);
        assert!(m.input.iter().all(|x| x.abs() <= 0.01));
        assert!(m.input.iter().any(|x| x.abs() > 0.009));
        let a = init_model(20, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = init_model(20, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn scores_on_zero_output_side_are_the_correction() {
        let m = init_model(4, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let n = noise(&[4, 3, 2, 1]);
        let cands = CandidateSet::from_ids(vec![1, 2, 3], &n);
        let s = candidate_scores(&m, &[TrainingPair { target: 0, context: 0 }], &cands).unwrap();
        assert_eq!(s[0][0], 0.0);
        for j in 0..3 {
            assert_eq!(s[0][j + 1], -cands.log_expected[j]);
        }
    }

    #[test]
    fn score_of_hand_built_pair() {
        let m = EmbeddingModel::from_parts(2, 2, vec![1.0, 2.0, 0.0, 0.0], vec![0.0, 0.0, 3.0, -1.0], vec![0.0, 0.5]).unwrap();
        let n = noise(&[1, 1]);
        let s = candidate_scores(&m, &[TrainingPair { target: 0, context: 1 }], &CandidateSet::from_ids(vec![], &n)).unwrap();
        assert_eq!(s[0][0], 1.5);
        // k = 5 draws of a class with p = 0.2 gives E = 1, so no correction
        let n = noise(&[1, 1, 1, 1, 1]);
        let c = CandidateSet::from_ids(vec![0, 1, 2, 3, 4], &n);
        assert!(c.log_expected.iter().all(|l| l.abs() < 1e-15));
    }

    #[test]
    fn two_symmetric_classes_cost_ln2() {
        let m = EmbeddingModel::zeros(2, 3);
        // k = 2 draws of p = 0.5 classes: E = 1, so every logit is 0
        let n = noise(&[1, 1]);
        let c = CandidateSet::from_ids(vec![1], &n);
        let c = CandidateSet { log_expected: vec![libm::log(2.0 * 0.5)], ..c };
        let (loss, _) = batch_loss_and_grads(&m, &[TrainingPair { target: 0, context: 0 }], &c).unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn duplicated_pair_keeps_mean_loss_and_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = init_model(10, 3, &mut rng);
        for x in m.output.iter_mut().chain(m.bias.iter_mut()) {
            *x = rng.gen_range(-1.0..1.0);
        }
        let n = noise(&[5, 4, 3, 3, 2, 2, 1, 1, 1, 1]);
        let c = CandidateSet::from_ids(vec![2, 7, 9], &n);
        let p = TrainingPair { target: 1, context: 4 };
        let (l1, g1) = batch_loss_and_grads(&m, &[p], &c).unwrap();
        let (l2, g2) = batch_loss_and_grads(&m, &[p, p], &c).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (id, row) in g1.input.iter() {
            for (a, b) in row.iter().zip(g2.input.get(id).unwrap()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        for (id, row) in g1.output.iter() {
            for (a, b) in row.iter().zip(g2.output.get(id).unwrap()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn accidental_hits_are_masked() {
        let m = EmbeddingModel::zeros(3, 2);
        let n = noise(&[1, 1, 1]);
        let c = CandidateSet::from_ids(vec![0, 1], &n);
        // noise draw 0 equals the true class; only the true class and draw 1 remain
        let (loss, g) = batch_loss_and_grads(&m, &[TrainingPair { target: 2, context: 0 }], &c).unwrap();
        let other = -c.log_expected[1];
        let expected = libm::log(1.0 + libm::exp(other));
        assert!((loss - expected).abs() < 1e-12);
        let p_true = 1.0 / (1.0 + libm::exp(other));
        assert!((g.bias.get(0).unwrap()[0] - (p_true - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = init_model(10, 4, &mut rng);
        for x in m.output.iter_mut().chain(m.bias.iter_mut()).chain(m.input.iter_mut()) {
            *x = rng.gen_range(-2.0..2.0);
        }
        let n = noise(&[9, 8, 7, 6, 5, 4, 3, 2, 1, 1]);
        let c = CandidateSet::sample(&n, 6, &mut rng);
        let pairs: Vec<_> = (0..20).map(|i| TrainingPair { target: i % 10, context: (i * 3) % 10 }).collect();
        let scores = candidate_scores(&m, &pairs, &c).unwrap();
        for (p, row) in pairs.iter().zip(&scores) {
            let kept: Vec<f64> = core::iter::once(row[0])
                .chain(row[1..].iter().zip(&c.ids).filter(|(_, &id)| id != p.context).map(|(l, _)| *l))
                .collect();
            let max = kept.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = kept.iter().map(|l| libm::exp(l - max)).sum();
            let total: f64 = kept.iter().map(|l| libm::exp(l - max) / z).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_first_step_closed_form() {
        let cfg = AdamConfig::default();
        let (p, m, v) = adam_update(0.0, 1.0, 0.0, 0.0, 0.001, cfg.bias_corrections(1), &cfg);
        // m_hat = 1, v_hat = 1 -> update = lr / (1 + eps)
        assert!((p + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!((m - 0.1).abs() < 1e-15);
        assert!((v - 0.001).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_on_fresh_state_changes_nothing() {
        let mut model = init_model(5, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let before = model.clone();
        let mut adam = AdamState::new(5, 3, AdamConfig::default());
        let mut g = SparseGrads::new(3);
        g.input.row_mut(1);
        g.output.row_mut(2);
        g.bias.row_mut(2);
        adam.apply(&mut model, &g, 0.001);
        assert_eq!(model, before);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn adam_is_not_linear_in_lr_across_steps() {
        let cfg = AdamConfig::default();
        let run = |grads: &[f64], lr: f64| {
            let (mut p, mut m, mut v) = (0.0, 0.0, 0.0);
            for (t, &g) in grads.iter().enumerate() {
                (p, m, v) = adam_update(p, g, m, v, lr, cfg.bias_corrections(t as u64 + 1), &cfg);
            }
            p
        };
        // With a constant gradient the bias-corrected ratio is exactly 1 at
        // every step: two steps at lr and one at 2 lr both move by 2 lr/(1+eps).
        let two = run(&[1.0, 1.0], 0.001);
        let one = run(&[1.0], 0.002);
        assert!((two - -0.002).abs() < 1e-10 && (one - -0.002).abs() < 1e-10);
        // With a changing gradient (1 then 0.5) the second step shrinks.
        let m2: f64 = 0.9 * 0.1 + 0.1 * 0.5;
        let v2: f64 = 0.999 * 0.001 + 0.001 * 0.25;
        let step2 = 0.001 * (m2 / 0.19) / ((v2 / (1.0 - 0.999f64 * 0.999)).sqrt() + 1e-8);
        let expected = -0.001 / (1.0 + 1e-8) - step2;
        let got = run(&[1.0, 0.5], 0.001);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - one).abs() > 5e-5);
        assert!((step2 - 0.000_932).abs() < 1e-6);
        assert!((-got - 0.001_932).abs() < 1e-6);
    }

    #[test]
    fn sparse_step_leaves_other_rows_bitwise_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut model = init_model(12, 4, &mut rng);
        for x in model.output.iter_mut() {
            *x = rng.gen_range(-0.1..0.1);
        }
        let before = model.clone();
        let n = noise(&[12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1]);
        let c = CandidateSet::from_ids(vec![5, 6], &n);
        let pairs = [TrainingPair { target: 0, context: 1 }, TrainingPair { target: 2, context: 3 }];
        let (_, g) = batch_loss_and_grads(&model, &pairs, &c).unwrap();
        let mut adam = AdamState::new(12, 4, AdamConfig::default());
        adam.apply(&mut model, &g, 0.01);
        for id in 0..12u32 {
            let in_touched = [0, 2].contains(&id);
            let out_touched = [1, 3, 5, 6].contains(&id);
            if !in_touched {
                assert_eq!(model.input_row(id), before.input_row(id));
            }
            if !out_touched {
                assert_eq!(model.output_row(id), before.output_row(id));
                assert_eq!(model.bias[id as usize].to_bits(), before.bias[id as usize].to_bits());
            } else {
                assert_ne!(model.output_row(id), before.output_row(id));
            }
        }
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(lr_schedule(0, 0.001, 0.9), 0.001);
        assert_eq!(lr_schedule(1, 0.001, 0.9), 0.0009);
        assert!((lr_schedule(19, 0.001, 0.9) - 1.3509e-4).abs() < 1e-8);
        assert_eq!(lr_schedule(3, 0.05, 1.0), 0.05);
    }

    #[test]
    fn config_rejects_invalid_values() {
        let base = TrainConfig { num_sampled: 5, ..TrainConfig::default() };
        assert!(base.validate(10).is_ok());
        assert!(TrainConfig { epochs: 0, ..base.clone() }.validate(10).is_err());
        assert!(TrainConfig { decay: 0.0, ..base.clone() }.validate(10).is_err());
        assert!(TrainConfig { decay: 1.5, ..base.clone() }.validate(10).is_err());
        assert!(TrainConfig { dim: 0, ..base.clone() }.validate(10).is_err());
        assert!(TrainConfig { num_sampled: 10, ..base.clone() }.validate(10).is_err());
        let err = TrainConfig { num_sampled: 0, ..base }.validate(10).unwrap_err();
        assert!(err.to_string().contains("num_sampled"));
    }

    #[test]
    fn batches_cover_all_sentences() {
        let s = |n: usize| EncodedSentence::new(vec![0; n], vec![]);
        let corpus = [s(3), s(4), s(2), s(10), s(1)];
        assert_eq!(batch_ranges(&corpus, 7), vec![0..2, 2..4, 4..5]);
        assert_eq!(batch_ranges(&corpus, 1000), vec![0..5]);
        assert!(batch_ranges(&[], 5).is_empty());
    }

    fn toy_corpus() -> (Vec<EncodedSentence>, Vocabulary) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut sentences = Vec::new();
        let mut counts = vec![0u64; 30];
        for _ in 0..200 {
            // topic words 0..10 co-occur; 10..30 random
            let topic = rng.gen_range(0..5) * 2;
            let mut ids: Vec<u32> = (0..8).map(|_| rng.gen_range(10..30)).collect();
            let at = rng.gen_range(0..7);
            ids.insert(at, topic);
            ids.insert(at + 1, topic + 1);
            for &i in &ids {
                counts[i as usize] += 1;
            }
            sentences.push(EncodedSentence::new(ids, vec![PhraseSpan::new(at, at + 2)]));
        }
        // vocabulary ids must line up with the synthetic ids above
        let entries = counts.iter().enumerate().map(|(i, &c)| (alloc::format!("w{i}"), c.max(1))).collect();
        (sentences, Vocabulary::from_entries(entries).unwrap())
    }

    #[test]
    fn training_reduces_loss_on_toy_corpus() {
        let (corpus, vocab) = toy_corpus();
        let cfg = TrainConfig { dim: 16, window: 3, epochs: 5, num_sampled: 10, batch_tokens: 50, initial_lr: 0.02, regime: Regime::SPhrase, ..Default::default() };
        let mut losses = Vec::new();
        let model = train(&corpus, &vocab, cfg, |s, _| losses.push(s.mean_loss)).unwrap();
        assert_eq!(losses.len(), 5);
        assert!(losses[4] < losses[0], "{losses:?}");
        assert!(model.is_finite());
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (corpus, vocab) = toy_corpus();
        let cfg = TrainConfig { dim: 8, window: 2, epochs: 2, num_sampled: 5, batch_tokens: 100, ..Default::default() };
        let a = train(&corpus, &vocab, cfg.clone(), |_, _| {}).unwrap();
        let b = train(&corpus, &vocab, cfg, |_, _| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let (_, vocab) = toy_corpus();
        let cfg = TrainConfig { dim: 4, epochs: 1, num_sampled: 5, ..Default::default() };
        let single = [EncodedSentence::new(vec![1], vec![])];
        assert_eq!(train(&single, &vocab, cfg, |_, _| {}).unwrap_err(), Error::EmptyCorpus);
    }
}
