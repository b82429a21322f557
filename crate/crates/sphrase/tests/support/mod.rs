//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use sphrase_core::corpus::PhraseSpan;
use sphrase_core::trainer::ParamRows;
use sphrase_core::vocab::NoiseDistribution;
use sphrase_core::{AnalogyQuestion, Embedding, EncodedSentence, Regime, TrainingPair};

/// Random sentence of 1..=max_len tokens over ids `0..vocab` with random
/// disjoint spans of length 2..=max_span.
pub fn random_sentence<R: Rng>(rng: &mut R, max_len: usize, vocab: u32, max_span: usize) -> EncodedSentence {
    let len = rng.gen_range(1..=max_len);
    let ids = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i + 1 < len {
        if rng.gen_bool(0.3) {
            let l = rng.gen_range(2..=max_span.min(len - i));
            spans.push(PhraseSpan::new(i, i + l));
            i += l;
        } else {
            i += 1;
        }
    }
    EncodedSentence::new(ids, spans)
}

/// Unit label of every position: positions inside one span share a label,
/// labels increase left to right.
pub fn unit_labels(len: usize, spans: &[PhraseSpan]) -> Vec<usize> {
    let mut labels = vec![0; len];
    let mut label = 0;
    for i in 0..len {
        let joined = i > 0 && spans.iter().any(|s| s.start < i && i < s.end);
        if i > 0 && !joined {
            label += 1;
        }
        labels[i] = label;
    }
    labels
}

/// Context positions of every target position with the radius fixed to `b`,
/// found by scanning all position pairs. `None` for the random-pick regime.
pub fn oracle_contexts(len: usize, spans: &[PhraseSpan], regime: Regime, b: usize) -> Option<BTreeMap<usize, Vec<usize>>> {
    let labels = unit_labels(len, spans);
    let first = |l: usize| labels.iter().position(|&x| x == l).unwrap();
    let last = |l: usize| labels.iter().rposition(|&x| x == l).unwrap();
    let mut out = BTreeMap::new();
    for t in 0..len {
        let mut ctx = Vec::new();
        for c in 0..len {
            let keep = match regime {
                Regime::Word2Vec => c != t && c.abs_diff(t) <= b,
                Regime::SPhrase => {
                    let d = labels[c].abs_diff(labels[t]);
                    d >= 1 && d <= b
                }
                Regime::SPhraseNu => {
                    let (lo, hi) = (first(labels[t]), last(labels[t]));
                    labels[c] != labels[t] && c + b >= lo && c <= hi + b
                }
                Regime::SPhraseR => return None,
            };
            if keep {
                ctx.push(c);
            }
        }
        out.insert(t, ctx);
    }
    Some(out)
}

/// For the random-pick regime: the unit labels each target must draw
/// exactly one context position from.
pub fn oracle_r_units(len: usize, spans: &[PhraseSpan], b: usize) -> BTreeMap<usize, Vec<usize>> {
    let labels = unit_labels(len, spans);
    let n = labels.last().map_or(0, |l| l + 1);
    (0..len)
        .map(|t| {
            let lt = labels[t];
            (t, (0..n).filter(|&l| l != lt && l.abs_diff(lt) <= b).collect())
        })
        .collect()
}

/// Checks a random-pick result against [`oracle_r_units`].
pub fn r_matches_oracle(len: usize, spans: &[PhraseSpan], b: usize, got: &BTreeMap<usize, Vec<usize>>) -> bool {
    let labels = unit_labels(len, spans);
    let want = oracle_r_units(len, spans, b);
    (0..len).all(|t| {
        let mut picked: Vec<usize> = got.get(&t).map_or(vec![], |v| v.iter().map(|&c| labels[c]).collect());
        picked.sort_unstable();
        picked == want[&t]
    })
}

// --------------------------------------------------------------- analogies

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scans the whole vocabulary per question. Returns `(category, correct,
/// total)` in order of first appearance.
pub fn brute_force_analogy(questions: &[AnalogyQuestion], emb: &Embedding) -> Vec<(String, u64, u64)> {
    let mut out: Vec<(String, u64, u64)> = Vec::new();
    let vec_of = |w: &str| emb.vector(&w.to_lowercase()).map(|v| v.iter().map(|&x| x as f64).collect::<Vec<f64>>());
    for q in questions {
        if !out.iter().any(|r| r.0 == q.category) {
            out.push((q.category.clone(), 0, 0));
        }
        let (Some(a), Some(b), Some(c), Some(_)) = (vec_of(&q.a), vec_of(&q.b), vec_of(&q.c), vec_of(&q.d)) else {
            continue;
        };
        let target: Vec<f64> = (0..emb.dim()).map(|i| b[i] - a[i] + c[i]).collect();
        let tn = norm(&target);
        let mut best: Option<(f64, String)> = None;
        let excluded = [q.a.to_lowercase(), q.b.to_lowercase(), q.c.to_lowercase()];
        for (id, w) in emb.words().iter().enumerate() {
            if excluded.contains(w) {
                continue;
            }
            let v: Vec<f64> = emb.row(id as u32).iter().map(|&x| x as f64).collect();
            let vn = norm(&v);
            if vn == 0.0 || tn == 0.0 {
                continue;
            }
            let cos = target.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() / (tn * vn);
            if best.as_ref().is_none_or(|(s, _)| cos > *s) {
                best = Some((cos, w.clone()));
            }
        }
        let row = out.iter_mut().find(|r| r.0 == q.category).unwrap();
        row.2 += 1;
        if best.is_some_and(|(_, w)| w == q.d.to_lowercase()) {
            row.1 += 1;
        }
    }
    out
}

// ------------------------------------------------------------ gradient check

/// Small dense model in `f64`, flat layout: input (V*d), output (V*d), bias (V).
#[derive(Debug, Clone)]
pub struct DenseParams {
    pub v: usize,
    pub d: usize,
    pub theta: Vec<f64>,
}

impl DenseParams {
    pub fn random<R: Rng>(rng: &mut R, v: usize, d: usize) -> Self {
        Self { v, d, theta: (0..2 * v * d + v).map(|_| rng.gen_range(-1.0..1.0)).collect() }
    }

    fn input(&self, id: u32) -> &[f64] {
        let s = id as usize * self.d;
        &self.theta[s..s + self.d]
    }

    fn output(&self, id: u32) -> &[f64] {
        let s = self.v * self.d + id as usize * self.d;
        &self.theta[s..s + self.d]
    }

    fn bias(&self, id: u32) -> f64 {
        self.theta[2 * self.v * self.d + id as usize]
    }

    pub fn input_index(&self, id: u32, j: usize) -> usize {
        id as usize * self.d + j
    }

    pub fn output_index(&self, id: u32, j: usize) -> usize {
        self.v * self.d + id as usize * self.d + j
    }

    pub fn bias_index(&self, id: u32) -> usize {
        2 * self.v * self.d + id as usize
    }
}

impl ParamRows for DenseParams {
    fn vocab_size(&self) -> usize {
        self.v
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn read_input(&self, id: u32, out: &mut [f64]) {
        out.copy_from_slice(self.input(id))
    }

    fn read_output(&self, id: u32, out: &mut [f64]) {
        out.copy_from_slice(self.output(id))
    }

    fn read_bias(&self, id: u32) -> f64 {
        self.bias(id)
    }
}

/// Mean sampled-softmax loss written from the definition: each pair scores
/// its true context (expected count 1) against the noise draws (expected
/// count k*p), leaving out draws equal to the true context.
pub fn reference_loss(p: &DenseParams, pairs: &[TrainingPair], noise_ids: &[u32], noise: &NoiseDistribution) -> f64 {
    let k = noise_ids.len() as f64;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut total = 0.0;
    for pair in pairs {
        let x = p.input(pair.target);
        let true_logit = dot(x, p.output(pair.context)) + p.bias(pair.context);
        let mut logits = vec![true_logit];
        for &s in noise_ids {
            if s == pair.context {
                continue;
            }
            logits.push(dot(x, p.output(s)) + p.bias(s) - (k * noise.probability(s)).ln());
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += lse - true_logit;
    }
    total / pairs.len() as f64
}

/// Central-difference gradient of [`reference_loss`] over every parameter.
pub fn numeric_gradient(p: &DenseParams, pairs: &[TrainingPair], noise_ids: &[u32], noise: &NoiseDistribution, h: f64) -> Vec<f64> {
    let mut q = p.clone();
    (0..p.theta.len())
        .map(|i| {
            let x = p.theta[i];
            q.theta[i] = x + h;
            let up = reference_loss(&q, pairs, noise_ids, noise);
            q.theta[i] = x - h;
            let down = reference_loss(&q, pairs, noise_ids, noise);
            q.theta[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}
