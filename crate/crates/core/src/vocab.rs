//! Vocabulary, id encoding, and the unigram noise law for candidate sampling.

use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::Rng;

use crate::corpus::{AnnotatedSentence, PhraseSpan};
use crate::error::{Error, Result};
use crate::math;

/// Exponent applied to unigram counts when building the noise distribution.
pub const DEFAULT_NOISE_POWER: f64 = 0.75;

/// Token ↔ id map. Ids follow descending count, ties broken by token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
    min_count: u64,
}

/// Raw token frequencies, mergeable across workers.
#[derive(Debug, Clone, Default)]
pub struct TokenCounts(pub HashMap<String, u64>);

impl TokenCounts {
    pub fn add_sentence(&mut self, sentence: &AnnotatedSentence) {
        for tok in &sentence.tokens {
            match self.0.get_mut(tok.as_str()) {
                Some(c) => *c += 1,
                None => {
                    self.0.insert(tok.clone(), 1);
                }
            }
        }
    }

    pub fn merge(&mut self, other: TokenCounts) {
        for (tok, n) in other.0 {
            *self.0.entry(tok).or_insert(0) += n;
        }
    }
}

impl Vocabulary {
    /// Builds a vocabulary from `(token, count)` entries already in id order.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary { min_count: 0 });
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (tok, _)) in entries.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidToken(tok.clone()));
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::InvalidToken(tok.clone()));
            }
        }
        let min_count = entries.iter().map(|e| e.1).min().unwrap_or(0);
        Ok(Self { entries, index, min_count })
    }

    pub fn from_counts(counts: TokenCounts, min_count: u64) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        let mut entries: Vec<(String, u64)> = counts.0.into_iter().filter(|(_, n)| *n >= min_count).collect();
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut vocab = Self::from_entries(entries)?;
        vocab.min_count = min_count;
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.entries[id as usize].0
    }

    pub fn count(&self, id: u32) -> u64 {
        self.entries[id as usize].1
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }
}

/// Counts every token and keeps those seen at least `min_count` times.
pub fn build_vocabulary<'a, I>(sentences: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a AnnotatedSentence>,
{
    let mut counts = TokenCounts::default();
    for s in sentences {
        counts.add_sentence(s);
    }
    Vocabulary::from_counts(counts, min_count)
}

/// Categorical distribution over word ids used to draw noise candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDistribution {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    power: f64,
}

impl NoiseDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, id: u32) -> f64 {
        self.probabilities[id as usize]
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Draws one id by inverse-CDF lookup.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1) as u32
    }
}

/// `p(w) = count(w)^power / Σ count(v)^power`.
pub fn noise_distribution(vocab: &Vocabulary, power: f64) -> NoiseDistribution {
    noise_from_counts(vocab.entries.iter().map(|e| e.1), power)
}

pub(crate) fn noise_from_counts(counts: impl Iterator<Item = u64>, power: f64) -> NoiseDistribution {
    assert!(power >= 0.0, "noise power must be non-negative");
    let weights: Vec<f64> = counts.map(|c| math::powf(c.max(1) as f64, power)).collect();
    let total: f64 = weights.iter().sum();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut acc = 0.0;
    let cumulative = probabilities
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    NoiseDistribution { probabilities, cumulative, power }
}

/// A sentence in id space. Spans index into `ids`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodedSentence {
    pub ids: Vec<u32>,
    pub spans: Vec<PhraseSpan>,
}

impl EncodedSentence {
    pub fn new(ids: Vec<u32>, spans: Vec<PhraseSpan>) -> Self {
        Self { ids, spans }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Maps tokens to ids, dropping out-of-vocabulary tokens. Spans shrink to
/// the surviving positions and disappear once shorter than two tokens.
pub fn encode(sentence: &AnnotatedSentence, vocab: &Vocabulary) -> EncodedSentence {
    // new_pos[i] = number of kept tokens before position i
    let mut new_pos = Vec::with_capacity(sentence.tokens.len() + 1);
    let mut ids = Vec::with_capacity(sentence.tokens.len());
    for tok in &sentence.tokens {
        new_pos.push(ids.len());
        if let Some(id) = vocab.id(tok) {
            ids.push(id);
        }
    }
    new_pos.push(ids.len());
    let spans = sentence
        .spans
        .iter()
        .map(|s| PhraseSpan::new(new_pos[s.start], new_pos[s.end]))
        .filter(|s| s.end >= s.start + 2)
        .collect();
    EncodedSentence { ids, spans }
}
