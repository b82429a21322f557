//! Intrinsic evaluation: pairwise phrase similarity and analogies.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::Rng;

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::math;
use crate::trainer::EmbeddingModel;
use crate::vocab::Vocabulary;

/// Phrase lengths scored by [`similarity_score`].
pub const MIN_PHRASE_LEN: usize = 2;
pub const MAX_PHRASE_LEN: usize = 7;

/// Word vectors looked up by token.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    words: Vec<String>,
    index: HashMap<String, u32>,
    dim: usize,
    vectors: Vec<f32>,
}

impl Embedding {
    pub fn new(words: Vec<String>, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if vectors.len() != words.len() * dim {
            return Err(Error::DimensionMismatch(vectors.len(), words.len() * dim));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) || index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::InvalidToken(w.clone()));
            }
        }
        Ok(Self { words, index, dim, vectors })
    }

    /// The input vectors of a trained model, keyed by the vocabulary.
    pub fn from_model(vocab: &Vocabulary, model: &EmbeddingModel) -> Result<Self> {
        Self::new(vocab.tokens().map(String::from).collect(), model.dim(), model.input.clone())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn row(&self, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.vectors[i..i + self.dim]
    }

    pub fn row_mut(&mut self, id: u32) -> &mut [f32] {
        let i = id as usize * self.dim;
        &mut self.vectors[i..i + self.dim]
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.id(word).map(|i| self.row(i))
    }

    /// Unit-length copy of a row in `f64`, or `None` for a zero row.
    fn unit_row(&self, id: u32) -> Option<Vec<f64>> {
        let row: Vec<f64> = self.row(id).iter().map(|&x| x as f64).collect();
        let norm = math::sqrt(row.iter().map(|x| x * x).sum());
        (norm > 0.0).then(|| row.into_iter().map(|x| x / norm).collect())
    }
}

/// `<u, v> / (|u| |v|)`.
pub fn cosine<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.into(), b.into());
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((uv / (math::sqrt(uu) * math::sqrt(vv))).clamp(-1.0, 1.0))
}

/// Phrases of 2..=7 in-vocabulary tokens, in id space.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseList {
    pub phrases: Vec<Vec<u32>>,
    /// Input lines dropped for length or vocabulary coverage.
    pub dropped: usize,
}

impl PhraseList {
    /// One phrase per line, tokenized like the training corpus.
    pub fn parse(text: &str, embedding: &Embedding) -> Self {
        let mut list = PhraseList::default();
        for line in text.lines() {
            let tokens = tokenize(line);
            if tokens.is_empty() {
                continue;
            }
            let ids: Option<Vec<u32>> = tokens.iter().map(|t| embedding.id(t)).collect();
            match ids {
                Some(ids) if (MIN_PHRASE_LEN..=MAX_PHRASE_LEN).contains(&ids.len()) => list.phrases.push(ids),
                _ => list.dropped += 1,
            }
        }
        list
    }

    pub fn from_ids(phrases: Vec<Vec<u32>>) -> Self {
        Self { phrases, dropped: 0 }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

/// Per-length similarity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub repeats: usize,
    /// `(length, phrase count, mean score)`; the score is `None` when no
    /// phrase has that length.
    pub rows: Vec<(usize, usize, Option<f64>)>,
}

impl SimilarityReport {
    pub fn score(&self, len: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == len).and_then(|r| r.2)
    }

    pub fn count(&self, len: usize) -> usize {
        self.rows.iter().find(|r| r.0 == len).map_or(0, |r| r.1)
    }
}

/// Pairwise phrase-similarity score.
///
/// For every adjacent pair `(w_i, w_{i+1})` of every phrase, a comparison
/// word `r` is drawn uniformly from the word occurrences of all other
/// phrases; the indicator `cos(w_i, w_{i+1}) > cos(w_i, r)` is averaged over
/// phrases of the same length, their adjacent pairs, and `repeats` rounds.
pub fn similarity_score<R: Rng + ?Sized>(
    phrases: &PhraseList,
    embedding: &Embedding,
    rng: &mut R,
    repeats: usize,
) -> Result<SimilarityReport> {
    assert!(repeats >= 1, "repeats must be at least 1");
    if phrases.len() < 2 {
        return Err(Error::InsufficientPhrases(phrases.len()));
    }
    let mut flat = Vec::new();
    let mut offsets = Vec::with_capacity(phrases.len());
    for p in &phrases.phrases {
        offsets.push(flat.len());
        flat.extend_from_slice(p);
    }

    let mut units: HashMap<u32, Vec<f64>> = HashMap::new();
    for &id in &flat {
        if !units.contains_key(&id) {
            let u = embedding.unit_row(id).ok_or(Error::ZeroVector)?;
            units.insert(id, u);
        }
    }
    let sim = |a: u32, b: u32| -> f64 { units[&a].iter().zip(&units[&b]).map(|(x, y)| x * y).sum() };

    let mut hits = [0u64; MAX_PHRASE_LEN + 1];
    let mut trials = [0u64; MAX_PHRASE_LEN + 1];
    let mut counts = [0usize; MAX_PHRASE_LEN + 1];
    for p in &phrases.phrases {
        if p.len() <= MAX_PHRASE_LEN {
            counts[p.len()] += 1;
        }
    }
    for _ in 0..repeats {
        for (pi, p) in phrases.phrases.iter().enumerate() {
            let l = p.len();
            if !(MIN_PHRASE_LEN..=MAX_PHRASE_LEN).contains(&l) {
                continue;
            }
            let pool = flat.len() - l;
            for w in p.windows(2) {
                let mut g = rng.gen_range(0..pool);
                if g >= offsets[pi] {
                    g += l;
                }
                let r = flat[g];
                if sim(w[0], w[1]) > sim(w[0], r) {
                    hits[l] += 1;
                }
                trials[l] += 1;
            }
        }
    }
    let rows = (MIN_PHRASE_LEN..=MAX_PHRASE_LEN)
        .map(|l| (l, counts[l], (trials[l] > 0).then(|| hits[l] as f64 / trials[l] as f64)))
        .collect();
    Ok(SimilarityReport { repeats, rows })
}

/// `a : b :: c : d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub category: String,
}

/// Parses the `: category` / four-words-per-line analogy format.
pub fn load_analogy_set(text: &str) -> Result<Vec<AnalogyQuestion>> {
    let mut out = Vec::new();
    let mut category = String::from("default");
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::MalformedAnalogyFile { line: i + 1, reason: "empty category name".into() });
            }
            category = name.to_string();
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.len() != 4 {
            return Err(Error::MalformedAnalogyFile {
                line: i + 1,
                reason: alloc::format!("expected 4 words, found {}", words.len()),
            });
        }
        out.push(AnalogyQuestion {
            a: words[0].into(),
            b: words[1].into(),
            c: words[2].into(),
            d: words[3].into(),
            category: category.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CategoryScore {
    pub name: String,
    pub correct: u64,
    pub total: u64,
    pub skipped: u64,
}

impl CategoryScore {
    /// `correct / total`, or 0 when nothing was evaluated.
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    /// True when every question of the category was skipped.
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnalogyReport {
    /// Categories in order of first appearance.
    pub categories: Vec<CategoryScore>,
}

impl AnalogyReport {
    pub fn overall(&self) -> CategoryScore {
        let mut all = CategoryScore { name: "all".into(), ..Default::default() };
        for c in &self.categories {
            all.correct += c.correct;
            all.total += c.total;
            all.skipped += c.skipped;
        }
        all
    }

    pub fn skipped(&self) -> u64 {
        self.categories.iter().map(|c| c.skipped).sum()
    }

    pub fn category(&self, name: &str) -> Option<&CategoryScore> {
        self.categories.iter().find(|c| c.name == name)
    }
}

/// Predicts `d` as the vocabulary word (other than `a`, `b`, `c`) whose
/// vector has the highest cosine with `v(b) - v(a) + v(c)`.
pub fn analogy_accuracy(questions: &[AnalogyQuestion], embedding: &Embedding) -> AnalogyReport {
    let dim = embedding.dim();
    let units: Vec<Option<Vec<f64>>> = (0..embedding.len() as u32).map(|i| embedding.unit_row(i)).collect();
    let mut report = AnalogyReport::default();
    let mut target = vec![0.0f64; dim];
    for q in questions {
        let slot = match report.categories.iter().position(|c| c.name == q.category) {
            Some(i) => i,
            None => {
                report.categories.push(CategoryScore { name: q.category.clone(), ..Default::default() });
                report.categories.len() - 1
            }
        };
        let lookup = |w: &str| embedding.id(&w.to_lowercase());
        let (Some(a), Some(b), Some(c), Some(d)) = (lookup(&q.a), lookup(&q.b), lookup(&q.c), lookup(&q.d)) else {
            report.categories[slot].skipped += 1;
            continue;
        };
        for (j, t) in target.iter_mut().enumerate() {
            *t = embedding.row(b)[j] as f64 - embedding.row(a)[j] as f64 + embedding.row(c)[j] as f64;
        }
        let mut best: Option<(u32, f64)> = None;
        for (w, unit) in units.iter().enumerate() {
            let w = w as u32;
            if w == a || w == b || w == c {
                continue;
            }
            let Some(unit) = unit else { continue };
            let score: f64 = target.iter().zip(unit).map(|(x, y)| x * y).sum();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((w, score));
            }
        }
        let cat = &mut report.categories[slot];
        cat.total += 1;
        if target.iter().any(|&x| x != 0.0) && best.is_some_and(|(w, _)| w == d) {
            cat.correct += 1;
        }
    }
    report
}

/// The `k` words closest to `word` by cosine, best first.
pub fn nearest(embedding: &Embedding, word: &str, k: usize) -> Option<Vec<(String, f64)>> {
    let id = embedding.id(word)?;
    let query = embedding.row(id);
    let mut scored: Vec<(u32, f64)> = (0..embedding.len() as u32)
        .filter(|&w| w != id)
        .filter_map(|w| cosine(query, embedding.row(w)).ok().map(|s| (w, s)))
        .collect();
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    Some(scored.into_iter().take(k).map(|(w, s)| (embedding.word(w).to_string(), s)).collect())
}
