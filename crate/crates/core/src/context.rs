//! Target/context pair generation.
//!
//! A sentence is partitioned into units: each annotated phrase is one unit
//! and every other token is a unit of its own. The phrase-aware regimes pick
//! one window radius per target unit so that all members of a phrase see the
//! same surroundings.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::corpus::PhraseSpan;
use crate::error::Error;
use crate::vocab::EncodedSentence;

/// A contiguous run of tokens treated as one position for context counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Unit {
    pub start: usize,
    pub end: usize,
}

impl Unit {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Context sampling regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Plain skip-gram: word windows, phrases ignored.
    Word2Vec,
    /// Unit windows on both sides of the target unit; every word of each
    /// context unit is a context.
    SPhrase,
    /// Target is a unit, but the window around it counts words.
    SPhraseNu,
    /// Unit windows, with one uniformly drawn word standing in for each
    /// multi-word context unit.
    SPhraseR,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Word2Vec, Regime::SPhrase, Regime::SPhraseNu, Regime::SPhraseR];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Word2Vec => "word2vec",
            Regime::SPhrase => "sphrase",
            Regime::SPhraseNu => "sphrase-nu",
            Regime::SPhraseR => "sphrase-r",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown regime {s:?}")))
    }
}

/// One skip-gram training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainingPair {
    pub target: u32,
    pub context: u32,
}

/// How the per-target window radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowSampling {
    /// Radius drawn uniformly from `1..=window` per target.
    #[default]
    Reduced,
    /// Radius fixed at `window`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextSpec {
    pub regime: Regime,
    pub window: usize,
    pub sampling: WindowSampling,
}

impl ContextSpec {
    pub fn new(regime: Regime, window: usize) -> Self {
        Self { regime, window, sampling: WindowSampling::Reduced }
    }

    pub fn full(regime: Regime, window: usize) -> Self {
        Self { regime, window, sampling: WindowSampling::Full }
    }

    fn radius<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.sampling {
            WindowSampling::Reduced => reduced_window(rng, self.window),
            WindowSampling::Full => self.window,
        }
    }
}

/// Partitions `len` tokens into units given sorted, disjoint spans.
pub fn units_of(spans: &[PhraseSpan], len: usize) -> Vec<Unit> {
    let mut units = Vec::with_capacity(len);
    let mut pos = 0;
    for span in spans {
        units.extend((pos..span.start).map(|i| Unit { start: i, end: i + 1 }));
        units.push(Unit { start: span.start, end: span.end });
        pos = span.end;
    }
    units.extend((pos..len).map(|i| Unit { start: i, end: i + 1 }));
    units
}

pub fn segment_units(sentence: &EncodedSentence) -> Vec<Unit> {
    units_of(&sentence.spans, sentence.ids.len())
}

/// Draws the effective radius uniformly from `1..=window`.
pub fn reduced_window<R: Rng + ?Sized>(rng: &mut R, window: usize) -> usize {
    assert!(window >= 1, "window must be at least 1");
    rng.gen_range(1..=window)
}

/// Calls `emit(target_pos, context_pos)` for every pair of the sentence, in
/// target order then context order.
pub fn for_each_position_pair<R, F>(len: usize, spans: &[PhraseSpan], spec: &ContextSpec, rng: &mut R, mut emit: F)
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize),
{
    assert!(spec.window >= 1, "window must be at least 1");
    if spec.regime == Regime::Word2Vec {
        for t in 0..len {
            let b = spec.radius(rng);
            let lo = t.saturating_sub(b);
            let hi = (t + b + 1).min(len);
            for c in (lo..t).chain(t + 1..hi) {
                emit(t, c);
            }
        }
        return;
    }

    let units = units_of(spans, len);
    let mut contexts: Vec<usize> = Vec::new();
    for (ui, unit) in units.iter().enumerate() {
        let b = spec.radius(rng);
        contexts.clear();
        match spec.regime {
            Regime::SPhraseNu => {
                contexts.extend(unit.start.saturating_sub(b)..unit.start);
                contexts.extend(unit.end..(unit.end + b).min(len));
            }
            Regime::SPhrase | Regime::SPhraseR => {
                let lo = ui.saturating_sub(b);
                let hi = (ui + b + 1).min(units.len());
                for ctx in units[lo..ui].iter().chain(&units[ui + 1..hi]) {
                    if spec.regime == Regime::SPhraseR && ctx.len() > 1 {
                        contexts.push(ctx.start + rng.gen_range(0..ctx.len()));
                    } else {
                        contexts.extend(ctx.start..ctx.end);
                    }
                }
            }
            Regime::Word2Vec => unreachable!(),
        }
        for t in unit.start..unit.end {
            for &c in &contexts {
                emit(t, c);
            }
        }
    }
}

/// Appends the sentence's pairs (in id space) to `out`.
pub fn extend_pairs<R: Rng + ?Sized>(sentence: &EncodedSentence, spec: &ContextSpec, rng: &mut R, out: &mut Vec<TrainingPair>) {
    let ids = &sentence.ids;
    for_each_position_pair(ids.len(), &sentence.spans, spec, rng, |t, c| {
        out.push(TrainingPair { target: ids[t], context: ids[c] });
    });
}

pub fn generate_pairs_with<R: Rng + ?Sized>(sentence: &EncodedSentence, spec: &ContextSpec, rng: &mut R) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    extend_pairs(sentence, spec, rng, &mut out);
    out
}

/// Pairs under `regime` with a reduced window radius drawn per target.
pub fn generate_pairs<R: Rng + ?Sized>(sentence: &EncodedSentence, regime: Regime, window: usize, rng: &mut R) -> Vec<TrainingPair> {
    generate_pairs_with(sentence, &ContextSpec::new(regime, window), rng)
}
