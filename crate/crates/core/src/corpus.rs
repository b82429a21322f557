//! Annotated sentences: tokenization, the bracket annotation format, and
//! hyperlink extraction from article wikitext.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::DEFAULT_MAX_PHRASE_LEN;

/// Half-open token range `[start, end)` marking one annotated phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhraseSpan {
    pub start: usize,
    pub end: usize,
}

impl PhraseSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Checks the span invariants against a sequence of `len` tokens: every span
/// has 2..=max tokens, lies inside the sequence, and spans are sorted and
/// disjoint.
pub fn validate_spans(spans: &[PhraseSpan], len: usize, max_phrase_len: usize) -> Result<(), &'static str> {
    let mut prev_end = 0;
    for span in spans {
        if span.end > len {
            return Err("span past end of sentence");
        }
        if span.len() < 2 || span.start >= span.end {
            return Err("span shorter than two tokens");
        }
        if span.len() > max_phrase_len {
            return Err("span longer than the phrase length cap");
        }
        if span.start < prev_end {
            return Err("spans overlap or are unsorted");
        }
        prev_end = span.end;
    }
    Ok(())
}

/// A tokenized sentence with its phrase annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<String>,
    pub spans: Vec<PhraseSpan>,
}

impl AnnotatedSentence {
    pub fn new(tokens: Vec<String>, spans: Vec<PhraseSpan>) -> Self {
        Self { tokens, spans }
    }

    pub fn plain(tokens: Vec<String>) -> Self {
        Self { tokens, spans: Vec::new() }
    }

    pub fn validate(&self, max_phrase_len: usize) -> Result<(), &'static str> {
        if self.tokens.iter().any(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err("empty token or token with whitespace");
        }
        validate_spans(&self.spans, self.tokens.len(), max_phrase_len)
    }

    /// Bracket-format rendering: tokens separated by single spaces with each
    /// phrase wrapped in `[ ... ]`.
    pub fn to_bracket_line(&self) -> String {
        let mut out = String::new();
        let mut spans = self.spans.iter().peekable();
        for (i, tok) in self.tokens.iter().enumerate() {
            if !out.is_empty() {
                out.push(' ');
            }
            if spans.peek().is_some_and(|s| s.start == i) {
                out.push_str("[ ");
            }
            out.push_str(tok);
            if let Some(s) = spans.peek() {
                if s.end == i + 1 {
                    out.push_str(" ]");
                    spans.next();
                }
            }
        }
        out
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}'
                | '\u{00A1}' | '\u{00BF}' | '\u{00B7}' | '\u{2039}' | '\u{203A}'
        )
}

/// Normalizes one whitespace-free chunk. Returns `None` when nothing but
/// punctuation remains.
///
/// A trailing period survives on initials (`w.`) and dotted abbreviations
/// (`u.s.`); every other leading or trailing punctuation run is removed.
fn normalize_token(raw: &str) -> Option<String> {
    let lower = raw.to_lowercase();
    let head_trimmed = lower.trim_start_matches(is_punct);
    let core = head_trimmed.trim_end_matches(is_punct);
    if core.is_empty() {
        return None;
    }
    let rest = &head_trimmed[core.len()..];
    let mut chars = core.chars();
    let single_letter = matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic());
    let mut out = String::from(core);
    if rest.starts_with('.') && (single_letter || core.contains('.')) {
        out.push('.');
    }
    Some(out)
}

/// Splits on Unicode whitespace, lowercases, and strips outer punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_token).collect()
}

/// Parses one bracket-annotated line with the default phrase length cap.
pub fn parse_bracket_line(line: &str) -> Result<AnnotatedSentence> {
    parse_bracket_line_at(line, 1, DEFAULT_MAX_PHRASE_LEN)
}

/// Parses one bracket-annotated line; `line_no` is used in error messages.
///
/// Bracketed groups of one token are unwrapped, and groups longer than
/// `max_phrase_len` keep their tokens but lose the span.
pub fn parse_bracket_line_at(line: &str, line_no: usize, max_phrase_len: usize) -> Result<AnnotatedSentence> {
    let malformed = |reason: &str| Error::MalformedAnnotation { line: line_no, reason: reason.into() };
    let mut sentence = AnnotatedSentence::default();
    let mut segment = String::new();
    let mut open = false;
    for c in line.chars() {
        match c {
            '[' if open => return Err(malformed("nested '['")),
            '[' => {
                sentence.tokens.extend(tokenize(&segment));
                segment.clear();
                open = true;
            }
            ']' if !open => return Err(malformed("']' without matching '['")),
            ']' => {
                push_phrase(&mut sentence, tokenize(&segment), max_phrase_len);
                segment.clear();
                open = false;
            }
            _ => segment.push(c),
        }
    }
    if open {
        return Err(malformed("unclosed '['"));
    }
    sentence.tokens.extend(tokenize(&segment));
    Ok(sentence)
}

/// Parses a whole bracket corpus, one sentence per line. Lines without
/// tokens are skipped.
pub fn parse_bracket_corpus(text: &str, max_phrase_len: usize) -> Result<Vec<AnnotatedSentence>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let sentence = parse_bracket_line_at(line, i + 1, max_phrase_len)?;
        if !sentence.tokens.is_empty() {
            out.push(sentence);
        }
    }
    Ok(out)
}

fn push_phrase(sentence: &mut AnnotatedSentence, phrase: Vec<String>, max_phrase_len: usize) {
    let start = sentence.tokens.len();
    let len = phrase.len();
    sentence.tokens.extend(phrase);
    if (2..=max_phrase_len).contains(&len) {
        sentence.spans.push(PhraseSpan::new(start, start + len));
    }
}

/// Sentences pulled out of one article plus the number of recoverable
/// markup problems (unclosed links or templates) seen along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WikiExtraction {
    pub sentences: Vec<AnnotatedSentence>,
    pub warnings: usize,
}

const DROPPED_NAMESPACES: [&str; 3] = ["category:", "file:", "image:"];

enum Piece {
    Text(String),
    Link(String),
}

/// Extracts annotated sentences from article wikitext.
///
/// The display text of each outermost internal link becomes a phrase. One
/// sentence is produced per non-empty line after templates, comments, HTML
/// tags, heading markers and bold/italic quotes are removed.
pub fn extract_wikitext(article: &str, max_phrase_len: usize) -> WikiExtraction {
    assert!(max_phrase_len >= 2, "max_phrase_len must be at least 2");
    let mut warnings = 0;
    let cleaned = strip_tags(&strip_templates(&strip_comments(article), &mut warnings));
    let mut sentences = Vec::new();
    for line in cleaned.lines() {
        let line = strip_heading(line.trim());
        let line = strip_quote_runs(line);
        let mut sentence = AnnotatedSentence::default();
        for piece in split_links(&line, &mut warnings) {
            match piece {
                Piece::Text(t) => sentence.tokens.extend(tokenize(&t)),
                Piece::Link(display) => push_phrase(&mut sentence, tokenize(&display), max_phrase_len),
            }
        }
        if !sentence.tokens.is_empty() {
            sentences.push(sentence);
        }
    }
    WikiExtraction { sentences, warnings }
}

fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find("<!--") {
        out.push_str(&rest[..i]);
        match rest[i + 4..].find("-->") {
            Some(j) => rest = &rest[i + 4 + j + 3..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

fn strip_templates(text: &str, warnings: &mut usize) -> String {
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with("{{") {
            if let Some(close) = find_close(text, i + 2, "{{", "}}") {
                i = close + 2;
                continue;
            }
            *warnings += 1;
            out.push_str("{{");
            i += 2;
            continue;
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    out
}

fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('<') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        let name = after.strip_prefix('/').unwrap_or(after);
        let is_tag = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        match after.find('>') {
            Some(j) if is_tag => {
                out.push(' ');
                rest = &after[j + 1..];
            }
            _ => {
                out.push('<');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn strip_heading(line: &str) -> &str {
    if line.len() >= 2 && line.starts_with('=') && line.ends_with('=') {
        line.trim_matches('=').trim()
    } else {
        line
    }
}

fn strip_quote_runs(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut run = 0;
    for c in line.chars() {
        if c == '\'' {
            run += 1;
            continue;
        }
        if run == 1 {
            out.push('\'');
        }
        run = 0;
        out.push(c);
    }
    if run == 1 {
        out.push('\'');
    }
    out
}

/// Byte index of the closing delimiter matching an opener that ends just
/// before `from`, honoring nesting.
fn find_close(text: &str, from: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 1usize;
    let mut i = from;
    while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with(open) {
            depth += 1;
            i += open.len();
        } else if rest.starts_with(close) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
            i += close.len();
        } else {
            i += rest.chars().next().unwrap().len_utf8();
        }
    }
    None
}

/// Splits link content into (target, display) at the first top-level `|`.
fn split_target(inner: &str) -> (&str, Option<&str>) {
    let mut depth = 0usize;
    let mut i = 0;
    while i < inner.len() {
        let rest = &inner[i..];
        if rest.starts_with("[[") {
            depth += 1;
            i += 2;
        } else if rest.starts_with("]]") {
            depth = depth.saturating_sub(1);
            i += 2;
        } else {
            if depth == 0 && rest.starts_with('|') {
                return (&inner[..i], Some(&inner[i + 1..]));
            }
            i += rest.chars().next().unwrap().len_utf8();
        }
    }
    (inner, None)
}

/// Resolves the text a link displays, or `None` for links that display
/// nothing (categories, files, images).
fn link_display(inner: &str, warnings: &mut usize) -> Option<String> {
    let (target, display) = split_target(inner);
    let target = target.trim();
    let lowered = target.to_lowercase();
    if DROPPED_NAMESPACES.iter().any(|ns| lowered.starts_with(ns)) {
        return None;
    }
    let shown = match display {
        Some(d) if !d.trim().is_empty() => d,
        _ => target,
    };
    Some(flatten_links(shown, warnings))
}

/// Replaces every link in `text` by its display text.
fn flatten_links(text: &str, warnings: &mut usize) -> String {
    let mut out = String::new();
    for piece in split_links(text, warnings) {
        match piece {
            Piece::Text(t) | Piece::Link(t) => {
                out.push(' ');
                out.push_str(&t);
                out.push(' ');
            }
        }
    }
    out
}

fn split_links(line: &str, warnings: &mut usize) -> Vec<Piece> {
    let mut pieces = vec![];
    let mut text = String::new();
    let mut i = 0;
    while i < line.len() {
        let rest = &line[i..];
        if rest.starts_with("[[") {
            match find_close(line, i + 2, "[[", "]]") {
                Some(close) => {
                    if !text.is_empty() {
                        pieces.push(Piece::Text(core::mem::take(&mut text)));
                    }
                    if let Some(display) = link_display(&line[i + 2..close], warnings) {
                        pieces.push(Piece::Link(display));
                    }
                    i = close + 2;
                }
                None => {
                    *warnings += 1;
                    text.push_str("[[");
                    i += 2;
                }
            }
            continue;
        }
        let c = rest.chars().next().unwrap();
        text.push(c);
        i += c.len_utf8();
    }
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    pieces
}

/// Token and phrase-membership counts over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentences: u64,
    pub total_tokens: u64,
    /// `phrase_tokens[l]` counts tokens inside phrases of length `l`.
    pub phrase_tokens: Vec<u64>,
}

impl CorpusStats {
    pub fn new(max_phrase_len: usize) -> Self {
        Self { sentences: 0, total_tokens: 0, phrase_tokens: vec![0; max_phrase_len + 1] }
    }

    pub fn add(&mut self, sentence: &AnnotatedSentence) {
        self.sentences += 1;
        self.total_tokens += sentence.tokens.len() as u64;
        for span in &sentence.spans {
            let len = span.len();
            if len >= self.phrase_tokens.len() {
                self.phrase_tokens.resize(len + 1, 0);
            }
            self.phrase_tokens[len] += len as u64;
        }
    }

    pub fn merge(&mut self, other: &CorpusStats) {
        self.sentences += other.sentences;
        self.total_tokens += other.total_tokens;
        if other.phrase_tokens.len() > self.phrase_tokens.len() {
            self.phrase_tokens.resize(other.phrase_tokens.len(), 0);
        }
        for (a, b) in self.phrase_tokens.iter_mut().zip(&other.phrase_tokens) {
            *a += b;
        }
    }

    pub fn bucket(&self, len: usize) -> u64 {
        self.phrase_tokens.get(len).copied().unwrap_or(0)
    }

    /// Share of all tokens that sit in phrases of length `len`.
    pub fn proportion(&self, len: usize) -> f64 {
        if self.total_tokens == 0 {
            0.0
        } else {
            self.bucket(len) as f64 / self.total_tokens as f64
        }
    }

    pub fn max_len(&self) -> usize {
        self.phrase_tokens.len().saturating_sub(1)
    }
}

pub fn corpus_stats<'a, I>(sentences: I, max_phrase_len: usize) -> CorpusStats
where
    I: IntoIterator<Item = &'a AnnotatedSentence>,
{
    let mut stats = CorpusStats::new(max_phrase_len);
    for s in sentences {
        stats.add(s);
    }
    stats
}
