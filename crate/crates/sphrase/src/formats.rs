//! On-disk formats: vocabulary, embedding text, binary checkpoints,
//! progress logs, stats reports and length-prefixed wikitext bundles.

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sphrase_core::corpus::CorpusStats;
use sphrase_core::{Embedding, EmbeddingModel, EpochStats, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: malformed embedding file: {reason}")]
    MalformedEmbeddingFile { path: PathBuf, line: usize, reason: String },
    #[error("{path}: line {line}: malformed vocabulary file: {reason}")]
    MalformedVocabularyFile { path: PathBuf, line: usize, reason: String },
    #[error("{path}: malformed checkpoint: {reason}")]
    MalformedCheckpoint { path: PathBuf, reason: String },
    #[error("{path}: malformed wikitext bundle at byte {offset}: {reason}")]
    MalformedBundle { path: PathBuf, offset: usize, reason: String },
    #[error("{path}: {source}")]
    Core { path: PathBuf, source: sphrase_core::Error },
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

/// `-` names stdin / stdout.
pub fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    if is_stdio(path) {
        io::stdin().read_to_string(&mut s).map_err(io_err(path))?;
    } else {
        s = fs::read_to_string(path).map_err(io_err(path))?;
    }
    Ok(s)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if is_stdio(path) {
        let mut b = Vec::new();
        io::stdin().read_to_end(&mut b).map_err(io_err(path))?;
        Ok(b)
    } else {
        fs::read(path).map_err(io_err(path))
    }
}

/// Writes through `f` to a file or stdout, flushing at the end.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let run = |w: &mut dyn Write| -> io::Result<()> {
        f(w)?;
        w.flush()
    };
    if is_stdio(path) {
        let stdout = io::stdout();
        let mut lock = BufWriter::new(stdout.lock());
        run(&mut lock)
    } else {
        let mut w = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
        run(&mut w)
    }
    .map_err(io_err(path))
}

// ---------------------------------------------------------------- vocabulary

pub fn write_vocabulary(w: &mut dyn Write, vocab: &Vocabulary) -> io::Result<()> {
    for (token, count) in vocab.entries() {
        writeln!(w, "{token}\t{count}")?;
    }
    Ok(())
}

pub fn save_vocabulary(vocab: &Vocabulary, path: &Path) -> Result<()> {
    write_with(path, |w| write_vocabulary(w, vocab))
}

/// Parses `token<TAB>count` lines; ids follow line order.
pub fn parse_vocabulary(text: &str, path: &Path) -> Result<Vocabulary> {
    let bad = |line: usize, reason: &str| FormatError::MalformedVocabularyFile {
        path: path.to_path_buf(),
        line,
        reason: reason.to_string(),
    };
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (token, count) = line.split_once('\t').ok_or_else(|| bad(i + 1, "expected token<TAB>count"))?;
        let count: u64 = count.trim().parse().map_err(|_| bad(i + 1, "count is not an integer"))?;
        entries.push((token.to_string(), count));
    }
    Vocabulary::from_entries(entries).map_err(|source| FormatError::Core { path: path.to_path_buf(), source })
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    parse_vocabulary(&read_text(path)?, path)
}

// ----------------------------------------------------------------- embedding

/// Text format: `V d`, then `token x_1 ... x_d` per word in id order.
/// Floats are printed in shortest round-trip form, so a reload is exact.
pub fn write_embedding(w: &mut dyn Write, emb: &Embedding) -> io::Result<()> {
    writeln!(w, "{} {}", emb.len(), emb.dim())?;
    for (id, word) in emb.words().iter().enumerate() {
        w.write_all(word.as_bytes())?;
        for x in emb.row(id as u32) {
            write!(w, " {x}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_embedding(emb: &Embedding, path: &Path) -> Result<()> {
    write_with(path, |w| write_embedding(w, emb))
}

/// Inverse of [`write_embedding`]. Accepts CRLF line endings and runs of
/// spaces or tabs between fields.
pub fn parse_embedding(text: &str, path: &Path) -> Result<Embedding> {
    let bad = |line: usize, reason: String| FormatError::MalformedEmbeddingFile { path: path.to_path_buf(), line, reason };
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines.next().unwrap_or("");
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_count = |s: &str| s.parse::<usize>().ok();
    let (v, d) = match dims.as_slice() {
        [v, d] => match (parse_count(v), parse_count(d)) {
            (Some(v), Some(d)) if d > 0 => (v, d),
            _ => return Err(bad(1, format!("header {header:?} is not `V d`"))),
        },
        _ => return Err(bad(1, format!("header {header:?} is not `V d`"))),
    };
    let mut words = Vec::with_capacity(v);
    let mut vectors = Vec::with_capacity(v * d);
    for i in 0..v {
        let line_no = i + 2;
        let line = match lines.next() {
            Some(l) if !l.trim().is_empty() => l,
            _ => return Err(bad(line_no, format!("expected {v} vector lines, found {i}"))),
        };
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap_or_default();
        let before = vectors.len();
        for f in fields {
            let x: f32 = f.parse().map_err(|_| bad(line_no, format!("{f:?} is not a number")))?;
            vectors.push(x);
        }
        let got = vectors.len() - before;
        if got != d {
            return Err(bad(line_no, format!("expected {d} values, found {got}")));
        }
        words.push(word.to_string());
    }
    for (j, rest) in lines.enumerate() {
        if !rest.trim().is_empty() {
            return Err(bad(v + 2 + j, "more vector lines than the header declares".into()));
        }
    }
    Embedding::new(words, d, vectors).map_err(|source| FormatError::Core { path: path.to_path_buf(), source })
}

pub fn load_embedding(path: &Path) -> Result<Embedding> {
    parse_embedding(&read_text(path)?, path)
}

// ---------------------------------------------------------------- checkpoint

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SPHR";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Layout (little-endian): magic `SPHR`, version `u32`, V `u64`, d `u64`,
/// then `f32` blocks: input (V*d, row-major), output (V*d), bias (V).
pub fn encode_checkpoint(model: &EmbeddingModel) -> Vec<u8> {
    let (v, d) = (model.vocab_size(), model.dim());
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (2 * v * d + v));
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(v as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for block in [&model.input, &model.output, &model.bias] {
        for x in block.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<EmbeddingModel> {
    let bad = |reason: String| FormatError::MalformedCheckpoint { path: path.to_path_buf(), reason };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let v = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let floats = v.checked_mul(d).and_then(|n| n.checked_mul(2)).and_then(|n| n.checked_add(v));
    let expected = floats.and_then(|n| n.checked_mul(4)).and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(bad(format!("size {} does not match V={v}, d={d}", bytes.len())));
    }
    let mut it = bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let input: Vec<f32> = it.by_ref().take(v * d).collect();
    let output: Vec<f32> = it.by_ref().take(v * d).collect();
    let bias: Vec<f32> = it.collect();
    EmbeddingModel::from_parts(v, d, input, output, bias).map_err(|source| FormatError::Core { path: path.to_path_buf(), source })
}

pub fn save_checkpoint(model: &EmbeddingModel, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path) -> Result<EmbeddingModel> {
    decode_checkpoint(&fs::read(path).map_err(io_err(path))?, path)
}

pub fn checkpoint_name(epoch: u32) -> String {
    format!("epoch-{epoch:03}.ckpt")
}

// ------------------------------------------------------------ progress, stats

/// `epoch<TAB>mean_loss<TAB>lr<TAB>pairs`
pub fn progress_line(s: &EpochStats) -> String {
    format!("{}\t{}\t{}\t{}", s.epoch, s.mean_loss, s.lr, s.pairs)
}

/// `key<TAB>value` lines for corpus statistics.
pub fn stats_report(stats: &CorpusStats, warnings: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!("sentences\t{}\n", stats.sentences));
    out.push_str(&format!("tokens\t{}\n", stats.total_tokens));
    out.push_str(&format!("warnings\t{warnings}\n"));
    let in_phrases: u64 = stats.phrase_tokens.iter().sum();
    out.push_str(&format!("phrase_tokens\t{in_phrases}\n"));
    for l in 2..=stats.max_len() {
        out.push_str(&format!("phrase_tokens_len_{l}\t{}\n", stats.bucket(l)));
        out.push_str(&format!("proportion_len_{l}\t{}\n", stats.proportion(l)));
    }
    out
}

// ----------------------------------------------------------- wikitext bundle

/// Splits a length-prefixed bundle: repeated records of a decimal byte
/// count on its own line followed by exactly that many bytes of UTF-8
/// article text. Blank lines between records are ignored.
pub fn split_bundle<'a>(bytes: &'a [u8], path: &Path) -> Result<Vec<&'a str>> {
    let bad = |offset: usize, reason: String| FormatError::MalformedBundle { path: path.to_path_buf(), offset, reason };
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let nl = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| pos + i);
        let header = std::str::from_utf8(&bytes[pos..nl]).map_err(|_| bad(pos, "length line is not UTF-8".into()))?;
        let header = header.trim_end_matches('\r');
        if header.trim().is_empty() {
            pos = nl + 1;
            continue;
        }
        let len: usize = header.trim().parse().map_err(|_| bad(pos, format!("{header:?} is not a byte count")))?;
        let start = nl + 1;
        let end = start.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad(pos, format!("record of {len} bytes runs past the end")))?;
        let text = std::str::from_utf8(&bytes[start..end]).map_err(|_| bad(start, "article is not UTF-8".into()))?;
        out.push(text);
        pos = end;
    }
    Ok(out)
}

/// Inverse of [`split_bundle`].
pub fn write_bundle<'a>(w: &mut dyn Write, articles: impl IntoIterator<Item = &'a str>) -> io::Result<()> {
    for a in articles {
        writeln!(w, "{}", a.len())?;
        w.write_all(a.as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
