//! The `sphrase` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sphrase_core::context::{extend_pairs, ContextSpec};
use sphrase_core::corpus::{extract_wikitext, parse_bracket_corpus, AnnotatedSentence, CorpusStats};
use sphrase_core::eval::{analogy_accuracy, load_analogy_set, nearest, similarity_score, PhraseList};
use sphrase_core::trainer::{stream_rng, Stream};
use sphrase_core::vocab::{build_vocabulary, encode};
use sphrase_core::{Embedding, EncodedSentence, Regime, DEFAULT_MAX_PHRASE_LEN};

use crate::formats;
use crate::manifest::{sidecar_path, RunManifest, TrainSettings};
use crate::parallel;
use crate::report::{self, ReportFormat};

pub const SEED_ENV: &str = "SPHRASE_SEED";

#[derive(Debug, Parser)]
#[command(name = "sphrase", version, about = "Phrase-aware skip-gram embeddings: ingest, train, evaluate")]
pub struct Cli {
    /// Where to write the run manifest (default: next to the main output file).
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest_out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert wikitext articles into a bracket-annotated corpus.
    Ingest(IngestArgs),
    /// Count tokens of a bracket corpus and write the vocabulary.
    Vocab(VocabArgs),
    /// Print the training pairs of sentences as `target<TAB>context`.
    Pairs(PairsArgs),
    /// Train embeddings.
    Train(TrainArgs),
    /// Pairwise phrase-similarity score per phrase length.
    EvalSim(EvalSimArgs),
    /// Analogy accuracy per category.
    EvalAnalogy(EvalAnalogyArgs),
    /// Nearest neighbours of a word by cosine.
    Nearest(NearestArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Article files (`-` for stdin). With --bundle each is a length-prefixed bundle.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Inputs hold length-prefixed article records.
    #[arg(long)]
    pub bundle: bool,
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// Stats report destination (default: stderr).
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_PHRASE_LEN)]
    pub max_phrase_len: usize,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Bracket corpus (`-` for stdin).
    #[arg(long, default_value = "-")]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub min_count: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_PHRASE_LEN)]
    pub max_phrase_len: usize,
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    /// A single bracket-annotated sentence.
    #[arg(long, conflicts_with = "corpus")]
    pub sentence: Option<String>,
    /// Bracket corpus (`-` for stdin); used when --sentence is absent.
    #[arg(long, default_value = "-")]
    pub corpus: PathBuf,
    /// Restrict to this vocabulary (default: every token of the input).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = Regime::SPhraseR)]
    pub regime: Regime,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Use the whole window instead of a random reduced window.
    #[arg(long)]
    pub full_window: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_PHRASE_LEN)]
    pub max_phrase_len: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Bracket corpus (`-` for stdin).
    #[arg(long, required_unless_present = "manifest")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Use an existing vocabulary instead of counting the corpus.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Repeat the run recorded in a manifest; replaces every other training flag.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = Regime::SPhraseR)]
    pub regime: Regime,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: u32,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub decay: f64,
    #[arg(long, default_value_t = 60_000)]
    pub batch_tokens: usize,
    #[arg(long, default_value_t = 5_000)]
    pub num_sampled: usize,
    #[arg(long, default_value_t = 0.75)]
    pub noise_power: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub min_count: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_PHRASE_LEN)]
    pub max_phrase_len: usize,
    /// Worker threads. Above 1 without --deterministic, workers update the model lock-free.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// One optimizer thread; extra threads only generate pairs. Reproducible bit for bit.
    #[arg(long)]
    pub deterministic: bool,
    /// Skip the per-epoch binary checkpoints.
    #[arg(long)]
    pub no_checkpoints: bool,
}

#[derive(Debug, Args)]
pub struct EvalSimArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    /// One phrase per line, space-separated tokens.
    #[arg(long)]
    pub phrases: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct EvalAnalogyArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    /// `: category` headers followed by `a b c d` lines.
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct NearestArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub word: String,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
}

/// `SPHRASE_SEED`, when set, wins over `--seed`.
fn effective_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

fn write_stdout(text: &str) -> anyhow::Result<()> {
    formats::write_with(Path::new("-"), |w| w.write_all(text.as_bytes()))?;
    Ok(())
}

fn finish_manifest(mut m: RunManifest, explicit: Option<&Path>, default: Option<PathBuf>) -> anyhow::Result<()> {
    if let Some(path) = explicit.map(Path::to_path_buf).or(default) {
        m.save(&path)?;
    }
    Ok(())
}

fn read_corpus(path: &Path, max_phrase_len: usize) -> anyhow::Result<Vec<AnnotatedSentence>> {
    let text = formats::read_text(path)?;
    parse_bracket_corpus(&text, max_phrase_len).with_context(|| path.display().to_string())
}

fn ingest(args: &IngestArgs, manifest_out: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("ingest");
    m.option("bundle", args.bundle);
    m.option("max_phrase_len", args.max_phrase_len);
    let mut stats = CorpusStats::new(args.max_phrase_len);
    let mut warnings = 0u64;
    let mut lines = String::new();
    for input in &args.inputs {
        let bytes = formats::read_bytes(input)?;
        let articles: Vec<&str> = if args.bundle {
            formats::split_bundle(&bytes, input)?
        } else {
            vec![std::str::from_utf8(&bytes).with_context(|| format!("{}: not UTF-8", input.display()))?]
        };
        for article in articles {
            let ex = extract_wikitext(article, args.max_phrase_len);
            warnings += ex.warnings as u64;
            for s in &ex.sentences {
                stats.add(s);
                lines.push_str(&s.to_bracket_line());
                lines.push('\n');
            }
        }
        m.inputs.push(input.clone());
    }
    formats::write_with(&args.output, |w| w.write_all(lines.as_bytes()))?;
    m.outputs.push(args.output.clone());
    let report = formats::stats_report(&stats, warnings);
    match &args.stats {
        Some(p) => {
            formats::write_with(p, |w| w.write_all(report.as_bytes()))?;
            m.outputs.push(p.clone());
        }
        None => eprint!("{report}"),
    }
    let default = sidecar_path(&args.output).or_else(|| args.stats.as_deref().and_then(sidecar_path));
    finish_manifest(m, manifest_out, default)
}

fn vocab(args: &VocabArgs, manifest_out: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("vocab");
    m.option("min_count", args.min_count);
    m.option("max_phrase_len", args.max_phrase_len);
    let sentences = read_corpus(&args.corpus, args.max_phrase_len)?;
    let vocab = build_vocabulary(sentences.iter(), args.min_count)?;
    formats::save_vocabulary(&vocab, &args.output)?;
    eprintln!("vocabulary: {} tokens with count >= {}", vocab.len(), args.min_count);
    m.inputs.push(args.corpus.clone());
    m.outputs.push(args.output.clone());
    finish_manifest(m, manifest_out, sidecar_path(&args.output))
}

fn pairs(args: &PairsArgs, manifest_out: Option<&Path>) -> anyhow::Result<()> {
    let seed = effective_seed(args.seed)?;
    let mut m = RunManifest::new("pairs");
    m.option("regime", args.regime.name());
    m.option("window", args.window);
    m.option("seed", seed);
    m.option("full_window", args.full_window);
    if args.window == 0 {
        bail!("--window must be at least 1");
    }
    let sentences = match &args.sentence {
        Some(s) => {
            m.option("sentence", s.as_str());
            parse_bracket_corpus(s, args.max_phrase_len)?
        }
        None => {
            m.inputs.push(args.corpus.clone());
            read_corpus(&args.corpus, args.max_phrase_len)?
        }
    };
    let vocab = match &args.vocab {
        Some(p) => {
            m.inputs.push(p.clone());
            formats::load_vocabulary(p)?
        }
        None => build_vocabulary(sentences.iter(), 1)?,
    };
    let spec = if args.full_window { ContextSpec::full(args.regime, args.window) } else { ContextSpec::new(args.regime, args.window) };
    let mut out = String::new();
    let mut buf = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        let enc = encode(s, &vocab);
        let mut rng = stream_rng(seed, Stream::Pairs, 0, i as u64);
        buf.clear();
        extend_pairs(&enc, &spec, &mut rng, &mut buf);
        for p in &buf {
            out.push_str(vocab.token(p.target));
            out.push('\t');
            out.push_str(vocab.token(p.context));
            out.push('\n');
        }
    }
    write_stdout(&out)?;
    finish_manifest(m, manifest_out, None)
}

fn settings_from_args(args: &TrainArgs) -> anyhow::Result<TrainSettings> {
    Ok(TrainSettings {
        regime: args.regime.name().to_string(),
        dim: args.dim,
        window: args.window,
        epochs: args.epochs,
        initial_lr: args.lr,
        decay: args.decay,
        batch_tokens: args.batch_tokens,
        num_sampled: args.num_sampled,
        noise_power: args.noise_power,
        seed: effective_seed(args.seed)?,
        min_count: args.min_count,
        max_phrase_len: args.max_phrase_len,
        threads: args.threads,
        deterministic: args.deterministic,
        checkpoints: !args.no_checkpoints,
    })
}

fn train(args: &TrainArgs, manifest_out: Option<&Path>) -> anyhow::Result<()> {
    let (settings, corpus_path, vocab_path) = match &args.manifest {
        Some(p) => {
            let prev = RunManifest::load(p)?;
            let settings = prev.train.with_context(|| format!("{}: not a training manifest", p.display()))?;
            let corpus = prev.inputs.first().cloned().with_context(|| format!("{}: manifest lists no corpus", p.display()))?;
            (settings, corpus, prev.inputs.get(1).cloned())
        }
        None => (settings_from_args(args)?, args.corpus.clone().expect("clap requires --corpus"), args.vocab.clone()),
    };
    let config = settings.train_config().map_err(anyhow::Error::msg)?;
    if settings.threads == 0 {
        bail!("--threads must be at least 1");
    }

    let sentences = read_corpus(&corpus_path, settings.max_phrase_len)?;
    let vocab = match &vocab_path {
        Some(p) => formats::load_vocabulary(p)?,
        None => build_vocabulary(sentences.iter(), settings.min_count)?,
    };
    config.validate(vocab.len())?;
    let corpus: Vec<EncodedSentence> = sentences.iter().map(|s| encode(s, &vocab)).collect();
    drop(sentences);

    let out = &args.out_dir;
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    let ckpt_dir = out.join("checkpoints");
    if settings.checkpoints {
        fs::create_dir_all(&ckpt_dir).with_context(|| ckpt_dir.display().to_string())?;
    }
    let vocab_out = out.join("vocab.tsv");
    formats::save_vocabulary(&vocab, &vocab_out)?;
    let progress_path = out.join("progress.tsv");
    let mut progress = fs::File::create(&progress_path).with_context(|| progress_path.display().to_string())?;

    let mut m = RunManifest::new("train");
    m.inputs.push(corpus_path.clone());
    m.inputs.extend(vocab_path.clone());
    m.train = Some(settings.clone());
    eprintln!(
        "training {} on {} sentences, V={}, d={}, {} epochs, {} thread(s){}",
        config.regime,
        corpus.len(),
        vocab.len(),
        config.dim,
        config.epochs,
        settings.threads,
        if settings.deterministic || settings.threads == 1 { ", deterministic" } else { ", lock-free" }
    );
    let on_epoch = |s: &sphrase_core::EpochStats, model: &sphrase_core::EmbeddingModel| -> anyhow::Result<()> {
        let line = formats::progress_line(s);
        writeln!(progress, "{line}").context("progress log")?;
        eprintln!("{line}");
        if settings.checkpoints {
            formats::save_checkpoint(model, &ckpt_dir.join(formats::checkpoint_name(s.epoch)))?;
        }
        Ok(())
    };
    let model = if settings.deterministic || settings.threads == 1 {
        parallel::train_deterministic(&corpus, &vocab, config, settings.threads, on_epoch)?
    } else {
        parallel::train_hogwild(&corpus, &vocab, config, settings.threads, on_epoch)?
    };

    let emb_path = out.join("embedding.txt");
    formats::save_embedding(&Embedding::from_model(&vocab, &model)?, &emb_path)?;
    m.outputs.extend([vocab_out, progress_path, emb_path]);
    if settings.checkpoints {
        m.outputs.push(ckpt_dir);
    }
    finish_manifest(m, manifest_out, Some(out.join("manifest.json")))
}

fn eval_sim(args: &EvalSimArgs, manifest_out: Option<&Path>) -> anyhow::Result<()> {
    let seed = effective_seed(args.seed)?;
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let emb = formats::load_embedding(&args.embedding)?;
    let text = formats::read_text(&args.phrases)?;
    let list = PhraseList::parse(&text, &emb);
    if list.dropped > 0 {
        eprintln!("{} phrase(s) dropped: out of vocabulary or length outside 2..7", list.dropped);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rep = similarity_score(&list, &emb, &mut rng, args.repeats)?;
    write_stdout(&report::similarity(&rep, args.format))?;
    let mut m = RunManifest::new("eval-sim");
    m.inputs.extend([args.embedding.clone(), args.phrases.clone()]);
    m.option("repeats", args.repeats);
    m.option("seed", seed);
    finish_manifest(m, manifest_out, None)
}

fn eval_analogy(args: &EvalAnalogyArgs, manifest_out: Option<&Path>) -> anyhow::Result<()> {
    let emb = formats::load_embedding(&args.embedding)?;
    let text = formats::read_text(&args.questions)?;
    let questions = load_analogy_set(&text).with_context(|| args.questions.display().to_string())?;
    let rep = analogy_accuracy(&questions, &emb);
    if rep.skipped() > 0 {
        eprintln!("{} of {} question(s) skipped: out of vocabulary", rep.skipped(), questions.len());
    }
    write_stdout(&report::analogy(&rep, args.format))?;
    let mut m = RunManifest::new("eval-analogy");
    m.inputs.extend([args.embedding.clone(), args.questions.clone()]);
    finish_manifest(m, manifest_out, None)
}

fn nearest_cmd(args: &NearestArgs, manifest_out: Option<&Path>) -> anyhow::Result<()> {
    let emb = formats::load_embedding(&args.embedding)?;
    let word = args.word.to_lowercase();
    let Some(hits) = nearest(&emb, &word, args.topk) else {
        bail!("{:?} is not in the embedding vocabulary", args.word);
    };
    let out: String = hits.iter().map(|(w, c)| format!("{w}\t{c:.6}\n")).collect();
    write_stdout(&out)?;
    let mut m = RunManifest::new("nearest");
    m.inputs.push(args.embedding.clone());
    m.option("word", word);
    m.option("topk", args.topk);
    finish_manifest(m, manifest_out, None)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mo = cli.manifest_out.as_deref();
    match &cli.command {
        Command::Ingest(a) => ingest(a, mo),
        Command::Vocab(a) => vocab(a, mo),
        Command::Pairs(a) => pairs(a, mo),
        Command::Train(a) => train(a, mo),
        Command::EvalSim(a) => eval_sim(a, mo),
        Command::EvalAnalogy(a) => eval_analogy(a, mo),
        Command::Nearest(a) => nearest_cmd(a, mo),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sphrase: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
