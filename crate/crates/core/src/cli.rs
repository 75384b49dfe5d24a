//! Command-line front end. Every command writes a run manifest recording the
//! fully resolved arguments and the checksum of each file it produced, which
//! `replay` uses to re-run the command and verify the outputs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::circuit::{AnsatzConfig, QubitAssignment};
use crate::composer::{compose, ComposeError, ComposeReport, ComposeRequest, ModelClassifier};
use crate::corpus::{Corpus, Label, Record, SplitName};
use crate::grammar::{format_tokens, generate, parse_tokens, GenConfig, Lexicon};
use crate::learn::{evaluate, predict_distribution, predict_label, train, train_from, LearnError, Mode, TrainConfig};
use crate::midi::{encode_midi, load_lexicon_scores, render, RenderConfig, DEFAULT_LEXICON_NAME};
use crate::model::Model;
use crate::sim::NoiseConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;
pub const EXIT_EXHAUSTED: i32 = 5;

pub const SEED_ENV: &str = "QUANTONE_SEED";
/// Artifact key for output printed rather than written to a file.
pub const STDOUT_ARTIFACT: &str = "<stdout>";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
    Exhausted(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Exhausted(_) => EXIT_EXHAUSTED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) | CliError::Exhausted(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn learn_error(e: LearnError) -> CliError {
    match e {
        LearnError::Sim(_) => runtime(e),
        LearnError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        _ => data(e),
    }
}

#[derive(Debug, Parser)]
#[command(name = "quantone", version, about = "Grammar-driven music classification with simulated quantum circuits")]
pub struct Cli {
    /// Flat key = value file supplying defaults for any long option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for circuit evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Where to write the run manifest instead of the command's default.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample unlabeled compositions from the grammar.
    GenCorpus(GenCorpusArgs),
    /// Train a classifier with SPSA.
    Train(TrainArgs),
    /// Evaluate a model on a corpus split.
    Eval(EvalArgs),
    /// Classify one token sequence.
    Classify(ClassifyArgs),
    /// Generate pieces, keep the ones classified as the target, write MIDI.
    Compose(ComposeArgs),
    /// Re-run a recorded command and verify its outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Production weights ground,basic,composite.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Debug, Args)]
pub struct ReadoutArgs {
    /// exact or shots.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    #[arg(long)]
    pub p_read: Option<f64>,
    /// Disable the noise model in shot mode.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus name (canonical-100) or path.
    #[arg(long)]
    pub corpus: Option<String>,
    #[command(flatten)]
    pub readout: ReadoutArgs,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Exact-mode iterations run before a shot-mode phase when no --init
    /// model is given.
    #[arg(long)]
    pub pretrain_iters: Option<usize>,
    /// Start from this model instead of a random initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub spsa_a: Option<f64>,
    #[arg(long)]
    pub spsa_c: Option<f64>,
    /// SPSA stability constant A.
    #[arg(long)]
    pub spsa_stability: Option<f64>,
    #[arg(long)]
    pub spsa_alpha: Option<f64>,
    #[arg(long)]
    pub spsa_gamma: Option<f64>,
    /// Average first update in radians, used to pick --spsa-a when it is not given.
    #[arg(long)]
    pub first_step: Option<f64>,
    #[arg(long)]
    pub q_n: Option<usize>,
    #[arg(long)]
    pub q_s: Option<usize>,
    #[arg(long)]
    pub iqp_layers: Option<usize>,
    /// Lexicon score file, or "default"; supplies the snippet inventory.
    #[arg(long)]
    pub lexicon: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: Option<String>,
    /// train, dev, test or all.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub readout: ReadoutArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub tokens: String,
    #[command(flatten)]
    pub readout: ReadoutArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// MEL or RIT.
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub midi_dir: PathBuf,
    /// Minimum distance of the target probability from 0.5.
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    #[arg(long)]
    pub lexicon: Option<String>,
    #[arg(long)]
    pub tempo: Option<f64>,
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub readout: ReadoutArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long = "from")]
    pub from: PathBuf,
}

/// Keys accepted in a config file: the long option names.
const CONFIG_KEYS: &[&str] = &[
    "count",
    "seed",
    "weights",
    "max-depth",
    "corpus",
    "mode",
    "shots",
    "p1",
    "p2",
    "p-read",
    "noiseless",
    "iters",
    "pretrain-iters",
    "spsa-a",
    "spsa-c",
    "spsa-stability",
    "spsa-alpha",
    "spsa-gamma",
    "first-step",
    "q-n",
    "q-s",
    "iqp-layers",
    "lexicon",
    "split",
    "margin",
    "max-attempts",
    "tempo",
    "jobs",
];

/// Parses the flat `key = value` config format; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let k = k.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&k.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key {k:?}", i + 1)));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

/// Resolves settings with precedence flag > config file > default, and
/// records each resolved value as an explicit flag for replay.
struct Resolver {
    file: BTreeMap<String, String>,
    args: Vec<String>,
}

impl Resolver {
    fn new(file: BTreeMap<String, String>) -> Self {
        Resolver { file, args: Vec::new() }
    }

    fn opt<T: FromStr + ToString>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(s) => Some(
                    s.parse()
                        .map_err(|_| CliError::Usage(format!("config value {s:?} for {key} is invalid")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.args.push(format!("--{key}"));
            self.args.push(v.to_string());
        }
        Ok(v)
    }

    fn get<T: FromStr + ToString>(&mut self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        let v = self.opt(flag, key)?;
        match v {
            Some(v) => Ok(v),
            None => {
                self.args.push(format!("--{key}"));
                self.args.push(default.to_string());
                Ok(default)
            }
        }
    }

    fn switch(&mut self, flag: bool, key: &str) -> Result<bool, CliError> {
        let on = flag
            || match self.file.get(key).map(String::as_str) {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => return Err(CliError::Usage(format!("config value {other:?} for {key} is not a boolean"))),
            };
        if on {
            self.args.push(format!("--{key}"));
        }
        Ok(on)
    }

    fn path(&mut self, key: &str, p: &Path) {
        self.args.push(format!("--{key}"));
        self.args.push(p.display().to_string());
    }

    /// Flag, then config file, then the seed environment variable, then 0.
    fn seed(&mut self, flag: Option<u64>) -> Result<u64, CliError> {
        let from_file = match (flag, self.file.get("seed")) {
            (Some(s), _) => Some(s),
            (None, Some(s)) => Some(s.parse().map_err(|_| CliError::Usage(format!("invalid seed {s:?}")))?),
            (None, None) => None,
        };
        let seed = match from_file {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(s) => s
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV}={s:?} is not an integer")))?,
                Err(_) => 0,
            },
        };
        self.args.push("--seed".into());
        self.args.push(seed.to_string());
        Ok(seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusId {
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name with every setting made explicit,
    /// so replay does not depend on config files or the environment.
    pub argv: Vec<String>,
    pub cwd: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub corpus: Option<CorpusId>,
    pub output_dir: Option<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// Output path to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

struct Run {
    command: &'static str,
    resolver: Resolver,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    corpus: Option<CorpusId>,
    output_dir: Option<PathBuf>,
    artifacts: BTreeMap<String, String>,
    manifest_path: Option<PathBuf>,
}

impl Run {
    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        self.artifacts.insert(path.display().to_string(), sha256_hex(bytes));
        Ok(())
    }
}

fn load_corpus(source: &str) -> Result<(Corpus, CorpusId), CliError> {
    let corpus = Corpus::load(source).map_err(data)?;
    let id = CorpusId {
        source: source.to_string(),
        sha256: sha256_hex(corpus.to_text().as_bytes()),
    };
    Ok((corpus, id))
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    Model::load(path).map_err(data)
}

fn parse_weights(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("weights {s:?} must be three numbers g,b,c")))?;
    <[f64; 3]>::try_from(parts).map_err(|_| CliError::Usage(format!("weights {s:?} must be three numbers g,b,c")))
}

fn resolve_gen(r: &mut Resolver, g: &GenArgs) -> Result<GenConfig, CliError> {
    let weights = r.get(g.weights.clone(), "weights", "0.4,0.4,0.2".to_string())?;
    let max_depth = r.get(g.max_depth, "max-depth", 4)?;
    GenConfig::new(parse_weights(&weights)?, max_depth, 0).map_err(|e| CliError::Usage(e.to_string()))
}

fn resolve_readout(r: &mut Resolver, a: &ReadoutArgs, default_mode: &str) -> Result<Mode, CliError> {
    let mode = r.get(a.mode.clone(), "mode", default_mode.to_string())?;
    match mode.as_str() {
        "exact" => Ok(Mode::Exact),
        "shots" => {
            let d = NoiseConfig::default();
            let shots = r.get(a.shots, "shots", 8192)?;
            let p1 = r.get(a.p1, "p1", d.p1)?;
            let p2 = r.get(a.p2, "p2", d.p2)?;
            let p_read = r.get(a.p_read, "p-read", d.p_read)?;
            let noiseless = r.switch(a.noiseless, "noiseless")?;
            if shots == 0 {
                return Err(CliError::Usage("shots must be at least 1".into()));
            }
            let mut noise = NoiseConfig::new(p1, p2, p_read).map_err(|e| CliError::Usage(e.to_string()))?;
            noise.enabled = !noiseless;
            Ok(Mode::Shots { shots, noise })
        }
        other => Err(CliError::Usage(format!("mode must be exact or shots, not {other:?}"))),
    }
}

fn lexicon_for(source: &str) -> Result<Lexicon, CliError> {
    if source == DEFAULT_LEXICON_NAME {
        return Ok(Lexicon::standard());
    }
    Ok(load_lexicon_scores(source).map_err(data)?.lexicon())
}

fn cmd_gen_corpus(a: &GenCorpusArgs, run: &mut Run) -> Result<(), CliError> {
    let r = &mut run.resolver;
    let count = r.get(a.count, "count", 100)?;
    let seed = r.seed(a.seed)?;
    let gen = resolve_gen(r, &a.gen)?;
    r.path("out", &a.out);
    let lexicon = Lexicon::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<Record> = (1..=count)
        .map(|id| Record {
            id: id as u32,
            label: None,
            tokens: generate(&gen, &lexicon, &mut rng),
        })
        .collect();
    let corpus = Corpus::new(records).map_err(data)?;
    run.config = json!({ "count": count, "weights": gen.weights(), "max_depth": gen.max_depth() });
    run.seeds.insert("generation".into(), seed);
    run.output_dir = Some(parent_dir(&a.out));
    run.manifest_path.get_or_insert_with(|| sidecar(&a.out));
    run.write(&a.out, corpus.to_text().as_bytes())?;
    println!("wrote {count} compositions to {}", a.out.display());
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn cmd_train(a: &TrainArgs, run: &mut Run) -> Result<(), CliError> {
    let r = &mut run.resolver;
    let corpus_src = r.get(a.corpus.clone(), "corpus", crate::corpus::CANONICAL_NAME.to_string())?;
    let mode = resolve_readout(r, &a.readout, "exact")?;
    let shot_mode = matches!(mode, Mode::Shots { .. });
    let defaults = TrainConfig::default();
    let iters = r.get(a.iters, "iters", if shot_mode { 100 } else { defaults.iterations })?;
    let pretrain = if shot_mode && a.init.is_none() {
        r.get(a.pretrain_iters, "pretrain-iters", defaults.iterations)?
    } else {
        0
    };
    let seed = r.seed(a.seed)?;
    let spsa_a = r.opt(a.spsa_a, "spsa-a")?;
    let c = r.get(a.spsa_c, "spsa-c", defaults.c)?;
    let big_a = r.opt(a.spsa_stability, "spsa-stability")?;
    let alpha = r.get(a.spsa_alpha, "spsa-alpha", defaults.alpha)?;
    let gamma = r.get(a.spsa_gamma, "spsa-gamma", defaults.gamma)?;
    let first_step = r.get(a.first_step, "first-step", defaults.target_first_step)?;
    let q_n = r.get(a.q_n, "q-n", 2)?;
    let q_s = r.get(a.q_s, "q-s", 1)?;
    let layers = r.get(a.iqp_layers, "iqp-layers", 3)?;
    let lexicon_src = r.get(a.lexicon.clone(), "lexicon", DEFAULT_LEXICON_NAME.to_string())?;
    if let Some(init) = &a.init {
        r.path("init", init);
    }
    r.path("out", &a.out);

    let qa = QubitAssignment::new(q_n, q_s).map_err(|e| CliError::Usage(e.to_string()))?;
    let ac = AnsatzConfig::new(layers).map_err(|e| CliError::Usage(e.to_string()))?;
    let (corpus, corpus_id) = load_corpus(&corpus_src)?;
    let lexicon = lexicon_for(&lexicon_src)?;
    let cfg = TrainConfig {
        iterations: iters,
        a: spsa_a,
        c,
        big_a,
        alpha,
        gamma,
        target_first_step: first_step,
        mode,
        seed,
        qa,
        ac,
        ..TrainConfig::default()
    };
    run.corpus = Some(corpus_id);
    run.seeds.insert("train".into(), seed);
    run.output_dir = Some(a.out.clone());
    run.manifest_path.get_or_insert_with(|| a.out.join("manifest.json"));

    let start = match &a.init {
        Some(p) => Some(load_model(p)?),
        None if pretrain > 0 => {
            let exact = TrainConfig {
                iterations: pretrain,
                mode: Mode::Exact,
                ..cfg
            };
            let (m, h) = train(&corpus, &lexicon, &exact).map_err(learn_error)?;
            run.write(&a.out.join("exact-history.csv"), h.to_csv().as_bytes())?;
            Some(m)
        }
        None => None,
    };
    let (model, history) = match start {
        Some(m) => train_from(m, &corpus, &cfg),
        None => train(&corpus, &lexicon, &cfg),
    }
    .map_err(learn_error)?;
    run.config = json!({ "train": cfg, "pretrain_iterations": pretrain, "lexicon": lexicon_src, "schedule": history.schedule });
    run.write(&a.out.join("model.json"), model.to_json().as_bytes())?;
    run.write(&a.out.join("history.csv"), history.to_csv().as_bytes())?;
    match history.last() {
        Some(last) => println!(
            "trained {} iterations: loss {:.4}, train error {:.3}",
            history.len(),
            last.loss,
            last.train_error
        ),
        None => println!("0 iterations: wrote the initial model"),
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, run: &mut Run) -> Result<(), CliError> {
    let r = &mut run.resolver;
    r.path("model", &a.model);
    let corpus_src = r.get(a.corpus.clone(), "corpus", crate::corpus::CANONICAL_NAME.to_string())?;
    let split = r.get(a.split.clone(), "split", "test".to_string())?;
    let mode = resolve_readout(r, &a.readout, "exact")?;
    let seed = r.seed(a.seed)?;
    r.path("out", &a.out);
    let model = load_model(&a.model)?;
    let (corpus, corpus_id) = load_corpus(&corpus_src)?;
    let records: Vec<Record> = if split == "all" {
        corpus.records.clone()
    } else {
        let name: SplitName = split.parse().map_err(CliError::Usage)?;
        corpus.subset(name).into_iter().cloned().collect()
    };
    let e = evaluate(&model, &records, &mode, seed).map_err(learn_error)?;
    run.config = json!({ "split": split, "mode": mode });
    run.corpus = Some(corpus_id);
    run.seeds.insert("eval".into(), seed);
    run.output_dir = Some(parent_dir(&a.out));
    run.manifest_path.get_or_insert_with(|| sidecar(&a.out));
    run.write(&a.out, e.to_csv().as_bytes())?;
    println!("accuracy {:.4} ({}/{})", e.accuracy, e.correct(), e.rows.len());
    Ok(())
}

fn cmd_classify(a: &ClassifyArgs, run: &mut Run) -> Result<(), CliError> {
    let r = &mut run.resolver;
    r.path("model", &a.model);
    r.args.push("--tokens".into());
    r.args.push(a.tokens.clone());
    let mode = resolve_readout(r, &a.readout, "exact")?;
    let seed = r.seed(a.seed)?;
    let model = load_model(&a.model)?;
    let tokens = parse_tokens(&a.tokens).map_err(data)?;
    let (l0, l1) = predict_distribution(&model, &tokens, &mode, seed).map_err(learn_error)?;
    run.config = json!({ "mode": mode, "tokens": a.tokens });
    run.seeds.insert("classify".into(), seed);
    run.manifest_path.get_or_insert_with(|| PathBuf::from("classify.manifest.json"));
    let line = format!("l0 {l0:.6} l1 {l1:.6} label {}", predict_label(l0, model.threshold));
    // the result only goes to the terminal, so its checksum stands in for a file
    run.artifacts.insert(STDOUT_ARTIFACT.into(), sha256_hex(line.as_bytes()));
    println!("{line}");
    Ok(())
}

fn cmd_compose(a: &ComposeArgs, run: &mut Run) -> Result<(), CliError> {
    let r = &mut run.resolver;
    r.path("model", &a.model);
    r.args.push("--target".into());
    r.args.push(a.target.clone());
    let count = r.get(a.count, "count", 4)?;
    let seed = r.seed(a.seed)?;
    let margin = r.get(a.margin, "margin", 0.1)?;
    let max_attempts = r.get(a.max_attempts, "max-attempts", 500)?;
    let lexicon_src = r.get(a.lexicon.clone(), "lexicon", DEFAULT_LEXICON_NAME.to_string())?;
    let tempo = r.get(a.tempo, "tempo", 120.0)?;
    let gen = resolve_gen(r, &a.gen)?;
    let mode = resolve_readout(r, &a.readout, "exact")?;
    r.path("midi-dir", &a.midi_dir);

    let target: Label = a.target.parse().map_err(CliError::Usage)?;
    if !(tempo > 0.0) {
        return Err(CliError::Usage("tempo must be positive".into()));
    }
    let model = load_model(&a.model)?;
    let scores = load_lexicon_scores(&lexicon_src).map_err(data)?;
    let req = ComposeRequest {
        target,
        accept_margin: margin,
        count,
        max_attempts,
        gen,
        seed,
    };
    let clf = ModelClassifier {
        model: &model,
        mode,
        seed,
    };
    run.config = json!({
        "target": target, "count": count, "margin": margin, "max_attempts": max_attempts,
        "lexicon": lexicon_src, "tempo": tempo, "weights": gen.weights(), "max_depth": gen.max_depth(), "mode": mode,
    });
    run.seeds.insert("compose".into(), seed);
    run.output_dir = Some(a.midi_dir.clone());
    run.manifest_path.get_or_insert_with(|| a.midi_dir.join("manifest.json"));

    let (report, exhausted) = match compose(&clf, &scores.lexicon(), &req) {
        Ok(rep) => (rep, false),
        Err(ComposeError::AttemptsExhausted(rep)) => (rep, true),
        Err(ComposeError::InvalidRequest(m)) => return Err(CliError::Usage(m)),
        Err(ComposeError::Learn(e)) => return Err(learn_error(e)),
    };
    write_pieces(run, &report, &scores, tempo, &a.midi_dir)?;
    if exhausted {
        return Err(CliError::Exhausted(format!(
            "accepted {} of {count} pieces in {} attempts",
            report.accepted.len(),
            report.attempts
        )));
    }
    println!("accepted {} pieces in {} attempts", report.accepted.len(), report.attempts);
    Ok(())
}

fn write_pieces(
    run: &mut Run,
    report: &ComposeReport,
    scores: &crate::midi::LexiconScores,
    tempo: f64,
    dir: &Path,
) -> Result<(), CliError> {
    let cfg = RenderConfig {
        tempo_bpm: tempo,
        ..RenderConfig::default()
    };
    for (k, (tokens, l0)) in report.accepted.iter().enumerate() {
        let events = render(tokens, scores).map_err(data)?;
        run.write(&dir.join(format!("piece-{:02}.mid", k + 1)), &encode_midi(&events, &cfg))?;
        println!("piece-{:02}: {} (l0 {l0:.4})", k + 1, format_tokens(tokens));
    }
    run.write(&dir.join("report.csv"), report.to_csv().as_bytes())
}

fn cmd_replay(a: &ReplayArgs) -> Result<(), CliError> {
    let m = RunManifest::load(&a.from)?;
    let mut argv = vec![OsString::from("quantone")];
    argv.extend(m.argv.iter().map(OsString::from));
    let previous = std::env::current_dir().map_err(runtime)?;
    std::env::set_current_dir(&m.cwd).map_err(|e| runtime(format!("{}: {e}", m.cwd)))?;
    let outcome = execute(argv, false);
    std::env::set_current_dir(previous).map_err(runtime)?;
    let produced = outcome.map_err(|e| CliError::Runtime(format!("replayed command failed: {}", e.message())))?;
    let mut mismatches = 0;
    for (path, digest) in &m.artifacts {
        let status = match produced.artifacts.get(path) {
            Some(d) if d == digest => "ok",
            Some(_) => "differs",
            None => "missing",
        };
        if status != "ok" {
            mismatches += 1;
        }
        println!("{status} {path}");
    }
    if mismatches > 0 {
        return Err(CliError::Runtime(format!("{mismatches} artifact(s) did not reproduce")));
    }
    println!("replay reproduced {} artifact(s)", m.artifacts.len());
    Ok(())
}

/// Parses and runs one command. The returned manifest has not been
/// written.
fn execute(argv: Vec<OsString>, write_manifest: bool) -> Result<RunManifest, CliError> {
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    let file = match &cli.config {
        Some(p) => parse_config(&std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?)?,
        None => BTreeMap::new(),
    };
    let jobs = match cli.jobs {
        Some(j) => Some(j),
        None => file
            .get("jobs")
            .map(|s| s.parse().map_err(|_| CliError::Usage(format!("invalid jobs {s:?}"))))
            .transpose()?,
    };
    if let Some(j) = jobs {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let started = now_ms();
    let name = match &cli.command {
        Command::GenCorpus(_) => "gen-corpus",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Classify(_) => "classify",
        Command::Compose(_) => "compose",
        Command::Replay(_) => "replay",
    };
    let mut run = Run {
        command: name,
        resolver: Resolver::new(file),
        config: serde_json::Value::Null,
        seeds: BTreeMap::new(),
        corpus: None,
        output_dir: None,
        artifacts: BTreeMap::new(),
        manifest_path: cli.manifest.clone(),
    };
    let result = match &cli.command {
        Command::GenCorpus(a) => cmd_gen_corpus(a, &mut run),
        Command::Train(a) => cmd_train(a, &mut run),
        Command::Eval(a) => cmd_eval(a, &mut run),
        Command::Classify(a) => cmd_classify(a, &mut run),
        Command::Compose(a) => cmd_compose(a, &mut run),
        Command::Replay(a) => return cmd_replay(a).map(|_| empty_manifest()),
    };
    let mut argv = vec![run.command.to_string()];
    argv.extend(run.resolver.args.iter().cloned());
    let manifest = RunManifest {
        command: run.command.to_string(),
        argv,
        cwd: std::env::current_dir().map_err(runtime)?.display().to_string(),
        config: run.config.clone(),
        seeds: run.seeds.clone(),
        corpus: run.corpus.clone(),
        output_dir: run.output_dir.as_ref().map(|p| p.display().to_string()),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        artifacts: run.artifacts.clone(),
    };
    // a partial compose still gets a manifest describing what was written
    let keep = result.is_ok() || matches!(result, Err(CliError::Exhausted(_)));
    if write_manifest && keep {
        if let Some(path) = &run.manifest_path {
            let text = serde_json::to_string_pretty(&manifest).map_err(runtime)? + "\n";
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(runtime)?;
            }
            std::fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        }
    }
    result.map(|_| manifest)
}

fn empty_manifest() -> RunManifest {
    RunManifest {
        command: "replay".into(),
        argv: Vec::new(),
        cwd: String::new(),
        config: serde_json::Value::Null,
        seeds: BTreeMap::new(),
        corpus: None,
        output_dir: None,
        started_unix_ms: 0,
        finished_unix_ms: 0,
        artifacts: BTreeMap::new(),
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if argv.iter().skip(1).any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V") {
        if let Err(e) = Cli::try_parse_from(&argv) {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    }
    match execute(argv, true) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            let msg = e.message().trim_end();
            eprintln!("error: {}", msg.strip_prefix("error: ").unwrap_or(msg));
            e.exit_code()
        }
    }
}
