//! The `cxg` command line: one subcommand per pipeline stage.
//!
//! Every subcommand writes a single artifact (to `--out`, or stdout) and a
//! short run summary to stderr. Input problems exit with status 2, anything
//! else with status 1.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructicon::{build_network, NetworkConfig};
use crate::grammar::{GrammarInventory, Lexicon, TagSet};
use crate::hypergraph::Hypergraph;
use crate::matcher::{self, AnnotatedSentence, Match, MatchRecord, Matcher};
use crate::rhgat::{self, Matrix, ModelDims, RHgatParams, Task, TrainConfig};
use crate::selector::{self, Selection, SelectorConfig, Universe};

#[derive(Debug, Parser)]
#[command(name = "cxg", version, about = "Construction grammar pipeline tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find every construction match in a corpus (JSON lines).
    Match(MatchArgs),
    /// Choose a non-redundant subset of matches per sentence.
    Select(SelectArgs),
    /// Turn a selection into per-sentence hypergraphs.
    Hypergraph(HypergraphArgs),
    /// Train the encoder on the synthetic presence task; writes binary parameters.
    ToyTrain(ToyTrainArgs),
    /// Build the typed construction network.
    Network(NetworkArgs),
    /// Corpus-level AoC and ACR.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Construction inventory, one label per line.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Lexicon: `word<TAB>POS[,POS...][<TAB>cluster]` per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Tokenized, tagged corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SelectorArgs {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub w1: Option<f64>,
    #[arg(long)]
    pub w2: Option<f64>,
    #[arg(long)]
    pub w3: Option<f64>,
    #[arg(long)]
    pub s_syn: Option<f64>,
    #[arg(long)]
    pub s_sem: Option<f64>,
    #[arg(long)]
    pub s_lex: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub flip_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub selector: SelectorArgs,
    /// Output of `cxg match`; matches are recomputed when omitted.
    #[arg(long)]
    pub matches: Option<PathBuf>,
    /// Enumerate exhaustively when a sentence has at most 25 matches.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct HypergraphArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output of `cxg select`.
    #[arg(long)]
    pub selection: PathBuf,
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 500)]
    pub size: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Number of construction ids in the synthetic task.
    #[arg(long, default_value_t = 8)]
    pub vocab: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    /// Also write `epoch<TAB>loss<TAB>accuracy` lines here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dot,
    Records,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[command(flatten)]
    pub common: Common,
    /// `rows cols` text matrix, one row per construction.
    #[arg(long, conflicts_with = "params")]
    pub embeddings: Option<PathBuf>,
    /// Binary encoder parameters; their construction table is used.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub k: usize,
    #[arg(long, default_value_t = 10.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = Format::Dot)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub selector: SelectorArgs,
}

/// A failed run and its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type CliResult<T> = std::result::Result<T, Failure>;

fn input_error(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn runtime_error(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

fn from_core(error: crate::Error) -> Failure {
    if error.is_input_error() {
        input_error(error)
    } else {
        runtime_error(error)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let jobs = match &cli.command {
        Command::Match(a) => a.common.jobs,
        Command::Select(a) => a.common.jobs,
        Command::Hypergraph(a) => a.common.jobs,
        Command::ToyTrain(a) => a.common.jobs,
        Command::Network(a) => a.common.jobs,
        Command::Metrics(a) => a.common.jobs,
    };
    if jobs == 0 {
        return Err(input_error(anyhow!("--jobs must be at least 1")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(runtime_error)?;
    pool.install(|| match cli.command {
        Command::Match(a) => cmd_match(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Hypergraph(a) => cmd_hypergraph(&a),
        Command::ToyTrain(a) => cmd_toy_train(&a),
        Command::Network(a) => cmd_network(&a),
        Command::Metrics(a) => cmd_metrics(&a),
    })
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| input_error(anyhow!("{flag} is required")))
}

fn load_lexicon(common: &Common, tags: &TagSet) -> CliResult<Lexicon> {
    match &common.lexicon {
        Some(path) => Lexicon::load(path, tags)
            .with_context(|| format!("reading lexicon {}", path.display()))
            .map_err(input_error),
        None => Ok(Lexicon::new()),
    }
}

fn load_inventory(common: &Common, tags: &TagSet) -> CliResult<GrammarInventory> {
    let lexicon = load_lexicon(common, tags)?;
    let path = required(&common.inventory, "--inventory")?;
    GrammarInventory::load(path, tags, lexicon)
        .with_context(|| format!("reading inventory {}", path.display()))
        .map_err(input_error)
}

fn load_corpus(common: &Common, tags: &TagSet) -> CliResult<Vec<AnnotatedSentence>> {
    let path = required(&common.corpus, "--corpus")?;
    matcher::load_corpus(path, tags)
        .with_context(|| format!("reading corpus {}", path.display()))
        .map_err(input_error)
}

fn selector_config(args: &SelectorArgs, seed: u64) -> CliResult<SelectorConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(input_error)?;
            SelectorConfig::parse_str(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(input_error)?
        }
        None => SelectorConfig::default(),
    };
    let floats = [
        (args.w1, &mut config.w1),
        (args.w2, &mut config.w2),
        (args.w3, &mut config.w3),
        (args.s_syn, &mut config.s_syn),
        (args.s_sem, &mut config.s_sem),
        (args.s_lex, &mut config.s_lex),
        (args.t0, &mut config.t0),
        (args.tf, &mut config.tf),
        (args.flip_ratio, &mut config.flip_ratio),
    ];
    for (flag, field) in floats {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if let Some(k) = args.kmax {
        config.k_max = k;
    }
    config.seed = seed;
    config.validate().map_err(input_error)?;
    Ok(config)
}

fn write_output(out: &Option<PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime_error),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(runtime_error)
        }
    }
}

/// Independent, scheduling-free seed for sentence `index`.
fn sentence_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn cmd_match(args: &MatchArgs) -> CliResult<()> {
    let started = Instant::now();
    let tags = TagSet::universal();
    let inventory = load_inventory(&args.common, &tags)?;
    let corpus = load_corpus(&args.common, &tags)?;
    let matcher = Matcher::new(&inventory);
    let per_sentence: Vec<Vec<MatchRecord>> = corpus
        .par_iter()
        .map(|s| {
            matcher
                .find(s)
                .iter()
                .map(|m| MatchRecord::new(&s.sentence_id, m, &inventory))
                .collect::<crate::Result<Vec<_>>>()
        })
        .collect::<crate::Result<_>>()
        .map_err(from_core)?;
    let records: Vec<MatchRecord> = per_sentence.into_iter().flatten().collect();
    let mut buf = Vec::new();
    matcher::write_match_records(&mut buf, &records).map_err(runtime_error)?;
    write_output(&args.common.out, &buf)?;
    eprintln!(
        "match: {} sentences, {} matches, {:.1?}",
        corpus.len(),
        records.len(),
        started.elapsed()
    );
    Ok(())
}

/// One line of `cxg select` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub sentence_id: String,
    pub tokens: usize,
    pub solver: String,
    pub candidates: usize,
    pub selected: Vec<Span>,
    pub s_ob1: usize,
    pub s_ob2: usize,
    pub s_ob3: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub construction: String,
    pub start: usize,
    pub end: usize,
}

fn grouped_matches(
    path: &Path,
    corpus: &[AnnotatedSentence],
    inventory: &GrammarInventory,
) -> CliResult<Vec<Vec<Match>>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("reading matches {}", path.display()))
        .map_err(input_error)?;
    let source = path.display().to_string();
    let records = matcher::read_match_records(std::io::BufReader::new(file), &source).map_err(input_error)?;
    let index: HashMap<&str, usize> = corpus
        .iter()
        .enumerate()
        .map(|(i, s)| (s.sentence_id.as_str(), i))
        .collect();
    let mut grouped = vec![Vec::new(); corpus.len()];
    for (n, record) in records.iter().enumerate() {
        let context = || format!("{source}: record {}", n + 1);
        let &i = index
            .get(record.sentence_id.as_str())
            .ok_or_else(|| input_error(anyhow!("{}: unknown sentence {:?}", context(), record.sentence_id)))?;
        let m = record
            .to_match(inventory)
            .with_context(context)
            .map_err(input_error)?;
        if m.end > corpus[i].len() {
            return Err(input_error(anyhow!("{}: span past the end of the sentence", context())));
        }
        grouped[i].push(m);
    }
    for matches in &mut grouped {
        matches.sort();
        matches.dedup();
    }
    Ok(grouped)
}

fn select_sentence(
    sentence: &AnnotatedSentence,
    index: usize,
    matches: Vec<Match>,
    inventory: &GrammarInventory,
    config: &SelectorConfig,
    exact: bool,
) -> crate::Result<SelectionRecord> {
    let candidates = matches.len();
    let universe = Universe::new(matches, inventory)?;
    let config = SelectorConfig {
        seed: sentence_seed(config.seed, index),
        ..config.clone()
    };
    let (solver, selection) = if universe.is_empty() {
        ("none", Selection::empty(0))
    } else if exact && universe.len() <= selector::EXACT_LIMIT {
        ("exact", selector::solve_exact(&universe, &config)?)
    } else {
        ("sa", selector::solve_sa(&universe, &config)?)
    };
    let breakdown = selector::score(&selection, &universe, &config);
    let selected = selection
        .chosen(&universe)
        .into_iter()
        .map(|m| {
            Ok(Span {
                construction: inventory.construction(m.construction_id)?.label.clone(),
                start: m.start,
                end: m.end,
            })
        })
        .collect::<crate::Result<_>>()?;
    Ok(SelectionRecord {
        sentence_id: sentence.sentence_id.clone(),
        tokens: sentence.len(),
        solver: solver.to_string(),
        candidates,
        selected,
        s_ob1: breakdown.s_ob1,
        s_ob2: breakdown.s_ob2,
        s_ob3: breakdown.s_ob3,
        total: breakdown.total,
    })
}

fn cmd_select(args: &SelectArgs) -> CliResult<()> {
    let started = Instant::now();
    let tags = TagSet::universal();
    let inventory = load_inventory(&args.common, &tags)?;
    let corpus = load_corpus(&args.common, &tags)?;
    let config = selector_config(&args.selector, args.common.seed)?;
    let grouped = match &args.matches {
        Some(path) => grouped_matches(path, &corpus, &inventory)?,
        None => {
            let matcher = Matcher::new(&inventory);
            corpus.par_iter().map(|s| matcher.find(s)).collect()
        }
    };
    let records: Vec<SelectionRecord> = corpus
        .par_iter()
        .zip(grouped)
        .enumerate()
        .map(|(i, (s, matches))| select_sentence(s, i, matches, &inventory, &config, args.exact))
        .collect::<crate::Result<_>>()
        .map_err(from_core)?;
    let mut buf = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut buf, r).map_err(runtime_error)?;
        buf.push(b'\n');
    }
    write_output(&args.common.out, &buf)?;
    let chosen: usize = records.iter().map(|r| r.selected.len()).sum();
    let candidates: usize = records.iter().map(|r| r.candidates).sum();
    eprintln!(
        "select: {} sentences, {chosen} of {candidates} matches kept, {:.1?}",
        records.len(),
        started.elapsed()
    );
    Ok(())
}

pub fn read_selection_records(path: &Path) -> CliResult<Vec<SelectionRecord>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading selection {}", path.display()))
        .map_err(input_error)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| input_error(anyhow!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_hypergraph(args: &HypergraphArgs) -> CliResult<()> {
    let started = Instant::now();
    let tags = TagSet::universal();
    let inventory = load_inventory(&args.common, &tags)?;
    let records = read_selection_records(&args.selection)?;
    let mut out = String::new();
    let mut edges = 0;
    for (n, r) in records.iter().enumerate() {
        let context = || format!("{}: record {}", args.selection.display(), n + 1);
        let matches = r
            .selected
            .iter()
            .map(|s| {
                MatchRecord {
                    sentence_id: r.sentence_id.clone(),
                    construction: s.construction.clone(),
                    start: s.start,
                    end: s.end,
                }
                .to_match(&inventory)
            })
            .collect::<crate::Result<Vec<_>>>()
            .with_context(context)
            .map_err(input_error)?;
        let graph = Hypergraph::build(r.tokens, &matches)
            .with_context(context)
            .map_err(input_error)?;
        edges += graph.edge_count();
        writeln!(out, "# sent_id = {}", r.sentence_id).unwrap();
        out.push_str(&graph.to_text(&inventory).map_err(from_core)?);
        out.push('\n');
    }
    write_output(&args.common.out, out.as_bytes())?;
    eprintln!(
        "hypergraph: {} graphs, {edges} hyperedges, {:.1?}",
        records.len(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_toy_train(args: &ToyTrainArgs) -> CliResult<()> {
    let started = Instant::now();
    if args.dim == 0 {
        return Err(input_error(anyhow!("--dim must be at least 1")));
    }
    let dataset = rhgat::presence_dataset(args.size, args.dim, args.vocab, args.common.seed).map_err(input_error)?;
    let dims = ModelDims::new(args.dim, args.vocab, Task::Classify { classes: 2 });
    let config = TrainConfig {
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        epochs: args.epochs,
        seed: args.common.seed,
    };
    let report = rhgat::train_toy(&dataset, dims, &config).map_err(from_core)?;
    write_output(&args.common.out, &report.params.to_bytes())?;
    if let Some(path) = &args.trace {
        let mut trace = String::new();
        for (epoch, (loss, acc)) in report.losses.iter().zip(&report.accuracies).enumerate() {
            writeln!(trace, "{epoch}\t{loss:?}\t{acc:?}").unwrap();
        }
        std::fs::write(path, trace)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime_error)?;
    }
    eprintln!(
        "toy-train: {} samples, {} epochs, loss {:.4} -> {:.4}, accuracy {:.3}, {:.1?}",
        dataset.len(),
        args.epochs,
        report.losses[0],
        report.losses[report.losses.len() - 1],
        report.accuracies[report.accuracies.len() - 1],
        started.elapsed()
    );
    Ok(())
}

fn cmd_network(args: &NetworkArgs) -> CliResult<()> {
    let started = Instant::now();
    let tags = TagSet::universal();
    let inventory = load_inventory(&args.common, &tags)?;
    let embeddings = match (&args.embeddings, &args.params) {
        (Some(path), None) => Matrix::load_text(path)
            .with_context(|| format!("reading embeddings {}", path.display()))
            .map_err(input_error)?,
        (None, Some(path)) => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("reading parameters {}", path.display()))
                .map_err(input_error)?;
            RHgatParams::read_from(std::io::BufReader::new(file))
                .with_context(|| format!("reading parameters {}", path.display()))
                .map_err(input_error)?
                .ec
        }
        _ => return Err(input_error(anyhow!("exactly one of --embeddings or --params is required"))),
    };
    let config = NetworkConfig {
        k: args.k,
        gamma: args.gamma,
    };
    config.validate().map_err(input_error)?;
    let graph = build_network(&inventory, &embeddings, &config).map_err(input_error)?;
    let text = match args.format {
        Format::Dot => graph.to_dot(&inventory),
        Format::Records => graph.to_records(&inventory),
    }
    .map_err(from_core)?;
    write_output(&args.common.out, text.as_bytes())?;
    eprintln!(
        "network: {} constructions, {} edges, {:.1?}",
        graph.nodes.len(),
        graph.edges.len(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> CliResult<()> {
    let started = Instant::now();
    let tags = TagSet::universal();
    let inventory = load_inventory(&args.common, &tags)?;
    let corpus = load_corpus(&args.common, &tags)?;
    let config = selector_config(&args.selector, args.common.seed)?;
    let aoc = matcher::aoc(&corpus, &inventory).map_err(input_error)?;
    let acr = matcher::acr(&corpus, &inventory, &config).map_err(from_core)?;
    let mut out = String::new();
    for (name, value) in [("aoc", &aoc), ("acr", &acr)] {
        let float = value.to_f64().unwrap_or(f64::NAN);
        writeln!(out, "{name}\t{value}\t{float:?}").unwrap();
    }
    write_output(&args.common.out, out.as_bytes())?;
    eprintln!("metrics: {} sentences, {:.1?}", corpus.len(), started.elapsed());
    Ok(())
}
