//! `semspace` command line. [`run`] is the whole program; `main` only
//! forwards process arguments and streams.
//!
//! Exit codes: 0 success, 1 usage, 2 data error (unknown term, bad
//! input), 3 corrupt or incompatible store.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use semspace::lexicon::Separation;
use semspace::noise::tail_noise;
use semspace::query::{self, ClusterOptions};
use semspace::seedgen::n_seed;
use semspace::{
    Lexicon, NoiseReport, OverlapLaw, SampleMode, SemanticSpace, SpaceConfig, Weighting,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CORRUPT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "semspace", version, about = "Build and query semantic spaces from synonym cliques")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a store from a clique file (one `;`-separated clique per line).
    Build(BuildArgs),
    /// Recompute every vector of an existing store.
    Rebuild(RebuildArgs),
    /// Add one clique and update the affected vectors in place.
    AddClique(AddCliqueArgs),
    /// Nearest neighbors of a term, optionally with terms subtracted.
    Neighbors(NeighborsArgs),
    /// Sense clusters of a term, one per clique it belongs to.
    Clusters(ClustersArgs),
    /// Cosine similarity and distance between two terms.
    Similarity(PairArgs),
    /// Hops between two terms in the clique graph.
    Separation(PairArgs),
    /// Seed-vector noise: theoretical pmf against a Monte Carlo histogram.
    Noise(NoiseCmd),
    /// Summary statistics of a clique file.
    LexiconStats(LexiconStatsArgs),
    /// Serve the HTTP query API.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    pub cliques: PathBuf,
    #[arg(long, default_value_t = 2500)]
    pub dim: usize,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "tf-idf", value_parser = parse_weighting)]
    pub weighting: Weighting,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RebuildArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Recompute idf from the current lexicon instead of keeping it frozen.
    #[arg(long)]
    pub reweight: bool,
    /// Write here instead of overwriting the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AddCliqueArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Clique members, `;`-separated.
    #[arg(long)]
    pub terms: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub term: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Terms to subtract, comma-separated, in order.
    #[arg(long)]
    pub minus: Option<String>,
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ClustersArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub term: String,
    /// Terms to subtract, comma-separated, in order.
    #[arg(long)]
    pub minus: Option<String>,
    #[arg(long, default_value_t = 0.9)]
    pub merge_threshold: f64,
    /// Members listed per cluster.
    #[arg(long, default_value_t = 10)]
    pub members: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct PairArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
pub struct NoiseCmd {
    #[command(subcommand)]
    pub sub: Option<NoiseSub>,
    #[command(flatten)]
    pub sample: NoiseArgs,
}

#[derive(Subcommand, Debug)]
pub enum NoiseSub {
    /// Similarities deep in a term's neighbor list.
    Tail(TailArgs),
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 2500)]
    pub dim: usize,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, default_value = "seed", value_parser = parse_mode)]
    pub mode: SampleMode,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Overlap law of the theoretical pmf: `hypergeometric` (exact for
    /// seeds drawn without replacement) or `binomial`.
    #[arg(long, default_value = "hypergeometric", value_parser = parse_law)]
    pub law: OverlapLaw,
    /// CSV report path; the summary still goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TailArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub term: String,
    #[arg(long, default_value_t = 100)]
    pub start: usize,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
}

#[derive(Args, Debug)]
pub struct LexiconStatsArgs {
    #[arg(long)]
    pub cliques: PathBuf,
    /// Also list this term's neighborhood (every term sharing a clique with it).
    #[arg(long)]
    pub term: Option<String>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Write the store back to `--space` after every clique update.
    #[arg(long)]
    pub persist: bool,
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    s.parse().map_err(|e: semspace::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<SampleMode, String> {
    s.parse().map_err(|e: semspace::Error| e.to_string())
}

fn parse_law(s: &str) -> Result<OverlapLaw, String> {
    s.parse().map_err(|e: semspace::Error| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Core(semspace::Error),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_corruption() => EXIT_CORRUPT,
            _ => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<semspace::Error> for CliError {
    fn from(e: semspace::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = Result<(), CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

/// Library operations each subcommand reaches.
pub const DISPATCH: &[(&str, &[&str])] = &[
    ("build", &["parse_cliques", "make_seed", "weight", "build_clique_vector", "build_term_vector", "build_space", "save"]),
    ("rebuild", &["load", "build_clique_vector", "build_term_vector", "save"]),
    ("add-clique", &["load", "add_clique", "make_seed", "save"]),
    ("neighbors", &["load", "orthogonalize", "neighbors"]),
    ("clusters", &["load", "orthogonalize", "clusters"]),
    ("similarity", &["load", "similarity", "distance", "overlap_similarity"]),
    ("separation", &["load", "degree_of_separation"]),
    ("noise", &["n_seed", "p_overlap", "p_scalar", "theoretical_pmf", "seed_dot", "sample_seed_noise", "compare"]),
    ("noise tail", &["load", "tail_noise"]),
    ("lexicon-stats", &["parse_cliques", "neighborhood"]),
    ("serve", &["load", "neighbors", "clusters", "similarity", "distance", "theoretical_pmf", "add_clique"]),
];

/// Names of all subcommands as clap knows them.
pub fn subcommand_names() -> Vec<String> {
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect()
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match command {
        Command::Build(a) => build(a, out, err),
        Command::Rebuild(a) => rebuild(a, out),
        Command::AddClique(a) => add_clique(a, out),
        Command::Neighbors(a) => neighbors(a, out),
        Command::Clusters(a) => clusters(a, out),
        Command::Similarity(a) => similarity(a, out),
        Command::Separation(a) => separation(a, out),
        Command::Noise(a) => match a.sub {
            Some(NoiseSub::Tail(t)) => tail(t, out),
            None => noise(a.sample, out),
        },
        Command::LexiconStats(a) => lexicon_stats(a, out, err),
        Command::Serve(a) => serve(a, out),
    }
}

fn split_list(list: &str, sep: char) -> Vec<&str> {
    list.split(sep).map(str::trim).filter(|t| !t.is_empty()).collect()
}

fn split_minus(minus: &Option<String>) -> Vec<&str> {
    minus.as_deref().map(|m| split_list(m, ',')).unwrap_or_default()
}

fn read_lexicon(path: &Path, err: &mut dyn Write) -> Result<Lexicon, CliError> {
    let (lexicon, warnings) = Lexicon::parse(BufReader::new(File::open(path)?))?;
    for w in warnings {
        writeln!(err, "warning: line {}: {}", w.line, w.message)?;
    }
    Ok(lexicon)
}

fn load(path: &Path) -> Result<SemanticSpace, CliError> {
    Ok(SemanticSpace::load_from_path(path)?)
}

fn save(space: &SemanticSpace, path: &Path, out: &mut dyn Write) -> CliResult {
    space.save_to_path(path)?;
    writeln!(
        out,
        "wrote {} ({} bytes, checksum {})",
        path.display(),
        space.encoded_len(),
        space.checksum()
    )?;
    Ok(())
}

fn build(a: BuildArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let lexicon = read_lexicon(&a.cliques, err)?;
    let config = SpaceConfig::new(a.dim, a.m, a.seed, a.weighting)?;
    let (space, report) = SemanticSpace::build(lexicon, config)?;
    for t in &report.degenerate {
        writeln!(err, "warning: degenerate term {t}")?;
    }
    writeln!(
        out,
        "built {} terms from {} cliques (dim {}, m {})",
        report.n_terms, report.n_cliques, a.dim, a.m
    )?;
    save(&space, &a.out, out)
}

fn rebuild(a: RebuildArgs, out: &mut dyn Write) -> CliResult {
    let mut space = load(&a.space)?;
    if a.reweight {
        space.reweight();
    } else {
        space.rebuild_frozen();
    }
    save(&space, a.out.as_deref().unwrap_or(&a.space), out)
}

fn add_clique(a: AddCliqueArgs, out: &mut dyn Write) -> CliResult {
    let mut space = load(&a.space)?;
    let report = space.add_clique(&split_list(&a.terms, ';'))?;
    let names = |ids: &[u32]| -> String {
        ids.iter()
            .map(|&t| space.lexicon().terms()[t as usize].as_str())
            .collect::<Vec<_>>()
            .join(";")
    };
    writeln!(out, "clique {}", report.clique)?;
    writeln!(out, "new terms {}: {}", report.new_terms.len(), names(&report.new_terms))?;
    writeln!(out, "touched {}", report.touched.len())?;
    if !report.degenerate.is_empty() {
        writeln!(out, "degenerate: {}", names(&report.degenerate))?;
    }
    save(&space, a.out.as_deref().unwrap_or(&a.space), out)
}

fn json_line<T: serde::Serialize>(value: &T, out: &mut dyn Write) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::from)?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn neighbors(a: NeighborsArgs, out: &mut dyn Write) -> CliResult {
    let space = load(&a.space)?;
    let minus = split_minus(&a.minus);
    let list = query::neighbors(&space, &a.term, a.k, &minus, a.renormalize)?;
    match a.format {
        Format::Table => {
            for n in &list.entries {
                writeln!(out, "{:.3} {}", n.similarity, n.term)?;
            }
        }
        Format::Csv => {
            writeln!(out, "rank,term,similarity")?;
            for (i, n) in list.entries.iter().enumerate() {
                writeln!(out, "{},{},{}", i + 1, csv_field(&n.term), n.similarity)?;
            }
        }
        Format::Json => json_line(&list, out)?,
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn clusters(a: ClustersArgs, out: &mut dyn Write) -> CliResult {
    let space = load(&a.space)?;
    let minus = split_minus(&a.minus);
    let options = ClusterOptions { merge_threshold: a.merge_threshold, members: a.members };
    let set = query::clusters(&space, &a.term, &minus, options)?;
    match a.format {
        Format::Table => {
            for c in &set.clusters {
                writeln!(out, "{:.3} [{}]", c.score, c.label.join(";"))?;
                for n in &c.members {
                    writeln!(out, "  {:.3} {}", n.similarity, n.term)?;
                }
            }
        }
        Format::Csv => {
            writeln!(out, "cluster,score,term,similarity")?;
            for (i, c) in set.clusters.iter().enumerate() {
                for n in &c.members {
                    writeln!(out, "{},{},{},{}", i + 1, c.score, csv_field(&n.term), n.similarity)?;
                }
            }
        }
        Format::Json => json_line(&set, out)?,
    }
    Ok(())
}

fn similarity(a: PairArgs, out: &mut dyn Write) -> CliResult {
    let space = load(&a.space)?;
    let sigma = query::similarity(&space, &a.a, &a.b)?;
    writeln!(out, "similarity {sigma:.3}")?;
    writeln!(out, "distance {:.3}", query::distance(sigma)?)?;
    let lex = space.lexicon();
    writeln!(out, "overlap {}", lex.overlap_similarity(lex.id(&a.a)?, lex.id(&a.b)?)?)?;
    Ok(())
}

fn separation(a: PairArgs, out: &mut dyn Write) -> CliResult {
    let space = load(&a.space)?;
    let lex = space.lexicon();
    match lex.degree_of_separation(lex.id(&a.a)?, lex.id(&a.b)?)? {
        Separation::Hops(h) => writeln!(out, "{h}")?,
        Separation::Unreachable => writeln!(out, "unreachable")?,
    }
    Ok(())
}

fn noise(a: NoiseArgs, out: &mut dyn Write) -> CliResult {
    let report = NoiseReport::generate(a.dim, a.m, a.mode, a.samples, a.rng_seed, a.law)?;
    if let Some(path) = &a.out {
        std::fs::write(path, report.to_csv())?;
    }
    writeln!(out, "distinct seeds {}", scientific(&n_seed(a.dim, a.m)?.to_string()))?;
    writeln!(out, "samples {}", report.sample_count)?;
    writeln!(out, "theoretical std {:.6}", report.theoretical_std)?;
    writeln!(out, "empirical mean {:.6}", report.empirical_mean)?;
    writeln!(out, "empirical std {:.6}", report.empirical_std)?;
    writeln!(out, "max |deviation| {:.3e}", report.max_abs_deviation)?;
    match report.band_pass {
        Some(true) => writeln!(out, "band PASS")?,
        Some(false) => writeln!(out, "band FAIL")?,
        None => {}
    }
    if let Some(path) = &a.out {
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

/// `digits` (a non-negative integer) as `d.ddde±x`.
fn scientific(digits: &str) -> String {
    if digits.len() <= 6 {
        return digits.to_string();
    }
    let mantissa: f64 = format!("{}.{}", &digits[..1], &digits[1..8.min(digits.len())]).parse().unwrap_or(0.0);
    let mut exp = digits.len() - 1;
    let mut m = (mantissa * 1000.0).round() / 1000.0;
    if m >= 10.0 {
        m /= 10.0;
        exp += 1;
    }
    format!("{m:.3}e{exp}")
}

fn tail(a: TailArgs, out: &mut dyn Write) -> CliResult {
    let space = load(&a.space)?;
    let t = tail_noise(&space, &a.term, a.start, a.count)?;
    writeln!(out, "ranks {}..{}", t.start_rank, t.start_rank + t.sample_count as usize)?;
    writeln!(out, "mean {:.6}", t.mean)?;
    writeln!(out, "std {:.6}", t.std)?;
    Ok(())
}

fn lexicon_stats(a: LexiconStatsArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let lex = read_lexicon(&a.cliques, err)?;
    let s = lex.stats();
    writeln!(out, "terms {}", s.n_terms)?;
    writeln!(out, "cliques {}", s.n_cliques)?;
    writeln!(out, "diameter min {} mean {:.3} max {}", s.diameter_min, s.diameter_mean, s.diameter_max)?;
    if let Some(term) = &a.term {
        let id = lex.id(term)?;
        let names: Vec<&str> = lex
            .neighborhood(id)?
            .into_iter()
            .map(|t| lex.terms()[t as usize].as_str())
            .collect();
        writeln!(out, "neighborhood {} {}: {}", term, names.len(), names.join(";"))?;
    }
    Ok(())
}

fn serve(a: ServeArgs, out: &mut dyn Write) -> CliResult {
    let space = load(&a.space)?;
    let addr = SocketAddr::new(a.host, a.port);
    let state = Arc::new(semspace_server::AppState::new(space, a.persist.then(|| a.space.clone())));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        writeln!(out, "listening on http://{}", listener.local_addr()?)?;
        out.flush()?;
        semspace_server::serve_on(listener, state).await
    })?;
    Ok(())
}
