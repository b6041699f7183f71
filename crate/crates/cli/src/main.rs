//! `ternroll` command-line front end.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ternroll::model::{CseMethod, ScaleRule};

use config::Explain;

#[derive(Parser)]
#[command(name = "ternroll", version, about = "Ternary CNN unrolling compiler and streaming simulator")]
struct Cli {
    /// Seed for randomly generated weights, matrices and images.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print every resolved setting and its source to standard error.
    #[arg(long, global = true)]
    explain_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    None,
    Td,
    Bu,
}

impl From<MethodArg> for CseMethod {
    fn from(m: MethodArg) -> CseMethod {
        match m {
            MethodArg::None => CseMethod::None,
            MethodArg::Td => CseMethod::Td,
            MethodArg::Bu => CseMethod::Bu,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleRuleArg {
    MeanSurviving,
    MeanAll,
}

impl From<ScaleRuleArg> for ScaleRule {
    fn from(r: ScaleRuleArg) -> ScaleRule {
        match r {
            ScaleRuleArg::MeanSurviving => ScaleRule::MeanSurviving,
            ScaleRuleArg::MeanAll => ScaleRule::MeanAll,
        }
    }
}

#[derive(Args)]
struct Compile {
    /// CSE method for every convolution.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Adder arity for every convolution (2 or 3).
    #[arg(long)]
    arity: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Ternarize real weights (.fmx to .tmx), or a whole network's weights.
    Ternarize {
        /// `in.fmx out.tmx`; with --network, `in_dir out_dir` or just `out_dir` with --random.
        #[arg(required = true, num_args = 1..=2)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum)]
        scale_rule: Option<ScaleRuleArg>,
        /// Network description whose weighted layers are ternarized.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Draw Gaussian weights instead of reading them.
        #[arg(long, requires = "network")]
        random: bool,
    },
    /// Share subexpressions of a ternary matrix (.tmx to .cse).
    Cse {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Build the pipelined adder graph of a .tmx or .cse file as a netlist.
    Tree {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        arity: Option<usize>,
        /// Cycles between input pixels; selects the digit-serial schedule.
        #[arg(long)]
        interval: Option<u64>,
        /// Netlist name; defaults to the input file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Adder and register counts of .tmx or .cse files.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Methods to compare for .tmx inputs.
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Vec<MethodArg>,
        #[arg(long)]
        arity: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the structural netlist of a whole network.
    Emit {
        network: PathBuf,
        weights: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        compile: Compile,
    },
    /// Run images through the bit-exact streaming simulator.
    Simulate {
        network: PathBuf,
        weights: PathBuf,
        images: Vec<PathBuf>,
        /// Simulate this many random images as well.
        #[arg(long)]
        random: Option<usize>,
        #[command(flatten)]
        compile: Compile,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Per-layer operation counts for one image.
    ReportOps {
        network: PathBuf,
        weights: Option<PathBuf>,
        #[command(flatten)]
        compile: Compile,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Data-rate cascade, frame rate, latency and buffer depths.
    ReportThroughput {
        network: PathBuf,
        weights: Option<PathBuf>,
        /// Clock frequency in Hz.
        #[arg(long)]
        clock: Option<f64>,
        #[command(flatten)]
        compile: Compile,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sparsity as a function of epsilon.
    SweepEps {
        /// Real weights; omit to use a random Gaussian matrix.
        input: Option<PathBuf>,
        /// Shape of the random matrix, `ROWSxCOLS`.
        #[arg(long, conflicts_with = "input")]
        random: Option<String>,
        /// Ascending epsilon values.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// A failed run and its exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    /// Bad input with the offending file named.
    Input(String),
    Run(ternroll::Error),
}

impl From<ternroll::Error> for Failure {
    fn from(e: ternroll::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Run(ternroll::Error::Invariant(_)) => 3,
            Failure::Run(_) => 2,
        }
    }

    fn at(path: &Path, e: impl std::fmt::Display) -> Failure {
        Failure::Input(format!("{}: {e}", path.display()))
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Input(m) => m.clone(),
            Failure::Run(e) => e.to_string(),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Writes through a temporary file in the target directory, so a failed run
/// never leaves a partial file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| std::io::Error::new(e.error.kind(), format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Report text goes to the named file, or to standard output.
fn deliver(output: Option<&Path>, text: &str) -> Outcome {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::at(path, e))
}

fn setup_threads(explain: &mut Explain) -> Outcome {
    match std::env::var("TERNROLL_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Failure::Usage(format!("TERNROLL_THREADS must be a positive integer, got {v:?}")))?;
            explain.record("threads", n, "environment");
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Run(ternroll::Error::Invariant(format!("thread pool: {e}"))))
        }
        Err(_) => {
            explain.record("threads", rayon::current_num_threads(), "default");
            Ok(())
        }
    }
}

fn run(cli: Cli, explain: &mut Explain) -> Outcome {
    setup_threads(explain)?;
    let seed = config::plain(explain, "seed", cli.seed, 0);
    commands::dispatch(cli.command, seed, explain)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage");
            eprintln!("ternroll: {} (see --help)", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    let explain_config = cli.explain_config;
    let mut explain = Explain::default();
    let result = run(cli, &mut explain);
    if explain_config {
        explain.print();
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ternroll: {}", f.message().replace('\n', " "));
            ExitCode::from(f.code())
        }
    }
}
