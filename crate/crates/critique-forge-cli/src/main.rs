//! `critique-forge` command line: explanation runs, the evaluation
//! commands, and corpus validation.
//!
//! Conventions: machine-readable output goes to stdout as JSON Lines,
//! diagnostics and tables go to stderr. Exit codes: 0 success, 1 usage
//! error, 2 runtime failure.

use critique_forge_cli::commands;

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use critique_forge::config::ForgeConfig;
use critique_forge::corpus::Split;
use critique_forge::gateway::{ChatBackend, LiveBackend, RecordingBackend, ReplayBackend};
use critique_forge::runner::Method;
use critique_forge_cli::commands::{CassetteMode, CassetteRef};

#[derive(Parser)]
#[command(name = "critique-forge", version, about = "Faithful, personalized code explanations with twin refinement loops")]
struct Cli {
    /// TOML config file; flags override file values, file values override
    /// defaults.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// Record every completion into this cassette (implies the live
    /// backend).
    #[arg(long, group = "cassette")]
    record: Option<PathBuf>,

    /// Replay completions from this cassette; no network access.
    #[arg(long, group = "cassette")]
    replay: Option<PathBuf>,

    /// Model name override.
    #[arg(long)]
    model: Option<String>,

    /// Chat-completions base URL override.
    #[arg(long)]
    base_url: Option<String>,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Problem corpus (JSON Lines).
    #[arg(long)]
    problems: PathBuf,

    /// Problem to run, by id.
    #[arg(long)]
    problem_id: String,

    /// Corpus split label recorded with the run.
    #[arg(long, value_enum, default_value_t = SplitArg::Validation)]
    split: SplitArg,

    /// Directory for run records and final outputs.
    #[arg(long, default_value = "runs")]
    out: PathBuf,

    /// Maximum loop iterations override.
    #[arg(long)]
    max_iterations: Option<u32>,

    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(value: SplitArg) -> Self {
        match value {
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Baseline,
    #[value(name = "self-selection")]
    SelfSelection,
    #[value(name = "self-iteration")]
    SelfIteration,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Baseline => Method::Baseline,
            MethodArg::SelfSelection => Method::SelfSelection,
            MethodArg::SelfIteration => Method::SelfIteration,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the faithfulness loop on one problem.
    Explain(RunArgs),

    /// Run both loops: faithful explanation, then personalization for one
    /// user.
    Pipeline {
        #[command(flatten)]
        run: RunArgs,

        /// Inquiry histories (JSON Lines).
        #[arg(long)]
        histories: PathBuf,

        /// User to personalize for, by id.
        #[arg(long)]
        user: String,
    },

    /// Evaluation commands.
    #[command(subcommand)]
    Eval(EvalCommand),

    /// Corpus ingestion and validation.
    #[command(subcommand)]
    Ingest(IngestCommand),
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Generate explanations with a method and score them by sampling
    /// solutions against held-out tests.
    #[command(name = "pass-at-k")]
    PassAtK {
        #[arg(long)]
        problems: PathBuf,

        #[arg(long, value_enum)]
        method: MethodArg,

        /// Solution samples per problem (raised to the largest k if
        /// smaller).
        #[arg(long, default_value_t = 4)]
        samples: u32,

        /// k values, comma separated (each must end up <= samples).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<u32>,

        /// Evaluate only the first N problems of the corpus.
        #[arg(long)]
        limit: Option<usize>,

        /// Concurrent problem units.
        #[arg(long, default_value_t = 4)]
        parallel: usize,

        #[arg(long, value_enum, default_value_t = SplitArg::Validation)]
        split: SplitArg,

        #[arg(long, default_value = "runs")]
        out: PathBuf,

        #[command(flatten)]
        backend: BackendArgs,
    },

    /// Rouge-L and word-overlap of stored personalized explanations
    /// against each user's own inquiries. No model calls.
    #[command(name = "text-metrics")]
    TextMetrics {
        /// Directory of stored runs (final outputs).
        #[arg(long)]
        runs: PathBuf,

        #[arg(long)]
        histories: PathBuf,
    },

    /// Pairwise judge comparison of two runs directories with position-swap
    /// debiasing.
    #[command(name = "win-rate")]
    WinRate {
        #[arg(long)]
        runs_a: PathBuf,

        #[arg(long)]
        runs_b: PathBuf,

        #[arg(long)]
        histories: PathBuf,

        /// Problem corpus, for the problem and solution text the judge
        /// sees.
        #[arg(long)]
        problems: PathBuf,

        #[arg(long, value_enum, default_value_t = SplitArg::Validation)]
        split: SplitArg,

        #[arg(long, default_value = "runs")]
        out: PathBuf,

        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Apply the ingestion filters and report kept/dropped counts. No
    /// model calls.
    Validate {
        #[arg(long)]
        problems: PathBuf,

        #[arg(long)]
        histories: Option<PathBuf>,

        #[arg(long, value_enum, default_value_t = SplitArg::Validation)]
        split: SplitArg,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<ForgeConfig> {
    match &cli.config {
        Some(path) => Ok(ForgeConfig::load(path)?),
        None => Ok(ForgeConfig::default()),
    }
}

fn apply_overrides(config: &mut ForgeConfig, backend: &BackendArgs, max_iterations: Option<u32>) {
    if let Some(model) = &backend.model {
        config.model.name = model.clone();
    }
    if let Some(base_url) = &backend.base_url {
        config.model.base_url = base_url.clone();
    }
    if let Some(n) = max_iterations {
        config.loops.max_iterations = n;
    }
}

fn cassette_ref(backend: &BackendArgs) -> Option<CassetteRef> {
    if let Some(path) = &backend.record {
        Some(CassetteRef {
            path: path.clone(),
            mode: CassetteMode::Record,
        })
    } else {
        backend.replay.as_ref().map(|path| CassetteRef {
            path: path.clone(),
            mode: CassetteMode::Replay,
        })
    }
}

/// Generator and judge backends for a run. With record/replay cassettes all
/// stages share one backend; a separate judge model is honored only in pure
/// live mode.
fn build_backends(
    config: &ForgeConfig,
    backend: &BackendArgs,
) -> anyhow::Result<(Arc<dyn ChatBackend>, Arc<dyn ChatBackend>)> {
    if let Some(path) = &backend.replay {
        let replay: Arc<dyn ChatBackend> = Arc::new(ReplayBackend::load(path)?);
        return Ok((replay.clone(), replay));
    }
    if let Some(path) = &backend.record {
        let live = LiveBackend::from_env(config.live_config())?;
        let recorder: Arc<dyn ChatBackend> = Arc::new(RecordingBackend::create(live, path)?);
        return Ok((recorder.clone(), recorder));
    }
    let generator: Arc<dyn ChatBackend> = Arc::new(LiveBackend::from_env(config.live_config())?);
    let judge: Arc<dyn ChatBackend> = if config.model.judge_name.is_some() {
        Arc::new(LiveBackend::from_env(config.judge_live_config())?)
    } else {
        generator.clone()
    };
    Ok((generator, judge))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are successful exits; anything else is a
            // usage error.
            if err.use_stderr() {
                let _ = err.print();
                std::process::exit(1);
            }
            let _ = err.print();
            std::process::exit(0);
        }
    };

    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(2);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Explain(args) => {
            apply_overrides(&mut config, &args.backend, args.max_iterations);
            let (generator, judge) = build_backends(&config, &args.backend)?;
            commands::explain(
                &config,
                &*generator,
                &*judge,
                &args.problems,
                &args.problem_id,
                args.split.into(),
                &args.out,
                cassette_ref(&args.backend).as_ref(),
            )
        }
        Command::Pipeline { run: args, histories, user } => {
            apply_overrides(&mut config, &args.backend, args.max_iterations);
            let (generator, judge) = build_backends(&config, &args.backend)?;
            commands::pipeline(
                &config,
                &*generator,
                &*judge,
                &args.problems,
                &histories,
                &user,
                &args.problem_id,
                args.split.into(),
                &args.out,
                cassette_ref(&args.backend).as_ref(),
            )
        }
        Command::Eval(EvalCommand::PassAtK {
            problems,
            method,
            samples,
            k,
            limit,
            parallel,
            split,
            out,
            backend,
        }) => {
            apply_overrides(&mut config, &backend, None);
            let (generator, judge) = build_backends(&config, &backend)?;
            commands::eval_pass_at_k(
                &config,
                &*generator,
                &*judge,
                &problems,
                method.into(),
                samples,
                &k,
                limit,
                parallel,
                split.into(),
                &out,
                cassette_ref(&backend).as_ref(),
            )
        }
        Command::Eval(EvalCommand::TextMetrics { runs, histories }) => {
            commands::eval_text_metrics(&runs, &histories)
        }
        Command::Eval(EvalCommand::WinRate {
            runs_a,
            runs_b,
            histories,
            problems,
            split,
            out,
            backend,
        }) => {
            apply_overrides(&mut config, &backend, None);
            let (_generator, judge) = build_backends(&config, &backend)?;
            commands::eval_win_rate(
                &config,
                &*judge,
                &runs_a,
                &runs_b,
                &histories,
                &problems,
                split.into(),
                &out,
                cassette_ref(&backend).as_ref(),
            )
        }
        Command::Ingest(IngestCommand::Validate {
            problems,
            histories,
            split,
        }) => commands::ingest_validate(&config, &problems, histories.as_deref(), split.into()),
    }
}
