mod artifact;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::need;
use config::PipelineConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cgforge", version, about = "Split, compose and augment text-to-SQL data")]
struct Cli {
    /// TOML document with paths, splitter settings and generator bounds.
    #[arg(long, global = true, env = "CGFORGE_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Log filter for stderr, e.g. `info` or `cgforge_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split parsed questions into units with NONE clause placeholders.
    Split(SplitCmd),
    /// Extract compositional elements from annotated examples.
    Extract(ExtractCmd),
    /// Generate substitution and appending examples per domain.
    Generate(GenerateCmd),
    /// Combine unit clauses into NatSQL and compile it to SQL.
    Compose(ComposeCmd),
    /// Print exact-match accuracy of predictions against gold SQL.
    Match(MatchCmd),
    /// Exact-match report broken down by difficulty.
    Evaluate(EvaluateCmd),
    /// Difficulty distribution, and split stability when parses are given.
    Stats(StatsCmd),
}

#[derive(Debug, Args)]
struct SplitCmd {
    #[arg(long)]
    parses: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractCmd {
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateCmd {
    #[arg(long)]
    elements: Option<PathBuf>,
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out_sub: Option<PathBuf>,
    #[arg(long)]
    out_app: Option<PathBuf>,
    /// Overrides `generator.max_where`.
    #[arg(long)]
    max_where: Option<usize>,
    /// Overrides `generator.max_subsentences`.
    #[arg(long)]
    max_subsentences: Option<usize>,
}

#[derive(Debug, Args)]
struct ComposeCmd {
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MatchCmd {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Resolves columns against foreign keys when comparing.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateCmd {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsCmd {
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Re-parses of generated sentences, keyed by example id.
    #[arg(long)]
    parses: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    let p = cfg.paths.clone();
    match cli.command {
        Command::Split(c) => commands::split(
            &cfg,
            &commands::SplitArgs {
                parses: need(c.parses, &p.parses, "parses")?,
                schema: need(c.schema, &p.schema, "schema")?,
                out: need(c.out, &p.out, "out")?,
            },
        ),
        Command::Extract(c) => commands::extract(
            &cfg,
            &commands::ExtractArgs {
                examples: need(c.examples, &p.examples, "examples")?,
                schema: need(c.schema, &p.schema, "schema")?,
                out: need(c.out, &p.out, "out")?,
            },
        ),
        Command::Generate(c) => {
            if let Some(n) = c.max_where {
                cfg.generator.max_where = n;
            }
            if let Some(n) = c.max_subsentences {
                cfg.generator.max_subsentences = n;
            }
            if c.max_where.is_some() || c.max_subsentences.is_some() {
                cfg.validate()?;
            }
            commands::generate(
                &cfg,
                &commands::GenerateArgs {
                    elements: need(c.elements, &p.elements, "elements")?,
                    examples: need(c.examples, &p.examples, "examples")?,
                    schema: need(c.schema, &p.schema, "schema")?,
                    out_sub: need(c.out_sub, &p.out_sub, "out_sub")?,
                    out_app: need(c.out_app, &p.out_app, "out_app")?,
                },
            )
        }
        Command::Compose(c) => commands::compose(
            &cfg,
            &commands::ComposeArgs {
                examples: need(c.examples, &p.examples, "examples")?,
                schema: need(c.schema, &p.schema, "schema")?,
                out: need(c.out, &p.out, "out")?,
            },
        ),
        Command::Match(c) => commands::exact(&commands::MatchArgs {
            pred: need(c.pred, &p.pred, "pred")?,
            gold: need(c.gold, &p.gold, "gold")?,
            schema: c.schema,
        }),
        Command::Evaluate(c) => commands::evaluate(
            &cfg,
            &commands::EvaluateArgs {
                pred: need(c.pred, &p.pred, "pred")?,
                gold: need(c.gold, &p.gold, "gold")?,
                schema: need(c.schema, &p.schema, "schema")?,
                report: need(c.report, &p.report, "report")?,
            },
        ),
        Command::Stats(c) => commands::stats(
            &cfg,
            &commands::StatsArgs {
                examples: need(c.examples, &p.examples, "examples")?,
                schema: need(c.schema, &p.schema, "schema")?,
                parses: c.parses.or(p.parses),
                report: c.report.or(p.report),
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.log_level).unwrap_or_else(|e| {
        eprintln!("warning: bad --log-level `{}` ({e}); using `warn`", cli.log_level);
        tracing_subscriber::EnvFilter::new("warn")
    });
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("warning: thread pool: {e}");
    }
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
