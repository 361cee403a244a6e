//! Command-line front end for the `muse` signed-network embedding engine.

pub mod commands;
pub mod config;
mod error;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{NeighborCap, RunConfig};
pub use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "muse",
    version,
    about = "Multi-faceted attention embeddings for signed networks",
    args_override_self = true
)]
pub struct Cli {
    /// `key = value` config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an edge list and write the canonical graph, id map and summary.
    Ingest(RunArgs),
    /// Split, train and evaluate; sweeps when a grid is given.
    Train(RunArgs),
    /// Recompute the test report from a finished run.
    Evaluate(EvalArgs),
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Edge list to read.
    #[arg(long)]
    pub input: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Source, target and weight column indices, e.g. `0,1,2`.
    #[arg(long)]
    pub format_cols: Option<String>,
    /// `comma` or `whitespace`.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Duplicate pairs with both signs: `negative-wins` or `first-wins`.
    #[arg(long)]
    pub conflict: Option<String>,
    #[arg(long)]
    pub facets: Option<String>,
    /// Per-facet dimension.
    #[arg(long)]
    pub dim: Option<String>,
    /// Highest neighbor order.
    #[arg(long)]
    pub orders: Option<String>,
    #[arg(long)]
    pub leaky_slope: Option<String>,
    /// `auto`, `none` or a set size.
    #[arg(long)]
    pub neighbor_cap: Option<String>,
    #[arg(long)]
    pub share_attention: Option<String>,
    /// `fused` or `composed`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Weight of the sign loss.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub beta1: Option<String>,
    #[arg(long)]
    pub beta2: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    /// Edges per batch, or `auto`.
    #[arg(long)]
    pub batch_edges: Option<String>,
    /// `epoch` or `node`.
    #[arg(long)]
    pub granularity: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Train fraction.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub split_seed: Option<String>,
    /// `a..b` or a comma list of λ values.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// `a..b` or a comma list of facet counts.
    #[arg(long)]
    pub facet_grid: Option<String>,
}

impl RunArgs {
    fn pairs(&self) -> [(&'static str, Option<&String>); 25] {
        [
            ("input", self.input.as_ref()),
            ("out", self.out.as_ref()),
            ("format_cols", self.format_cols.as_ref()),
            ("delimiter", self.delimiter.as_ref()),
            ("conflict", self.conflict.as_ref()),
            ("facets", self.facets.as_ref()),
            ("dim", self.dim.as_ref()),
            ("orders", self.orders.as_ref()),
            ("leaky_slope", self.leaky_slope.as_ref()),
            ("neighbor_cap", self.neighbor_cap.as_ref()),
            ("share_attention", self.share_attention.as_ref()),
            ("kernel", self.kernel.as_ref()),
            ("lambda", self.lambda.as_ref()),
            ("lr", self.lr.as_ref()),
            ("beta1", self.beta1.as_ref()),
            ("beta2", self.beta2.as_ref()),
            ("eps", self.eps.as_ref()),
            ("epochs", self.epochs.as_ref()),
            ("batch_edges", self.batch_edges.as_ref()),
            ("granularity", self.granularity.as_ref()),
            ("seed", self.seed.as_ref()),
            ("split", self.split.as_ref()),
            ("split_seed", self.split_seed.as_ref()),
            ("lambda_grid", self.lambda_grid.as_ref()),
            ("facet_grid", self.facet_grid.as_ref()),
        ]
    }
}

#[derive(Debug, Default, Args)]
pub struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long, conflicts_with_all = ["checkpoint", "graph", "split_file"])]
    pub run: Option<PathBuf>,
    #[arg(long, requires_all = ["graph", "split_file"])]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long = "split")]
    pub split_file: Option<PathBuf>,
    /// Run manifest whose file hashes are checked as well.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Defaults, then the config file, then flags.
pub fn resolve(config: Option<&Path>, args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        cfg.apply_file_text(&text, path)?;
    }
    for (key, value) in args.pairs() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command, returning what it printed on stdout.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Ingest(args) => {
            let cfg = resolve(cli.config.as_deref(), args)?;
            let s = commands::ingest(&cfg)?;
            Ok(format!(
                "nodes {}\nedges {}\npositive {}\nnegative {}\n",
                s.nodes, s.edges, s.positive, s.negative
            ))
        }
        Command::Train(args) => {
            let cfg = resolve(cli.config.as_deref(), args)?;
            let results = commands::train(&cfg)?;
            let mut out = String::new();
            for r in &results {
                out.push_str(&format!(
                    "{}\tf1 {:.6}\tauc {:.6}\n",
                    r.dir.display(),
                    r.report.f1,
                    r.report.auc
                ));
            }
            Ok(out)
        }
        Command::Evaluate(args) => {
            let paths = match (&args.run, &args.checkpoint, &args.graph, &args.split_file) {
                (Some(dir), ..) => {
                    let mut p = commands::EvalPaths::in_run(dir);
                    if args.manifest.is_some() {
                        p.manifest = args.manifest.clone();
                    }
                    p
                }
                (None, Some(c), Some(g), Some(s)) => commands::EvalPaths {
                    checkpoint: c.clone(),
                    graph: g.clone(),
                    split: s.clone(),
                    manifest: args.manifest.clone(),
                },
                _ => {
                    return Err(CliError::Config(
                        "evaluate needs --run DIR or --checkpoint, --graph and --split".into(),
                    ))
                }
            };
            let report = commands::evaluate(&paths)?;
            if let Some(out) = &args.out {
                commands::write_report(out, &report)?;
            }
            Ok(commands::report_json(&report))
        }
    }
}

/// Parses `argv` and runs it. Returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match execute(&cli) {
        Ok(stdout) => {
            print!("{stdout}");
            exit::OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
