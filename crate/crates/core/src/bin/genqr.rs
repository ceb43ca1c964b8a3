use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use genqr::eval::MetricSpec;
use genqr::experiment::{
    cmd_eval, cmd_index, cmd_paraphrase, cmd_querywise, cmd_run, cmd_sweep, ExperimentConfig,
    Method,
};

#[derive(Parser)]
#[command(
    name = "genqr",
    version,
    about = "Ensemble-prompted query reformulation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the BM25 index named in the config (no-op if already current).
    Index {
        #[arg(short, long)]
        config: PathBuf,
        /// Rebuild even if a compatible index exists.
        #[arg(long)]
        force: bool,
    },
    /// Run a method over all topics, writing a TREC run and reformulations.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        tag: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Record failed queries and continue.
        #[arg(long)]
        lenient: bool,
    },
    /// Evaluate run files; the first is the comparison baseline.
    Eval {
        #[arg(short, long)]
        qrels: PathBuf,
        #[arg(short, long = "metric", default_values = ["ndcg@10", "map", "mrr", "p@10"])]
        metrics: Vec<MetricSpec>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Directory for per-run reports and the comparison table.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Per-query metric values of two runs as CSV, sorted by delta.
    Querywise {
        #[arg(short, long)]
        qrels: PathBuf,
        #[arg(short, long, default_value = "ndcg@10")]
        metric: MetricSpec,
        #[arg(short, long)]
        output: Option<PathBuf>,
        run_a: PathBuf,
        run_b: PathBuf,
    },
    /// Run the config's [sweep] grid and write a long-format CSV.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Generate an instruction set by paraphrasing the base instruction.
    Paraphrase {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short = 'n', long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        base: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let mut shown = e.to_string();
            eprintln!("error: {shown}");
            let mut source = std::error::Error::source(e.as_ref());
            while let Some(s) = source {
                let msg = s.to_string();
                if !shown.contains(&msg) {
                    eprintln!("  caused by: {msg}");
                    shown = msg;
                }
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

/// Returns whether every query succeeded.
fn run(command: Command) -> Result<bool, Box<dyn std::error::Error>> {
    match command {
        Command::Index { config, force } => {
            let out = cmd_index(&ExperimentConfig::load(config)?, force)?;
            let verb = if out.built { "built" } else { "up to date" };
            println!(
                "{verb}: {} ({} docs, {} terms)",
                out.path.display(),
                out.num_docs,
                out.num_terms
            );
        }
        Command::Run {
            config,
            method,
            tag,
            output,
            lenient,
        } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(m) = method {
                cfg.method = m;
            }
            if tag.is_some() {
                cfg.tag = tag;
            }
            if let Some(o) = output {
                cfg.output = o;
            }
            cfg.lenient |= lenient;
            let out = cmd_run(&cfg)?;
            println!(
                "{}: {} queries, {} failed, {} backend calls, {} cache hits",
                out.run_path.display(),
                out.runs.len(),
                out.failures.len(),
                out.backend_calls,
                out.cache_hits
            );
            return Ok(out.failures.is_empty());
        }
        Command::Eval {
            qrels,
            metrics,
            alpha,
            output,
            runs,
        } => {
            let out = cmd_eval(&runs, &qrels, &metrics, alpha, output.as_deref())?;
            print!("{}", out.table.render());
        }
        Command::Querywise {
            qrels,
            metric,
            output,
            run_a,
            run_b,
        } => {
            let csv = cmd_querywise(&run_a, &run_b, &qrels, metric)?;
            match output {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Sweep { config } => {
            let out = cmd_sweep(&ExperimentConfig::load(config)?)?;
            println!("{}: {} rows", out.csv_path.display(), out.rows.len());
            return Ok(out.runs.iter().all(|r| r.failures.is_empty()));
        }
        Command::Paraphrase {
            config,
            count,
            base,
            output,
        } => {
            let set = cmd_paraphrase(
                &ExperimentConfig::load(config)?,
                base.as_deref(),
                count,
                &output,
            )?;
            println!("wrote {} instructions to {}", set.len(), output.display());
        }
    }
    Ok(true)
}
