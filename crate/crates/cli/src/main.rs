use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use wvset_cli::commands::{self, Summary, FEEDBACK_RUN_FILE, RUN_FILE};
use wvset_cli::{ExperimentConfig, Precision};

#[derive(Parser)]
#[command(name = "wvset", version, about = "Word-vector-set retrieval experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
    /// Worker threads (0 = all cores). Output does not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the embedding vocabulary.
    Cluster,
    /// Build the index from corpus, embeddings and cluster model.
    Index,
    /// Rank the topics and write a TREC run.
    Search,
    /// RM3 expansion over a first-pass run.
    Feedback {
        /// First-pass run [default: <output>/run.txt]
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Evaluate a run against the qrels.
    Eval {
        /// [default: <output>/run.txt]
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Search and evaluate over a grid of K and alpha.
    Sweep,
    /// Per-query best-of-two merge of two runs.
    Oracle {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
    },
    /// Per-query AP differences and a paired t-test.
    Apdiff {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
    },
}

/// Every config key can be given as a flag; flags win over the file.
#[derive(Args, Default)]
struct Overrides {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    precision: Option<String>,
    #[arg(long, global = true)]
    corpus: Option<String>,
    #[arg(long, global = true)]
    embeddings: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    index: Option<String>,
    #[arg(long, global = true)]
    topics: Option<String>,
    #[arg(long, global = true)]
    qrels: Option<String>,
    #[arg(long, global = true)]
    output: Option<String>,
    /// smart, none, or a file
    #[arg(long, global = true)]
    stopwords: Option<String>,
    #[arg(long, global = true)]
    stemming: Option<String>,
    #[arg(long, global = true)]
    normalize: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    max_iterations: Option<String>,
    #[arg(long, global = true)]
    rel_tol: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// lm_only, one_cluster, no_cluster or kmeans
    #[arg(long, global = true)]
    variant: Option<String>,
    #[arg(long, global = true)]
    rerank_depth: Option<String>,
    #[arg(long, global = true)]
    top_k: Option<String>,
    #[arg(long, global = true)]
    fb_docs: Option<String>,
    #[arg(long, global = true)]
    fb_terms: Option<String>,
    #[arg(long, global = true)]
    beta: Option<String>,
    /// comma-separated
    #[arg(long, global = true)]
    sweep_alphas: Option<String>,
    /// comma-separated
    #[arg(long, global = true)]
    sweep_ks: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("precision", &self.precision),
            ("corpus", &self.corpus),
            ("embeddings", &self.embeddings),
            ("model", &self.model),
            ("index", &self.index),
            ("topics", &self.topics),
            ("qrels", &self.qrels),
            ("output", &self.output),
            ("stopwords", &self.stopwords),
            ("stemming", &self.stemming),
            ("normalize", &self.normalize),
            ("k", &self.k),
            ("seed", &self.seed),
            ("max_iterations", &self.max_iterations),
            ("rel_tol", &self.rel_tol),
            ("lambda", &self.lambda),
            ("alpha", &self.alpha),
            ("variant", &self.variant),
            ("rerank_depth", &self.rerank_depth),
            ("top_k", &self.top_k),
            ("fb_docs", &self.fb_docs),
            ("fb_terms", &self.fb_terms),
            ("beta", &self.beta),
            ("sweep_alphas", &self.sweep_alphas),
            ("sweep_ks", &self.sweep_ks),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        Ok(c)
    }
}

fn dispatch(command: &Command, config: &ExperimentConfig) -> Result<Summary> {
    macro_rules! generic {
        ($f:ident $(, $arg:expr)*) => {
            match config.precision {
                Precision::F64 => commands::$f::<f64>(config $(, $arg)*),
                Precision::F32 => commands::$f::<f32>(config $(, $arg)*),
            }
        };
    }
    let default_run = || config.output.join(RUN_FILE);
    match command {
        Command::Cluster => generic!(cmd_cluster),
        Command::Index => generic!(cmd_index),
        Command::Search => generic!(cmd_search),
        Command::Feedback { run } => {
            let run = run.clone().unwrap_or_else(default_run);
            if run == config.output.join(FEEDBACK_RUN_FILE) {
                anyhow::bail!("feedback input and output are the same file");
            }
            generic!(cmd_feedback, &run)
        }
        Command::Eval { run } => commands::cmd_eval(config, &run.clone().unwrap_or_else(default_run)),
        Command::Sweep => generic!(cmd_sweep),
        Command::Oracle { run_a, run_b } => commands::cmd_oracle(config, run_a, run_b),
        Command::Apdiff { run_a, run_b } => commands::cmd_apdiff(config, run_a, run_b),
    }
}

fn run(cli: Cli) -> Result<Summary> {
    let config = cli.overrides.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("starting thread pool")?;
    pool.install(|| dispatch(&cli.command, &config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(summary) => {
            for (k, v) in summary {
                println!("{k}\t{v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
