use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use semdist::commands::{
    cmd_build_index, cmd_evaluate, cmd_gen_synth, cmd_ingest, cmd_query, cmd_sweep_k, cmd_sweep_m,
    synth_config, QuerySource,
};
use semdist::config::{default_workers, RunConfig};
use semdist::CliError;
use semdist_core::RelevanceKind;

/// Sparse semantic-feature retrieval: top-K class-probability features,
/// fusion-based similarity ranking, and NDCG/ACG evaluation.
#[derive(Parser, Debug)]
#[command(name = "semdist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Number of classifier output classes
    #[arg(long, default_value_t = 1000)]
    n_classes: usize,
    /// Top-K truncation size for sparse features
    #[arg(long, default_value_t = 60)]
    k: usize,
    /// m1/m2 weight ratio of the similarity score (m2 is fixed at 1)
    #[arg(long, default_value_t = 10000.0)]
    m_ratio: f64,
    /// Coarse-filter threshold: minimum shared class count to score a pair
    #[arg(long, default_value_t = 10)]
    min_shared: usize,
    /// Ranking truncation position
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Worker threads for evaluation (default: machine parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for synthetic corpus generation
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Require probability vectors to sum to 1
    #[arg(long)]
    strict_prob: bool,
    /// Relevance level definition for evaluation
    #[arg(long, value_enum, default_value_t = RelevanceArg::Shared)]
    relevance: RelevanceArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RelevanceArg {
    /// Number of shared concept labels
    Shared,
    /// 1 if any label is shared, else 0
    Binary,
}

impl CommonArgs {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            n_classes: self.n_classes,
            k: self.k,
            m_ratio: self.m_ratio,
            min_shared: self.min_shared,
            p: self.p,
            workers: self.workers.unwrap_or_else(default_workers),
            seed: self.seed,
            strict_prob: self.strict_prob,
            relevance: match self.relevance {
                RelevanceArg::Shared => RelevanceKind::SharedLabels,
                RelevanceArg::Binary => RelevanceKind::Binary,
            },
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a probability file
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
        /// Probability file (dense CSV or sparse class:prob lines)
        #[arg(long)]
        probs: PathBuf,
        /// Write the summary here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a feature index from a probability file and serialize it
    BuildIndex {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        probs: PathBuf,
        /// Index file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the database against one query
    Query {
        #[command(flatten)]
        common: CommonArgs,
        /// Index file produced by build-index
        #[arg(long)]
        index: PathBuf,
        /// Query by the id of an image already in the index
        #[arg(long, conflicts_with = "vector_file")]
        query_id: Option<String>,
        /// Query by an external probability file holding one vector
        #[arg(long)]
        vector_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-out evaluation of every database image
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        index: PathBuf,
        /// Label file (image_id<TAB>label;label;...)
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate across several K values, emitting CSV
    SweepK {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Comma-separated K values
        #[arg(long, value_delimiter = ',', default_value = "20,30,40,50,60")]
        k_values: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate across several m1/m2 ratios, emitting CSV
    SweepM {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Comma-separated ratio values
        #[arg(long, value_delimiter = ',', default_value = "2000,5000,10000,50000")]
        m_values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a deterministic planted-cluster corpus
    GenSynth {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        clusters: usize,
        #[arg(long, default_value_t = 100)]
        per_cluster: usize,
        /// Top-k classes shared by every member of a cluster
        #[arg(long, default_value_t = 40)]
        overlap: usize,
        /// When > 0, adds a shared group label per `secondary-groups`
        /// clusters for multi-level relevance
        #[arg(long, default_value_t = 0)]
        secondary_groups: usize,
        /// Probability file to write
        #[arg(long)]
        out_probs: PathBuf,
        /// Label file to write
        #[arg(long)]
        out_labels: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest { common, probs, out } => {
            cmd_ingest(&common.to_config(), probs, out.as_deref())
        }
        Command::BuildIndex { common, probs, out } => {
            cmd_build_index(&common.to_config(), probs, out)
        }
        Command::Query {
            common,
            index,
            query_id,
            vector_file,
            out,
        } => {
            let source = match (query_id, vector_file) {
                (Some(id), None) => QuerySource::MemberId(id.clone()),
                (None, Some(path)) => QuerySource::VectorFile(path.clone()),
                _ => {
                    return Err(CliError::Invalid(
                        "query needs exactly one of --query-id or --vector-file".into(),
                    ))
                }
            };
            cmd_query(&common.to_config(), index, &source, out.as_deref())
        }
        Command::Evaluate {
            common,
            index,
            labels,
            out,
        } => cmd_evaluate(&common.to_config(), index, labels, out.as_deref()),
        Command::SweepK {
            common,
            probs,
            labels,
            k_values,
            out,
        } => cmd_sweep_k(&common.to_config(), probs, labels, k_values, out.as_deref()),
        Command::SweepM {
            common,
            probs,
            labels,
            m_values,
            out,
        } => cmd_sweep_m(&common.to_config(), probs, labels, m_values, out.as_deref()),
        Command::GenSynth {
            common,
            clusters,
            per_cluster,
            overlap,
            secondary_groups,
            out_probs,
            out_labels,
        } => {
            let cfg = common.to_config();
            let synth = synth_config(&cfg, *clusters, *per_cluster, *overlap, *secondary_groups);
            cmd_gen_synth(&cfg, &synth, out_probs, out_labels)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
