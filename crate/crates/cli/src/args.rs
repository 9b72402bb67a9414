use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tagforge", version, about = "Hash-tag suggestion for short videos through a learned tag space")]
pub struct Cli {
    /// Global seed; stages without their own --seed derive one from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for stages that support them.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Rerun pipeline stages even when their outputs are up to date.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build stemmed hash-tag sentences, vocabulary and de-stem map.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Train and query the tag embedding.
    #[command(subcommand)]
    T2v(T2vCmd),
    /// Fit the descriptor mixture model.
    #[command(subcommand)]
    Gmm(GmmCmd),
    /// Encode descriptor sets as Fisher vectors.
    #[command(subcommand)]
    Fv(FvCmd),
    /// Train and apply the video-to-tag-space network.
    #[command(subcommand)]
    Embed(EmbedCmd),
    /// Suggest hash-tags for one encoded video.
    Suggest(SuggestArgs),
    /// Aggregate survey relevance marks.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the survey web service.
    Serve(ServeArgs),
    /// Generate synthetic tag records or descriptor sets.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Precompute the suggestion store used by the survey service.
    #[command(subcommand)]
    Store(StoreCmd),
    /// Run every stage from a config file.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    Build {
        /// Line-delimited JSON records {"video_id", "tags"}.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_count: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum T2vCmd {
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        /// Frequency subsampling threshold; 0 disables.
        #[arg(long, default_value_t = 1e-4)]
        subsample: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    Nn {
        #[arg(long)]
        model: PathBuf,
        /// Raw tag; it is normalized and stemmed before lookup.
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::L2)]
        metric: MetricArg,
        /// Keep the query stem itself in the results.
        #[arg(long)]
        include_self: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    L2,
    Cosine,
}

#[derive(Debug, Subcommand)]
pub enum GmmCmd {
    Fit {
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        /// Fit only on the videos listed in this labels file.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizeArg {
    None,
    Ssqrt,
    L2,
    #[value(name = "ssqrt_l2")]
    SsqrtL2,
}

#[derive(Debug, Subcommand)]
pub enum FvCmd {
    Encode {
        #[arg(long)]
        gmm: PathBuf,
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long, value_enum, default_value_t = NormalizeArg::SsqrtL2)]
        normalize: NormalizeArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum EmbedCmd {
    Train {
        #[arg(long)]
        fv: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        t2v: PathBuf,
        #[arg(long, default_value_t = 600)]
        hidden: usize,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, default_value_t = 1e-4)]
        l2_reg: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    Project {
        #[arg(long)]
        net: PathBuf,
        /// A single `.fv` file.
        #[arg(long)]
        fv: PathBuf,
    },
    ExportProj {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        fv: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub t2v: PathBuf,
    #[arg(long)]
    pub destem: PathBuf,
    /// A single `.fv` file.
    #[arg(long)]
    pub fv: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub k: usize,
    /// Stems to leave out of the suggestions.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    #[arg(long)]
    pub no_collapse: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
    pub format: FormatArg,
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    Report {
        #[arg(long)]
        marks: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 15)]
        k: usize,
        #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
        format: FormatArg,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub marks: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory holding the annotator bundle served at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    Descriptors {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth labels; defaults to `<out>/labels.tsv`.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    Tags {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 2000)]
        sentences: usize,
        #[arg(long, default_value_t = 4)]
        tags_per_sentence: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum StoreCmd {
    Build {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        t2v: PathBuf,
        #[arg(long)]
        destem: PathBuf,
        #[arg(long)]
        fv: PathBuf,
        /// Videos to survey, with their class labels.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 15)]
        k: usize,
        #[arg(long, default_value = "media/")]
        media_prefix: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum PipelineCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}
