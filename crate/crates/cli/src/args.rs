use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use embias_core::{
    Conventions, OovPolicy, PermutationMode, PermutationPlan, Script, StdDevConvention, TextFormat,
    TiePolicy,
};

/// Measure and remove social bias in word and sentence embeddings.
///
/// Paths may be written `data:<relative>` to refer to the bundled data
/// directory (overridden by EMBIAS_DATA_DIR).
#[derive(Debug, Parser)]
#[command(name = "embias", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run word-level association tests.
    Weat(WeatArgs),
    /// Run sentence-level association tests over bleached templates.
    Seat(SeatArgs),
    /// Compute labeled bias directions from a direction spec.
    Subspace(SubspaceArgs),
    /// Debias a table with a plan and compare test results before and after.
    Debias(DebiasArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InFormat {
    Auto,
    Glove,
    Word2vec,
}

impl From<InFormat> for TextFormat {
    fn from(f: InFormat) -> Self {
        match f {
            InFormat::Auto => TextFormat::Auto,
            InFormat::Glove => TextFormat::Glove,
            InFormat::Word2vec => TextFormat::Word2Vec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stddev {
    Population,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ties {
    Strict,
    NonStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Oov {
    Strict,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScriptArg {
    Romanized,
    Devanagari,
}

/// Input table options shared by every command.
#[derive(Debug, Args)]
pub struct TableArgs {
    /// Embedding file (GloVe or word2vec text).
    #[arg(long, value_name = "PATH")]
    pub embeddings: PathBuf,
    #[arg(long, value_enum, default_value_t = InFormat::Auto, value_name = "FORMAT")]
    pub embedding_format: InFormat,
    /// Keep vectors as stored instead of unit-normalizing them at load.
    #[arg(long)]
    pub no_normalize: bool,
}

/// Options that decide which tests run and how they are scored.
#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Suite file, or `builtin` / `translated` for the bundled suites.
    #[arg(long, default_value = "builtin", value_name = "PATH|builtin")]
    pub suite: String,
    /// Run only the named test (repeatable).
    #[arg(long = "test", value_name = "NAME")]
    pub tests: Vec<String>,
    /// Number of sampled permutations when enumeration is not used.
    #[arg(long, default_value_t = 10_000, value_name = "N")]
    pub permutations: u64,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub permutation_mode: Mode,
    /// Largest number of splits that is still enumerated exactly.
    #[arg(long, default_value_t = 20_000, value_name = "N")]
    pub exact_threshold: u64,
    #[arg(long, default_value_t = 0, value_name = "S")]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Stddev::Population)]
    pub stddev: Stddev,
    #[arg(long, value_enum, default_value_t = Ties::Strict)]
    pub tie_policy: Ties,
    #[arg(long, value_enum, default_value_t = Oov::Drop)]
    pub oov_policy: Oov,
    #[arg(long, value_enum, default_value_t = ScriptArg::Romanized)]
    pub script: ScriptArg,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

impl AuditArgs {
    pub fn plan(&self) -> PermutationPlan {
        PermutationPlan {
            mode: match self.permutation_mode {
                Mode::Auto => PermutationMode::Auto,
                Mode::Exact => PermutationMode::Exact,
                Mode::Sampled => PermutationMode::Sampled,
            },
            sample_count: self.permutations,
            seed: self.seed,
            exact_threshold: self.exact_threshold,
        }
    }

    pub fn conventions(&self) -> Conventions {
        Conventions {
            stddev: match self.stddev {
                Stddev::Population => StdDevConvention::Population,
                Stddev::Sample => StdDevConvention::Sample,
            },
            tie_policy: match self.tie_policy {
                Ties::Strict => TiePolicy::Strict,
                Ties::NonStrict => TiePolicy::NonStrict,
            },
        }
    }

    pub fn oov(&self) -> OovPolicy {
        match self.oov_policy {
            Oov::Strict => OovPolicy::Strict,
            Oov::Drop => OovPolicy::DropWithWarning,
        }
    }

    pub fn script(&self) -> Script {
        match self.script {
            ScriptArg::Romanized => Script::Romanized,
            ScriptArg::Devanagari => Script::Devanagari,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Report destination (default: stdout).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    /// Also write the Markdown table here.
    #[arg(long, value_name = "PATH")]
    pub markdown: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeatArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub audit: AuditArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SeatArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub audit: AuditArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Template file, or `builtin` / `identity`.
    #[arg(long, default_value = "builtin", value_name = "PATH|builtin")]
    pub templates: String,
    /// Sentence vectors from an external encoder (`sentence TAB v1 v2 ...`).
    #[arg(long, value_name = "PATH")]
    pub precomputed: Option<PathBuf>,
    /// Write every expanded sentence, one per line, and exit.
    #[arg(long, value_name = "PATH")]
    pub emit_sentences: Option<PathBuf>,
    /// Expand attribute lists into sentences as well as targets.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
    pub expand_attributes: bool,
}

#[derive(Debug, Args)]
pub struct SubspaceArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Direction spec document.
    #[arg(long, value_name = "PATH")]
    pub spec: PathBuf,
    /// Direction file to write (GloVe text, one line per label).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DebiasArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub audit: AuditArgs,
    /// Debias plan document.
    #[arg(long, value_name = "PATH")]
    pub plan: PathBuf,
    /// Debiased embedding file to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Comparison report destination.
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    /// Also write the Markdown comparison here.
    #[arg(long, value_name = "PATH")]
    pub markdown: Option<PathBuf>,
}
