//! Measuring and removing social bias in word embeddings.
//!
//! Load a table with [`load_embeddings`], pick tests from [`builtin_suites`],
//! resolve them against the table and score them with [`run_weat`].
//! [`subspace`] finds bias directions and [`debias`] removes them.

pub mod assoc;
pub mod debias;
pub mod embedding;
pub mod lexicon;
pub mod report;
pub mod seat;
pub mod subspace;
pub mod synthetic;
pub mod vector;

pub use assoc::{
    effect_size, p_value, run_all, run_weat, test_statistic, word_association, AssocError,
    Conventions, EffectSize, PermutationMode, PermutationPlan, StdDevConvention, TestResult,
    TiePolicy, UsedMode,
};
pub use debias::{
    apply_plan, evaluate_before_after, hard_debias, linear_project, lpsg_debias,
    religion_direction, ComparisonRow, DebiasError, DebiasOutcome, DebiasPlan, EvalOptions, Method,
    Scope,
};
pub use embedding::{
    load_embeddings, write_embeddings, EmbeddingError, EmbeddingTable, TextFormat, VectorSource,
};
pub use lexicon::{
    builtin_suites, load_suite, resolve, translated_suites, AssociationTest, Category,
    LexiconError, ListId, OovEntry, OovPolicy, Pos, ResolvedTest, Script, SuiteDocument, TestKind,
    Variant, WordList,
};
pub use report::{AuditReport, Comparison, ConfigEcho, InputEcho};
pub use seat::{
    builtin_templates, ingest_precomputed, run_seat, SeatError, SeatOptions, SentenceSource,
    SentenceTable, TemplateSet,
};
pub use subspace::{
    direction_from_list_pca, direction_from_pair, direction_from_pairs_pca, orthogonalize,
    top_principal_component, BiasDirection, DirectionDocument, DirectionSpec, SubspaceError,
};
pub use vector::{cosine, Vector, VectorError};

/// Any error the library can return.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
    #[error(transparent)]
    Seat(#[from] SeatError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Debias(#[from] DebiasError),
}
