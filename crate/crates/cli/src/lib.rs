//! The `embias` command line.
//!
//! Exit codes: 0 success, 1 computation error, 2 resolution, data or file
//! error, 64 usage error.

pub mod args;

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Parser;
use rayon::prelude::*;

use args::{
    AuditArgs, Cli, Command, DebiasArgs, OutputArgs, ReportFormat, SeatArgs, SubspaceArgs,
    TableArgs, WeatArgs,
};
use embias_core::report::{DebiasEcho, SeatEcho};
use embias_core::seat::{emit_sentences, Pooling};
use embias_core::subspace::{dot_matrix, write_directions};
use embias_core::{
    apply_plan, evaluate_before_after, lexicon, load_embeddings, resolve, run_all, run_seat,
    write_embeddings, AssocError, AssociationTest, AuditReport, Comparison, ConfigEcho,
    DebiasError, DebiasPlan, DirectionDocument, EmbeddingError, EmbeddingTable, EvalOptions,
    InputEcho, LexiconError, SeatError, SeatOptions, SentenceSource, SubspaceError, SuiteDocument,
    TemplateSet, TestResult,
};

pub const DATA_DIR_ENV: &str = "EMBIAS_DATA_DIR";
const DATA_PREFIX: &str = "data:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Compute = 1,
    Data = 2,
    Usage = 64,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl Failure {
    fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Self {
            exit,
            error: error.into(),
        }
    }

    fn data(error: impl Into<anyhow::Error>) -> Self {
        Self::new(Exit::Data, error)
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        Self::data(e)
    }
}

impl From<LexiconError> for Failure {
    fn from(e: LexiconError) -> Self {
        Self::data(e)
    }
}

impl From<AssocError> for Failure {
    fn from(e: AssocError) -> Self {
        Self::new(Exit::Compute, e)
    }
}

impl From<SeatError> for Failure {
    fn from(e: SeatError) -> Self {
        match e {
            SeatError::Assoc(_) => Self::new(Exit::Compute, e),
            _ => Self::data(e),
        }
    }
}

fn subspace_exit(e: &SubspaceError) -> Exit {
    match e {
        SubspaceError::OutOfVocabulary(_)
        | SubspaceError::TooFewPairs { .. }
        | SubspaceError::TooFewWords { .. }
        | SubspaceError::Spec(_)
        | SubspaceError::Embedding(_) => Exit::Data,
        _ => Exit::Compute,
    }
}

impl From<SubspaceError> for Failure {
    fn from(e: SubspaceError) -> Self {
        Self::new(subspace_exit(&e), e)
    }
}

impl From<DebiasError> for Failure {
    fn from(e: DebiasError) -> Self {
        let exit = match &e {
            DebiasError::Plan(_)
            | DebiasError::NotNormalized
            | DebiasError::OutOfVocabulary(_)
            | DebiasError::Lexicon(_) => Exit::Data,
            DebiasError::Subspace(s) => subspace_exit(s),
            _ => Exit::Compute,
        };
        Self::new(exit, e)
    }
}

trait DataContext<T> {
    fn data_ctx(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> DataContext<T> for Result<T, E> {
    fn data_ctx(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::data(e.into().context(what())))
    }
}

/// Bundled data directory: `$EMBIAS_DATA_DIR`, else the workspace `data/`.
pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Expands a leading `data:` to the data directory.
pub fn resolve_path(p: &Path) -> PathBuf {
    match p.to_str().and_then(|s| s.strip_prefix(DATA_PREFIX)) {
        Some(rest) => data_dir().join(rest),
        None => p.to_path_buf(),
    }
}

fn read_input(p: &Path, flag: &str) -> Result<Vec<u8>, Failure> {
    let path = resolve_path(p);
    fs::read(&path).data_ctx(|| format!("{flag}: cannot read {}", path.display()))
}

fn write_output(p: &Path, bytes: &[u8], flag: &str) -> Result<(), Failure> {
    let path = resolve_path(p);
    fs::write(&path, bytes).data_ctx(|| format!("{flag}: cannot write {}", path.display()))
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Usage
            } else {
                Exit::Success
            } as i32;
        }
    };
    match dispatch(cli) {
        Ok(()) => Exit::Success as i32,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.exit as i32
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let threads = match &cli.command {
        Command::Weat(a) => a.audit.threads,
        Command::Seat(a) => a.audit.threads,
        Command::Debias(a) => a.audit.threads,
        Command::Subspace(_) => None,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::new(
                Exit::Usage,
                anyhow!("--threads must be at least 1"),
            ));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::new(Exit::Compute, anyhow!("cannot start worker threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Weat(a) => cmd_weat(a),
        Command::Seat(a) => cmd_seat(a),
        Command::Subspace(a) => cmd_subspace(a),
        Command::Debias(a) => cmd_debias(a),
    })
}

fn load_table(a: &TableArgs) -> Result<(EmbeddingTable, InputEcho), Failure> {
    let bytes = read_input(&a.embeddings, "--embeddings")?;
    let echo = InputEcho::new(a.embeddings.display().to_string(), &bytes);
    let table = load_embeddings(
        BufReader::new(bytes.as_slice()),
        a.embedding_format.into(),
        !a.no_normalize,
    )
    .data_ctx(|| format!("--embeddings {}", a.embeddings.display()))?;
    for w in table.warnings() {
        eprintln!("warning: {}: {w:?}", a.embeddings.display());
    }
    Ok((table, echo))
}

fn load_tests(a: &AuditArgs) -> Result<(Vec<AssociationTest>, InputEcho), Failure> {
    let (text, source) = match a.suite.as_str() {
        "builtin" => (
            lexicon::builtin_document_text().to_owned(),
            "builtin".to_owned(),
        ),
        "translated" => (
            lexicon::translated_document_text().to_owned(),
            "translated".to_owned(),
        ),
        other => {
            let bytes = read_input(Path::new(other), "--suite")?;
            let text =
                String::from_utf8(bytes).data_ctx(|| format!("--suite {other}: not UTF-8"))?;
            (text, other.to_owned())
        }
    };
    let echo = InputEcho::new(source.clone(), text.as_bytes());
    let doc = SuiteDocument::parse(&text).data_ctx(|| format!("--suite {source}"))?;
    let mut tests = doc.tests;
    if !a.tests.is_empty() {
        let unknown: Vec<&String> = a
            .tests
            .iter()
            .filter(|n| !tests.iter().any(|t| &t.name == *n))
            .collect();
        if !unknown.is_empty() {
            return Err(Failure::data(anyhow!(
                "--test: no such test in the suite: {unknown:?}"
            )));
        }
        tests.retain(|t| a.tests.contains(&t.name));
    }
    Ok((tests, echo))
}

fn config(
    command: &str,
    table: &TableArgs,
    emb: InputEcho,
    suite: InputEcho,
    a: &AuditArgs,
) -> ConfigEcho {
    ConfigEcho {
        command: command.to_owned(),
        embeddings: emb,
        normalize: !table.no_normalize,
        suite,
        tests: a.tests.clone(),
        permutation: a.plan(),
        conventions: a.conventions(),
        oov_policy: a.oov(),
        script: a.script(),
        seat: None,
        debias: None,
    }
}

fn warn_oov(results: &[TestResult]) {
    for r in results {
        if !r.oov_report.is_empty() {
            let tokens: Vec<String> = r
                .oov_report
                .iter()
                .map(|e| format!("{}:{}", e.list, e.token))
                .collect();
            eprintln!("warning: {}: dropped {}", r.test_name, tokens.join(", "));
        }
    }
}

fn render(report: &AuditReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Md => report.to_markdown(),
    }
}

fn emit_report(report: &AuditReport, out: &OutputArgs) -> Result<(), Failure> {
    let text = render(report, out.format);
    match &out.out {
        Some(p) => write_output(p, text.as_bytes(), "--out")?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .data_ctx(|| "writing report to stdout".into())?,
    }
    if let Some(md) = &out.markdown {
        write_output(md, report.to_markdown().as_bytes(), "--markdown")?;
    }
    Ok(())
}

fn collect_results(
    results: Vec<Result<TestResult, AssocError>>,
    tests: &[AssociationTest],
) -> Result<Vec<TestResult>, Failure> {
    results
        .into_iter()
        .zip(tests)
        .map(|(r, t)| {
            r.map_err(|e| {
                Failure::new(
                    Exit::Compute,
                    anyhow::Error::new(e).context(format!("test {:?}", t.name)),
                )
            })
        })
        .collect()
}

pub fn cmd_weat(a: WeatArgs) -> Result<(), Failure> {
    let (table, emb) = load_table(&a.table)?;
    let (tests, suite) = load_tests(&a.audit)?;
    let resolved = tests
        .iter()
        .map(|t| resolve(t, &table, a.audit.oov(), a.audit.script()))
        .collect::<Result<Vec<_>, _>>()?;
    let results = collect_results(
        run_all(&resolved, &a.audit.plan(), a.audit.conventions()),
        &tests,
    )?;
    warn_oov(&results);
    let report = AuditReport::new(config("weat", &a.table, emb, suite, &a.audit), results);
    emit_report(&report, &a.output)
}

fn load_templates(spec: &str) -> Result<(TemplateSet, InputEcho), Failure> {
    let (set, text) = match spec {
        "builtin" => {
            let t = embias_core::builtin_templates();
            (t.clone(), t.to_json())
        }
        "identity" => {
            let t = TemplateSet::identity();
            (t.clone(), t.to_json())
        }
        other => {
            let bytes = read_input(Path::new(other), "--templates")?;
            let text =
                String::from_utf8(bytes).data_ctx(|| format!("--templates {other}: not UTF-8"))?;
            (
                TemplateSet::parse(&text).data_ctx(|| format!("--templates {other}"))?,
                text,
            )
        }
    };
    Ok((set, InputEcho::new(spec, text.as_bytes())))
}

pub fn cmd_seat(a: SeatArgs) -> Result<(), Failure> {
    let (templates, templates_echo) = load_templates(&a.templates)?;
    let (tests, suite) = load_tests(&a.audit)?;
    if let Some(path) = &a.emit_sentences {
        let sentences = emit_sentences(&tests, &templates, a.expand_attributes, a.audit.script())?;
        let mut text = sentences.join("\n");
        text.push('\n');
        write_output(path, text.as_bytes(), "--emit-sentences")?;
        eprintln!("wrote {} sentences to {}", sentences.len(), path.display());
        return Ok(());
    }
    let (table, emb) = load_table(&a.table)?;
    let precomputed = match &a.precomputed {
        Some(p) => {
            let bytes = read_input(p, "--precomputed")?;
            let st =
                embias_core::ingest_precomputed(BufReader::new(bytes.as_slice())).map_err(|e| {
                    Failure::data(
                        anyhow::Error::new(e).context(format!("--precomputed {}", p.display())),
                    )
                })?;
            Some((st, InputEcho::new(p.display().to_string(), &bytes)))
        }
        None => None,
    };
    let source = match &precomputed {
        Some((st, _)) => SentenceSource::Precomputed(st),
        None => SentenceSource::Composed(&table),
    };
    let opts = SeatOptions {
        templates,
        expand_attributes: a.expand_attributes,
        oov_policy: a.audit.oov(),
        script: a.audit.script(),
        pooling: Pooling::Mean,
    };
    let plan = a.audit.plan();
    let conventions = a.audit.conventions();
    let results = tests
        .par_iter()
        .map(|t| run_seat(t, &opts, source, &plan, conventions))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    warn_oov(&results);
    let mut cfg = config("seat", &a.table, emb, suite, &a.audit);
    cfg.seat = Some(SeatEcho {
        templates: templates_echo,
        expand_attributes: a.expand_attributes,
        pooling: Pooling::Mean,
        precomputed: precomputed.map(|(_, e)| e),
    });
    emit_report(&AuditReport::new(cfg, results), &a.output)
}

pub fn cmd_subspace(a: SubspaceArgs) -> Result<(), Failure> {
    let (table, _) = load_table(&a.table)?;
    let bytes = read_input(&a.spec, "--spec")?;
    let text =
        String::from_utf8(bytes).data_ctx(|| format!("--spec {}: not UTF-8", a.spec.display()))?;
    let doc = DirectionDocument::parse(&text)?;
    let dirs = doc.compute(&table)?;
    for d in &dirs {
        if !d.oov.is_empty() {
            eprintln!(
                "warning: direction {}: skipped out-of-vocabulary {}",
                d.label,
                d.oov.join(", ")
            );
        }
    }
    let mut buf = Vec::new();
    write_directions(&dirs, &mut buf)?;
    write_output(&a.out, &buf, "--out")?;
    let m = dot_matrix(&dirs);
    let mut out = String::from("pairwise dot products:\n");
    for (i, row) in m.iter().enumerate() {
        for (j, dot) in row.iter().enumerate().skip(i + 1) {
            out.push_str(&format!(
                "  {} · {} = {:+.3e}\n",
                dirs[i].label, dirs[j].label, dot
            ));
        }
    }
    if dirs.len() < 2 {
        out.push_str("  (single direction)\n");
    }
    print!("{out}");
    Ok(())
}

pub fn cmd_debias(a: DebiasArgs) -> Result<(), Failure> {
    let (table, emb) = load_table(&a.table)?;
    let (tests, suite) = load_tests(&a.audit)?;
    let bytes = read_input(&a.plan, "--plan")?;
    let text =
        String::from_utf8(bytes).data_ctx(|| format!("--plan {}: not UTF-8", a.plan.display()))?;
    let plan = DebiasPlan::parse(&text)?;
    let outcome = apply_plan(&table, &plan)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let mut buf = Vec::new();
    write_embeddings(&outcome.table, &mut buf)?;
    write_output(&a.out, &buf, "--out")?;

    let opts = EvalOptions {
        oov_policy: a.audit.oov(),
        script: a.audit.script(),
        conventions: a.audit.conventions(),
    };
    let rows = evaluate_before_after(&table, &outcome.table, &tests, &a.audit.plan(), opts)?;
    let mut cfg = config("debias", &a.table, emb, suite, &a.audit);
    cfg.debias = Some(DebiasEcho {
        plan: InputEcho::new(a.plan.display().to_string(), text.as_bytes()),
        parsed: plan.clone(),
    });
    let method = match plan.method {
        embias_core::Method::Linear => "linear",
        embias_core::Method::Hard => "hard",
        embias_core::Method::Lpsg => "lpsg",
    };
    let report = AuditReport::with_comparison(
        cfg,
        Comparison {
            method: method.into(),
            direction: outcome.direction.label.clone(),
            warnings: outcome.warnings.clone(),
            rows,
        },
    );
    write_output(&a.report, render(&report, a.format).as_bytes(), "--report")?;
    if let Some(md) = &a.markdown {
        write_output(md, report.to_markdown().as_bytes(), "--markdown")?;
    }
    Ok(())
}
