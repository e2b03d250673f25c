//! Embedding tables: loading GloVe / word2vec text files, NFC-normalized lookup,
//! and a lossless GloVe-text writer.
//!
//! Tokens are opaque UTF-8 strings. Every token is NFC-normalized on the way in
//! and every query is NFC-normalized before lookup, so Devanagari tokens in
//! decomposed form resolve to the same entry as their composed form.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;
use unicode_normalization::{is_nfc, UnicodeNormalization};

use crate::vector::{Vector, VectorError};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("embedding file contains no entries")]
    Empty,
    #[error("line {line}: invalid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {field:?} as a number")]
    ParseFloat { line: usize, field: String },
    #[error("line {line}: non-finite component")]
    NonFinite { line: usize },
    #[error("line {line}: token {token:?} has no components")]
    NoComponents { line: usize, token: String },
    #[error("token {token:?} has a zero vector and cannot be normalized")]
    ZeroVector { token: String },
    #[error("line {line}: malformed word2vec header: {reason}")]
    BadHeader { line: usize, reason: String },
    #[error("token {token:?} contains whitespace and cannot be written in GloVe text format")]
    TokenWithWhitespace { token: String },
    #[error("refusing to write an empty embedding table")]
    EmptyTable,
    #[error("token {token:?}: {source}")]
    Vector {
        token: String,
        #[source]
        source: VectorError,
    },
}

/// Input text format. `Auto` treats a first line of exactly two integer
/// fields as a word2vec `V D` header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextFormat {
    #[default]
    Auto,
    Glove,
    Word2Vec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// A later line repeated an (NFC-equal) token; the first occurrence was kept.
    DuplicateToken { token: String, line: usize },
    /// word2vec header promised a different number of entries.
    HeaderCountMismatch { declared: usize, found: usize },
}

/// Anything that maps string keys to vectors of a fixed dimension.
pub trait VectorSource {
    fn dimension(&self) -> usize;
    fn get(&self, key: &str) -> Option<&Vector>;
}

pub fn nfc(s: &str) -> String {
    if is_nfc(s) {
        s.to_owned()
    } else {
        s.nfc().collect()
    }
}

/// Immutable token → vector map with a single dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    tokens: Vec<String>,
    vectors: Vec<Vector>,
    index: HashMap<String, usize>,
    normalized: bool,
    warnings: Vec<LoadWarning>,
}

impl EmbeddingTable {
    /// Builds a table from in-memory entries. Duplicate tokens keep the first
    /// occurrence and record a warning; dimensions must agree.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vector)>,
        S: AsRef<str>,
    {
        let mut builder = Builder::default();
        for (i, (token, vector)) in entries.into_iter().enumerate() {
            builder.push(i + 1, token.as_ref(), vector)?;
        }
        Ok(builder.finish(false))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn warnings(&self) -> &[LoadWarning] {
        &self.warnings
    }

    /// NFC-normalizes `token` and looks it up.
    pub fn lookup(&self, token: &str) -> Option<&Vector> {
        if is_nfc(token) {
            self.index.get(token).map(|&i| &self.vectors[i])
        } else {
            self.index.get(&nfc(token)).map(|&i| &self.vectors[i])
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup(token).is_some()
    }

    /// Entries in insertion (file) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.tokens.iter().map(String::as_str).zip(&self.vectors)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Unit-normalized copy. Already-unit vectors are left bit-identical.
    pub fn normalized(&self) -> Result<Self, EmbeddingError> {
        let mut out = self.clone();
        for (token, v) in out.tokens.iter().zip(out.vectors.iter_mut()) {
            *v = normalize_entry(token, v)?;
        }
        out.normalized = true;
        Ok(out)
    }

    /// Applies `f` to every entry, keeping tokens and order.
    pub fn try_map<F, E>(&self, mut f: F) -> Result<Self, E>
    where
        F: FnMut(&str, &Vector) -> Result<Vector, E>,
    {
        let vectors = self
            .tokens
            .iter()
            .zip(&self.vectors)
            .map(|(t, v)| f(t, v))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(Self {
            dimension: self.dimension,
            tokens: self.tokens.clone(),
            vectors,
            index: self.index.clone(),
            normalized: false,
            warnings: Vec::new(),
        })
    }

    /// Marks the table as unit-normalized after checking every norm is
    /// within 1e-6 of one.
    pub fn assert_normalized(mut self) -> Option<Self> {
        if self.vectors.iter().all(|v| (v.norm() - 1.0).abs() <= 1e-6) {
            self.normalized = true;
            Some(self)
        } else {
            None
        }
    }
}

impl VectorSource for EmbeddingTable {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn get(&self, key: &str) -> Option<&Vector> {
        self.lookup(key)
    }
}

fn normalize_entry(token: &str, v: &Vector) -> Result<Vector, EmbeddingError> {
    let n = v.norm();
    if n == 0.0 {
        return Err(EmbeddingError::ZeroVector {
            token: token.to_owned(),
        });
    }
    if n == 1.0 {
        return Ok(v.clone());
    }
    Ok(Vector::from_raw(v.iter().map(|c| c / n).collect()))
}

#[derive(Default)]
struct Builder {
    dimension: Option<usize>,
    tokens: Vec<String>,
    vectors: Vec<Vector>,
    index: HashMap<String, usize>,
    warnings: Vec<LoadWarning>,
}

impl Builder {
    fn push(&mut self, line: usize, token: &str, vector: Vector) -> Result<(), EmbeddingError> {
        let dim = *self.dimension.get_or_insert(vector.dim());
        if vector.dim() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                line,
                expected: dim,
                found: vector.dim(),
            });
        }
        let token = nfc(token);
        if self.index.contains_key(&token) {
            self.warnings
                .push(LoadWarning::DuplicateToken { token, line });
            return Ok(());
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.vectors.push(vector);
        Ok(())
    }

    fn finish(self, normalized: bool) -> EmbeddingTable {
        EmbeddingTable {
            dimension: self.dimension.unwrap_or(0),
            tokens: self.tokens,
            vectors: self.vectors,
            index: self.index,
            normalized,
            warnings: self.warnings,
        }
    }
}

fn parse_header(fields: &[&str]) -> Option<(usize, usize)> {
    if fields.len() != 2 {
        return None;
    }
    Some((fields[0].parse().ok()?, fields[1].parse().ok()?))
}

/// Reads a GloVe or word2vec text embedding file.
pub fn load_embeddings<R: BufRead>(
    reader: R,
    format: TextFormat,
    normalize: bool,
) -> Result<EmbeddingTable, EmbeddingError> {
    let mut builder = Builder::default();
    let mut declared: Option<(usize, usize)> = None;
    let mut first = true;

    for (i, line) in reader.split(b'\n').enumerate() {
        let lineno = i + 1;
        let bytes = line?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| EmbeddingError::InvalidUtf8 { line: lineno })?;
        let text = text.strip_suffix('\r').unwrap_or(text);
        let fields: Vec<&str> = text.split_ascii_whitespace().collect();
        if fields.is_empty() {
            continue;
        }

        if first {
            first = false;
            match format {
                TextFormat::Word2Vec => {
                    let header =
                        parse_header(&fields).ok_or_else(|| EmbeddingError::BadHeader {
                            line: lineno,
                            reason: "expected `V D`".into(),
                        })?;
                    if header.1 == 0 {
                        return Err(EmbeddingError::BadHeader {
                            line: lineno,
                            reason: "dimension must be positive".into(),
                        });
                    }
                    declared = Some(header);
                    builder.dimension = Some(header.1);
                    continue;
                }
                TextFormat::Auto => {
                    if let Some(header) = parse_header(&fields) {
                        if header.1 > 0 {
                            declared = Some(header);
                            builder.dimension = Some(header.1);
                            continue;
                        }
                    }
                }
                TextFormat::Glove => {}
            }
        }

        let token = fields[0];
        if fields.len() == 1 {
            return Err(EmbeddingError::NoComponents {
                line: lineno,
                token: token.to_owned(),
            });
        }
        let mut components = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            let x: f64 = f.parse().map_err(|_| EmbeddingError::ParseFloat {
                line: lineno,
                field: (*f).to_owned(),
            })?;
            if !x.is_finite() {
                return Err(EmbeddingError::NonFinite { line: lineno });
            }
            components.push(x);
        }
        let mut vector = Vector::from_raw(components);
        if normalize {
            vector = normalize_entry(token, &vector)?;
        }
        builder.push(lineno, token, vector)?;
    }

    if builder.tokens.is_empty() {
        return Err(EmbeddingError::Empty);
    }
    if let Some((count, _)) = declared {
        let found = builder.tokens.len()
            + builder
                .warnings
                .iter()
                .filter(|w| matches!(w, LoadWarning::DuplicateToken { .. }))
                .count();
        if count != found {
            builder.warnings.push(LoadWarning::HeaderCountMismatch {
                declared: count,
                found,
            });
        }
    }
    Ok(builder.finish(normalize))
}

/// Renders a float so that parsing it back yields the identical `f64`.
pub(crate) fn render_float(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-5 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Writes GloVe text: one `token v1 ... vD` line per entry, tokens sorted,
/// LF line endings. Floats use shortest round-trip rendering, so a reload
/// reproduces every component bit for bit.
pub fn write_embeddings<W: Write>(
    table: &EmbeddingTable,
    mut sink: W,
) -> Result<(), EmbeddingError> {
    if table.is_empty() {
        return Err(EmbeddingError::EmptyTable);
    }
    if let Some(bad) = table
        .tokens
        .iter()
        .find(|t| t.chars().any(char::is_whitespace) || t.is_empty())
    {
        return Err(EmbeddingError::TokenWithWhitespace { token: bad.clone() });
    }
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table.tokens[a].cmp(&table.tokens[b]));
    let mut line = String::new();
    for i in order {
        line.clear();
        line.push_str(&table.tokens[i]);
        for &c in table.vectors[i].as_slice() {
            line.push(' ');
            line.push_str(&render_float(c));
        }
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    sink.flush()?;
    Ok(())
}
