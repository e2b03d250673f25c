//! Sentence-level association tests built from bleached templates.
//!
//! Each target (and, by default, attribute) word is slotted into every
//! template for its part of speech. Sentence vectors are either mean-pooled
//! from a static table or read from a precomputed TSV produced by an external
//! encoder.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{run_weat, AssocError, Conventions, PermutationPlan, TestResult};
use crate::embedding::{nfc, render_float, EmbeddingTable, VectorSource};
use crate::lexicon::{
    resolve, AssociationTest, LexiconError, ListId, OovPolicy, Pos, ResolvedTest, Script, TestKind,
    WordList,
};
use crate::vector::{self, Vector};

pub const SLOT: &str = "_";

const BUILTIN_TEMPLATES: &str = include_str!("../../../data/templates/builtin.json");
const IDENTITY_TEMPLATES: &str = include_str!("../../../data/templates/identity.json");

#[derive(Debug, Error)]
pub enum SeatError {
    #[error("invalid template set: {0}")]
    Templates(String),
    #[error("no templates for part of speech {}", .0.as_str())]
    NoTemplates(Pos),
    #[error("word {0:?} contains the slot marker \"_\"")]
    SlotInWord(String),
    #[error("test {test:?}: word {word:?} has no pos tag")]
    MissingPos { test: String, word: String },
    #[error("test {test:?}: expansion gives {x} X sentences but {y} Y sentences")]
    UnequalExpansion { test: String, x: usize, y: usize },
    #[error("sentence {sentence:?}: no token is in the vocabulary ({})", .tokens.join(", "))]
    AllTokensOov {
        sentence: String,
        tokens: Vec<String>,
    },
    #[error("test {test:?}: {} sentence(s) missing from the precomputed table: {}", .missing.len(), .missing.join(" | "))]
    MissingSentences { test: String, missing: Vec<String> },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate sentence {sentence:?}")]
    DuplicateSentence { line: usize, sentence: String },
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("sentence table is empty")]
    Empty,
    #[error("sentence {0:?} cannot be written as a TSV key")]
    BadKey(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

/// Per-part-of-speech template lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateSet(BTreeMap<Pos, Vec<String>>);

impl TemplateSet {
    pub fn new(map: BTreeMap<Pos, Vec<String>>) -> Result<Self, SeatError> {
        let set = Self(map);
        set.validate()?;
        Ok(set)
    }

    pub fn parse(text: &str) -> Result<Self, SeatError> {
        let map = serde_json::from_str(text).map_err(|e| SeatError::Templates(e.to_string()))?;
        Self::new(map)
    }

    /// A set mapping every part of speech to the bare slot.
    pub fn identity() -> Self {
        Self::parse(IDENTITY_TEMPLATES).expect("bundled templates are valid")
    }

    pub fn validate(&self) -> Result<(), SeatError> {
        if self.0.is_empty() {
            return Err(SeatError::Templates("no parts of speech".into()));
        }
        for (pos, list) in &self.0 {
            if list.is_empty() {
                return Err(SeatError::Templates(format!(
                    "{} has no templates",
                    pos.as_str()
                )));
            }
            for t in list {
                if t.matches(SLOT).count() != 1 {
                    return Err(SeatError::Templates(format!(
                        "template {t:?} must contain exactly one \"_\""
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, pos: Pos) -> Option<&[String]> {
        self.0.get(&pos).map(Vec::as_slice)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("template set serializes");
        s.push('\n');
        s
    }
}

pub fn builtin_templates() -> TemplateSet {
    TemplateSet::parse(BUILTIN_TEMPLATES).expect("bundled templates are valid")
}

/// Slots `word` into every template for `pos`, in template order.
pub fn expand(templates: &TemplateSet, word: &str, pos: Pos) -> Result<Vec<String>, SeatError> {
    if word.contains(SLOT) {
        return Err(SeatError::SlotInWord(word.to_owned()));
    }
    let list = templates.get(pos).ok_or(SeatError::NoTemplates(pos))?;
    Ok(list.iter().map(|t| t.replacen(SLOT, word, 1)).collect())
}

fn expand_list<'a, I>(
    test: &AssociationTest,
    pairs: I,
    templates: &TemplateSet,
) -> Result<Vec<String>, SeatError>
where
    I: IntoIterator<Item = (&'a String, &'a String)>,
{
    let mut out = Vec::new();
    for (word, surface) in pairs {
        let pos = test.pos_of(word).ok_or_else(|| SeatError::MissingPos {
            test: test.name.clone(),
            word: word.clone(),
        })?;
        out.extend(expand(templates, surface, pos)?);
    }
    Ok(out)
}

/// Sentence-level copy of `test` built from `(word, surface form)` pairs.
fn sentence_test(
    test: &AssociationTest,
    lists: [(&[String], &[String]); 4],
    templates: &TemplateSet,
    expand_attributes: bool,
) -> Result<AssociationTest, SeatError> {
    let mut out = test.clone();
    out.kind = TestKind::Seat;
    out.pos_tags.clear();
    for (id, (words, surfaces)) in ListId::ALL.into_iter().zip(lists) {
        let expanded = if matches!(id, ListId::X | ListId::Y) || expand_attributes {
            expand_list(test, words.iter().zip(surfaces), templates)?
        } else {
            surfaces.to_vec()
        };
        let label = test.lists.get(id).label.clone();
        *out.lists.get_mut(id) = WordList::new(label, expanded);
    }
    let (x, y) = (out.lists.x.len(), out.lists.y.len());
    if x != y {
        return Err(SeatError::UnequalExpansion {
            test: test.name.clone(),
            x,
            y,
        });
    }
    Ok(out)
}

/// Replaces target lists (and attribute lists when `expand_attributes`) by
/// their template expansions.
pub fn build_seat_test(
    test: &AssociationTest,
    templates: &TemplateSet,
    expand_attributes: bool,
) -> Result<AssociationTest, SeatError> {
    build_seat_test_in(test, templates, expand_attributes, Script::Romanized)
}

fn build_seat_test_in(
    test: &AssociationTest,
    templates: &TemplateSet,
    expand_attributes: bool,
    script: Script,
) -> Result<AssociationTest, SeatError> {
    let forms = |id: ListId| -> Result<&[String], SeatError> {
        test.lists.get(id).surface_forms(script).ok_or_else(|| {
            LexiconError::MissingDevanagari {
                test: test.name.clone(),
                list: id,
            }
            .into()
        })
    };
    let l = &test.lists;
    sentence_test(
        test,
        [
            (&l.x.words, forms(ListId::X)?),
            (&l.y.words, forms(ListId::Y)?),
            (&l.a.words, forms(ListId::A)?),
            (&l.b.words, forms(ListId::B)?),
        ],
        templates,
        expand_attributes,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedSentence {
    pub vector: Vector,
    /// Tokens that had no vector and were skipped.
    pub skipped: Vec<String>,
}

/// Pools the vectors of a sentence's whitespace-separated tokens.
pub fn compose_sentence(
    table: &EmbeddingTable,
    sentence: &str,
    pooling: Pooling,
) -> Result<ComposedSentence, SeatError> {
    let mut found = Vec::new();
    let mut skipped = Vec::new();
    for token in sentence.split_whitespace() {
        match table.lookup(token) {
            Some(v) => found.push(v),
            None => skipped.push(token.to_owned()),
        }
    }
    if found.is_empty() {
        return Err(SeatError::AllTokensOov {
            sentence: sentence.to_owned(),
            tokens: skipped,
        });
    }
    let vector = match pooling {
        Pooling::Mean => vector::mean(found).map_err(|e| SeatError::Templates(e.to_string()))?,
    };
    Ok(ComposedSentence { vector, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Composed,
    Precomputed,
}

/// Sentence → vector map.
#[derive(Debug, Clone)]
pub struct SentenceTable {
    dimension: usize,
    sentences: Vec<String>,
    vectors: Vec<Vector>,
    index: HashMap<String, usize>,
    provenance: Provenance,
}

impl SentenceTable {
    fn empty(provenance: Provenance) -> Self {
        Self {
            dimension: 0,
            sentences: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            provenance,
        }
    }

    fn insert(&mut self, sentence: String, v: Vector) -> bool {
        let key = nfc(&sentence);
        if self.index.contains_key(&key) {
            return false;
        }
        if self.sentences.is_empty() {
            self.dimension = v.dim();
        }
        self.index.insert(key.clone(), self.sentences.len());
        self.sentences.push(key);
        self.vectors.push(v);
        true
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn lookup(&self, sentence: &str) -> Option<&Vector> {
        self.index.get(&nfc(sentence)).map(|&i| &self.vectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.sentences.iter().map(String::as_str).zip(&self.vectors)
    }

    /// Mean-pools each sentence against `table`; duplicates are composed once.
    /// Returns the table and, per sentence with skipped tokens, those tokens.
    pub fn compose<'a, I>(
        table: &EmbeddingTable,
        sentences: I,
        pooling: Pooling,
    ) -> Result<(Self, Vec<(String, Vec<String>)>), SeatError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = HashSet::new();
        let unique: Vec<&str> = sentences
            .into_iter()
            .filter(|s| seen.insert(nfc(s)))
            .collect();
        let composed: Vec<ComposedSentence> = unique
            .par_iter()
            .map(|s| compose_sentence(table, s, pooling))
            .collect::<Result<_, _>>()?;
        let mut out = Self::empty(Provenance::Composed);
        let mut warnings = Vec::new();
        for (s, c) in unique.into_iter().zip(composed) {
            if !c.skipped.is_empty() {
                warnings.push((s.to_owned(), c.skipped));
            }
            out.insert(s.to_owned(), c.vector);
        }
        Ok((out, warnings))
    }
}

impl VectorSource for SentenceTable {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn get(&self, key: &str) -> Option<&Vector> {
        self.lookup(key)
    }
}

/// Reads `sentence TAB v1 SP v2 ...` lines.
pub fn ingest_precomputed<R: BufRead>(source: R) -> Result<SentenceTable, SeatError> {
    let mut out = SentenceTable::empty(Provenance::Precomputed);
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let (sentence, rest) = line.split_once('\t').ok_or_else(|| SeatError::Parse {
            line: line_no,
            reason: "missing TAB between sentence and vector".into(),
        })?;
        let comps = rest
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>().map_err(|_| SeatError::Parse {
                    line: line_no,
                    reason: format!("cannot parse {f:?} as a number"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !out.is_empty() && comps.len() != out.dimension {
            return Err(SeatError::Dimension {
                line: line_no,
                expected: out.dimension,
                found: comps.len(),
            });
        }
        let v = Vector::new(comps).map_err(|e| SeatError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !out.insert(sentence.to_owned(), v) {
            return Err(SeatError::DuplicateSentence {
                line: line_no,
                sentence: sentence.to_owned(),
            });
        }
    }
    if out.is_empty() {
        return Err(SeatError::Empty);
    }
    Ok(out)
}

/// Writes a sentence table in the TSV format read by [`ingest_precomputed`].
pub fn write_precomputed<W: Write>(table: &SentenceTable, mut sink: W) -> Result<(), SeatError> {
    for (s, v) in table.iter() {
        if s.contains(['\t', '\n', '\r']) {
            return Err(SeatError::BadKey(s.to_owned()));
        }
        let comps: Vec<String> = v.iter().map(|&c| render_float(c)).collect();
        writeln!(sink, "{s}\t{}", comps.join(" "))?;
    }
    sink.flush()?;
    Ok(())
}

/// Every sentence the given tests need, first occurrence order, no repeats.
pub fn emit_sentences(
    tests: &[AssociationTest],
    templates: &TemplateSet,
    expand_attributes: bool,
    script: Script,
) -> Result<Vec<String>, SeatError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in tests {
        let st = build_seat_test_in(t, templates, expand_attributes, script)?;
        for id in ListId::ALL {
            for s in &st.lists.get(id).words {
                if seen.insert(s.clone()) {
                    out.push(s.clone());
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SeatOptions {
    pub templates: TemplateSet,
    pub expand_attributes: bool,
    pub oov_policy: OovPolicy,
    pub script: Script,
    pub pooling: Pooling,
}

impl Default for SeatOptions {
    fn default() -> Self {
        Self {
            templates: builtin_templates(),
            expand_attributes: true,
            oov_policy: OovPolicy::default(),
            script: Script::default(),
            pooling: Pooling::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SentenceSource<'a> {
    /// Compose sentence vectors from a static word table.
    Composed(&'a EmbeddingTable),
    Precomputed(&'a SentenceTable),
}

/// Expands `test` and resolves it to sentence vectors.
///
/// Composed mode first resolves words against the table (applying the OOV
/// policy) so only in-vocabulary words are slotted. Precomputed mode expands
/// every word and requires every sentence to be present.
pub fn prepare_seat(
    test: &AssociationTest,
    opts: &SeatOptions,
    source: SentenceSource<'_>,
) -> Result<ResolvedTest, SeatError> {
    match source {
        SentenceSource::Composed(table) => {
            let words = resolve(test, table, opts.oov_policy, opts.script)?;
            let lists = ListId::ALL.map(|id| {
                let l = words.list(id);
                (l.words.as_slice(), l.tokens.as_slice())
            });
            let st = sentence_test(test, lists, &opts.templates, opts.expand_attributes)?;
            let all = ListId::ALL
                .iter()
                .flat_map(|&id| st.lists.get(id).words.iter().map(String::as_str));
            let (sentences, _) = SentenceTable::compose(table, all, opts.pooling)?;
            let mut resolved = resolve(&st, &sentences, OovPolicy::Strict, Script::Romanized)?;
            resolved.oov_report = words.oov_report;
            Ok(resolved)
        }
        SentenceSource::Precomputed(sentences) => {
            let st =
                build_seat_test_in(test, &opts.templates, opts.expand_attributes, opts.script)?;
            resolve(&st, sentences, OovPolicy::Strict, Script::Romanized).map_err(|e| match e {
                LexiconError::OutOfVocabulary { test, missing } => SeatError::MissingSentences {
                    test,
                    missing: missing.into_iter().map(|(_, s)| s).collect(),
                },
                other => other.into(),
            })
        }
    }
}

pub fn run_seat(
    test: &AssociationTest,
    opts: &SeatOptions,
    source: SentenceSource<'_>,
    plan: &PermutationPlan,
    conventions: Conventions,
) -> Result<TestResult, SeatError> {
    let resolved = prepare_seat(test, opts, source)?;
    Ok(run_weat(&resolved, plan, conventions)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{builtin_suites, Category, TestLists, Variant};

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        EmbeddingTable::from_entries(
            entries
                .iter()
                .map(|(t, v)| (*t, Vector::new(v.to_vec()).unwrap())),
        )
        .unwrap()
    }

    fn noun_test(x: &[&str], y: &[&str], a: &[&str], b: &[&str], ypos: Pos) -> AssociationTest {
        let wl =
            |l: &str, ws: &[&str]| WordList::new(l, ws.iter().map(|s| s.to_string()).collect());
        let mut pos_tags = BTreeMap::new();
        for w in x.iter().chain(a).chain(b) {
            pos_tags.insert(w.to_string(), Pos::CommonNoun);
        }
        for w in y {
            pos_tags.insert(w.to_string(), ypos);
        }
        AssociationTest {
            name: "t".into(),
            description: None,
            kind: TestKind::Weat,
            category: Category::BiasMeasuring,
            variant: Variant::Custom,
            reconstructed: false,
            note: None,
            lists: TestLists {
                x: wl("x", x),
                y: wl("y", y),
                a: wl("a", a),
                b: wl("b", b),
            },
            pos_tags,
        }
    }

    #[test]
    fn builtin_counts() {
        let t = builtin_templates();
        assert_eq!(t.get(Pos::Name).unwrap().len(), 8);
        assert_eq!(t.get(Pos::CommonNoun).unwrap().len(), 8);
        assert_eq!(t.get(Pos::Verb).unwrap().len(), 6);
        assert_eq!(t.get(Pos::Adjective).unwrap().len(), 4);
        assert!(t
            .get(Pos::Name)
            .unwrap()
            .iter()
            .any(|s| s == "iska naam _ hai"));
    }

    #[test]
    fn template_validation() {
        assert!(TemplateSet::parse(r#"{"verb": ["_ _"]}"#).is_err());
        assert!(TemplateSet::parse(r#"{"verb": ["no slot"]}"#).is_err());
        assert!(TemplateSet::parse(r#"{"verb": []}"#).is_err());
        assert!(TemplateSet::parse(r#"{"verb": ["_ hai"]}"#).is_ok());
    }

    #[test]
    fn expand_substitutes_in_order() {
        let t = builtin_templates();
        let s = expand(&t, "ganit", Pos::CommonNoun).unwrap();
        assert_eq!(s[0], "yeha ganit hai");
        assert_eq!(s.len(), 8);
        assert_eq!(expand(&t, "ram", Pos::Name).unwrap().len(), 8);
        assert!(matches!(
            expand(&t, "a_b", Pos::Verb),
            Err(SeatError::SlotInWord(_))
        ));
    }

    #[test]
    fn compose_means_and_skips() {
        let tab = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let c = compose_sentence(&tab, "a b", Pooling::Mean).unwrap();
        assert_eq!(c.vector.as_slice(), &[0.5, 0.5]);
        let c = compose_sentence(&tab, "a zz", Pooling::Mean).unwrap();
        assert_eq!(c.vector.as_slice(), &[1.0, 0.0]);
        assert_eq!(c.skipped, vec!["zz".to_string()]);
        match compose_sentence(&tab, "p q", Pooling::Mean) {
            Err(SeatError::AllTokensOov { tokens, .. }) => assert_eq!(tokens, ["p", "q"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn build_counts_and_flags() {
        let x: Vec<String> = (0..8).map(|i| format!("x{i}")).collect();
        let y: Vec<String> = (0..8).map(|i| format!("y{i}")).collect();
        let xs: Vec<&str> = x.iter().map(String::as_str).collect();
        let ys: Vec<&str> = y.iter().map(String::as_str).collect();
        let t = noun_test(&xs, &ys, &["a"], &["b"], Pos::CommonNoun);
        let st = build_seat_test(&t, &builtin_templates(), true).unwrap();
        assert_eq!(st.lists.x.len(), 64);
        assert_eq!(st.lists.a.len(), 8);
        let st = build_seat_test(&t, &builtin_templates(), false).unwrap();
        assert_eq!(st.lists.a.words, vec!["a".to_string()]);

        let t = noun_test(&xs, &ys, &["a"], &["b"], Pos::Verb);
        assert!(matches!(
            build_seat_test(&t, &builtin_templates(), true),
            Err(SeatError::UnequalExpansion { x: 64, y: 48, .. })
        ));
    }

    #[test]
    fn precomputed_parse_errors() {
        let t = ingest_precomputed("s one\t1 0\ns two\t0 1\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.provenance(), Provenance::Precomputed);
        match ingest_precomputed("a\t1 0\nb\t1 0 0\n".as_bytes()) {
            Err(SeatError::Dimension { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ingest_precomputed("a\t1 0\na\t0 1\n".as_bytes()),
            Err(SeatError::DuplicateSentence { line: 2, .. })
        ));
    }

    #[test]
    fn precomputed_round_trip() {
        let tab = table(&[("a", &[0.1, 0.2]), ("b", &[0.3, 1e-7])]);
        let (st, _) = SentenceTable::compose(&tab, ["a b", "b a", "a"], Pooling::Mean).unwrap();
        let mut buf = Vec::new();
        write_precomputed(&st, &mut buf).unwrap();
        let back = ingest_precomputed(buf.as_slice()).unwrap();
        for (s, v) in st.iter() {
            assert_eq!(back.lookup(s).unwrap(), v);
        }
    }

    #[test]
    fn missing_precomputed_sentences_are_listed() {
        let t = noun_test(&["x"], &["y"], &["a"], &["b"], Pos::CommonNoun);
        let opts = SeatOptions {
            templates: TemplateSet::identity(),
            ..SeatOptions::default()
        };
        let st = ingest_precomputed("x\t1 0\ny\t0 1\na\t1 1\n".as_bytes()).unwrap();
        match prepare_seat(&t, &opts, SentenceSource::Precomputed(&st)) {
            Err(SeatError::MissingSentences { missing, .. }) => assert_eq!(missing, ["b"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_templates_collapse_to_weat() {
        let tab = table(&[
            ("x1", &[1.0, 0.2]),
            ("x2", &[0.9, -0.1]),
            ("y1", &[0.1, 1.0]),
            ("y2", &[-0.2, 0.8]),
            ("a", &[1.0, 0.0]),
            ("b", &[0.0, 1.0]),
        ]);
        let t = noun_test(
            &["x1", "x2"],
            &["y1", "y2"],
            &["a"],
            &["b"],
            Pos::CommonNoun,
        );
        let opts = SeatOptions {
            templates: TemplateSet::identity(),
            ..SeatOptions::default()
        };
        let plan = PermutationPlan::default();
        let seat = run_seat(
            &t,
            &opts,
            SentenceSource::Composed(&tab),
            &plan,
            Conventions::default(),
        )
        .unwrap();
        let words = resolve(&t, &tab, OovPolicy::default(), Script::Romanized).unwrap();
        let weat = run_weat(&words, &plan, Conventions::default()).unwrap();
        assert_eq!(seat, weat);
    }

    #[test]
    fn builtin_tests_all_expand() {
        for t in builtin_suites() {
            build_seat_test(&t, &builtin_templates(), true).unwrap();
        }
    }
}
