//! Association-test word lists: schema, validation, the bundled Hindi battery,
//! and resolution of word lists against an embedding table.
//!
//! A suite document is JSON with a top-level `tests` array. Each test names two
//! target lists (`x`, `y`) and two attribute lists (`a`, `b`). Bundled lists are
//! stored romanized exactly as published, with an optional parallel
//! `devanagari` array per list.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{nfc, VectorSource};
use crate::vector::Vector;

pub const SCHEMA_VERSION: u32 = 1;

const BUILTIN_SUITE: &str = include_str!("../../../data/suites/builtin.json");
const TRANSLATED_SUITE: &str = include_str!("../../../data/suites/translated.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("suite document does not match the schema: {0}")]
    Schema(String),
    #[error("unsupported suite schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("duplicate test name {0:?} in suite")]
    DuplicateTest(String),
    #[error("test {test:?}: target lists differ in size (x has {x}, y has {y})")]
    SizeMismatch { test: String, x: usize, y: usize },
    #[error("test {test:?}: list {list} is empty")]
    EmptyList { test: String, list: ListId },
    #[error("test {test:?}: list {list} contains {word:?} more than once")]
    DuplicateWord {
        test: String,
        list: ListId,
        word: String,
    },
    #[error("test {test:?}: list {list} has {words} words but {devanagari} devanagari forms")]
    DevanagariLength {
        test: String,
        list: ListId,
        words: usize,
        devanagari: usize,
    },
    #[error("test {test:?}: list {list} has no devanagari forms")]
    MissingDevanagari { test: String, list: ListId },
    #[error("test {test:?}: ME tests must carry a description of the information they retain")]
    UndocumentedMe { test: String },
    #[error("test {test:?}: pos tag given for {word:?}, which is in none of its lists")]
    StrayPosTag { test: String, word: String },
    #[error("test {test:?}: test name must be non-empty")]
    EmptyName { test: String },
    #[error("test {test:?}: out-of-vocabulary tokens {}", format_missing(.missing))]
    OutOfVocabulary {
        test: String,
        missing: Vec<(ListId, String)>,
    },
    #[error("test {test:?}: list {list} kept {kept} of {original} words after dropping out-of-vocabulary tokens")]
    OverPruned {
        test: String,
        list: ListId,
        kept: usize,
        original: usize,
    },
    #[error("key dimension {found} does not match table dimension {expected} for test {test:?}")]
    Dimension {
        test: String,
        expected: usize,
        found: usize,
    },
}

fn format_missing(missing: &[(ListId, String)]) -> String {
    missing
        .iter()
        .map(|(l, t)| format!("{l}:{t}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Weat,
    Seat,
}

/// Bias-measuring versus meaningful-encoding (information retention) test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "BM")]
    BiasMeasuring,
    #[serde(rename = "ME")]
    MeaningfulEncoding,
}

impl Category {
    pub fn short(self) -> &'static str {
        match self {
            Category::BiasMeasuring => "BM",
            Category::MeaningfulEncoding => "ME",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Translated,
    LanguageSpecific,
    Custom,
}

/// Part of speech, used to pick bleached sentence templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pos {
    Name,
    CommonNoun,
    Verb,
    Adjective,
}

impl Pos {
    pub const ALL: [Pos; 4] = [Pos::Name, Pos::CommonNoun, Pos::Verb, Pos::Adjective];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Name => "name",
            Pos::CommonNoun => "common-noun",
            Pos::Verb => "verb",
            Pos::Adjective => "adjective",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListId {
    X,
    Y,
    A,
    B,
}

impl ListId {
    pub const ALL: [ListId; 4] = [ListId::X, ListId::Y, ListId::A, ListId::B];
}

impl fmt::Display for ListId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ListId::X => "x",
            ListId::Y => "y",
            ListId::A => "a",
            ListId::B => "b",
        })
    }
}

/// Which written form of the bundled words to look up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Script {
    #[default]
    Romanized,
    Devanagari,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordList {
    pub label: String,
    pub words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub devanagari: Option<Vec<String>>,
}

impl WordList {
    pub fn new(label: impl Into<String>, words: Vec<String>) -> Self {
        Self {
            label: label.into(),
            words,
            devanagari: None,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// The strings to look up for `script`, parallel to `words`.
    pub fn surface_forms(&self, script: Script) -> Option<&[String]> {
        match script {
            Script::Romanized => Some(&self.words),
            Script::Devanagari => self.devanagari.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestLists {
    pub x: WordList,
    pub y: WordList,
    pub a: WordList,
    pub b: WordList,
}

impl TestLists {
    pub fn get(&self, id: ListId) -> &WordList {
        match id {
            ListId::X => &self.x,
            ListId::Y => &self.y,
            ListId::A => &self.a,
            ListId::B => &self.b,
        }
    }

    pub fn get_mut(&mut self, id: ListId) -> &mut WordList {
        match id {
            ListId::X => &mut self.x,
            ListId::Y => &mut self.y,
            ListId::A => &mut self.a,
            ListId::B => &mut self.b,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Two target lists and two attribute lists plus metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationTest {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub kind: TestKind,
    pub category: Category,
    pub variant: Variant,
    /// Set when the lists are not verbatim from a published source.
    #[serde(default, skip_serializing_if = "is_false")]
    pub reconstructed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub lists: TestLists,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pos_tags: BTreeMap<String, Pos>,
}

impl AssociationTest {
    pub fn validate(&self) -> Result<(), LexiconError> {
        let test = || self.name.clone();
        if self.name.trim().is_empty() {
            return Err(LexiconError::EmptyName { test: test() });
        }
        for id in ListId::ALL {
            let list = self.lists.get(id);
            if list.is_empty() {
                return Err(LexiconError::EmptyList {
                    test: test(),
                    list: id,
                });
            }
            check_unique(&self.name, id, &list.words)?;
            if let Some(dev) = &list.devanagari {
                if dev.len() != list.words.len() {
                    return Err(LexiconError::DevanagariLength {
                        test: test(),
                        list: id,
                        words: list.words.len(),
                        devanagari: dev.len(),
                    });
                }
                check_unique(&self.name, id, dev)?;
            }
        }
        let (x, y) = (self.lists.x.len(), self.lists.y.len());
        if x != y {
            return Err(LexiconError::SizeMismatch { test: test(), x, y });
        }
        if self.category == Category::MeaningfulEncoding
            && self.description.as_deref().unwrap_or("").trim().is_empty()
        {
            return Err(LexiconError::UndocumentedMe { test: test() });
        }
        for word in self.pos_tags.keys() {
            let known = ListId::ALL
                .iter()
                .any(|&id| self.lists.get(id).words.iter().any(|w| w == word));
            if !known {
                return Err(LexiconError::StrayPosTag {
                    test: test(),
                    word: word.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn pos_of(&self, word: &str) -> Option<Pos> {
        self.pos_tags.get(word).copied()
    }
}

fn check_unique(test: &str, list: ListId, words: &[String]) -> Result<(), LexiconError> {
    let mut seen = HashSet::with_capacity(words.len());
    for w in words {
        if !seen.insert(nfc(w)) {
            return Err(LexiconError::DuplicateWord {
                test: test.to_owned(),
                list,
                word: w.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub tests: Vec<AssociationTest>,
}

impl SuiteDocument {
    pub fn new(tests: Vec<AssociationTest>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            note: None,
            tests,
        }
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let doc: SuiteDocument =
            serde_json::from_str(text).map_err(|e| LexiconError::Schema(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(LexiconError::SchemaVersion {
                found: self.schema_version,
            });
        }
        let mut names = HashSet::new();
        for t in &self.tests {
            if !names.insert(t.name.as_str()) {
                return Err(LexiconError::DuplicateTest(t.name.clone()));
            }
            t.validate()?;
        }
        Ok(())
    }

    /// Pretty JSON with a trailing newline; the bundled files are stored in
    /// exactly this rendering.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serialization cannot fail");
        s.push('\n');
        s
    }
}

/// Reads and validates a suite document.
pub fn load_suite<R: Read>(mut source: R) -> Result<Vec<AssociationTest>, LexiconError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| LexiconError::Schema(e.to_string()))?;
    Ok(SuiteDocument::parse(&text)?.tests)
}

pub fn builtin_document_text() -> &'static str {
    BUILTIN_SUITE
}

pub fn translated_document_text() -> &'static str {
    TRANSLATED_SUITE
}

/// The bundled language-specific battery: 3 gender BM, 4 gender ME,
/// 2 caste BM, 2 religion BM, 1 religion ME, 1 occupation BM.
pub fn builtin_suites() -> Vec<AssociationTest> {
    SuiteDocument::parse(BUILTIN_SUITE)
        .expect("bundled suite is valid")
        .tests
}

/// Translated-variant counterparts of the six comparison rows. Every test is
/// flagged `reconstructed`: the lists are re-derived translations, not
/// verbatim published lists.
pub fn translated_suites() -> Vec<AssociationTest> {
    SuiteDocument::parse(TRANSLATED_SUITE)
        .expect("bundled suite is valid")
        .tests
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    Strict,
    #[default]
    DropWithWarning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovReason {
    /// Token absent from the table.
    Missing,
    /// Dropped from the end of the longer target list to restore |X| == |Y|.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovEntry {
    pub list: ListId,
    pub token: String,
    pub reason: OovReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedList {
    pub label: String,
    /// Canonical (romanized) words that survived resolution.
    pub words: Vec<String>,
    /// The surface forms actually looked up, parallel to `words`.
    pub tokens: Vec<String>,
    pub vectors: Vec<Vector>,
    pub original_len: usize,
}

impl ResolvedList {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn truncate(&mut self, n: usize) -> Vec<String> {
        self.words.truncate(n);
        self.vectors.truncate(n);
        self.tokens.split_off(n)
    }
}

/// A test whose words have been replaced by vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedTest {
    pub source: AssociationTest,
    pub x: ResolvedList,
    pub y: ResolvedList,
    pub a: ResolvedList,
    pub b: ResolvedList,
    pub oov_report: Vec<OovEntry>,
}

impl ResolvedTest {
    pub fn name(&self) -> &str {
        &self.source.name
    }

    pub fn list(&self, id: ListId) -> &ResolvedList {
        match id {
            ListId::X => &self.x,
            ListId::Y => &self.y,
            ListId::A => &self.a,
            ListId::B => &self.b,
        }
    }

    /// The source test restricted to the words that survived resolution.
    pub fn pruned_test(&self) -> AssociationTest {
        let mut t = self.source.clone();
        for id in ListId::ALL {
            let kept = &self.list(id).words;
            let list = t.lists.get_mut(id);
            if let Some(dev) = &list.devanagari {
                let dev: Vec<String> = list
                    .words
                    .iter()
                    .zip(dev)
                    .filter(|(w, _)| kept.contains(w))
                    .map(|(_, d)| d.clone())
                    .collect();
                list.devanagari = Some(dev);
            }
            list.words = kept.clone();
        }
        t.pos_tags.retain(|w, _| {
            ListId::ALL
                .iter()
                .any(|&id| self.list(id).words.iter().any(|k| k == w))
        });
        t
    }
}

/// Looks every word of `test` up in `table`.
///
/// Under [`OovPolicy::DropWithWarning`] missing tokens are removed and
/// reported; if the target lists end up unequal the longer one is truncated
/// from the end. A list that lost words may not end below two entries or below
/// half of its original size.
pub fn resolve<S: VectorSource + ?Sized>(
    test: &AssociationTest,
    table: &S,
    policy: OovPolicy,
    script: Script,
) -> Result<ResolvedTest, LexiconError> {
    let mut lists = Vec::with_capacity(4);
    let mut missing: Vec<(ListId, String)> = Vec::new();
    for id in ListId::ALL {
        let list = test.lists.get(id);
        let forms = list
            .surface_forms(script)
            .ok_or_else(|| LexiconError::MissingDevanagari {
                test: test.name.clone(),
                list: id,
            })?;
        let mut resolved = ResolvedList {
            label: list.label.clone(),
            words: Vec::with_capacity(list.len()),
            tokens: Vec::with_capacity(list.len()),
            vectors: Vec::with_capacity(list.len()),
            original_len: list.len(),
        };
        for (word, form) in list.words.iter().zip(forms) {
            match table.get(form) {
                Some(v) => {
                    if v.dim() != table.dimension() {
                        return Err(LexiconError::Dimension {
                            test: test.name.clone(),
                            expected: table.dimension(),
                            found: v.dim(),
                        });
                    }
                    resolved.words.push(word.clone());
                    resolved.tokens.push(form.clone());
                    resolved.vectors.push(v.clone());
                }
                None => missing.push((id, form.clone())),
            }
        }
        lists.push(resolved);
    }

    if policy == OovPolicy::Strict && !missing.is_empty() {
        return Err(LexiconError::OutOfVocabulary {
            test: test.name.clone(),
            missing,
        });
    }

    let mut report: Vec<OovEntry> = missing
        .into_iter()
        .map(|(list, token)| OovEntry {
            list,
            token,
            reason: OovReason::Missing,
        })
        .collect();

    let mut it = lists.into_iter();
    let (mut x, mut y, a, b) = (
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    );
    if x.len() != y.len() {
        let n = x.len().min(y.len());
        let (id, longer) = if x.len() > y.len() {
            (ListId::X, &mut x)
        } else {
            (ListId::Y, &mut y)
        };
        for token in longer.truncate(n) {
            report.push(OovEntry {
                list: id,
                token,
                reason: OovReason::Truncated,
            });
        }
    }

    for (id, list) in ListId::ALL.into_iter().zip([&x, &y, &a, &b]) {
        let removed = list.original_len - list.len();
        if removed > 0 && (list.len() < 2 || removed * 2 > list.original_len) {
            return Err(LexiconError::OverPruned {
                test: test.name.clone(),
                list: id,
                kept: list.len(),
                original: list.original_len,
            });
        }
        if list.is_empty() {
            return Err(LexiconError::EmptyList {
                test: test.name.clone(),
                list: id,
            });
        }
    }

    Ok(ResolvedTest {
        source: test.clone(),
        x,
        y,
        a,
        b,
        oov_report: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingTable;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    fn simple_test(x: &[&str], y: &[&str], a: &[&str], b: &[&str]) -> AssociationTest {
        AssociationTest {
            name: "t".into(),
            description: None,
            kind: TestKind::Weat,
            category: Category::BiasMeasuring,
            variant: Variant::Custom,
            reconstructed: false,
            note: None,
            lists: TestLists {
                x: WordList::new("X", words(x)),
                y: WordList::new("Y", words(y)),
                a: WordList::new("A", words(a)),
                b: WordList::new("B", words(b)),
            },
            pos_tags: BTreeMap::new(),
        }
    }

    fn table(tokens: &[&str]) -> EmbeddingTable {
        EmbeddingTable::from_entries(tokens.iter().enumerate().map(|(i, t)| {
            let mut v = vec![0.0; 4];
            v[i % 4] = 1.0;
            v[(i + 1) % 4] = 0.5 + i as f64;
            (t.to_string(), Vector::new(v).unwrap())
        }))
        .unwrap()
    }

    #[test]
    fn size_mismatch_names_test_and_sizes() {
        let t = simple_test(&["a", "b", "c"], &["d", "e", "f", "g"], &["h"], &["i"]);
        let err = t.validate().unwrap_err();
        assert_eq!(
            err,
            LexiconError::SizeMismatch {
                test: "t".into(),
                x: 3,
                y: 4
            }
        );
        assert!(err.to_string().contains("3") && err.to_string().contains("4"));
    }

    #[test]
    fn duplicate_word_rejected() {
        let t = simple_test(&["a", "a"], &["b", "c"], &["h"], &["i"]);
        match t.validate().unwrap_err() {
            LexiconError::DuplicateWord { word, list, .. } => {
                assert_eq!(word, "a");
                assert_eq!(list, ListId::X);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_list_rejected() {
        let t = simple_test(&["a"], &["b"], &[], &["i"]);
        assert!(matches!(
            t.validate(),
            Err(LexiconError::EmptyList {
                list: ListId::A,
                ..
            })
        ));
    }

    #[test]
    fn me_requires_description() {
        let mut t = simple_test(&["a"], &["b"], &["c"], &["d"]);
        t.category = Category::MeaningfulEncoding;
        assert!(matches!(
            t.validate(),
            Err(LexiconError::UndocumentedMe { .. })
        ));
        t.description = Some("gendered verb forms".into());
        t.validate().unwrap();
    }

    #[test]
    fn schema_violation_reported() {
        let err =
            load_suite(r#"{"schema_version":1,"tests":[{"name":"x"}]}"#.as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::Schema(_)));
    }

    #[test]
    fn gender_bm_document_loads() {
        let doc = r#"{"schema_version":1,"tests":[{"name":"g","kind":"weat","category":"BM","variant":"custom",
          "lists":{"x":{"label":"math","words":["ganit","beejganit","jyamiti","kalan","sameekaran","ganna","sankhya","yog"]},
                   "y":{"label":"arts","words":["kavita","kala","nritya","sahitya","upanyas","raag","naatak","murti"]},
                   "a":{"label":"m","words":["purush","aadmi","ladka","bhai","pati","chacha","maama","beta"]},
                   "b":{"label":"f","words":["mahila","aurat","ladki","behen","patni","chachi","maami","beti"]}}}]}"#;
        let tests = load_suite(doc.as_bytes()).unwrap();
        assert_eq!(tests.len(), 1);
        assert_eq!(tests[0].lists.x.len(), 8);
    }

    #[test]
    fn builtin_battery_shape() {
        let tests = builtin_suites();
        assert_eq!(tests.len(), 13);
        let gender_me = tests
            .iter()
            .filter(|t| t.name.starts_with("gender") && t.category == Category::MeaningfulEncoding)
            .count();
        assert_eq!(gender_me, 4);
        let caste_adj = tests.iter().find(|t| t.name == "caste-adjectives").unwrap();
        assert!(caste_adj.lists.x.words.iter().any(|w| w == "ameer"));
        assert!(caste_adj.lists.x.words.iter().any(|w| w == "gyani"));
        for t in tests.iter().chain(translated_suites().iter()) {
            t.validate().unwrap();
        }
        assert!(translated_suites()
            .iter()
            .all(|t| t.reconstructed && t.variant == Variant::Translated));
    }

    #[test]
    fn builtin_document_round_trips_byte_identically() {
        let doc = SuiteDocument::parse(builtin_document_text()).unwrap();
        assert_eq!(doc.to_json(), builtin_document_text());
        let doc = SuiteDocument::parse(translated_document_text()).unwrap();
        assert_eq!(doc.to_json(), translated_document_text());
    }

    #[test]
    fn builtin_has_pos_for_every_word() {
        for t in builtin_suites() {
            for id in ListId::ALL {
                for w in &t.lists.get(id).words {
                    assert!(t.pos_of(w).is_some(), "{} {w}", t.name);
                }
            }
        }
    }

    #[test]
    fn full_coverage_resolves_unchanged() {
        let t = simple_test(&["a", "b"], &["c", "d"], &["e", "f"], &["g", "h"]);
        let tab = table(&["a", "b", "c", "d", "e", "f", "g", "h"]);
        let r = resolve(&t, &tab, OovPolicy::Strict, Script::Romanized).unwrap();
        assert!(r.oov_report.is_empty());
        assert_eq!(r.x.tokens, words(&["a", "b"]));
        assert_eq!(r.pruned_test(), t);
    }

    #[test]
    fn one_oov_attribute_dropped() {
        let t = simple_test(&["a", "b"], &["c", "d"], &["e", "f", "z"], &["g", "h"]);
        let tab = table(&["a", "b", "c", "d", "e", "f", "g", "h"]);
        let r = resolve(&t, &tab, OovPolicy::DropWithWarning, Script::Romanized).unwrap();
        assert_eq!(r.a.len(), 2);
        assert_eq!(
            r.oov_report,
            vec![OovEntry {
                list: ListId::A,
                token: "z".into(),
                reason: OovReason::Missing
            }]
        );
        assert!(matches!(
            resolve(&t, &tab, OovPolicy::Strict, Script::Romanized),
            Err(LexiconError::OutOfVocabulary { .. })
        ));
    }

    #[test]
    fn target_lists_re_equalized_by_truncation() {
        let xs = ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8"];
        let ys = ["y1", "y2", "y3", "y4", "y5", "y6", "y7", "y8"];
        let t = simple_test(&xs, &ys, &["a1", "a2"], &["b1", "b2"]);
        let mut vocab: Vec<&str> = xs.iter().copied().filter(|w| *w != "x3").collect();
        vocab.extend(ys);
        vocab.extend(["a1", "a2", "b1", "b2"]);
        let r = resolve(
            &t,
            &table(&vocab),
            OovPolicy::DropWithWarning,
            Script::Romanized,
        )
        .unwrap();
        assert_eq!(r.x.len(), 7);
        assert_eq!(r.y.len(), 7);
        assert_eq!(r.y.tokens.last().unwrap(), "y7");
        assert_eq!(
            r.oov_report,
            vec![
                OovEntry {
                    list: ListId::X,
                    token: "x3".into(),
                    reason: OovReason::Missing
                },
                OovEntry {
                    list: ListId::Y,
                    token: "y8".into(),
                    reason: OovReason::Truncated
                },
            ]
        );
    }

    #[test]
    fn over_pruning_is_an_error() {
        let t = simple_test(&["a", "b"], &["c", "d"], &["e", "f"], &["g", "h"]);
        let tab = table(&["a", "b", "c", "d", "e", "g", "h"]);
        assert!(matches!(
            resolve(&t, &tab, OovPolicy::DropWithWarning, Script::Romanized),
            Err(LexiconError::OverPruned {
                list: ListId::A,
                kept: 1,
                original: 2,
                ..
            })
        ));
        let t = simple_test(
            &["a", "b", "c", "d", "e"],
            &["f", "g", "h", "i", "j"],
            &["k", "l"],
            &["m", "n"],
        );
        let tab = table(&["a", "b", "f", "g", "h", "i", "j", "k", "l", "m", "n"]);
        assert!(matches!(
            resolve(&t, &tab, OovPolicy::DropWithWarning, Script::Romanized),
            Err(LexiconError::OverPruned {
                list: ListId::X,
                kept: 2,
                original: 5,
                ..
            })
        ));
    }

    #[test]
    fn devanagari_script_uses_parallel_forms() {
        let mut t = simple_test(&["ganit"], &["kala"], &["purush"], &["mahila"]);
        t.lists.x.devanagari = Some(words(&["गणित"]));
        let tab = table(&["गणित", "kala", "purush", "mahila"]);
        assert!(matches!(
            resolve(&t, &tab, OovPolicy::Strict, Script::Devanagari),
            Err(LexiconError::MissingDevanagari {
                list: ListId::Y,
                ..
            })
        ));
        t.lists.y.devanagari = Some(words(&["kala"]));
        t.lists.a.devanagari = Some(words(&["purush"]));
        t.lists.b.devanagari = Some(words(&["mahila"]));
        let r = resolve(&t, &tab, OovPolicy::Strict, Script::Devanagari).unwrap();
        assert_eq!(r.x.words, words(&["ganit"]));
        assert_eq!(r.x.tokens, words(&["गणित"]));
    }
}
