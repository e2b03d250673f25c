//! Linear projection, hard debiasing (neutralize + equalize), and LPSG.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{run_all, AssocError, Conventions, PermutationPlan, TestResult};
use crate::embedding::{nfc, EmbeddingTable};
use crate::lexicon::{resolve, AssociationTest, Category, LexiconError, OovPolicy, Script};
use crate::subspace::{
    direction_from_list_pca, direction_from_pairs_pca, orthogonalize, BiasDirection, DirectionSpec,
    SubspaceError,
};
use crate::vector::{Vector, VectorError};

#[derive(Debug, Error)]
pub enum DebiasError {
    #[error("invalid debias plan: {0}")]
    Plan(String),
    #[error("hard debiasing needs a unit-normalized table")]
    NotNormalized,
    #[error("direction {label:?} is not unit-norm (norm {norm})")]
    NotUnit { label: String, norm: f64 },
    #[error("equalize words out of vocabulary: {}", .0.join(", "))]
    OutOfVocabulary(Vec<String>),
    #[error("{0:?} is parallel to the bias direction and vanishes when neutralized")]
    Vanished(String),
    #[error("equalize pair ({a:?}, {b:?}): midpoint off the direction has norm {norm} > 1")]
    OversizedMidpoint { a: String, b: String, norm: f64 },
    #[error("before and after tables differ in dimension ({before} vs {after})")]
    DimensionMismatch { before: usize, after: usize },
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("test {test:?}: {source}")]
    Assoc { test: String, source: AssocError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Linear,
    Hard,
    Lpsg,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    #[default]
    AllVocabulary,
    ListedWords(Vec<String>),
}

impl Scope {
    fn includes(&self, listed: &Option<HashSet<String>>, token: &str) -> bool {
        match (self, listed) {
            (Scope::AllVocabulary, _) => true,
            (Scope::ListedWords(_), Some(set)) => set.contains(token),
            (Scope::ListedWords(_), None) => false,
        }
    }

    fn listed_set(&self) -> Option<HashSet<String>> {
        match self {
            Scope::AllVocabulary => None,
            Scope::ListedWords(w) => Some(w.iter().map(|s| nfc(s)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebiasPlan {
    pub schema_version: u32,
    pub name: String,
    pub method: Method,
    pub direction: DirectionSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equalize_pairs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preserve: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grammatical: Vec<DirectionSpec>,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reconstructed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DebiasPlan {
    pub fn parse(text: &str) -> Result<Self, DebiasError> {
        let plan: Self =
            serde_json::from_str(text).map_err(|e| DebiasError::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), DebiasError> {
        let bad = |m: &str| Err(DebiasError::Plan(format!("{}: {m}", self.name)));
        if self.schema_version != 1 {
            return bad("unsupported schema_version");
        }
        match self.method {
            Method::Hard if self.equalize_pairs.is_empty() => {
                bad("hard debiasing needs equalize_pairs")
            }
            Method::Hard if self.scope != Scope::AllVocabulary => {
                bad("hard debiasing neutralizes all words outside preserve; scope does not apply")
            }
            Method::Hard if !self.grammatical.is_empty() => {
                bad("grammatical directions only apply to lpsg")
            }
            Method::Lpsg if self.grammatical.is_empty() => {
                bad("lpsg needs at least one grammatical direction")
            }
            Method::Linear | Method::Lpsg
                if !self.equalize_pairs.is_empty() || !self.preserve.is_empty() =>
            {
                bad("equalize_pairs and preserve only apply to hard debiasing")
            }
            Method::Linear if !self.grammatical.is_empty() => {
                bad("grammatical directions only apply to lpsg")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DebiasOutcome {
    pub table: EmbeddingTable,
    /// The direction that was removed.
    pub direction: BiasDirection,
    /// Grammatical directions (LPSG only).
    pub grammatical: Vec<BiasDirection>,
    pub warnings: Vec<String>,
}

fn check_unit(d: &BiasDirection) -> Result<(), DebiasError> {
    let norm = d.vector().norm();
    if (norm - 1.0).abs() > crate::subspace::UNIT_TOLERANCE {
        return Err(DebiasError::NotUnit {
            label: d.label.clone(),
            norm,
        });
    }
    Ok(())
}

/// `w' = w − ⟨w, v⟩ v` for every in-scope word; others are copied.
/// The result is not normalized.
pub fn linear_project(
    table: &EmbeddingTable,
    direction: &BiasDirection,
    scope: &Scope,
) -> Result<EmbeddingTable, DebiasError> {
    check_unit(direction)?;
    let v = direction.vector();
    let listed = scope.listed_set();
    table.try_map(|token, w| -> Result<Vector, DebiasError> {
        if scope.includes(&listed, token) {
            Ok(w.reject(v)?)
        } else {
            Ok(w.clone())
        }
    })
}

/// Neutralizes every word outside `preserve` and the equalize pairs, then
/// re-centres each pair symmetrically about the direction.
pub fn hard_debias(
    table: &EmbeddingTable,
    direction: &BiasDirection,
    equalize_pairs: &[(String, String)],
    preserve: &[String],
) -> Result<(EmbeddingTable, Vec<String>), DebiasError> {
    if !table.is_normalized() {
        return Err(DebiasError::NotNormalized);
    }
    check_unit(direction)?;
    let v = direction.vector();
    let mut oov = Vec::new();
    let mut excluded: HashSet<String> = preserve.iter().map(|w| nfc(w)).collect();
    for (a, b) in equalize_pairs {
        for w in [a, b] {
            if !table.contains(w) {
                oov.push(w.clone());
            }
            excluded.insert(nfc(w));
        }
    }
    if !oov.is_empty() {
        return Err(DebiasError::OutOfVocabulary(oov));
    }

    let mut warnings = Vec::new();
    let mut equalized: HashMap<String, Vector> = HashMap::new();
    for (a, b) in equalize_pairs {
        let w1 = table.lookup(a).expect("checked above");
        let w2 = table.lookup(b).expect("checked above");
        let (p1, p2) = (w1.dot(v)?, w2.dot(v)?);
        if p1 == p2 {
            warnings.push(format!(
                "equalize pair ({a}, {b}) projects equally onto the direction; left unchanged"
            ));
            continue;
        }
        let mu = w1.add(w2)?.scaled(0.5);
        let mu_b = mu.dot(v)?;
        let nu = mu.axpy(-mu_b, v)?;
        let nu_norm = nu.norm();
        if nu_norm > 1.0 + 1e-9 {
            return Err(DebiasError::OversizedMidpoint {
                a: a.clone(),
                b: b.clone(),
                norm: nu_norm,
            });
        }
        let k = (1.0 - nu_norm * nu_norm).max(0.0).sqrt();
        for (word, p) in [(a, p1), (b, p2)] {
            let sign = (p - mu_b).signum();
            let out = nu.axpy(k * sign, v)?;
            if equalized.insert(nfc(word), out).is_some() {
                warnings.push(format!(
                    "{word} appears in more than one equalize pair; the last one wins"
                ));
            }
        }
    }

    let out = table.try_map(|token, w| -> Result<Vector, DebiasError> {
        if let Some(e) = equalized.get(token) {
            return Ok(e.clone());
        }
        if excluded.contains(token) {
            return Ok(w.clone());
        }
        let r = w.reject(v)?;
        r.normalized()
            .map_err(|_| DebiasError::Vanished(token.to_owned()))
    })?;
    let out = out.assert_normalized().ok_or(DebiasError::NotNormalized)?;
    Ok((out, warnings))
}

/// LPSG with `d_PCA` taken from PCA over `pairs`.
pub fn lpsg_debias(
    table: &EmbeddingTable,
    pairs: &[(String, String)],
    grammatical: &[DirectionSpec],
    scope: &Scope,
) -> Result<DebiasOutcome, DebiasError> {
    let d_pca = direction_from_pairs_pca(table, pairs)?.with_label("d_PCA");
    lpsg_with_direction(table, &d_pca, grammatical, scope)
}

/// Projects along `d_s`, the semantic direction made orthogonal to every
/// grammatical direction.
pub fn lpsg_with_direction(
    table: &EmbeddingTable,
    semantic: &BiasDirection,
    grammatical: &[DirectionSpec],
    scope: &Scope,
) -> Result<DebiasOutcome, DebiasError> {
    if grammatical.is_empty() {
        return Err(DebiasError::Plan(
            "lpsg needs at least one grammatical direction".into(),
        ));
    }
    let mut known = HashMap::new();
    let mut grams = Vec::with_capacity(grammatical.len());
    for spec in grammatical {
        let d = spec.compute(table, &known)?;
        known.insert(spec.label.clone(), d.clone());
        grams.push(d);
    }
    let d_s = orthogonalize(semantic, &grams)?.with_label("d_s");
    let out = linear_project(table, &d_s, scope)?;
    Ok(DebiasOutcome {
        table: out,
        direction: d_s,
        grammatical: grams,
        warnings: Vec::new(),
    })
}

/// Religion direction from last names, made orthogonal to the entity direction.
pub fn religion_direction(
    table: &EmbeddingTable,
    hindu_lastnames: &[String],
    muslim_lastnames: &[String],
    entity_words: &[String],
) -> Result<BiasDirection, DebiasError> {
    let names: Vec<String> = hindu_lastnames
        .iter()
        .chain(muslim_lastnames)
        .cloned()
        .collect();
    let d_last = direction_from_list_pca(table, &names)?.with_label("d_last");
    let d_ent = direction_from_list_pca(table, entity_words)?.with_label("d_ent");
    Ok(orthogonalize(&d_last, &[d_ent])?)
}

/// Applies a validated plan.
pub fn apply_plan(table: &EmbeddingTable, plan: &DebiasPlan) -> Result<DebiasOutcome, DebiasError> {
    plan.validate()?;
    let direction = plan.direction.compute(table, &HashMap::new())?;
    let mut warnings: Vec<String> = direction
        .oov
        .iter()
        .map(|w| format!("direction {}: {w} is out of vocabulary", direction.label))
        .collect();
    match plan.method {
        Method::Linear => Ok(DebiasOutcome {
            table: linear_project(table, &direction, &plan.scope)?,
            direction,
            grammatical: Vec::new(),
            warnings,
        }),
        Method::Hard => {
            let (out, w) = hard_debias(table, &direction, &plan.equalize_pairs, &plan.preserve)?;
            warnings.extend(w);
            Ok(DebiasOutcome {
                table: out,
                direction,
                grammatical: Vec::new(),
                warnings,
            })
        }
        Method::Lpsg => {
            let mut outcome =
                lpsg_with_direction(table, &direction, &plan.grammatical, &plan.scope)?;
            warnings.append(&mut outcome.warnings);
            for g in &outcome.grammatical {
                warnings.extend(
                    g.oov
                        .iter()
                        .map(|w| format!("direction {}: {w} is out of vocabulary", g.label)),
                );
            }
            outcome.warnings = warnings;
            Ok(outcome)
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub oov_policy: OovPolicy,
    pub script: Script,
    pub conventions: Conventions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub test_name: String,
    pub category: Category,
    /// True for meaningful-encoding tests, whose effect should survive debiasing.
    pub retention: bool,
    pub before: TestResult,
    pub after: TestResult,
}

/// Runs every test on both tables.
pub fn evaluate_before_after(
    before: &EmbeddingTable,
    after: &EmbeddingTable,
    tests: &[AssociationTest],
    plan: &PermutationPlan,
    opts: EvalOptions,
) -> Result<Vec<ComparisonRow>, DebiasError> {
    if before.dimension() != after.dimension() {
        return Err(DebiasError::DimensionMismatch {
            before: before.dimension(),
            after: after.dimension(),
        });
    }
    let run = |table: &EmbeddingTable| -> Result<Vec<TestResult>, DebiasError> {
        let resolved = tests
            .iter()
            .map(|t| resolve(t, table, opts.oov_policy, opts.script))
            .collect::<Result<Vec<_>, _>>()?;
        run_all(&resolved, plan, opts.conventions)
            .into_iter()
            .zip(tests)
            .map(|(r, t)| {
                r.map_err(|source| DebiasError::Assoc {
                    test: t.name.clone(),
                    source,
                })
            })
            .collect()
    };
    let b = run(before)?;
    let a = run(after)?;
    Ok(b.into_iter()
        .zip(a)
        .map(|(before, after)| ComparisonRow {
            test_name: before.test_name.clone(),
            category: before.category,
            retention: before.category == Category::MeaningfulEncoding,
            before,
            after,
        })
        .collect())
}
