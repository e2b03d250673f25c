//! Bias directions: from a word pair, from PCA over paired differences or a
//! word list, and orthogonalized against other directions.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{
    load_embeddings, write_embeddings, EmbeddingError, EmbeddingTable, TextFormat, VectorSource,
};
use crate::vector::{dot, Vector, VectorError};

/// Directions must have unit norm to within this.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// Orthogonalization fails when less than this much of the direction survives.
pub const MIN_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("out of vocabulary: {}", .0.join(", "))]
    OutOfVocabulary(Vec<String>),
    #[error("{a:?} and {b:?} have identical vectors; their difference has no direction")]
    ZeroDifference { a: String, b: String },
    #[error("PCA over pairs needs at least 2 resolvable pairs, found {found} (use a single pair direction instead)")]
    TooFewPairs { found: usize },
    #[error("PCA over a word list needs at least 3 resolvable words, found {found}")]
    TooFewWords { found: usize },
    #[error("principal component needs at least 2 vectors, got {0}")]
    TooFewRows(usize),
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("input matrix is zero")]
    ZeroMatrix,
    #[error("direction {label:?} lies in the span of {parents:?} (residual norm {residual:e})")]
    VanishingResidual {
        label: String,
        parents: Vec<String>,
        residual: f64,
    },
    #[error("direction {label:?} is not unit-norm (norm {norm})")]
    NotUnit { label: String, norm: f64 },
    #[error("direction spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Pair {
        a: String,
        b: String,
    },
    PcaPairs {
        pairs: usize,
    },
    PcaList {
        words: usize,
    },
    Orthogonalized {
        base: Box<Provenance>,
        parents: Vec<String>,
    },
    /// Read back from a direction file.
    Stored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasDirection {
    pub label: String,
    vector: Vector,
    pub provenance: Provenance,
    /// Words skipped because they had no vector.
    pub oov: Vec<String>,
}

impl BiasDirection {
    /// Normalizes `vector` and wraps it.
    pub fn new(
        label: impl Into<String>,
        vector: &Vector,
        provenance: Provenance,
    ) -> Result<Self, SubspaceError> {
        Ok(Self {
            label: label.into(),
            vector: vector.normalized()?,
            provenance,
            oov: Vec::new(),
        })
    }

    pub fn vector(&self) -> &Vector {
        &self.vector
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn check_unit(&self) -> Result<(), SubspaceError> {
        let norm = self.vector.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(SubspaceError::NotUnit {
                label: self.label.clone(),
                norm,
            });
        }
        Ok(())
    }
}

fn lookup<'a, S: VectorSource + ?Sized>(
    table: &'a S,
    word: &str,
    oov: &mut Vec<String>,
) -> Option<&'a Vector> {
    let v = table.get(word);
    if v.is_none() {
        oov.push(word.to_owned());
    }
    v
}

/// `normalize(e(a) − e(b))`.
pub fn direction_from_pair<S: VectorSource + ?Sized>(
    table: &S,
    a: &str,
    b: &str,
) -> Result<BiasDirection, SubspaceError> {
    let mut oov = Vec::new();
    let va = lookup(table, a, &mut oov);
    let vb = lookup(table, b, &mut oov);
    let (Some(va), Some(vb)) = (va, vb) else {
        return Err(SubspaceError::OutOfVocabulary(oov));
    };
    let diff = va.sub(vb)?;
    if diff.norm() == 0.0 {
        return Err(SubspaceError::ZeroDifference {
            a: a.to_owned(),
            b: b.to_owned(),
        });
    }
    BiasDirection::new(
        format!("{a}-{b}"),
        &diff,
        Provenance::Pair {
            a: a.to_owned(),
            b: b.to_owned(),
        },
    )
}

/// Top principal component of the uncentered differences `m_i − f_i`.
/// Pairs with an out-of-vocabulary side are skipped and listed in `oov`.
pub fn direction_from_pairs_pca<S: VectorSource + ?Sized>(
    table: &S,
    pairs: &[(String, String)],
) -> Result<BiasDirection, SubspaceError> {
    let mut oov = Vec::new();
    let mut diffs = Vec::with_capacity(pairs.len());
    for (m, f) in pairs {
        let vm = lookup(table, m, &mut oov);
        let vf = lookup(table, f, &mut oov);
        if let (Some(vm), Some(vf)) = (vm, vf) {
            diffs.push(vm.sub(vf)?);
        }
    }
    if diffs.len() < 2 {
        return Err(SubspaceError::TooFewPairs { found: diffs.len() });
    }
    let pc = top_principal_component(&diffs, false)?;
    let mut dir = BiasDirection::new(
        "pca-pairs",
        &pc,
        Provenance::PcaPairs { pairs: diffs.len() },
    )?;
    dir.oov = oov;
    Ok(dir)
}

/// Top principal component of the mean-centered word vectors.
pub fn direction_from_list_pca<S: VectorSource + ?Sized>(
    table: &S,
    words: &[String],
) -> Result<BiasDirection, SubspaceError> {
    let mut oov = Vec::new();
    let rows: Vec<Vector> = words
        .iter()
        .filter_map(|w| lookup(table, w, &mut oov).cloned())
        .collect();
    if rows.len() < 3 {
        return Err(SubspaceError::TooFewWords { found: rows.len() });
    }
    let pc = match top_principal_component(&rows, true) {
        Err(SubspaceError::ZeroMatrix) => return Err(SubspaceError::ZeroVariance),
        other => other?,
    };
    let mut dir = BiasDirection::new("pca-list", &pc, Provenance::PcaList { words: rows.len() })?;
    dir.oov = oov;
    Ok(dir)
}

/// Removes from `direction` every component in the span of `against`, then
/// renormalizes. The result is labeled `<label>'`.
///
/// The parents are first made orthonormal among themselves (in the given
/// order) so the result is orthogonal to each of them even when they are not
/// orthogonal to one another; for mutually orthogonal parents this is the
/// same as subtracting each projection in turn.
pub fn orthogonalize(
    direction: &BiasDirection,
    against: &[BiasDirection],
) -> Result<BiasDirection, SubspaceError> {
    direction.check_unit()?;
    let dim = direction.vector.dim();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(against.len());
    for g in against {
        g.check_unit()?;
        if g.vector.dim() != dim {
            return Err(VectorError::DimensionMismatch {
                left: dim,
                right: g.vector.dim(),
            }
            .into());
        }
        let mut q = g.vector.as_slice().to_vec();
        for _ in 0..2 {
            for b in &basis {
                subtract_projection(&mut q, b);
            }
        }
        let n = dot(&q, &q).sqrt();
        // a parent already spanned by earlier ones adds nothing
        if n > 1e-10 {
            q.iter_mut().for_each(|c| *c /= n);
            basis.push(q);
        }
    }
    let mut r = direction.vector.as_slice().to_vec();
    for _ in 0..2 {
        for b in &basis {
            subtract_projection(&mut r, b);
        }
    }
    let parents: Vec<String> = against.iter().map(|g| g.label.clone()).collect();
    let residual = dot(&r, &r).sqrt();
    if residual < MIN_RESIDUAL {
        return Err(SubspaceError::VanishingResidual {
            label: direction.label.clone(),
            parents,
            residual,
        });
    }
    r.iter_mut().for_each(|c| *c /= residual);
    Ok(BiasDirection {
        label: format!("{}'", direction.label),
        vector: Vector::from_raw(r),
        provenance: Provenance::Orthogonalized {
            base: Box::new(direction.provenance.clone()),
            parents,
        },
        oov: direction.oov.clone(),
    })
}

fn subtract_projection(v: &mut [f64], unit: &[f64]) {
    let k = dot(v, unit);
    for (a, b) in v.iter_mut().zip(unit) {
        *a -= k * b;
    }
}

/// Unit top right-singular vector of the matrix whose rows are `vectors`
/// (mean-centered first when `center`).
///
/// The eigenproblem is solved with cyclic Jacobi rotations on whichever of
/// `M Mᵀ` and `Mᵀ M` is smaller, which is deterministic and needs no starting
/// vector. The sign is chosen so the component has a non-negative dot product
/// with the first row it is not orthogonal to.
pub fn top_principal_component(vectors: &[Vector], center: bool) -> Result<Vector, SubspaceError> {
    if vectors.len() < 2 {
        return Err(SubspaceError::TooFewRows(vectors.len()));
    }
    let d = vectors[0].dim();
    for v in vectors {
        if v.dim() != d {
            return Err(VectorError::DimensionMismatch {
                left: d,
                right: v.dim(),
            }
            .into());
        }
    }
    let mut rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.as_slice().to_vec()).collect();
    if center {
        let m = rows.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m)
            .collect();
        for r in &mut rows {
            r.iter_mut().zip(&mean).for_each(|(a, b)| *a -= b);
        }
    }
    let m = rows.len();
    let mut pc = if m <= d {
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let g = dot(&rows[i], &rows[j]);
                gram[i * m + j] = g;
                gram[j * m + i] = g;
            }
        }
        let u = top_eigenvector(gram, m).ok_or(SubspaceError::ZeroMatrix)?;
        let mut v = vec![0.0; d];
        for (ui, r) in u.iter().zip(&rows) {
            for (a, b) in v.iter_mut().zip(r) {
                *a += ui * b;
            }
        }
        v
    } else {
        let mut scatter = vec![0.0; d * d];
        for r in &rows {
            for i in 0..d {
                for j in i..d {
                    scatter[i * d + j] += r[i] * r[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                scatter[i * d + j] = scatter[j * d + i];
            }
        }
        top_eigenvector(scatter, d).ok_or(SubspaceError::ZeroMatrix)?
    };
    let n = dot(&pc, &pc).sqrt();
    if !(n > 0.0) {
        return Err(SubspaceError::ZeroMatrix);
    }
    pc.iter_mut().for_each(|c| *c /= n);
    for r in &rows {
        let s = dot(&pc, r);
        if s.abs() > 1e-12 * dot(r, r).sqrt() {
            if s < 0.0 {
                pc.iter_mut().for_each(|c| *c = -*c);
            }
            break;
        }
    }
    Ok(Vector::from_raw(pc))
}

/// Eigenvector of the largest eigenvalue of a symmetric `n × n` row-major
/// matrix, or `None` if the matrix is zero.
fn top_eigenvector(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob2: f64 = a.iter().map(|x| x * x).sum();
    for sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * frob2 * 1e-4 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                // Past the first few sweeps, entries too small to move either
                // diagonal element are set to zero instead of rotated.
                let (app, aqq) = (a[p * n + p].abs(), a[q * n + q].abs());
                if sweep > 3 && app + 100.0 * apq.abs() == app && aqq + 100.0 * apq.abs() == aqq {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..n {
        if a[i * n + i] > a[best * n + best] {
            best = i;
        }
    }
    if !(a[best * n + best] > 0.0) {
        return None;
    }
    Some((0..n).map(|k| v[k * n + best]).collect())
}

/// Where a direction comes from, as written in spec and plan documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DirectionMethod {
    Pair { pair: (String, String) },
    PcaPairs { pairs: Vec<(String, String)> },
    PcaList { words: Vec<String> },
}

/// Either an inline spec or the label of a direction defined earlier in the
/// same document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParentRef {
    Label(String),
    Spec(Box<DirectionSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionSpec {
    pub label: String,
    #[serde(flatten)]
    pub method: DirectionMethod,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orthogonal_to: Vec<ParentRef>,
}

impl DirectionSpec {
    /// Computes this direction. `known` supplies directions referenced by label.
    pub fn compute<S: VectorSource + ?Sized>(
        &self,
        table: &S,
        known: &HashMap<String, BiasDirection>,
    ) -> Result<BiasDirection, SubspaceError> {
        let base = match &self.method {
            DirectionMethod::Pair { pair: (a, b) } => direction_from_pair(table, a, b)?,
            DirectionMethod::PcaPairs { pairs } => direction_from_pairs_pca(table, pairs)?,
            DirectionMethod::PcaList { words } => direction_from_list_pca(table, words)?,
        };
        if self.orthogonal_to.is_empty() {
            return Ok(base.with_label(self.label.clone()));
        }
        let mut parents = Vec::with_capacity(self.orthogonal_to.len());
        for p in &self.orthogonal_to {
            parents.push(match p {
                ParentRef::Label(l) => known
                    .get(l)
                    .cloned()
                    .ok_or_else(|| SubspaceError::Spec(format!("unknown direction label {l:?}")))?,
                ParentRef::Spec(s) => s.compute(table, known)?,
            });
        }
        Ok(orthogonalize(&base, &parents)?.with_label(self.label.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reconstructed: bool,
    pub directions: Vec<DirectionSpec>,
}

impl DirectionDocument {
    pub fn parse(text: &str) -> Result<Self, SubspaceError> {
        let doc: Self =
            serde_json::from_str(text).map_err(|e| SubspaceError::Spec(e.to_string()))?;
        if doc.schema_version != 1 {
            return Err(SubspaceError::Spec(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        if doc.directions.is_empty() {
            return Err(SubspaceError::Spec("no directions".into()));
        }
        Ok(doc)
    }

    /// Computes every top-level direction in order; later entries may refer
    /// to earlier ones by label.
    pub fn compute<S: VectorSource + ?Sized>(
        &self,
        table: &S,
    ) -> Result<Vec<BiasDirection>, SubspaceError> {
        let mut known = HashMap::new();
        let mut out = Vec::with_capacity(self.directions.len());
        for spec in &self.directions {
            if known.contains_key(&spec.label) {
                return Err(SubspaceError::Spec(format!(
                    "duplicate label {:?}",
                    spec.label
                )));
            }
            let d = spec.compute(table, &known)?;
            known.insert(spec.label.clone(), d.clone());
            out.push(d);
        }
        Ok(out)
    }
}

/// Writes directions as GloVe text, one line per label.
pub fn write_directions<W: Write>(
    directions: &[BiasDirection],
    sink: W,
) -> Result<(), SubspaceError> {
    let table = EmbeddingTable::from_entries(
        directions
            .iter()
            .map(|d| (d.label.as_str(), d.vector.clone())),
    )?;
    write_embeddings(&table, sink)?;
    Ok(())
}

pub fn read_directions<R: BufRead>(source: R) -> Result<Vec<BiasDirection>, SubspaceError> {
    let table = load_embeddings(source, TextFormat::Glove, false)?;
    let mut out = Vec::with_capacity(table.len());
    for (label, v) in table.iter() {
        let d = BiasDirection {
            label: label.to_owned(),
            vector: v.clone(),
            provenance: Provenance::Stored,
            oov: Vec::new(),
        };
        d.check_unit()?;
        out.push(d);
    }
    Ok(out)
}

/// Pairwise dot products, row-major in input order.
pub fn dot_matrix(directions: &[BiasDirection]) -> Vec<Vec<f64>> {
    directions
        .iter()
        .map(|a| {
            directions
                .iter()
                .map(|b| dot(a.vector.as_slice(), b.vector.as_slice()))
                .collect()
        })
        .collect()
}
