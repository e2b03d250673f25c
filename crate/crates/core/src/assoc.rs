//! WEAT statistic, effect size, and permutation p-values.
//!
//! For a word `w`, `s(w, A, B)` is its mean cosine to `A` minus its mean cosine
//! to `B`. The test statistic sums `s` over `X` and subtracts the sum over `Y`.
//! The effect size divides the difference of means by the standard deviation
//! of `s` over `X ∪ Y`. The p-value is the fraction of equal-size splits of
//! `X ∪ Y` whose statistic strictly exceeds the observed one.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexicon::{Category, OovEntry, ResolvedTest};
use crate::vector::{cosine, Vector, VectorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssocError {
    #[error("{0} list is empty")]
    EmptyList(&'static str),
    #[error("target lists differ in size: |X| = {x}, |Y| = {y}")]
    SizeMismatch { x: usize, y: usize },
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("exact enumeration needs {splits} splits, above the threshold of {threshold}")]
    ExactTooLarge { splits: u128, threshold: u64 },
    #[error("invalid permutation plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StdDevConvention {
    #[default]
    Population,
    Sample,
}

/// How a split whose statistic equals the observed one is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Count only splits with a strictly greater statistic.
    #[default]
    Strict,
    /// Count splits with a greater or equal statistic.
    NonStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    /// Exact when the number of splits is within `exact_threshold`, else sampled.
    #[default]
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UsedMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub mode: PermutationMode,
    pub sample_count: u64,
    pub seed: u64,
    pub exact_threshold: u64,
}

impl Default for PermutationPlan {
    fn default() -> Self {
        Self {
            mode: PermutationMode::Auto,
            sample_count: 10_000,
            seed: 0,
            exact_threshold: 20_000,
        }
    }
}

impl PermutationPlan {
    pub fn sampled(sample_count: u64, seed: u64) -> Self {
        Self {
            mode: PermutationMode::Sampled,
            sample_count,
            seed,
            ..Self::default()
        }
    }

    pub fn exact() -> Self {
        Self {
            mode: PermutationMode::Exact,
            ..Self::default()
        }
    }

    /// Generator for one named stream. Streams with different names are
    /// independent, so tests can be evaluated in any order or in parallel.
    pub fn rng_for(&self, stream: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(stream.as_bytes());
        let digest: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(digest)
    }

    fn choose_mode(&self, n: usize) -> Result<UsedMode, AssocError> {
        let splits = binomial(2 * n as u64, n as u64);
        let fits = splits <= self.exact_threshold as u128;
        match self.mode {
            PermutationMode::Auto if fits => Ok(UsedMode::Exact),
            PermutationMode::Exact if fits => Ok(UsedMode::Exact),
            PermutationMode::Exact => Err(AssocError::ExactTooLarge {
                splits,
                threshold: self.exact_threshold,
            }),
            _ if self.sample_count == 0 => Err(AssocError::InvalidPlan(
                "sampled mode needs sample_count >= 1".into(),
            )),
            _ => Ok(UsedMode::Sampled),
        }
    }
}

/// Settings that change the reported numbers; echoed in every result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conventions {
    pub stddev: StdDevConvention,
    pub tie_policy: TiePolicy,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `s(w, A, B)`: mean cosine of `w` to `A` minus mean cosine to `B`.
pub fn word_association(w: &Vector, a: &[Vector], b: &[Vector]) -> Result<f64, AssocError> {
    if a.is_empty() {
        return Err(AssocError::EmptyList("attribute A"));
    }
    if b.is_empty() {
        return Err(AssocError::EmptyList("attribute B"));
    }
    let mean_cos = |set: &[Vector]| -> Result<f64, AssocError> {
        let mut sum = 0.0;
        for v in set {
            sum += cosine(w, v)?;
        }
        Ok(sum / set.len() as f64)
    };
    Ok(mean_cos(a)? - mean_cos(b)?)
}

fn check_targets(x: &[Vector], y: &[Vector]) -> Result<(), AssocError> {
    if x.is_empty() {
        return Err(AssocError::EmptyList("target X"));
    }
    if y.is_empty() {
        return Err(AssocError::EmptyList("target Y"));
    }
    if x.len() != y.len() {
        return Err(AssocError::SizeMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    Ok(())
}

/// Association scores of `X` followed by `Y`.
fn scores(x: &[Vector], y: &[Vector], a: &[Vector], b: &[Vector]) -> Result<Vec<f64>, AssocError> {
    check_targets(x, y)?;
    x.iter()
        .chain(y)
        .map(|w| word_association(w, a, b))
        .collect()
}

/// Split statistic: sum over members of `in_x` minus sum over the rest, both
/// accumulated in index order so the identity split reproduces the observed
/// statistic exactly.
fn split_statistic(s: &[f64], in_x: &[bool]) -> f64 {
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (v, &m) in s.iter().zip(in_x) {
        if m {
            sx += v;
        } else {
            sy += v;
        }
    }
    sx - sy
}

fn observed_statistic(s: &[f64]) -> f64 {
    let n = s.len() / 2;
    let sx: f64 = s[..n].iter().fold(0.0, |acc, v| acc + v);
    let sy: f64 = s[n..].iter().fold(0.0, |acc, v| acc + v);
    sx - sy
}

/// `s(X, Y, A, B) = Σ_x s(x, A, B) − Σ_y s(y, A, B)`.
pub fn test_statistic(
    x: &[Vector],
    y: &[Vector],
    a: &[Vector],
    b: &[Vector],
) -> Result<f64, AssocError> {
    Ok(observed_statistic(&scores(x, y, a, b)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectSize {
    Finite(f64),
    /// The association scores over `X ∪ Y` have zero spread.
    Degenerate,
}

impl EffectSize {
    pub fn value(self) -> Option<f64> {
        match self {
            EffectSize::Finite(d) => Some(d),
            EffectSize::Degenerate => None,
        }
    }
}

fn effect_from_scores(s: &[f64], convention: StdDevConvention) -> EffectSize {
    let n = s.len() / 2;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mx = mean(&s[..n]);
    let my = mean(&s[n..]);
    let m = mean(s);
    let ss: f64 = s.iter().map(|v| (v - m) * (v - m)).sum();
    let denom = match convention {
        StdDevConvention::Population => s.len() as f64,
        StdDevConvention::Sample => (s.len() - 1) as f64,
    };
    let sd = (ss / denom).sqrt();
    if !(sd > 1e-12) {
        return EffectSize::Degenerate;
    }
    EffectSize::Finite((mx - my) / sd)
}

/// Cohen's-d style effect size of the association scores.
pub fn effect_size(
    x: &[Vector],
    y: &[Vector],
    a: &[Vector],
    b: &[Vector],
    convention: StdDevConvention,
) -> Result<EffectSize, AssocError> {
    Ok(effect_from_scores(&scores(x, y, a, b)?, convention))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    pub p: f64,
    pub permutations_used: u64,
    pub mode: UsedMode,
}

fn exceeds(stat: f64, observed: f64, eps: f64, tie: TiePolicy) -> bool {
    match tie {
        TiePolicy::Strict => stat - observed > eps,
        TiePolicy::NonStrict => stat - observed >= -eps,
    }
}

fn p_from_scores(
    s: &[f64],
    plan: &PermutationPlan,
    tie: TiePolicy,
    stream: &str,
) -> Result<PValue, AssocError> {
    let total = s.len();
    let n = total / 2;
    let observed = observed_statistic(s);
    // statistics that agree up to accumulated rounding are ties
    let eps = 64.0 * f64::EPSILON * s.iter().map(|v| v.abs()).sum::<f64>();
    let mode = plan.choose_mode(n)?;
    let mut mask = vec![false; total];
    let (hits, used) = match mode {
        UsedMode::Exact => {
            let mut hits = 0u64;
            let mut count = 0u64;
            let mut combo: Vec<usize> = (0..n).collect();
            loop {
                mask.iter_mut().for_each(|m| *m = false);
                combo.iter().for_each(|&i| mask[i] = true);
                if exceeds(split_statistic(s, &mask), observed, eps, tie) {
                    hits += 1;
                }
                count += 1;
                if !next_combination(&mut combo, total) {
                    break;
                }
            }
            (hits, count)
        }
        UsedMode::Sampled => {
            let mut rng = plan.rng_for(stream);
            let mut hits = 0u64;
            for _ in 0..plan.sample_count {
                mask.iter_mut().for_each(|m| *m = false);
                for i in index::sample(&mut rng, total, n) {
                    mask[i] = true;
                }
                if exceeds(split_statistic(s, &mask), observed, eps, tie) {
                    hits += 1;
                }
            }
            (hits, plan.sample_count)
        }
    };
    Ok(PValue {
        p: hits as f64 / used as f64,
        permutations_used: used,
        mode,
    })
}

/// Advances `combo` (strictly increasing indices below `n`) to the next
/// combination in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Permutation p-value over equal-size splits of `X ∪ Y`.
///
/// Exact mode enumerates every split once, identity included. Sampled mode
/// draws `sample_count` uniform splits with replacement from the generator
/// for `stream`.
pub fn p_value(
    x: &[Vector],
    y: &[Vector],
    a: &[Vector],
    b: &[Vector],
    plan: &PermutationPlan,
    tie: TiePolicy,
    stream: &str,
) -> Result<PValue, AssocError> {
    p_from_scores(&scores(x, y, a, b)?, plan, tie, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListSizes {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub statistic: f64,
    /// `None` when the scores have zero spread (see `degenerate`).
    pub effect_size: Option<f64>,
    pub degenerate: bool,
    pub p_value: f64,
    pub permutations_used: u64,
    pub mode: UsedMode,
    pub stddev: StdDevConvention,
    pub tie_policy: TiePolicy,
    pub sizes: ListSizes,
    pub oov_report: Vec<OovEntry>,
}

/// Runs one resolved test end to end.
pub fn run_weat(
    test: &ResolvedTest,
    plan: &PermutationPlan,
    conventions: Conventions,
) -> Result<TestResult, AssocError> {
    let s = scores(
        &test.x.vectors,
        &test.y.vectors,
        &test.a.vectors,
        &test.b.vectors,
    )?;
    let statistic = observed_statistic(&s);
    let effect = effect_from_scores(&s, conventions.stddev);
    let p = p_from_scores(&s, plan, conventions.tie_policy, test.name())?;
    Ok(TestResult {
        test_name: test.name().to_owned(),
        category: test.source.category,
        description: test.source.description.clone(),
        statistic,
        effect_size: effect.value(),
        degenerate: effect == EffectSize::Degenerate,
        p_value: p.p,
        permutations_used: p.permutations_used,
        mode: p.mode,
        stddev: conventions.stddev,
        tie_policy: conventions.tie_policy,
        sizes: ListSizes {
            x: test.x.len(),
            y: test.y.len(),
            a: test.a.len(),
            b: test.b.len(),
        },
        oov_report: test.oov_report.clone(),
    })
}

/// Runs every test on the current rayon pool; output order follows input order.
pub fn run_all(
    tests: &[ResolvedTest],
    plan: &PermutationPlan,
    conventions: Conventions,
) -> Vec<Result<TestResult, AssocError>> {
    tests
        .par_iter()
        .map(|t| run_weat(t, plan, conventions))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn unit_case() -> (Vec<Vector>, Vec<Vector>, Vec<Vector>, Vec<Vector>) {
        (
            vec![v(&[1.0, 0.0])],
            vec![v(&[0.0, 1.0])],
            vec![v(&[1.0, 0.0])],
            vec![v(&[0.0, 1.0])],
        )
    }

    #[test]
    fn word_association_hand_values() {
        let w = v(&[1.0, 0.0]);
        assert_eq!(
            word_association(&w, &[v(&[1.0, 0.0])], &[v(&[0.0, 1.0])]).unwrap(),
            1.0
        );
        let a = [v(&[0.3, 0.7]), v(&[-1.0, 2.0])];
        assert!(word_association(&w, &a, &a).unwrap().abs() < 1e-12);
        let s = word_association(&w, &[v(&[1.0, 0.0]), v(&[0.0, 1.0])], &[v(&[0.0, 1.0])]).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(
            word_association(&w, &[], &a),
            Err(AssocError::EmptyList("attribute A"))
        );
    }

    #[test]
    fn statistic_antisymmetry() {
        let (x, y, a, b) = unit_case();
        assert_eq!(test_statistic(&x, &y, &a, &b).unwrap(), 2.0);
        assert_eq!(test_statistic(&y, &x, &a, &b).unwrap(), -2.0);
        assert_eq!(test_statistic(&x, &y, &b, &a).unwrap(), -2.0);
        assert!(matches!(
            test_statistic(&x, &[y[0].clone(), y[0].clone()], &a, &b),
            Err(AssocError::SizeMismatch { x: 1, y: 2 })
        ));
    }

    #[test]
    fn effect_size_conventions() {
        let (x, y, a, b) = unit_case();
        let pop = effect_size(&x, &y, &a, &b, StdDevConvention::Population).unwrap();
        assert_eq!(pop, EffectSize::Finite(2.0));
        let sample = effect_size(&x, &y, &a, &b, StdDevConvention::Sample).unwrap();
        assert!((sample.value().unwrap() - std::f64::consts::SQRT_2).abs() < 1e-9);
        let same = [v(&[0.2, 0.9])];
        assert_eq!(
            effect_size(&same, &same, &same, &same, StdDevConvention::Population).unwrap(),
            EffectSize::Degenerate
        );
    }

    #[test]
    fn exact_p_two_splits() {
        let (x, y, a, b) = unit_case();
        let p = p_value(
            &x,
            &y,
            &a,
            &b,
            &PermutationPlan::exact(),
            TiePolicy::Strict,
            "t",
        )
        .unwrap();
        assert_eq!(p.p, 0.0);
        assert_eq!(p.permutations_used, 2);
        assert_eq!(p.mode, UsedMode::Exact);
        // reversed orientation: the swapped split now exceeds
        let p = p_value(
            &y,
            &x,
            &a,
            &b,
            &PermutationPlan::exact(),
            TiePolicy::Strict,
            "t",
        )
        .unwrap();
        assert_eq!(p.p, 0.5);
    }

    #[test]
    fn constant_statistic_gives_zero_under_strict_and_one_otherwise() {
        let u = v(&[0.4, 0.1]);
        let x = vec![u.clone()];
        let a = vec![v(&[1.0, 0.0])];
        let b = vec![v(&[0.0, 1.0])];
        let strict = p_value(
            &x,
            &x,
            &a,
            &b,
            &PermutationPlan::exact(),
            TiePolicy::Strict,
            "t",
        )
        .unwrap();
        assert_eq!(test_statistic(&x, &x, &a, &b).unwrap(), 0.0);
        assert_eq!(strict.p, 0.0);
        let loose = p_value(
            &x,
            &x,
            &a,
            &b,
            &PermutationPlan::exact(),
            TiePolicy::NonStrict,
            "t",
        )
        .unwrap();
        assert_eq!(loose.p, 1.0);
    }

    #[test]
    fn sampled_is_deterministic_per_stream() {
        let x = vec![v(&[1.0, 0.1]), v(&[0.9, 0.3]), v(&[0.2, 0.8])];
        let y = vec![v(&[0.1, 1.0]), v(&[0.5, 0.5]), v(&[0.7, 0.2])];
        let a = vec![v(&[1.0, 0.0])];
        let b = vec![v(&[0.0, 1.0])];
        let plan = PermutationPlan::sampled(500, 42);
        let p1 = p_value(&x, &y, &a, &b, &plan, TiePolicy::Strict, "s").unwrap();
        let p2 = p_value(&x, &y, &a, &b, &plan, TiePolicy::Strict, "s").unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.permutations_used, 500);
    }

    #[test]
    fn exact_mode_respects_threshold() {
        let x: Vec<Vector> = (0..9).map(|i| v(&[1.0, i as f64])).collect();
        let y: Vec<Vector> = (0..9).map(|i| v(&[i as f64, 1.0])).collect();
        let a = vec![v(&[1.0, 0.0])];
        let b = vec![v(&[0.0, 1.0])];
        let err = p_value(
            &x,
            &y,
            &a,
            &b,
            &PermutationPlan::exact(),
            TiePolicy::Strict,
            "t",
        )
        .unwrap_err();
        assert_eq!(
            err,
            AssocError::ExactTooLarge {
                splits: 48620,
                threshold: 20000
            }
        );
        let auto = PermutationPlan {
            sample_count: 100,
            ..PermutationPlan::default()
        };
        let p = p_value(&x, &y, &a, &b, &auto, TiePolicy::Strict, "t").unwrap();
        assert_eq!(p.mode, UsedMode::Sampled);
        assert_eq!(p.permutations_used, 100);
        let x8 = &x[..8];
        let y8 = &y[..8];
        let p = p_value(x8, y8, &a, &b, &auto, TiePolicy::Strict, "t").unwrap();
        assert_eq!((p.mode, p.permutations_used), (UsedMode::Exact, 12870));
    }

    #[test]
    fn combination_enumeration_counts() {
        for n in 1..=5usize {
            let mut combo: Vec<usize> = (0..n).collect();
            let mut count = 1u128;
            while next_combination(&mut combo, 2 * n) {
                count += 1;
            }
            assert_eq!(count, binomial(2 * n as u64, n as u64));
        }
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(16, 8), 12870);
    }

    #[test]
    fn zero_samples_is_invalid() {
        let (x, y, a, b) = unit_case();
        let plan = PermutationPlan::sampled(0, 1);
        assert!(matches!(
            p_value(&x, &y, &a, &b, &plan, TiePolicy::Strict, "t"),
            Err(AssocError::InvalidPlan(_))
        ));
    }
}
