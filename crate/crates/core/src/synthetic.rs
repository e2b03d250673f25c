//! Seeded synthetic embedding tables with known, planted structure.
//!
//! Used by tests and benchmarks; nothing here is needed to audit real data.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::embedding::EmbeddingTable;
use crate::lexicon::{AssociationTest, Category, TestKind, TestLists, Variant, WordList};
use crate::seat::TemplateSet;
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedParams {
    pub dim: usize,
    pub per_list: usize,
    /// Coefficient of the bias direction in every word.
    pub strength: f64,
    /// Standard deviation of the per-component noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PlantedParams {
    fn default() -> Self {
        Self {
            dim: 50,
            per_list: 8,
            strength: 0.8,
            noise: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub table: EmbeddingTable,
    pub test: AssociationTest,
    /// The planted direction `u` (first basis vector).
    pub direction: Vector,
}

fn basis(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

fn noisy(rng: &mut ChaCha8Rng, centre: &[f64], noise: f64) -> Vector {
    let n = Normal::new(0.0, noise).expect("finite noise");
    Vector::new(centre.iter().map(|c| c + n.sample(rng)).collect()).expect("finite components")
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn custom_test(name: &str, category: Category, lists: [(&str, Vec<String>); 4]) -> AssociationTest {
    let [x, y, a, b] = lists.map(|(l, w)| WordList::new(l, w));
    AssociationTest {
        name: name.to_owned(),
        description: (category == Category::MeaningfulEncoding)
            .then(|| "planted grammatical pairs".to_owned()),
        kind: TestKind::Weat,
        category,
        variant: Variant::Custom,
        reconstructed: false,
        note: None,
        lists: TestLists { x, y, a, b },
        pos_tags: BTreeMap::new(),
    }
}

/// X and A sit at `+strength·u`, Y and B at `−strength·u`, each plus
/// Gaussian noise in every component.
pub fn planted_bias(params: PlantedParams) -> PlantedFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let u = basis(params.dim, 0);
    let plus: Vec<f64> = u.iter().map(|c| c * params.strength).collect();
    let minus: Vec<f64> = u.iter().map(|c| -c * params.strength).collect();
    let mut entries = Vec::new();
    let mut lists = Vec::new();
    for (prefix, centre) in [("x", &plus), ("y", &minus), ("a", &plus), ("b", &minus)] {
        let words = names(prefix, params.per_list);
        for w in &words {
            entries.push((w.clone(), noisy(&mut rng, centre, params.noise)));
        }
        lists.push(words);
    }
    let [x, y, a, b]: [Vec<String>; 4] = lists.try_into().expect("four lists");
    PlantedFixture {
        table: EmbeddingTable::from_entries(entries).expect("consistent fixture"),
        test: custom_test(
            "planted",
            Category::BiasMeasuring,
            [("X", x), ("Y", y), ("A", a), ("B", b)],
        ),
        direction: Vector::new(u).expect("unit basis vector"),
    }
}

#[derive(Debug, Clone)]
pub struct LpsgFixture {
    pub table: EmbeddingTable,
    /// The planted bias test (X/Y/A/B along `u` only).
    pub bias_test: AssociationTest,
    /// Gendered verb pairs against gendered words: must survive debiasing.
    pub retention_test: AssociationTest,
    /// `(x_i, y_i)` target pairs of the bias test, for `d_PCA`.
    pub bias_pairs: Vec<(String, String)>,
    /// Verb pairs differing only along `g`.
    pub grammatical_pairs: Vec<(String, String)>,
    pub u: Vector,
    pub g: Vector,
}

/// The planted fixture plus a grammatical direction `g ⟂ u`.
///
/// Verb pairs are `base_i ± strength·g` with `base_i` drawn from the
/// components outside `u` and `g`, so each pair differs only along `g`.
/// The gendered attribute words carry both directions: `±(0.6u + 0.6g)` plus
/// noise. Debiasing along `u` while keeping `g` should therefore remove the
/// bias test's effect but leave the verb test intact.
pub fn lpsg_fixture(params: PlantedParams) -> LpsgFixture {
    let planted = planted_bias(params);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let dim = params.dim;
    let u = basis(dim, 0);
    let g = basis(dim, 1);
    let base_noise = Normal::new(0.0, 0.3).expect("finite");
    let n = params.per_list;

    let mut entries: Vec<(String, Vector)> = planted
        .table
        .iter()
        .map(|(t, v)| (t.to_owned(), v.clone()))
        .collect();
    let vm = names("vm", n);
    let vf = names("vf", n);
    for (m, f) in vm.iter().zip(&vf) {
        let mut base = vec![0.0; dim];
        for c in base.iter_mut().skip(2) {
            *c = base_noise.sample(&mut rng);
        }
        let mut plus = base.clone();
        plus[1] += params.strength;
        let mut minus = base;
        minus[1] -= params.strength;
        entries.push((m.clone(), Vector::new(plus).expect("finite")));
        entries.push((f.clone(), Vector::new(minus).expect("finite")));
    }
    let male: Vec<f64> = u.iter().zip(&g).map(|(a, b)| 0.6 * a + 0.6 * b).collect();
    let female: Vec<f64> = male.iter().map(|c| -c).collect();
    let gm = names("gm", n);
    let gf = names("gf", n);
    for w in &gm {
        entries.push((w.clone(), noisy(&mut rng, &male, params.noise)));
    }
    for w in &gf {
        entries.push((w.clone(), noisy(&mut rng, &female, params.noise)));
    }

    let bias_pairs = planted
        .test
        .lists
        .x
        .words
        .iter()
        .cloned()
        .zip(planted.test.lists.y.words.iter().cloned())
        .collect();
    let grammatical_pairs = vm.iter().cloned().zip(vf.iter().cloned()).collect();
    LpsgFixture {
        table: EmbeddingTable::from_entries(entries).expect("consistent fixture"),
        bias_test: planted.test,
        retention_test: custom_test(
            "planted-verbs",
            Category::MeaningfulEncoding,
            [
                ("male verbs", vm),
                ("female verbs", vf),
                ("male", gm),
                ("female", gf),
            ],
        ),
        bias_pairs,
        grammatical_pairs,
        u: Vector::new(u).expect("unit"),
        g: Vector::new(g).expect("unit"),
    }
}

/// Random Gaussian vectors for every romanized word in `tests` and every
/// token of `templates`, in sorted token order.
pub fn vocabulary_table(
    tests: &[AssociationTest],
    templates: Option<&TemplateSet>,
    dim: usize,
    seed: u64,
) -> EmbeddingTable {
    let mut tokens = BTreeSet::new();
    for t in tests {
        for id in crate::lexicon::ListId::ALL {
            for w in &t.lists.get(id).words {
                if !w.chars().any(char::is_whitespace) {
                    tokens.insert(w.clone());
                }
            }
        }
    }
    if let Some(ts) = templates {
        for pos in crate::lexicon::Pos::ALL {
            for tpl in ts.get(pos).unwrap_or(&[]) {
                tokens.extend(
                    tpl.split_whitespace()
                        .filter(|t| *t != crate::seat::SLOT)
                        .map(str::to_owned),
                );
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; dim];
    let entries: Vec<(String, Vector)> = tokens
        .into_iter()
        .map(|t| {
            let v = noisy(&mut rng, &zero, 1.0);
            (t, v)
        })
        .collect();
    EmbeddingTable::from_entries(entries).expect("consistent fixture")
}
