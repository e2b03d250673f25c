//! Every bundled plan and direction document parses and runs on a table that
//! covers its words.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use embias_core::{apply_plan, DebiasPlan, DirectionDocument, EmbeddingTable, Method, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

fn data(sub: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(sub);
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

fn collect_words(v: &Value, key: Option<&str>, out: &mut BTreeSet<String>) {
    match v {
        Value::String(s)
            if matches!(
                key,
                Some("pair" | "pairs" | "words" | "equalize_pairs" | "preserve")
            ) =>
        {
            out.insert(s.clone());
        }
        Value::Array(items) => items.iter().for_each(|i| collect_words(i, key, out)),
        Value::Object(map) => map.iter().for_each(|(k, v)| collect_words(v, Some(k), out)),
        _ => {}
    }
}

fn covering_table(text: &str) -> EmbeddingTable {
    let mut words = BTreeSet::new();
    collect_words(&serde_json::from_str(text).unwrap(), None, &mut words);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = Normal::new(0.0, 1.0).unwrap();
    let entries: Vec<(String, Vector)> = words
        .into_iter()
        .map(|w| {
            (
                w,
                Vector::new((0..16).map(|_| n.sample(&mut rng)).collect()).unwrap(),
            )
        })
        .collect();
    EmbeddingTable::from_entries(entries)
        .unwrap()
        .normalized()
        .unwrap()
}

#[test]
fn bundled_plans_apply() {
    let plans = data("plans");
    assert_eq!(plans.len(), 13);
    for path in plans {
        let text = fs::read_to_string(&path).unwrap();
        let plan = DebiasPlan::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(
            plan.reconstructed || plan.method == Method::Linear,
            "{}",
            path.display()
        );
        let table = covering_table(&text);
        let out = apply_plan(&table, &plan).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(out.table.len(), table.len());
    }
}

#[test]
fn bundled_directions_compute() {
    for path in data("directions") {
        let text = fs::read_to_string(&path).unwrap();
        let doc =
            DirectionDocument::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let dirs = doc
            .compute(&covering_table(&text))
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(dirs.len(), doc.directions.len());
        for d in &dirs {
            assert!((d.vector().norm() - 1.0).abs() < 1e-9);
        }
    }
}
