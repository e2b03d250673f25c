mod common;

use std::fs;

use common::*;
use embias_core::subspace::read_directions;
use embias_core::{apply_plan, load_embeddings, DebiasPlan, TextFormat};
use serde_json::Value;

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["weat", "--help"])), 0);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&run(&[])), 64);
    assert_eq!(code(&run(&["weat", "--embeddings", "x", "--bogus"])), 64);
    assert_eq!(
        code(&run(&[
            "weat",
            "--embeddings",
            "x",
            "--permutation-mode",
            "sometimes"
        ])),
        64
    );
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(&fixture_table(), dir.path(), "t.txt");
    let out = run(&["weat", "--embeddings", s(&table), "--threads", "0"]);
    assert_eq!(code(&out), 64, "{}", stderr(&out));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    assert_eq!(code(&run(&["weat", "--embeddings", s(&missing)])), 2);

    let table = write_table(&fixture_table(), dir.path(), "t.txt");
    let out = run(&["weat", "--embeddings", s(&table), "--test", "no-such-test"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no-such-test"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "a 1 2\nb 1\n").unwrap();
    assert_eq!(code(&run(&["weat", "--embeddings", s(&bad)])), 2);
}

#[test]
fn strict_oov_fails_and_drop_warns() {
    let dir = tempfile::tempdir().unwrap();
    let full = fixture_table();
    let kept: Vec<_> = full
        .iter()
        .filter(|(t, _)| *t != "ganit")
        .map(|(t, v)| (t.to_owned(), v.clone()))
        .collect();
    let table = write_table(
        &embias_core::EmbeddingTable::from_entries(kept).unwrap(),
        dir.path(),
        "t.txt",
    );
    let base = [
        "weat",
        "--embeddings",
        s(&table),
        "--test",
        "gender-maths-arts",
    ];
    let strict = run(&[&base[..], &["--oov-policy", "strict"]].concat());
    assert_eq!(code(&strict), 2);
    assert!(stderr(&strict).contains("ganit"));
    let drop = run(&base);
    assert_eq!(code(&drop), 0, "{}", stderr(&drop));
    assert!(stderr(&drop).contains("ganit"));
    let report: Value = serde_json::from_slice(&drop.stdout).unwrap();
    assert_eq!(report["results"][0]["sizes"]["x"], 7);
    assert_eq!(report["results"][0]["sizes"]["y"], 7);
}

#[test]
fn weat_report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(&fixture_table(), dir.path(), "t.txt");
    let json = dir.path().join("r.json");
    let md = dir.path().join("r.md");
    let out = run(&[
        "weat",
        "--embeddings",
        s(&table),
        "--permutations",
        "500",
        "--seed",
        "3",
        "--out",
        s(&json),
        "--markdown",
        s(&md),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let schema: Value = serde_json::from_str(embias_core::report::REPORT_SCHEMA).unwrap();
    let compiled = jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft202012)
        .compile(&schema)
        .unwrap();
    if let Err(errors) = compiled.validate(&report) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        panic!("schema violations: {msgs:#?}");
    }
    assert_eq!(report["results"].as_array().unwrap().len(), 13);
    assert_eq!(report["config"]["permutation"]["seed"], 3);
    let md = fs::read_to_string(&md).unwrap();
    assert_eq!(
        md.lines()
            .filter(|l| l.starts_with("| ") && !l.starts_with("| Test"))
            .count(),
        13
    );
}

#[test]
fn emitted_sentences_cover_every_template() {
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("targets.txt");
    let out = run(&[
        "seat",
        "--embeddings",
        "unused",
        "--test",
        "gender-maths-arts",
        "--expand-attributes",
        "false",
        "--emit-sentences",
        s(&targets),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // 16 targets × 8 noun templates, plus the 16 unexpanded attribute words.
    let text = fs::read_to_string(&targets).unwrap();
    assert_eq!(
        text.lines()
            .filter(|l| l.split_whitespace().count() > 1)
            .count(),
        128
    );
    assert_eq!(text.lines().count(), 144);

    let all = dir.path().join("all.txt");
    let out = run(&[
        "seat",
        "--embeddings",
        "unused",
        "--test",
        "gender-maths-arts",
        "--emit-sentences",
        s(&all),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(&all).unwrap().lines().count(), 256);
}

#[test]
fn precomputed_sentences_must_all_be_present() {
    let dir = tempfile::tempdir().unwrap();
    let sentences = dir.path().join("s.txt");
    let base = [
        "seat",
        "--embeddings",
        "unused",
        "--test",
        "religion-entities",
    ];
    assert_eq!(
        code(&run(
            &[&base[..], &["--emit-sentences", s(&sentences)]].concat()
        )),
        0
    );
    let lines: Vec<String> = fs::read_to_string(&sentences)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect();
    let encoded: Vec<String> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            format!(
                "{l}\t{} {} {}",
                (i as f64).sin(),
                (i as f64).cos(),
                0.5 + i as f64 % 3.0
            )
        })
        .collect();
    let table = write_table(&fixture_table(), dir.path(), "t.txt");

    let complete = dir.path().join("complete.tsv");
    fs::write(&complete, encoded.join("\n") + "\n").unwrap();
    let ok = run(&[
        "seat",
        "--embeddings",
        s(&table),
        "--test",
        "religion-entities",
        "--precomputed",
        s(&complete),
    ]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let report: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(report["config"]["seat"]["precomputed"]["sha256"].is_string());

    let partial = dir.path().join("partial.tsv");
    fs::write(&partial, encoded[..encoded.len() - 1].join("\n") + "\n").unwrap();
    let missing = run(&[
        "seat",
        "--embeddings",
        s(&table),
        "--test",
        "religion-entities",
        "--precomputed",
        s(&partial),
    ]);
    assert_eq!(code(&missing), 2);
    assert!(
        stderr(&missing).contains(lines.last().unwrap().as_str()),
        "{}",
        stderr(&missing)
    );
}

#[test]
fn subspace_writes_unit_directions_and_dots() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(&fixture_table(), dir.path(), "t.txt");
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"schema_version": 1, "directions": [
            {"label": "d_v", "method": "pca-pairs", "pairs": [["gaya", "gayi"], ["aaya", "aayi"], ["leta", "leti"]]},
            {"label": "g", "method": "pair", "pair": ["purush", "mahila"]},
            {"label": "g'", "method": "pair", "pair": ["purush", "mahila"], "orthogonal_to": ["d_v"]}
        ]}"#,
    )
    .unwrap();
    let dirs_path = dir.path().join("dirs.txt");
    let out = run(&[
        "subspace",
        "--embeddings",
        s(&table),
        "--spec",
        s(&spec),
        "--out",
        s(&dirs_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let line = stdout
        .lines()
        .find(|l| l.contains("d_v · g' ="))
        .expect(&stdout);
    let dot: f64 = line.rsplit('=').next().unwrap().trim().parse().unwrap();
    assert!(dot.abs() <= 1e-12, "{line}");

    let dirs =
        read_directions(std::io::BufReader::new(fs::File::open(&dirs_path).unwrap())).unwrap();
    let labels: Vec<&str> = dirs.iter().map(|d| d.label.as_str()).collect();
    assert_eq!(labels, ["d_v", "g", "g'"]);
}

#[test]
fn debias_round_trips_through_text() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(&fixture_table(), dir.path(), "t.txt");
    let debiased = dir.path().join("d.txt");
    let report = dir.path().join("r.json");
    let md = dir.path().join("r.md");
    let out = run(&[
        "debias",
        "--embeddings",
        s(&table),
        "--plan",
        "data:plans/gender-linear-pca.json",
        "--out",
        s(&debiased),
        "--report",
        s(&report),
        "--markdown",
        s(&md),
        "--test",
        "gender-maths-arts",
        "--test",
        "gender-verbs",
        "--permutations",
        "200",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let text = fs::read_to_string(&debiased).unwrap();
    let loaded = load_embeddings(text.as_bytes(), TextFormat::Auto, false).unwrap();
    let plan = DebiasPlan::parse(
        &fs::read_to_string(embias_cli::data_dir().join("plans/gender-linear-pca.json")).unwrap(),
    )
    .unwrap();
    let expected = apply_plan(&fixture_table().normalized().unwrap(), &plan).unwrap();
    assert_eq!(loaded.len(), expected.table.len());
    for (t, v) in expected.table.iter() {
        assert_eq!(loaded.lookup(t).unwrap(), v, "{t} does not round-trip");
        assert!(
            v.dot(expected.direction.vector()).unwrap().abs() < 1e-12,
            "{t}"
        );
    }
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["comparison"]["direction"], "d_PCA");
    assert_eq!(r["comparison"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(r["config"]["debias"]["parsed"]["name"], "gender-linear-pca");
    assert!(fs::read_to_string(&md).unwrap().contains("ME (retain)"));

    let again = run(&[
        "weat",
        "--embeddings",
        s(&debiased),
        "--no-normalize",
        "--test",
        "gender-verbs",
        "--permutations",
        "200",
    ]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
}

#[test]
fn hard_plan_without_pairs_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(&fixture_table(), dir.path(), "t.txt");
    let plan = dir.path().join("p.json");
    fs::write(
        &plan,
        r#"{"schema_version": 1, "name": "bad", "method": "hard",
            "direction": {"label": "g", "method": "pair", "pair": ["purush", "mahila"]}}"#,
    )
    .unwrap();
    let out = run(&[
        "debias",
        "--embeddings",
        s(&table),
        "--plan",
        s(&plan),
        "--out",
        s(&dir.path().join("o.txt")),
        "--report",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!dir.path().join("o.txt").exists());
}
