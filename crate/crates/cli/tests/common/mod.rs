#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use embias_core::{
    builtin_suites, builtin_templates, synthetic::vocabulary_table, write_embeddings,
    EmbeddingTable,
};

pub fn embias() -> Command {
    Command::new(env!("CARGO_BIN_EXE_embias"))
}

pub fn run(args: &[&str]) -> Output {
    embias().args(args).output().expect("spawn embias")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Random vectors for every builtin word and template token.
pub fn fixture_table() -> EmbeddingTable {
    vocabulary_table(&builtin_suites(), Some(&builtin_templates()), 20, 11)
}

pub fn write_table(table: &EmbeddingTable, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_embeddings(table, &mut buf).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
