//! Audit reports: JSON for machines, Markdown tables for people.
//!
//! Markdown is rendered from the same `TestResult`s that go into the JSON, to
//! two decimals; nothing is recomputed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assoc::{Conventions, PermutationPlan, TestResult, UsedMode};
use crate::debias::{ComparisonRow, DebiasPlan};
use crate::lexicon::{OovPolicy, OovReason, Script};
use crate::seat::Pooling;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA: &str = include_str!("../../../data/schema/report.schema.json");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: "embias".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// An input file (or bundled resource) and the digest of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEcho {
    pub source: String,
    pub sha256: String,
}

impl InputEcho {
    pub fn new(source: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            source: source.into(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatEcho {
    pub templates: InputEcho,
    pub expand_attributes: bool,
    pub pooling: Pooling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precomputed: Option<InputEcho>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasEcho {
    pub plan: InputEcho,
    pub parsed: DebiasPlan,
}

/// Everything that determines the numbers in a report. Thread count is
/// deliberately absent: results do not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub command: String,
    pub embeddings: InputEcho,
    pub normalize: bool,
    pub suite: InputEcho,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<String>,
    pub permutation: PermutationPlan,
    pub conventions: Conventions,
    pub oov_policy: OovPolicy,
    pub script: Script,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seat: Option<SeatEcho>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debias: Option<DebiasEcho>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: String,
    pub direction: String,
    pub warnings: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovSummary {
    pub test_name: String,
    pub missing: usize,
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config: ConfigEcho,
    pub results: Vec<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    pub oov_summary: Vec<OovSummary>,
}

fn summarize(results: &[TestResult]) -> Vec<OovSummary> {
    results
        .iter()
        .map(|r| OovSummary {
            test_name: r.test_name.clone(),
            missing: r
                .oov_report
                .iter()
                .filter(|e| e.reason == OovReason::Missing)
                .count(),
            truncated: r
                .oov_report
                .iter()
                .filter(|e| e.reason == OovReason::Truncated)
                .count(),
        })
        .collect()
}

impl AuditReport {
    pub fn new(config: ConfigEcho, results: Vec<TestResult>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: ToolInfo::default(),
            config,
            oov_summary: summarize(&results),
            results,
            comparison: None,
        }
    }

    /// A before/after report; `results` holds the "after" column.
    pub fn with_comparison(config: ConfigEcho, comparison: Comparison) -> Self {
        let results = comparison.rows.iter().map(|r| r.after.clone()).collect();
        let mut report = Self::new(config, results);
        report.comparison = Some(comparison);
        report
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        match &self.comparison {
            Some(c) => render_comparison(c),
            None => render_results(&self.results),
        }
    }
}

/// `d (p)` to two decimals, `n/a` for a degenerate effect size.
pub fn effect_cell(r: &TestResult) -> String {
    let d = match r.effect_size {
        Some(d) => format!("{d:.2}"),
        None => "n/a".to_owned(),
    };
    format!("{d} ({:.2})", r.p_value)
}

fn permutation_cell(r: &TestResult) -> String {
    let mode = match r.mode {
        UsedMode::Exact => "exact",
        UsedMode::Sampled => "sampled",
    };
    format!("{mode} {}", r.permutations_used)
}

fn escape(cell: &str) -> String {
    cell.replace('|', "\\|")
}

/// Table of effect sizes with p-values in parentheses.
pub fn render_results(results: &[TestResult]) -> String {
    let mut out = String::from("# Association test results\n\n");
    out.push_str("| Test | Category | Effect size (p) | Sizes X/Y/A/B | Permutations | OOV |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in results {
        let s = r.sizes;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {}/{}/{}/{} | {} | {} |",
            escape(&r.test_name),
            r.category.short(),
            effect_cell(r),
            s.x,
            s.y,
            s.a,
            s.b,
            permutation_cell(r),
            r.oov_report.len()
        );
    }
    out
}

pub fn render_comparison(c: &Comparison) -> String {
    let mut out = String::from("# Debiasing comparison\n\n");
    let _ = writeln!(
        out,
        "Method: {}; direction: {}\n",
        escape(&c.method),
        escape(&c.direction)
    );
    out.push_str("| Test | Category | Original | Debiased |\n");
    out.push_str("|---|---|---|---|\n");
    for row in &c.rows {
        let cat = if row.retention {
            format!("{} (retain)", row.category.short())
        } else {
            row.category.short().to_owned()
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            escape(&row.test_name),
            cat,
            effect_cell(&row.before),
            effect_cell(&row.after)
        );
    }
    if !c.warnings.is_empty() {
        out.push_str("\nWarnings:\n\n");
        for w in &c.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assoc::{ListSizes, StdDevConvention, TiePolicy};
    use crate::lexicon::Category;

    fn result(d: Option<f64>, p: f64) -> TestResult {
        TestResult {
            test_name: "t".into(),
            category: Category::BiasMeasuring,
            description: None,
            statistic: 0.5,
            effect_size: d,
            degenerate: d.is_none(),
            p_value: p,
            permutations_used: 70,
            mode: UsedMode::Exact,
            stddev: StdDevConvention::Population,
            tie_policy: TiePolicy::Strict,
            sizes: ListSizes {
                x: 4,
                y: 4,
                a: 2,
                b: 2,
            },
            oov_report: Vec::new(),
        }
    }

    #[test]
    fn cells_round_to_two_decimals() {
        assert_eq!(effect_cell(&result(Some(1.1851), 0.004)), "1.19 (0.00)");
        assert_eq!(effect_cell(&result(None, 1.0)), "n/a (1.00)");
    }

    #[test]
    fn markdown_rows_follow_results() {
        let md = render_results(&[result(Some(0.44), 0.2)]);
        assert!(md.contains("| t | BM | 0.44 (0.20) | 4/4/2/2 | exact 70 | 0 |"));
    }

    #[test]
    fn digest_is_hex() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
