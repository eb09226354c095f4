//! Run summary and the report directory.
//!
//! ```text
//! <out>/summary.json
//! <out>/tables/{damr,engagement,regression,desiredness}.md
//! <out>/tables/*.csv
//! <out>/figures/delta.svg
//! ```
//!
//! Everything is rendered from [`RunSummary`], so rendering twice gives the
//! same bytes. No absolute paths or timestamps are written.

pub mod chart;
pub mod payload;
pub mod tables;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use chart::emit_delta_chart;
pub use payload::{
    DamrComparison, DamrRow, DeltaCell, DeltaPayload, DistributionPayload, EngagementComparison,
    EngagementRow, RegressionPayload, TutorPair,
};
pub use tables::{emit_damr_table, emit_engagement_table, emit_regression_table, Rendered};

use crate::corpus::LinkageCounts;
use crate::diag::{merge_unique, Warning};
use crate::distributions::{raw_scores_csv, summarize_splits, summary_csv};
use crate::judge::{AgreementReport, JudgeStats};
use crate::stats::StatResult;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no data for tutor `{0}`")]
    MissingTutor(String),
    #[error("incomplete input: {0}")]
    Incomplete(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDigest {
    pub files: Vec<FileDigest>,
    pub counts: LinkageCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool_version: String,
    pub command: String,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusDigest>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<JudgeStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<AnnotationCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damr: Option<DamrComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engagement: Option<EngagementComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributions: Option<DistributionPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<AgreementReport>,
    pub warnings: Vec<Warning>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationCounts {
    pub pedagogy: usize,
    pub engagement: usize,
    pub failed: usize,
}

impl RunSummary {
    pub fn new(command: &str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            exit_code: 0,
            corpus: None,
            config: serde_json::Value::Null,
            notes: Vec::new(),
            judge: None,
            annotations: None,
            damr: None,
            engagement: None,
            delta: None,
            distributions: None,
            regression: None,
            agreement: None,
            warnings: Vec::new(),
            errors: Vec::new(),
        }
    }

    /// Adds warnings, keeping the first occurrence of duplicates.
    pub fn warn(&mut self, warnings: impl IntoIterator<Item = Warning>) {
        merge_unique(&mut self.warnings, warnings);
    }

    /// Every output file as `(relative path, contents)`.
    pub fn render(&self) -> Vec<(PathBuf, String)> {
        let mut files = Vec::new();
        let mut add = |p: &str, s: String| files.push((PathBuf::from(p), s));
        if let Some(d) = &self.damr {
            let t = emit_damr_table(d);
            add("tables/damr.md", t.markdown);
            add("tables/damr.csv", t.csv);
        }
        if let Some(e) = &self.engagement {
            let t = emit_engagement_table(e);
            add("tables/engagement.md", t.markdown);
            add("tables/engagement.csv", t.csv);
        }
        if let Some(r) = &self.regression {
            let t = tables::emit_regression_section(r);
            add("tables/regression.md", t.markdown);
            add("tables/regression.csv", t.csv);
        }
        if let Some(d) = &self.distributions {
            add("tables/desiredness.md", desiredness_markdown(d));
            add("tables/desiredness_summary.csv", summary_csv(&summarize_splits(&d.splits)));
            add("tables/desiredness_scores.csv", raw_scores_csv(&d.splits));
            let mut csv = format!("{}\n", StatResult::CSV_HEADER);
            for r in &d.comparison.results {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            add("tables/desiredness_tests.csv", csv);
        }
        if let Some(d) = &self.delta {
            let (svg, csv) = emit_delta_chart(d);
            add("figures/delta.svg", svg);
            add("tables/delta.csv", csv);
        }
        if let Some(a) = &self.agreement {
            let (md, csv) = agreement_tables(a);
            add("tables/agreement.md", md);
            add("tables/agreement.csv", csv);
        }
        let mut json = serde_json::to_string_pretty(self).expect("summary is serializable");
        json.push('\n');
        add("summary.json", json);
        files
    }

    /// Writes [`render`](Self::render) under `out_dir`.
    pub fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        for (rel, contents) in self.render() {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, contents)?;
        }
        Ok(())
    }
}

fn agreement_tables(a: &AgreementReport) -> (String, String) {
    let mut md = String::from("| Dimension | n | Agreement (%) | κ |\n|---|---:|---:|---:|\n");
    let mut csv = String::from("dimension,n,percent_agreement,kappa,undefined_variance\n");
    for d in &a.dimensions {
        let flag = if d.undefined_variance { " †" } else { "" };
        writeln!(
            md,
            "| {} | {} | {} | {}{flag} |",
            d.dimension,
            d.n,
            tables::fixed(d.percent_agreement, 1),
            tables::fixed(d.kappa, 3)
        )
        .unwrap();
        writeln!(csv, "{},{},{},{},{}", d.dimension, d.n, d.percent_agreement, d.kappa, d.undefined_variance).unwrap();
    }
    writeln!(md, "| macro average | {} | | {} |", a.shared_items, tables::fixed(a.macro_kappa, 3)).unwrap();
    if a.dimensions.iter().any(|d| d.undefined_variance) {
        md.push_str("\n† at least one annotator used a single label; κ says nothing about discrimination on this dimension.\n");
    }
    (md, csv)
}

fn desiredness_markdown(d: &DistributionPayload) -> String {
    let mut md = String::from(
        "| Tutor | Metric | Dimension | n desired | n undesired | Δ mean | p |\n|---|---|---|---:|---:|---:|---:|\n",
    );
    for r in &d.comparison.results {
        let (tutor, dim) = r.group.split_once('/').unwrap_or(("", &r.group));
        let metric = r.family_id.rsplit(':').next().unwrap_or("");
        writeln!(
            md,
            "| {tutor} | {metric} | {dim} | {} | {} | {} | {} |",
            r.n_a,
            r.n_b,
            tables::fixed(r.effect_size.unwrap_or(0.0) * 100.0, 1),
            tables::format_p(r.p_holm)
        )
        .unwrap();
    }
    md.push_str(&format!(
        "\nΔ mean is desired minus undesired, in percentage points. Two-sided Mann-Whitney U, Holm-adjusted within each tutor and metric; * p < 0.05. Splits with fewer than {} undesired feedback messages are excluded.\n",
        d.min_undesired_n
    ));
    for e in &d.comparison.excluded {
        writeln!(md, "Excluded: {} {} {} ({}).", e.tutor_id, e.metric.name(), e.dimension, e.reason).unwrap();
    }
    md
}
