//! Inter-annotator agreement between two annotation exports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::annotation::{EngagementAnnotation, PedagogyAnnotation};
use crate::diag::Warning;
use crate::stats::cohens_kappa;

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("the two annotation files share no item ids")]
    DisjointItems,
}

/// Labels per item and dimension: `item -> dimension -> label`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet(pub BTreeMap<String, BTreeMap<String, u8>>);

impl LabelSet {
    /// Reads pedagogy or engagement annotation JSONL. Engagement items are
    /// sentences (`<feedback_id>#<index>`) with dimensions `rel` and `succ`.
    pub fn load(path: &Path) -> Result<Self, AgreementError> {
        let text = std::fs::read_to_string(path).map_err(|source| AgreementError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut set = LabelSet::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| AgreementError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let v: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            if v.get("labels").is_some() {
                let a: PedagogyAnnotation =
                    serde_json::from_value(v).map_err(|e| malformed(e.to_string()))?;
                set.add_pedagogy(&a);
            } else if v.get("per_sentence").is_some() {
                let a: EngagementAnnotation =
                    serde_json::from_value(v).map_err(|e| malformed(e.to_string()))?;
                set.add_engagement(&a);
            } else {
                return Err(malformed("expected `labels` or `per_sentence`".into()));
            }
        }
        Ok(set)
    }

    pub fn add_pedagogy(&mut self, a: &PedagogyAnnotation) {
        let entry = self.0.entry(a.feedback_id.clone()).or_default();
        for (d, l) in &a.labels {
            entry.insert(d.name().to_string(), *l);
        }
    }

    pub fn add_engagement(&mut self, a: &EngagementAnnotation) {
        for s in &a.per_sentence {
            let entry = self
                .0
                .entry(format!("{}#{}", a.feedback_id, s.sentence_index))
                .or_default();
            entry.insert("rel".into(), u8::from(s.rel));
            if let Some(succ) = s.succ {
                entry.insert("succ".into(), u8::from(succ));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAgreement {
    pub dimension: String,
    pub n: usize,
    pub kappa: f64,
    pub percent_agreement: f64,
    pub undefined_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub shared_items: usize,
    pub dimensions: Vec<DimensionAgreement>,
    pub macro_kappa: f64,
    pub warnings: Vec<Warning>,
}

pub fn agreement_report(a: &LabelSet, b: &LabelSet) -> Result<AgreementReport, AgreementError> {
    let ids_a: BTreeSet<&String> = a.0.keys().collect();
    let ids_b: BTreeSet<&String> = b.0.keys().collect();
    let shared: Vec<&String> = ids_a.intersection(&ids_b).copied().collect();
    if shared.is_empty() {
        return Err(AgreementError::DisjointItems);
    }
    let mut warnings = Vec::new();
    let only = ids_a.symmetric_difference(&ids_b).count();
    if only > 0 {
        warnings.push(Warning::new(
            "agreement-unmatched-items",
            format!("{only} item(s) appear in only one file and were skipped"),
        ));
    }

    let mut pairs: BTreeMap<&str, (Vec<u8>, Vec<u8>)> = BTreeMap::new();
    for id in &shared {
        for (dim, la) in &a.0[*id] {
            if let Some(lb) = b.0[*id].get(dim) {
                let e = pairs.entry(dim.as_str()).or_default();
                e.0.push(*la);
                e.1.push(*lb);
            }
        }
    }

    let mut dimensions = Vec::new();
    for (dim, (la, lb)) in pairs {
        let k = cohens_kappa(&la, &lb).expect("equal non-empty lists");
        if k.undefined_variance && k.expected_agreement < 1.0 {
            warnings.push(Warning::new(
                "undefined-variance",
                format!("{dim}: one annotator used a single label; kappa is uninformative"),
            ));
        }
        dimensions.push(DimensionAgreement {
            dimension: dim.to_string(),
            n: la.len(),
            kappa: k.kappa,
            percent_agreement: k.observed_agreement * 100.0,
            undefined_variance: k.undefined_variance,
        });
    }
    // rubric order for pedagogy dimensions, then the rest alphabetically
    dimensions.sort_by_key(|d| {
        (
            d.dimension.parse::<crate::Dimension>().map(|x| x.index()).unwrap_or(usize::MAX),
            d.dimension.clone(),
        )
    });
    let macro_kappa = dimensions.iter().map(|d| d.kappa).sum::<f64>() / dimensions.len() as f64;
    Ok(AgreementReport {
        shared_items: shared.len(),
        dimensions,
        macro_kappa,
        warnings,
    })
}
