//! Predicting student-perceived helpfulness from pedagogy and engagement.
//!
//! Three logistic models are fitted on rated feedback:
//!
//! | model           | covariates                                         |
//! |-----------------|----------------------------------------------------|
//! | pedagogy-only   | P₁..P₈, baseline indicator                         |
//! | engagement-only | RelScore, SuccScore, baseline indicator            |
//! | combined        | RelScore, SuccScore, P₁..P₈, baseline indicator    |
//!
//! `P_j` is 1 when dimension `j` carries a desired label. The baseline
//! indicator is 1 for feedback from the configured baseline tutor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::diag::Warning;
use crate::dimension::Dimension;
use crate::judge::PedagogyAnnotation;
use crate::metrics::{DesiredLabelRubric, EngagementScores};
use crate::stats::{logit_fit, DesignMatrix, RegressionFit};

pub const REL_SCORE: &str = "rel_score";
pub const SUCC_SCORE: &str = "succ_score";
pub const BASELINE: &str = "baseline_tutor";
pub const DEFAULT_LIKERT_CUTOFF: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerceptionError {
    #[error("likert rating {0} outside 1..=5")]
    LikertOutOfRange(u8),
    #[error("baseline tutor `{0}` does not occur in the corpus")]
    UnknownBaseline(String),
    #[error("no rows to fit")]
    NoRows,
}

/// 1 when the rating is at or above `cutoff` (4 by default, so 4 and 5 are helpful).
pub fn binarize_rating(likert: u8, cutoff: u8) -> Result<bool, PerceptionError> {
    if !(1..=5).contains(&likert) {
        return Err(PerceptionError::LikertOutOfRange(likert));
    }
    Ok(likert >= cutoff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelpfulnessRow {
    pub feedback_id: String,
    pub tutor_id: String,
    pub y: bool,
    /// Desired-label indicators in rubric order.
    pub pedagogy: [bool; 8],
    pub rel_score: Option<f64>,
    pub succ_score: Option<f64>,
    pub baseline: bool,
}

impl HelpfulnessRow {
    pub fn has_engagement(&self) -> bool {
        self.rel_score.is_some() && self.succ_score.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub rated_feedback: usize,
    /// Dropped from every model.
    pub missing_pedagogy: usize,
    /// Kept for pedagogy-only; no engagement annotation (e.g. abandoned stream).
    pub missing_engagement: usize,
    /// Kept for pedagogy-only; no relevant sentence, so SuccScore is undefined.
    pub missing_succ: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSet {
    pub rows: Vec<HelpfulnessRow>,
    pub exclusions: ExclusionReport,
}

pub fn build_rows<'a>(
    corpus: &Corpus,
    pedagogy: impl IntoIterator<Item = &'a PedagogyAnnotation>,
    engagement: impl IntoIterator<Item = &'a EngagementScores>,
    baseline_tutor_id: &str,
    rubric: &DesiredLabelRubric,
    likert_cutoff: u8,
) -> Result<RowSet, PerceptionError> {
    if !corpus.tutors().iter().any(|t| t == baseline_tutor_id) {
        return Err(PerceptionError::UnknownBaseline(baseline_tutor_id.to_string()));
    }
    let pedagogy: BTreeMap<&str, &PedagogyAnnotation> =
        pedagogy.into_iter().map(|a| (a.feedback_id.as_str(), a)).collect();
    let engagement: BTreeMap<&str, &EngagementScores> =
        engagement.into_iter().map(|e| (e.feedback_id.as_str(), e)).collect();

    let mut exclusions = ExclusionReport::default();
    let mut rows = Vec::new();
    for (feedback_id, fb) in &corpus.feedback {
        let Some(rating) = corpus.ratings.get(&fb.submission_id) else {
            continue;
        };
        exclusions.rated_feedback += 1;
        let Some(ann) = pedagogy.get(feedback_id.as_str()) else {
            exclusions.missing_pedagogy += 1;
            continue;
        };
        let ctx = corpus.context(feedback_id).expect("feedback is linked");
        let scores = engagement.get(feedback_id.as_str());
        match scores {
            None => exclusions.missing_engagement += 1,
            Some(s) if s.succ_score.is_none() => exclusions.missing_succ += 1,
            Some(_) => {}
        }
        let mut p = [false; 8];
        for d in Dimension::ALL {
            p[d.index()] = rubric.is_desired(d, ann.label(d));
        }
        rows.push(HelpfulnessRow {
            feedback_id: feedback_id.clone(),
            baseline: ctx.tutor_id == baseline_tutor_id,
            tutor_id: ctx.tutor_id,
            y: binarize_rating(rating.likert, likert_cutoff)?,
            pedagogy: p,
            rel_score: scores.map(|s| s.rel_score),
            succ_score: scores.and_then(|s| s.succ_score),
        });
    }
    Ok(RowSet { rows, exclusions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    PedagogyOnly,
    EngagementOnly,
    Combined,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 3] = [ModelSpec::PedagogyOnly, ModelSpec::EngagementOnly, ModelSpec::Combined];

    pub fn name(self) -> &'static str {
        match self {
            ModelSpec::PedagogyOnly => "pedagogy-only",
            ModelSpec::EngagementOnly => "engagement-only",
            ModelSpec::Combined => "combined",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ModelSpec::PedagogyOnly => "Pedagogy-only",
            ModelSpec::EngagementOnly => "Engagement-only",
            ModelSpec::Combined => "Combined",
        }
    }

    fn uses_pedagogy(self) -> bool {
        self != ModelSpec::EngagementOnly
    }

    fn uses_engagement(self) -> bool {
        self != ModelSpec::PedagogyOnly
    }

    /// Covariate names in model order (intercept excluded).
    pub fn covariates(self) -> Vec<String> {
        let mut names = Vec::new();
        if self.uses_engagement() {
            names.push(REL_SCORE.to_string());
            names.push(SUCC_SCORE.to_string());
        }
        if self.uses_pedagogy() {
            names.extend(Dimension::ALL.iter().map(|d| d.name().to_string()));
        }
        names.push(BASELINE.to_string());
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub spec: ModelSpec,
    pub n: usize,
    /// Covariates removed because they were constant on this model's rows.
    pub dropped: Vec<String>,
    pub fit: Option<RegressionFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub models: Vec<ModelOutcome>,
    pub warnings: Vec<Warning>,
}

impl ModelSet {
    pub fn get(&self, spec: ModelSpec) -> &ModelOutcome {
        self.models.iter().find(|m| m.spec == spec).expect("all specs are fitted")
    }

    pub fn any_failed(&self) -> bool {
        self.models.iter().any(|m| m.error.is_some())
    }
}

/// Covariate values of one row for the named columns.
fn covariate_value(row: &HelpfulnessRow, name: &str) -> f64 {
    match name {
        REL_SCORE => row.rel_score.expect("engagement rows carry scores"),
        SUCC_SCORE => row.succ_score.expect("engagement rows carry scores"),
        BASELINE => f64::from(u8::from(row.baseline)),
        dim => {
            let d: Dimension = dim.parse().expect("covariate names are dimensions");
            f64::from(u8::from(row.pedagogy[d.index()]))
        }
    }
}

/// Design matrix for `spec` with constant columns removed. Returns the design,
/// outcomes, and dropped names.
pub fn model_design(spec: ModelSpec, rows: &[HelpfulnessRow]) -> (DesignMatrix, Vec<bool>, Vec<String>) {
    let used: Vec<&HelpfulnessRow> = rows
        .iter()
        .filter(|r| !spec.uses_engagement() || r.has_engagement())
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for name in spec.covariates() {
        let mut values = used.iter().map(|r| covariate_value(r, &name));
        let first = values.next();
        let constant = match first {
            Some(f) => values.all(|v| v == f),
            None => true,
        };
        if constant {
            dropped.push(name);
        } else {
            kept.push(name);
        }
    }
    let names: Vec<&str> = kept.iter().map(String::as_str).collect();
    let data: Vec<Vec<f64>> = used
        .iter()
        .map(|r| names.iter().map(|n| covariate_value(r, n)).collect())
        .collect();
    let y = used.iter().map(|r| r.y).collect();
    (DesignMatrix::with_intercept(&names, &data), y, dropped)
}

pub fn run_models(rows: &[HelpfulnessRow]) -> Result<ModelSet, PerceptionError> {
    if rows.is_empty() {
        return Err(PerceptionError::NoRows);
    }
    let mut warnings = Vec::new();
    let models = ModelSpec::ALL
        .into_iter()
        .map(|spec| {
            let (design, y, dropped) = model_design(spec, rows);
            for name in &dropped {
                warnings.push(Warning::new(
                    "covariate-dropped",
                    format!("{}: `{name}` has no variance and was omitted", spec.name()),
                ));
            }
            let n = y.len();
            let (fit, error) = if n == 0 {
                (None, Some("no rows with complete covariates".to_string()))
            } else {
                match logit_fit(&design, &y) {
                    Ok(f) => {
                        for w in &f.warnings {
                            warnings.push(Warning::new(w.code.clone(), format!("{}: {}", spec.name(), w.message)));
                        }
                        (Some(f), None)
                    }
                    Err(e) => {
                        warnings.push(Warning::new("model-failed", format!("{}: {e}", spec.name())));
                        (None, Some(e.to_string()))
                    }
                }
            };
            ModelOutcome { spec, n, dropped, fit, error }
        })
        .collect();
    Ok(ModelSet { models, warnings })
}
