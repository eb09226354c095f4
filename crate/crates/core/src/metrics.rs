//! DAMR, RelScore and SuccScore, plus grouped summaries of them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::Dimension;
use crate::judge::{EngagementAnnotation, PedagogyAnnotation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no annotations")]
    NoAnnotations,
    #[error("desired labels for {0} must be a non-empty subset of 1..=3")]
    InvalidRubric(Dimension),
    #[error("DAMR grids do not cover the same cells; missing: {}", .0.join(", "))]
    CoverageMismatch(Vec<String>),
}

/// Desired label set per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesiredLabelRubric {
    desired: BTreeMap<Dimension, BTreeSet<u8>>,
}

impl Default for DesiredLabelRubric {
    /// Label 1 everywhere, except "No" (3) for revealing the answer and either
    /// encouraging or neutral (1, 2) for tone.
    fn default() -> Self {
        let desired = Dimension::ALL
            .into_iter()
            .map(|d| {
                let set = match d {
                    Dimension::RevealingAnswer => BTreeSet::from([3]),
                    Dimension::TutorTone => BTreeSet::from([1, 2]),
                    _ => BTreeSet::from([1]),
                };
                (d, set)
            })
            .collect();
        Self { desired }
    }
}

impl DesiredLabelRubric {
    /// Default rubric with some dimensions replaced.
    pub fn with_overrides(
        overrides: &BTreeMap<Dimension, BTreeSet<u8>>,
    ) -> Result<Self, MetricsError> {
        let mut rubric = Self::default();
        for (d, set) in overrides {
            if set.is_empty() || set.iter().any(|l| !(1..=3).contains(l)) {
                return Err(MetricsError::InvalidRubric(*d));
            }
            rubric.desired.insert(*d, set.clone());
        }
        Ok(rubric)
    }

    pub fn desired(&self, dimension: Dimension) -> &BTreeSet<u8> {
        &self.desired[&dimension]
    }

    pub fn is_desired(&self, dimension: Dimension, label: u8) -> bool {
        self.desired[&dimension].contains(&label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamrResult {
    pub rate: f64,
    pub matched: usize,
    pub total: usize,
}

impl DamrResult {
    pub fn unmatched(&self) -> usize {
        self.total - self.matched
    }
}

/// Desired annotation match rate of one dimension.
pub fn damr<'a>(
    annotations: impl IntoIterator<Item = &'a PedagogyAnnotation>,
    dimension: Dimension,
    rubric: &DesiredLabelRubric,
) -> Result<DamrResult, MetricsError> {
    let mut matched = 0;
    let mut total = 0;
    for a in annotations {
        total += 1;
        if rubric.is_desired(dimension, a.label(dimension)) {
            matched += 1;
        }
    }
    if total == 0 {
        return Err(MetricsError::NoAnnotations);
    }
    Ok(DamrResult {
        rate: matched as f64 / total as f64,
        matched,
        total,
    })
}

/// Fraction of sentences the student acted on.
pub fn rel_score(annotation: &EngagementAnnotation) -> f64 {
    annotation.rel_count() as f64 / annotation.per_sentence.len() as f64
}

/// Fraction of acted-on sentences applied correctly; `None` when no sentence
/// was acted on.
pub fn succ_score(annotation: &EngagementAnnotation) -> Option<f64> {
    match annotation.rel_count() {
        0 => None,
        rel => Some(annotation.succ_count() as f64 / rel as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementScores {
    pub feedback_id: String,
    pub sentences: usize,
    pub rel_count: usize,
    pub succ_count: usize,
    pub rel_score: f64,
    pub succ_score: Option<f64>,
}

impl EngagementScores {
    pub fn from_annotation(annotation: &EngagementAnnotation) -> Self {
        Self {
            feedback_id: annotation.feedback_id.clone(),
            sentences: annotation.per_sentence.len(),
            rel_count: annotation.rel_count(),
            succ_count: annotation.succ_count(),
            rel_score: rel_score(annotation),
            succ_score: succ_score(annotation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: Option<f64>,
    /// Sample standard deviation; absent below two values.
    pub sd: Option<f64>,
    pub n: usize,
    pub n_excluded: usize,
}

/// Per-group mean, sample sd and count. `None` values are counted in
/// `n_excluded` and otherwise ignored.
pub fn aggregate<K: Ord>(items: impl IntoIterator<Item = (K, Option<f64>)>) -> BTreeMap<K, GroupSummary> {
    let mut values: BTreeMap<K, (Vec<f64>, usize)> = BTreeMap::new();
    for (k, v) in items {
        let entry = values.entry(k).or_default();
        match v {
            Some(x) => entry.0.push(x),
            None => entry.1 += 1,
        }
    }
    values
        .into_iter()
        .map(|(k, (xs, excluded))| (k, summarize(&xs, excluded)))
        .collect()
}

pub fn summarize(xs: &[f64], n_excluded: usize) -> GroupSummary {
    let n = xs.len();
    let mean = (n > 0).then(|| xs.iter().sum::<f64>() / n as f64);
    let sd = mean.filter(|_| n > 1).map(|m| {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    });
    GroupSummary { mean, sd, n, n_excluded }
}

/// DAMR cells for one tutor keyed by `(assignment_id, dimension)`.
pub type DamrGrid = BTreeMap<(u32, Dimension), DamrResult>;

/// DAMR per assignment and dimension for annotations grouped by assignment.
pub fn damr_grid<'a>(
    annotations: impl IntoIterator<Item = (u32, &'a PedagogyAnnotation)>,
    rubric: &DesiredLabelRubric,
) -> DamrGrid {
    let mut by_assignment: BTreeMap<u32, Vec<&PedagogyAnnotation>> = BTreeMap::new();
    for (a, ann) in annotations {
        by_assignment.entry(a).or_default().push(ann);
    }
    let mut grid = DamrGrid::new();
    for (a, anns) in by_assignment {
        for d in Dimension::ALL {
            let r = damr(anns.iter().copied(), d, rubric).expect("group is non-empty");
            grid.insert((a, d), r);
        }
    }
    grid
}

/// `DAMR_B − DAMR_A` in percentage points for every shared cell.
pub fn damr_delta(a: &DamrGrid, b: &DamrGrid) -> Result<BTreeMap<(u32, Dimension), f64>, MetricsError> {
    let missing: Vec<String> = a
        .keys()
        .filter(|k| !b.contains_key(k))
        .map(|(asg, d)| format!("second tutor ({asg}, {d})"))
        .chain(
            b.keys()
                .filter(|k| !a.contains_key(k))
                .map(|(asg, d)| format!("first tutor ({asg}, {d})")),
        )
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::CoverageMismatch(missing));
    }
    Ok(a.iter()
        .map(|(k, ra)| (*k, (b[k].rate - ra.rate) * 100.0))
        .collect())
}

/// One line of the metric CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub tutor: String,
    pub group: String,
    pub metric: String,
    #[serde(flatten)]
    pub summary: GroupSummary,
}

pub fn metric_rows_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("tutor,group,metric,mean,sd,n,n_excluded\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.tutor,
            r.group,
            r.metric,
            opt(r.summary.mean),
            opt(r.summary.sd),
            r.summary.n,
            r.summary.n_excluded
        ));
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
