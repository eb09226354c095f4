//! Engagement of pedagogically desired versus undesired feedback.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::diag::Warning;
use crate::dimension::Dimension;
use crate::judge::PedagogyAnnotation;
use crate::metrics::{DesiredLabelRubric, EngagementScores};
use crate::stats::{adjust_family, mann_whitney_u, StatResult};

pub const DEFAULT_MIN_UNDESIRED_N: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementMetric {
    RelScore,
    SuccScore,
}

impl EngagementMetric {
    pub const ALL: [EngagementMetric; 2] = [EngagementMetric::RelScore, EngagementMetric::SuccScore];

    pub fn name(self) -> &'static str {
        match self {
            EngagementMetric::RelScore => "rel_score",
            EngagementMetric::SuccScore => "succ_score",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            EngagementMetric::RelScore => "RelScore",
            EngagementMetric::SuccScore => "SuccScore",
        }
    }

    pub fn value(self, s: &EngagementScores) -> Option<f64> {
        match self {
            EngagementMetric::RelScore => Some(s.rel_score),
            EngagementMetric::SuccScore => s.succ_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesirednessSplit {
    pub tutor_id: String,
    pub dimension: Dimension,
    pub metric: EngagementMetric,
    /// `(feedback_id, score)` pairs.
    pub desired: Vec<(String, f64)>,
    pub undesired: Vec<(String, f64)>,
}

impl DesirednessSplit {
    pub fn desired_scores(&self) -> Vec<f64> {
        self.desired.iter().map(|(_, s)| *s).collect()
    }

    pub fn undesired_scores(&self) -> Vec<f64> {
        self.undesired.iter().map(|(_, s)| *s).collect()
    }
}

/// One split per (tutor, dimension), in tutor then rubric order. Feedback
/// without both annotation kinds is skipped, as are absent SuccScores.
pub fn split_by_desiredness<'a>(
    corpus: &Corpus,
    pedagogy: impl IntoIterator<Item = &'a PedagogyAnnotation>,
    engagement: impl IntoIterator<Item = &'a EngagementScores>,
    rubric: &DesiredLabelRubric,
    metric: EngagementMetric,
) -> Vec<DesirednessSplit> {
    let engagement: BTreeMap<&str, &EngagementScores> =
        engagement.into_iter().map(|e| (e.feedback_id.as_str(), e)).collect();
    let mut joined: BTreeMap<String, Vec<(&PedagogyAnnotation, f64)>> = BTreeMap::new();
    for p in pedagogy {
        let Some(e) = engagement.get(p.feedback_id.as_str()) else { continue };
        let Some(score) = metric.value(e) else { continue };
        let Some(ctx) = corpus.context(&p.feedback_id) else { continue };
        joined.entry(ctx.tutor_id).or_default().push((p, score));
    }
    for items in joined.values_mut() {
        items.sort_by(|a, b| a.0.feedback_id.cmp(&b.0.feedback_id));
    }

    let mut splits = Vec::new();
    for (tutor, items) in joined {
        for d in Dimension::ALL {
            let (desired, undesired): (Vec<_>, Vec<_>) =
                items.iter().partition(|(p, _)| rubric.is_desired(d, p.label(d)));
            let ids = |v: Vec<&(&PedagogyAnnotation, f64)>| {
                v.into_iter().map(|(p, s)| (p.feedback_id.clone(), *s)).collect()
            };
            splits.push(DesirednessSplit {
                tutor_id: tutor.clone(),
                dimension: d,
                metric,
                desired: ids(desired),
                undesired: ids(undesired),
            });
        }
    }
    splits
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSplit {
    pub tutor_id: String,
    pub dimension: Dimension,
    pub metric: EngagementMetric,
    pub n_desired: usize,
    pub n_undesired: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitComparison {
    /// `group` is `<tutor>/<dimension>`; effect size is mean(desired) − mean(undesired).
    pub results: Vec<StatResult>,
    pub excluded: Vec<ExcludedSplit>,
    pub warnings: Vec<Warning>,
}

pub fn family_id(tutor: &str, metric: EngagementMetric) -> String {
    format!("desiredness:{tutor}:{}", metric.name())
}

/// Two-sided Mann-Whitney U per split, Holm-adjusted within each
/// (tutor, metric). Splits with fewer than `min_undesired_n` undesired scores
/// (or no desired scores) are excluded and listed.
pub fn compare_splits(splits: &[DesirednessSplit], min_undesired_n: usize) -> SplitComparison {
    let mut families: BTreeMap<(String, EngagementMetric), Vec<StatResult>> = BTreeMap::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for s in splits {
        let (nd, nu) = (s.desired.len(), s.undesired.len());
        let reason = if nu < min_undesired_n {
            Some(format!("undesired n = {nu} < {min_undesired_n}"))
        } else if nd == 0 {
            Some("no desired feedback".to_string())
        } else {
            None
        };
        if let Some(reason) = reason {
            warnings.push(Warning::new(
                "split-excluded",
                format!("{} {} {}: {reason}", s.tutor_id, s.dimension, s.metric.name()),
            ));
            excluded.push(ExcludedSplit {
                tutor_id: s.tutor_id.clone(),
                dimension: s.dimension,
                metric: s.metric,
                n_desired: nd,
                n_undesired: nu,
                reason,
            });
            continue;
        }
        let (d, u) = (s.desired_scores(), s.undesired_scores());
        let r = mann_whitney_u(&d, &u).expect("both samples non-empty");
        families
            .entry((s.tutor_id.clone(), s.metric))
            .or_default()
            .push(StatResult {
                test_name: "mann_whitney_u".into(),
                group: format!("{}/{}", s.tutor_id, s.dimension),
                statistic: r.u,
                effect_size: Some(mean(&d) - mean(&u)),
                p_raw: r.p_two_sided,
                p_holm: r.p_two_sided,
                family_id: family_id(&s.tutor_id, s.metric),
                n_a: nd,
                n_b: nu,
            });
    }
    let mut results = Vec::new();
    for (_, mut fam) in families {
        adjust_family(&mut fam);
        results.extend(fam);
    }
    SplitComparison { results, excluded, warnings }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub tutor: String,
    pub dimension: Dimension,
    pub metric: EngagementMetric,
    pub group: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
}

pub fn summarize_splits(splits: &[DesirednessSplit]) -> Vec<SplitSummary> {
    let mut out = Vec::new();
    for s in splits {
        for (group, mut xs) in [("desired", s.desired_scores()), ("undesired", s.undesired_scores())] {
            xs.sort_by(f64::total_cmp);
            let some = !xs.is_empty();
            out.push(SplitSummary {
                tutor: s.tutor_id.clone(),
                dimension: s.dimension,
                metric: s.metric,
                group: group.into(),
                n: xs.len(),
                mean: some.then(|| mean(&xs)),
                q1: some.then(|| quantile(&xs, 0.25)),
                median: some.then(|| quantile(&xs, 0.5)),
                q3: some.then(|| quantile(&xs, 0.75)),
            });
        }
    }
    out
}

pub fn summary_csv(summaries: &[SplitSummary]) -> String {
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("tutor,dimension,metric,group,n,mean,q1,median,q3\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.tutor,
            s.dimension,
            s.metric.name(),
            s.group,
            s.n,
            f(s.mean),
            f(s.q1),
            f(s.median),
            f(s.q3)
        ));
    }
    out
}

pub fn raw_scores_csv(splits: &[DesirednessSplit]) -> String {
    let mut out = String::from("tutor,dimension,metric,group,feedback_id,score\n");
    for s in splits {
        for (group, items) in [("desired", &s.desired), ("undesired", &s.undesired)] {
            for (id, score) in items {
                out.push_str(&format!(
                    "{},{},{},{group},{id},{score}\n",
                    s.tutor_id,
                    s.dimension,
                    s.metric.name()
                ));
            }
        }
    }
    out
}
