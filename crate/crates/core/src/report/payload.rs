//! The numbers behind each table and figure.
//!
//! Payloads are computed once, stored in `summary.json`, and every rendered
//! table is a pure function of them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::dimension::Dimension;
use crate::distributions::{DesirednessSplit, EngagementMetric, SplitComparison};
use crate::judge::PedagogyAnnotation;
use crate::metrics::{damr, damr_delta, damr_grid, summarize, DamrResult, DesiredLabelRubric, EngagementScores, GroupSummary};
use crate::perception::{ExclusionReport, ModelSet};
use crate::stats::{adjust_family, cohens_h, fisher_exact_two_sided, mann_whitney_u, ContingencyTable2x2, StatResult};

/// The baseline tutor (`first`) and the tutor compared against it (`second`).
/// Effect sizes and deltas are `second − first`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorPair {
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamrRow {
    pub dimension: Dimension,
    pub first: DamrResult,
    pub second: DamrResult,
    /// Fisher exact test; `statistic` is the first tutor's matched count.
    pub test: StatResult,
}

impl DamrRow {
    pub fn cohens_h(&self) -> f64 {
        self.test.effect_size.expect("DAMR rows carry Cohen's h")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamrComparison {
    pub tutors: TutorPair,
    pub rows: Vec<DamrRow>,
}

pub const DAMR_FAMILY: &str = "damr";

impl DamrComparison {
    /// `annotations` yields `(tutor_id, annotation)`; other tutors are ignored.
    pub fn compute<'a>(
        tutors: &TutorPair,
        annotations: impl IntoIterator<Item = (&'a str, &'a PedagogyAnnotation)>,
        rubric: &DesiredLabelRubric,
    ) -> Result<Self, ReportError> {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (t, ann) in annotations {
            if t == tutors.first {
                a.push(ann);
            } else if t == tutors.second {
                b.push(ann);
            }
        }
        for (t, v) in [(&tutors.first, &a), (&tutors.second, &b)] {
            if v.is_empty() {
                return Err(ReportError::MissingTutor(t.clone()));
            }
        }
        let mut rows: Vec<DamrRow> = Dimension::ALL
            .into_iter()
            .map(|d| {
                let ra = damr(a.iter().copied(), d, rubric).expect("non-empty");
                let rb = damr(b.iter().copied(), d, rubric).expect("non-empty");
                let table = ContingencyTable2x2::new(
                    ra.matched as u64,
                    ra.unmatched() as u64,
                    rb.matched as u64,
                    rb.unmatched() as u64,
                );
                let p = fisher_exact_two_sided(&table).expect("non-empty table");
                DamrRow {
                    dimension: d,
                    first: ra,
                    second: rb,
                    test: StatResult {
                        test_name: "fisher_exact".into(),
                        group: d.name().into(),
                        statistic: ra.matched as f64,
                        effect_size: Some(cohens_h(ra.rate, rb.rate)),
                        p_raw: p,
                        p_holm: p,
                        family_id: DAMR_FAMILY.into(),
                        n_a: ra.total,
                        n_b: rb.total,
                    },
                }
            })
            .collect();
        let mut tests: Vec<StatResult> = rows.iter().map(|r| r.test.clone()).collect();
        adjust_family(&mut tests);
        for (r, t) in rows.iter_mut().zip(tests) {
            r.test = t;
        }
        Ok(Self { tutors: tutors.clone(), rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRow {
    pub assignment_id: u32,
    pub metric: EngagementMetric,
    pub first: GroupSummary,
    pub second: GroupSummary,
    /// Mann-Whitney U, absent when either group is empty.
    pub test: Option<StatResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementComparison {
    pub tutors: TutorPair,
    /// Metric-major, then by assignment.
    pub rows: Vec<EngagementRow>,
}

impl EngagementComparison {
    /// `scores` yields `(tutor_id, assignment_id, scores)`.
    pub fn compute<'a>(
        tutors: &TutorPair,
        scores: impl IntoIterator<Item = (&'a str, u32, &'a EngagementScores)>,
    ) -> Result<Self, ReportError> {
        // (metric, assignment) -> ((first values, excluded), (second values, excluded))
        type Cell = ((Vec<f64>, usize), (Vec<f64>, usize));
        let mut cells: BTreeMap<(EngagementMetric, u32), Cell> = BTreeMap::new();
        let mut seen = (false, false);
        for (t, asg, s) in scores {
            let first = if t == tutors.first {
                seen.0 = true;
                true
            } else if t == tutors.second {
                seen.1 = true;
                false
            } else {
                continue;
            };
            for m in EngagementMetric::ALL {
                let cell = cells.entry((m, asg)).or_default();
                let side = if first { &mut cell.0 } else { &mut cell.1 };
                match m.value(s) {
                    Some(v) => side.0.push(v),
                    None => side.1 += 1,
                }
            }
        }
        if !seen.0 {
            return Err(ReportError::MissingTutor(tutors.first.clone()));
        }
        if !seen.1 {
            return Err(ReportError::MissingTutor(tutors.second.clone()));
        }

        let mut rows = Vec::new();
        for metric in EngagementMetric::ALL {
            let mut family: Vec<EngagementRow> = cells
                .iter()
                .filter(|((m, _), _)| *m == metric)
                .map(|((_, asg), ((xa, ea), (xb, eb)))| EngagementRow {
                    assignment_id: *asg,
                    metric,
                    first: summarize(xa, *ea),
                    second: summarize(xb, *eb),
                    test: mann_whitney_u(xa, xb).ok().map(|r| StatResult {
                        test_name: "mann_whitney_u".into(),
                        group: format!("assignment {asg}"),
                        statistic: r.u,
                        effect_size: Some(mean(xb) - mean(xa)),
                        p_raw: r.p_two_sided,
                        p_holm: r.p_two_sided,
                        family_id: format!("engagement:{}", metric.name()),
                        n_a: xa.len(),
                        n_b: xb.len(),
                    }),
                })
                .collect();
            let mut tests: Vec<StatResult> = family.iter().filter_map(|r| r.test.clone()).collect();
            adjust_family(&mut tests);
            let mut tests = tests.into_iter();
            for r in family.iter_mut().filter(|r| r.test.is_some()) {
                r.test = tests.next();
            }
            rows.extend(family);
        }
        Ok(Self { tutors: tutors.clone(), rows })
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub assignment_id: u32,
    pub dimension: Dimension,
    pub first_rate: f64,
    pub second_rate: f64,
    /// Percentage points, second minus first.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPayload {
    pub tutors: TutorPair,
    pub cells: Vec<DeltaCell>,
    /// Dimensions whose label indicator is constant across both tutors, left out of the chart.
    pub omitted: Vec<Dimension>,
}

impl DeltaPayload {
    /// `annotations` yields `(tutor_id, assignment_id, annotation)`.
    pub fn compute<'a>(
        tutors: &TutorPair,
        annotations: impl IntoIterator<Item = (&'a str, u32, &'a PedagogyAnnotation)>,
        rubric: &DesiredLabelRubric,
    ) -> Result<Self, ReportError> {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (t, asg, ann) in annotations {
            if t == tutors.first {
                a.push((asg, ann));
            } else if t == tutors.second {
                b.push((asg, ann));
            }
        }
        let ga = damr_grid(a, rubric);
        let gb = damr_grid(b, rubric);
        if ga.is_empty() {
            return Err(ReportError::MissingTutor(tutors.first.clone()));
        }
        if gb.is_empty() {
            return Err(ReportError::MissingTutor(tutors.second.clone()));
        }
        let deltas = damr_delta(&ga, &gb).map_err(|e| ReportError::Incomplete(e.to_string()))?;
        let cells: Vec<DeltaCell> = deltas
            .iter()
            .map(|(&(asg, d), &delta)| DeltaCell {
                assignment_id: asg,
                dimension: d,
                first_rate: ga[&(asg, d)].rate,
                second_rate: gb[&(asg, d)].rate,
                delta,
            })
            .collect();
        let omitted = Dimension::ALL
            .into_iter()
            .filter(|d| {
                let rates: BTreeSet<u64> = cells
                    .iter()
                    .filter(|c| c.dimension == *d)
                    .flat_map(|c| [c.first_rate.to_bits(), c.second_rate.to_bits()])
                    .collect();
                rates.len() == 1 && (rates.contains(&1f64.to_bits()) || rates.contains(&0f64.to_bits()))
            })
            .collect();
        Ok(Self { tutors: tutors.clone(), cells, omitted })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionPayload {
    pub min_undesired_n: usize,
    pub splits: Vec<DesirednessSplit>,
    pub comparison: SplitComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPayload {
    /// Reason the models were not fitted, e.g. `skipped: no ratings`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub exclusions: ExclusionReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<ModelSet>,
}
