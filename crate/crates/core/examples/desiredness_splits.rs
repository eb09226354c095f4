//! Engagement scores split by whether a pedagogy label was desired.

use tutor_eval::distributions::{compare_splits, split_by_desiredness, summarize_splits, EngagementMetric};
use tutor_eval::judge::{FixtureBackend, Judge, RetryPolicy};
use tutor_eval::metrics::{DesiredLabelRubric, EngagementScores};
use tutor_eval::synthgen::{generate, GeneratorConfig};
use tutor_eval::Corpus;

fn main() {
    let synth = generate(&GeneratorConfig::default()).unwrap();
    let corpus = Corpus::from_records(synth.submissions, synth.feedback, synth.ratings).unwrap();
    let backend = FixtureBackend::new(synth.transcript);
    let judge = Judge::new(&backend).with_retry(RetryPolicy::no_delay(0));
    let rubric = DesiredLabelRubric::default();

    let pedagogy: Vec<_> = corpus
        .feedback
        .values()
        .map(|fb| {
            let code = &corpus.submission(&fb.submission_id).unwrap().code;
            judge.annotate_pedagogy("", &[], code, fb).unwrap()
        })
        .collect();
    let scores: Vec<_> = corpus
        .engagement_pairs()
        .iter()
        .map(|p| EngagementScores::from_annotation(&judge.annotate_engagement(&p.prev.code, p.feedback, &p.next.code).unwrap()))
        .collect();

    let splits = split_by_desiredness(&corpus, &pedagogy, &scores, &rubric, EngagementMetric::RelScore);
    for s in summarize_splits(&splits).iter().take(6) {
        println!("{s:?}");
    }
    let cmp = compare_splits(&splits, 15);
    for r in &cmp.results {
        println!("{:<40} U={:<8} p_holm={:.3}", r.group, r.statistic, r.p_holm);
    }
    for x in &cmp.excluded {
        println!("excluded {} {}: {}", x.tutor_id, x.dimension, x.reason);
    }
}
