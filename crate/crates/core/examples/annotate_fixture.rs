//! Judge every feedback message of the bundled fixture with a scripted backend.

use std::path::PathBuf;

use tutor_eval::judge::{FixtureBackend, Judge, RetryPolicy};
use tutor_eval::Corpus;

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small");
    let corpus = Corpus::parse(
        &dir.join("submissions.jsonl"),
        &dir.join("feedback.jsonl"),
        Some(&dir.join("ratings.jsonl")),
    )
    .expect("fixture is valid");
    let backend = FixtureBackend::from_file(&dir.join("transcript.jsonl")).expect("transcript");
    let judge = Judge::new(&backend).with_retry(RetryPolicy::no_delay(1));

    for fb in corpus.feedback.values() {
        let sub = corpus.submission(&fb.submission_id).unwrap();
        let prior = corpus.prior_context(&fb.submission_id);
        let ann = judge.annotate_pedagogy("(not provided)", &prior, &sub.code, fb).unwrap();
        let labels: Vec<String> = ann.labels.iter().map(|(d, l)| format!("{d}={l}")).collect();
        println!("{} {}", fb.feedback_id, labels.join(" "));
    }
    for pair in corpus.engagement_pairs() {
        let ann = judge
            .annotate_engagement(&pair.prev.code, pair.feedback, &pair.next.code)
            .unwrap();
        let rel: Vec<u8> = ann.per_sentence.iter().map(|s| s.rel as u8).collect();
        println!("{} rel={rel:?}", ann.feedback_id);
    }
    println!("{:?}", judge.stats());
}
