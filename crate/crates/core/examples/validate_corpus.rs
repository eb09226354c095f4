//! Parse a corpus and print linkage counts and warnings.
//!
//! cargo run --example validate_corpus -- <submissions.jsonl> <feedback.jsonl> [ratings.jsonl]
//!
//! Without arguments the bundled test fixture is used.

use std::path::PathBuf;

use tutor_eval::Corpus;

fn main() {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small");
    let (subs, fb, ratings) = match args.as_slice() {
        [s, f] => (s.clone(), f.clone(), None),
        [s, f, r] => (s.clone(), f.clone(), Some(r.clone())),
        _ => (
            fixture.join("submissions.jsonl"),
            fixture.join("feedback.jsonl"),
            Some(fixture.join("ratings.jsonl")),
        ),
    };
    let corpus = match Corpus::parse(&subs, &fb, ratings.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    println!("{}", serde_json::to_string_pretty(&corpus.counts).unwrap());
    for s in &corpus.streams {
        println!(
            "{} {} {:<20} attempts={} abandoned={}",
            s.student_id,
            s.problem_id,
            s.tutor_id,
            s.submissions.len(),
            s.is_abandoned()
        );
    }
    for w in &corpus.warnings {
        println!("warning [{}] {}", w.code, w.message);
    }
}
