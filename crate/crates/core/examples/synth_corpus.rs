//! Write a synthetic corpus with planted rates.
//!
//! cargo run --example synth_corpus -- <out-dir> [seed]

use std::path::PathBuf;

use tutor_eval::synthgen::{generate, GeneratorConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tutor-eval-synth"));
    let seed = args.next().map(|s| s.parse().expect("seed is an integer")).unwrap_or(42);
    let corpus = generate(&GeneratorConfig { seed, ..Default::default() }).unwrap();
    corpus.write(&out).unwrap();
    println!(
        "{} submissions, {} feedback, {} ratings -> {}",
        corpus.submissions.len(),
        corpus.feedback.len(),
        corpus.ratings.len(),
        out.display()
    );
    for (tutor, r) in &corpus.ground_truth.realized {
        println!(
            "{tutor}: rel {:.3}, succ|rel {:.3}, helpful {}/{}",
            r.relevant_sentences as f64 / r.sentences_judged as f64,
            r.successful_sentences as f64 / r.relevant_sentences as f64,
            r.rated_helpful,
            r.rated
        );
    }
}
