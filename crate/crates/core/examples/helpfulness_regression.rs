//! Fit the three helpfulness models on a synthetic corpus and compare the
//! combined model with the planted coefficients.

use tutor_eval::judge::{FixtureBackend, Judge, RetryPolicy};
use tutor_eval::metrics::{DesiredLabelRubric, EngagementScores};
use tutor_eval::perception::{build_rows, run_models, ModelSpec};
use tutor_eval::report::emit_regression_table;
use tutor_eval::synthgen::{generate, GeneratorConfig};
use tutor_eval::Corpus;

fn main() {
    let cfg = GeneratorConfig { n_students: 120, rating_prob: 0.8, ..Default::default() };
    let synth = generate(&cfg).unwrap();
    let corpus = Corpus::from_records(synth.submissions, synth.feedback, synth.ratings).unwrap();
    let backend = FixtureBackend::new(synth.transcript);
    let judge = Judge::new(&backend).with_retry(RetryPolicy::no_delay(0));

    let pedagogy: Vec<_> = corpus
        .feedback
        .values()
        .map(|fb| {
            let code = &corpus.submission(&fb.submission_id).unwrap().code;
            judge.annotate_pedagogy("", &corpus.prior_context(&fb.submission_id), code, fb).unwrap()
        })
        .collect();
    let scores: Vec<_> = corpus
        .engagement_pairs()
        .iter()
        .map(|p| EngagementScores::from_annotation(&judge.annotate_engagement(&p.prev.code, p.feedback, &p.next.code).unwrap()))
        .collect();

    let rows = build_rows(&corpus, &pedagogy, &scores, &cfg.baseline_tutor, &DesiredLabelRubric::default(), 4).unwrap();
    println!("{:?}", rows.exclusions);
    let models = run_models(&rows.rows).unwrap();
    println!("{}", emit_regression_table(&models).markdown);

    if let Some(fit) = &models.get(ModelSpec::Combined).fit {
        let beta = &cfg.helpfulness;
        println!("planted vs fitted (combined):");
        for (name, planted) in [
            ("rel_score", beta.rel_score),
            ("succ_score", beta.succ_score),
            ("baseline_tutor", beta.baseline),
        ] {
            let i = fit.index_of(name).unwrap();
            println!("  {name:<15} {planted:>6.2} {:>6.2} ± {:.2}", fit.coefficients[i], fit.standard_errors[i]);
        }
    }
}
