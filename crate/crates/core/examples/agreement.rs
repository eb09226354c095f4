//! Cohen's kappa between two annotators on pedagogy labels.

use tutor_eval::judge::{agreement_report, LabelSet, PedagogyAnnotation};
use tutor_eval::Dimension;

fn annotator(flip_every: usize) -> LabelSet {
    let mut set = LabelSet::default();
    for i in 0..40 {
        let labels = Dimension::ALL
            .into_iter()
            .map(|d| {
                let base = 1 + ((i + d.index()) % 3) as u8;
                let label = if flip_every > 0 && i % flip_every == 0 { base % 3 + 1 } else { base };
                (d, label)
            })
            .collect();
        set.add_pedagogy(&PedagogyAnnotation { feedback_id: format!("fb{i:03}"), labels });
    }
    set
}

fn main() {
    let report = agreement_report(&annotator(0), &annotator(4)).unwrap();
    for d in &report.dimensions {
        println!("{:<24} n={} agreement={:.1}% kappa={:.3}", d.dimension, d.n, d.percent_agreement, d.kappa);
    }
    println!("macro kappa = {:.3}", report.macro_kappa);
}
