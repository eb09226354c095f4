//! Synthesize, annotate and evaluate in one go, then list the report files.
//!
//! cargo run --example full_report -- [work-dir]

use std::path::PathBuf;

use tutor_eval::config::RunConfig;
use tutor_eval::pipeline::{cmd_annotate, cmd_evaluate, cmd_synth, Which};

fn main() {
    let work = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tutor-eval-report"));
    let mut cfg = RunConfig::default();
    cfg.resolve_paths(&work);
    let outcome = cmd_synth(&cfg);
    assert_eq!(outcome.exit_code, 0, "{:?}", outcome.summary.errors);

    let run = RunConfig::load(&cfg.out_dir.join("run.toml")).unwrap();
    for outcome in [cmd_annotate(&run, Which::Both), cmd_evaluate(&run)] {
        println!("{}: exit {}", outcome.summary.command, outcome.exit_code);
        for w in &outcome.summary.warnings {
            println!("  [{}] {}", w.code, w.message);
        }
    }
    for (path, contents) in cmd_evaluate(&run).summary.render() {
        println!("{:<36} {:>7} bytes", path.display(), contents.len());
    }
    println!("report in {}", run.out_dir.display());
}
