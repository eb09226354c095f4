//! The commands behind the CLI.
//!
//! Each command returns an [`Outcome`] and writes `summary.json` to the output
//! directory whatever happens. Exit codes: 0 success, 2 input or config error,
//! 3 judge backend error, 4 pipeline-state error (missing annotations, a
//! model that could not be fitted).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use rayon::prelude::*;
use serde::de::DeserializeOwned;

use crate::config::{BackendKind, RunConfig};
use crate::corpus::{write_jsonl, Corpus};
use crate::diag::Warning;
use crate::distributions::{compare_splits, split_by_desiredness, EngagementMetric};
use crate::judge::{
    agreement_report, AgreementError, EngagementAnnotation, FixtureBackend, Judge, JudgeBackend, JudgeError,
    LabelSet, PedagogyAnnotation, PromptTemplate, PromptTemplates, RemoteBackend, ReplyCache, RetryPolicy,
};
use crate::metrics::EngagementScores;
use crate::perception::{build_rows, run_models};
use crate::report::{
    AnnotationCounts, CorpusDigest, DamrComparison, DeltaPayload, DistributionPayload, EngagementComparison,
    FileDigest, RegressionPayload, RunSummary, TutorPair,
};
use crate::synthgen::{generate, ProblemStatement};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_STATE: i32 = 4;

pub const ANNOTATIONS_DIR: &str = "annotations";
pub const PEDAGOGY_FILE: &str = "pedagogy.jsonl";
pub const ENGAGEMENT_FILE: &str = "engagement.jsonl";
pub const ANNOTATE_LOG: &str = "annotate.log";
pub const SUMMARY_FILE: &str = "summary.json";

const NOTES: &[&str] = &[
    "Fisher's exact test is two-sided: the probabilities of all tables with the observed margins that are no more likely than the observed table are summed.",
    "Mann-Whitney U p-values are exact (permutation distribution with midranks) when both samples total at most 20 values, otherwise normal with tie correction and continuity correction.",
    "Engagement is judged on (previous submission, feedback, next submission) only; feedback on the final failed submission of an abandoned stream has no engagement annotation but keeps its pedagogy labels and rating.",
    "SuccScore is undefined for feedback with no relevant sentence; such feedback is excluded from SuccScore summaries and from models containing SuccScore.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Which {
    Pedagogy,
    Engagement,
    #[default]
    Both,
}

impl std::str::FromStr for Which {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pedagogy" => Ok(Which::Pedagogy),
            "engagement" => Ok(Which::Engagement),
            "both" => Ok(Which::Both),
            other => Err(format!("unknown annotation kind `{other}` (expected pedagogy, engagement or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: RunSummary,
}

impl Outcome {
    fn finish(mut summary: RunSummary, exit_code: i32, out_dir: &Path) -> Self {
        summary.exit_code = exit_code;
        if let Err(e) = summary.write(out_dir) {
            log::error!("cannot write report to {}: {e}", out_dir.display());
            summary.errors.push(format!("cannot write report: {e}"));
            let code = if exit_code == EXIT_OK { EXIT_INPUT } else { exit_code };
            return Self { exit_code: code, summary };
        }
        Self { exit_code, summary }
    }

    fn fail(mut summary: RunSummary, exit_code: i32, error: String, out_dir: &Path) -> Self {
        log::error!("{error}");
        summary.errors.push(error);
        Self::finish(summary, exit_code, out_dir)
    }
}

fn new_summary(command: &str, cfg: &RunConfig) -> RunSummary {
    let mut s = RunSummary::new(command);
    s.config = cfg.snapshot();
    s
}

/// Reads the corpus named in the config, with file digests for the summary.
pub fn load_corpus(cfg: &RunConfig) -> Result<(Corpus, CorpusDigest), String> {
    let inputs = cfg.inputs().map_err(|e| e.to_string())?;
    let corpus = Corpus::parse(&inputs.submissions, &inputs.feedback, inputs.ratings.as_deref())
        .map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for p in [Some(&inputs.submissions), Some(&inputs.feedback), inputs.ratings.as_ref()]
        .into_iter()
        .flatten()
    {
        files.push(FileDigest::of(p).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    let digest = CorpusDigest { files, counts: corpus.counts.clone() };
    Ok((corpus, digest))
}

pub fn cmd_validate(cfg: &RunConfig) -> Outcome {
    let mut summary = new_summary("validate", cfg);
    match load_corpus(cfg) {
        Ok((corpus, digest)) => {
            summary.warn(corpus.warnings.clone());
            summary.corpus = Some(digest);
            Outcome::finish(summary, EXIT_OK, &cfg.out_dir)
        }
        Err(e) => Outcome::fail(summary, EXIT_INPUT, e, &cfg.out_dir),
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}

fn load_problems(cfg: &RunConfig) -> Result<BTreeMap<String, String>, String> {
    let Some(path) = cfg.inputs().ok().and_then(|i| i.problems.as_ref()) else {
        return Ok(BTreeMap::new());
    };
    let problems: Vec<ProblemStatement> = read_jsonl(path)?;
    Ok(problems.into_iter().map(|p| (p.problem_id, p.statement)).collect())
}

fn build_backend(cfg: &RunConfig) -> Result<Box<dyn JudgeBackend>, String> {
    match cfg.judge.backend {
        BackendKind::Fixture => {
            let path = cfg
                .judge
                .transcript
                .as_ref()
                .ok_or("fixture backend needs judge.transcript")?;
            let digest = FileDigest::of(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let tag = &digest.sha256[..16];
            let backend = FixtureBackend::from_file(path)
                .map_err(|e| format!("transcript {}: {e}", path.display()))?
                .named(format!("fixture:{tag}"));
            Ok(Box::new(backend))
        }
        BackendKind::Remote => {
            let (endpoint, model, key) =
                cfg.remote_settings(|k| std::env::var(k).ok()).map_err(|e| e.to_string())?;
            let backend = RemoteBackend::new(
                endpoint,
                model,
                key.unwrap_or_default(),
                Duration::from_secs(cfg.judge.timeout_secs),
            )
            .map_err(|e| e.to_string())?;
            Ok(Box::new(backend))
        }
    }
}

fn load_templates(cfg: &RunConfig) -> Result<PromptTemplates, String> {
    let mut t = PromptTemplates::default();
    let load = |p: &PathBuf| PromptTemplate::load(p).map_err(|e| format!("template {}: {e}", p.display()));
    if let Some(p) = &cfg.judge.pedagogy_template {
        t.pedagogy = load(p)?;
    }
    if let Some(p) = &cfg.judge.engagement_template {
        t.engagement = load(p)?;
    }
    Ok(t)
}

enum Item<'c> {
    Pedagogy(&'c str),
    Engagement(usize),
}

enum Annotated {
    Pedagogy(PedagogyAnnotation),
    Engagement(EngagementAnnotation),
}

/// Annotates every feedback message (pedagogy) and every engagement pair.
/// Replies are cached as they arrive, so an interrupted run resumes where it
/// stopped; output files are written sorted by feedback id.
pub fn cmd_annotate(cfg: &RunConfig, which: Which) -> Outcome {
    let mut summary = new_summary("annotate", cfg);
    let out = &cfg.out_dir;
    let (corpus, digest) = match load_corpus(cfg) {
        Ok(c) => c,
        Err(e) => return Outcome::fail(summary, EXIT_INPUT, e, out),
    };
    summary.warn(corpus.warnings.clone());
    summary.corpus = Some(digest);
    let prepared = load_problems(cfg).and_then(|p| {
        let backend = build_backend(cfg)?;
        let templates = load_templates(cfg)?;
        let cache = ReplyCache::open(cfg.cache_dir()).map_err(|e| format!("cache: {e}"))?;
        Ok((p, backend, templates, cache))
    });
    let (problems, backend, templates, cache) = match prepared {
        Ok(x) => x,
        Err(e) => return Outcome::fail(summary, EXIT_INPUT, e, out),
    };
    let judge = Judge::new(backend.as_ref())
        .with_cache(cache)
        .with_templates(templates)
        .with_retry(RetryPolicy {
            max_retries: cfg.judge.max_retries,
            base_delay: Duration::from_millis(cfg.judge.backoff_ms),
            ..RetryPolicy::default()
        });

    let pairs = corpus.engagement_pairs();
    let mut items = Vec::new();
    if which != Which::Engagement {
        items.extend(corpus.feedback.keys().map(|k| Item::Pedagogy(k.as_str())));
    }
    if which != Which::Pedagogy {
        items.extend((0..pairs.len()).map(Item::Engagement));
    }
    let missing_problems: Vec<&str> = corpus
        .streams
        .iter()
        .map(|s| s.problem_id.as_str())
        .filter(|p| !problems.contains_key(*p))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !missing_problems.is_empty() {
        summary.warn([Warning::new(
            "problem-statement-missing",
            format!("no problem statement for: {}", missing_problems.join(", ")),
        )]);
    }

    let abort = AtomicBool::new(false);
    let run = |item: &Item<'_>| -> Option<(String, &'static str, Result<Annotated, JudgeError>)> {
        if abort.load(Ordering::SeqCst) {
            return None;
        }
        let result = match item {
            Item::Pedagogy(fid) => {
                let fb = &corpus.feedback[*fid];
                let sub = corpus.submission(&fb.submission_id).expect("linked");
                let prior = corpus.prior_context(&fb.submission_id);
                let problem = problems.get(&sub.problem_id).map(String::as_str).unwrap_or("(not provided)");
                (
                    fid.to_string(),
                    "pedagogy",
                    judge.annotate_pedagogy(problem, &prior, &sub.code, fb).map(Annotated::Pedagogy),
                )
            }
            Item::Engagement(i) => {
                let p = &pairs[*i];
                (
                    p.feedback.feedback_id.clone(),
                    "engagement",
                    judge
                        .annotate_engagement(&p.prev.code, p.feedback, &p.next.code)
                        .map(Annotated::Engagement),
                )
            }
        };
        if matches!(&result.2, Err(e) if e.is_backend()) {
            abort.store(true, Ordering::SeqCst);
        }
        Some(result)
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.judge.parallelism).build() {
        Ok(p) => p,
        Err(e) => return Outcome::fail(summary, EXIT_INPUT, format!("thread pool: {e}"), out),
    };
    let results: Vec<_> = pool.install(|| items.par_iter().map(run).collect());

    let mut pedagogy = Vec::new();
    let mut engagement = Vec::new();
    let mut log_lines = Vec::new();
    let mut backend_error = None;
    let mut counts = AnnotationCounts::default();
    let mut skipped = 0;
    for r in results {
        let Some((fid, task, result)) = r else {
            skipped += 1;
            continue;
        };
        match result {
            Ok(Annotated::Pedagogy(a)) => {
                pedagogy.push(a);
                log_lines.push(format!("{task}\t{fid}\tok"));
            }
            Ok(Annotated::Engagement(a)) => {
                engagement.push(a);
                log_lines.push(format!("{task}\t{fid}\tok"));
            }
            Err(e) if e.is_backend() => {
                log_lines.push(format!("{task}\t{fid}\tbackend-error"));
                backend_error.get_or_insert(e.to_string());
                counts.failed += 1;
            }
            Err(e) => {
                log_lines.push(format!("{task}\t{fid}\tfailed"));
                summary.warn([Warning::new("annotation-failed", e.to_string())]);
                counts.failed += 1;
            }
        }
    }
    pedagogy.sort_by(|a, b| a.feedback_id.cmp(&b.feedback_id));
    engagement.sort_by(|a, b| a.feedback_id.cmp(&b.feedback_id));
    log_lines.sort();
    counts.pedagogy = pedagogy.len();
    counts.engagement = engagement.len();
    let stats = judge.stats();
    if stats.sentence_parse_failures > 0 {
        summary.warn([Warning::new(
            "sentence-parse-failure",
            format!("{} sentence verdict(s) could not be parsed and were recorded as rel = 0", stats.sentence_parse_failures),
        )]);
    }
    summary.judge = Some(stats);
    summary.annotations = Some(counts);

    if let Some(e) = backend_error {
        if skipped > 0 {
            summary.notes.push(format!("{skipped} item(s) not attempted after the backend failed; rerun to resume from the cache"));
        }
        return Outcome::fail(summary, EXIT_BACKEND, e, out);
    }
    let dir = out.join(ANNOTATIONS_DIR);
    let written = fs::create_dir_all(&dir).and_then(|_| {
        if which != Which::Engagement {
            write_jsonl(&dir.join(PEDAGOGY_FILE), &pedagogy)?;
        }
        if which != Which::Pedagogy {
            write_jsonl(&dir.join(ENGAGEMENT_FILE), &engagement)?;
        }
        let mut log = log_lines.join("\n");
        log.push('\n');
        fs::write(dir.join(ANNOTATE_LOG), log)
    });
    if let Err(e) = written {
        return Outcome::fail(summary, EXIT_INPUT, format!("cannot write annotations: {e}"), out);
    }
    Outcome::finish(summary, EXIT_OK, out)
}

fn tutor_pair(cfg: &RunConfig, corpus: &Corpus) -> Result<TutorPair, String> {
    let tutors = corpus.tutors();
    let first = cfg.analysis.baseline_tutor.clone();
    if !tutors.contains(&first) {
        return Err(format!("baseline tutor `{first}` does not occur in the corpus (tutors: {})", tutors.join(", ")));
    }
    let second = match &cfg.analysis.comparison_tutor {
        Some(t) if tutors.contains(t) => t.clone(),
        Some(t) => return Err(format!("comparison tutor `{t}` does not occur in the corpus")),
        None => {
            let others: Vec<&String> = tutors.iter().filter(|t| **t != first).collect();
            match others.as_slice() {
                [one] => (*one).clone(),
                _ => {
                    return Err(format!(
                        "set analysis.comparison_tutor: the corpus has {} tutor(s) besides the baseline",
                        others.len()
                    ))
                }
            }
        }
    };
    Ok(TutorPair { first, second })
}

/// Runs every analysis on existing annotations and writes the report.
pub fn cmd_evaluate(cfg: &RunConfig) -> Outcome {
    let mut summary = new_summary("evaluate", cfg);
    let out = &cfg.out_dir;
    let (corpus, digest) = match load_corpus(cfg) {
        Ok(c) => c,
        Err(e) => return Outcome::fail(summary, EXIT_INPUT, e, out),
    };
    summary.warn(corpus.warnings.clone());
    summary.corpus = Some(digest);
    let setup = cfg
        .rubric()
        .map_err(|e| e.to_string())
        .and_then(|r| Ok((r, tutor_pair(cfg, &corpus)?)));
    let (rubric, tutors) = match setup {
        Ok(x) => x,
        Err(e) => return Outcome::fail(summary, EXIT_INPUT, e, out),
    };

    let dir = out.join(ANNOTATIONS_DIR);
    let loaded = read_jsonl::<PedagogyAnnotation>(&dir.join(PEDAGOGY_FILE))
        .and_then(|p| Ok((p, read_jsonl::<EngagementAnnotation>(&dir.join(ENGAGEMENT_FILE))?)));
    let (pedagogy, engagement) = match loaded {
        Ok(x) => x,
        Err(e) => {
            return Outcome::fail(summary, EXIT_STATE, format!("annotations missing or unreadable ({e}); run `annotate` first"), out)
        }
    };
    summary.notes.extend(NOTES.iter().map(|s| s.to_string()));

    // keep annotations that match the corpus
    let mut stale = Vec::new();
    let pedagogy: Vec<PedagogyAnnotation> = pedagogy
        .into_iter()
        .filter(|a| {
            let ok = corpus.feedback.contains_key(&a.feedback_id) && a.validate().is_ok();
            if !ok {
                stale.push(format!("pedagogy {}", a.feedback_id));
            }
            ok
        })
        .collect();
    let engagement: Vec<EngagementAnnotation> = engagement
        .into_iter()
        .filter(|a| {
            let ok = corpus
                .feedback
                .get(&a.feedback_id)
                .is_some_and(|fb| a.validate(fb.sentences.len()).is_ok());
            if !ok {
                stale.push(format!("engagement {}", a.feedback_id));
            }
            ok
        })
        .collect();
    if !stale.is_empty() {
        summary.warn([Warning::new(
            "annotation-ignored",
            format!("annotations not matching the corpus were ignored: {}", stale.join(", ")),
        )]);
    }
    let annotated: std::collections::BTreeSet<&str> = pedagogy.iter().map(|a| a.feedback_id.as_str()).collect();
    let unannotated = corpus.feedback.keys().filter(|k| !annotated.contains(k.as_str())).count();
    if unannotated > 0 {
        summary.warn([Warning::new(
            "pedagogy-missing",
            format!("{unannotated} feedback message(s) have no pedagogy annotation"),
        )]);
    }
    let abandoned = corpus.abandoned_feedback().len();
    if abandoned > 0 {
        summary.warn([Warning::new(
            "abandoned-feedback",
            format!("{abandoned} feedback message(s) end a stream without a next submission and have no engagement score"),
        )]);
    }

    let ctx = |fid: &str| corpus.context(fid).expect("annotations were filtered to the corpus");
    let ped_ctx: Vec<(String, u32, &PedagogyAnnotation)> = pedagogy
        .iter()
        .map(|a| {
            let c = ctx(&a.feedback_id);
            (c.tutor_id, c.assignment_id, a)
        })
        .collect();
    let scores: Vec<EngagementScores> = engagement.iter().map(EngagementScores::from_annotation).collect();
    let score_ctx: Vec<(String, u32, &EngagementScores)> = scores
        .iter()
        .map(|s| {
            let c = ctx(&s.feedback_id);
            (c.tutor_id, c.assignment_id, s)
        })
        .collect();

    let comparisons = DamrComparison::compute(&tutors, ped_ctx.iter().map(|(t, _, a)| (t.as_str(), *a)), &rubric)
        .and_then(|d| {
            let delta =
                DeltaPayload::compute(&tutors, ped_ctx.iter().map(|(t, asg, a)| (t.as_str(), *asg, *a)), &rubric)?;
            let eng = EngagementComparison::compute(&tutors, score_ctx.iter().map(|(t, asg, s)| (t.as_str(), *asg, *s)))?;
            Ok((d, delta, eng))
        });
    let (damr, delta, eng) = match comparisons {
        Ok(x) => x,
        Err(e) => return Outcome::fail(summary, EXIT_STATE, format!("cannot compare tutors: {e}"), out),
    };
    if !delta.omitted.is_empty() {
        summary.warn([Warning::new(
            "no-variance-dimension",
            format!(
                "omitted from the DAMR delta chart (label constant for both tutors): {}",
                delta.omitted.iter().map(|d| d.name()).collect::<Vec<_>>().join(", ")
            ),
        )]);
    }
    summary.damr = Some(damr);
    summary.delta = Some(delta);
    summary.engagement = Some(eng);

    let mut splits = Vec::new();
    for metric in EngagementMetric::ALL {
        splits.extend(split_by_desiredness(&corpus, &pedagogy, &scores, &rubric, metric));
    }
    let comparison = compare_splits(&splits, cfg.analysis.min_undesired_n);
    summary.warn(comparison.warnings.clone());
    summary.distributions = Some(DistributionPayload {
        min_undesired_n: cfg.analysis.min_undesired_n,
        splits,
        comparison,
    });

    let mut exit = EXIT_OK;
    let rows = match build_rows(&corpus, &pedagogy, &scores, &tutors.first, &rubric, cfg.analysis.likert_cutoff) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(summary, EXIT_INPUT, e.to_string(), out),
    };
    let regression = if corpus.ratings.is_empty() {
        RegressionPayload { skipped: Some("skipped: no ratings".into()), exclusions: rows.exclusions, models: None }
    } else if rows.rows.is_empty() {
        RegressionPayload {
            skipped: Some("skipped: no rated feedback with annotations".into()),
            exclusions: rows.exclusions,
            models: None,
        }
    } else {
        let models = run_models(&rows.rows).expect("rows are non-empty");
        summary.warn(models.warnings.clone());
        if models.any_failed() {
            exit = EXIT_STATE;
            for m in &models.models {
                if let Some(e) = &m.error {
                    summary.errors.push(format!("{} model: {e}", m.spec.name()));
                }
            }
        }
        RegressionPayload { skipped: None, exclusions: rows.exclusions, models: Some(models) }
    };
    if let Some(reason) = &regression.skipped {
        summary.warn([Warning::new("regression-skipped", reason.clone())]);
    }
    summary.regression = Some(regression);
    Outcome::finish(summary, exit, out)
}

/// Generates a synthetic corpus into the output directory, together with a
/// `run.toml` that annotates it with the fixture backend.
pub fn cmd_synth(cfg: &RunConfig) -> Outcome {
    let mut summary = new_summary("synth", cfg);
    let out = &cfg.out_dir;
    let corpus = match generate(&cfg.synth) {
        Ok(c) => c,
        Err(e) => return Outcome::fail(summary, EXIT_INPUT, e.to_string(), out),
    };
    if let Err(e) = corpus.write(out) {
        return Outcome::fail(summary, EXIT_INPUT, e.to_string(), out);
    }
    let run_toml = format!(
        "out_dir = \"report\"\n\n[inputs]\nsubmissions = \"{}\"\nfeedback = \"{}\"\nratings = \"{}\"\nproblems = \"{}\"\n\n[judge]\nbackend = \"fixture\"\ntranscript = \"{}\"\n\n[analysis]\nbaseline_tutor = \"{}\"\n",
        crate::synthgen::SUBMISSIONS_FILE,
        crate::synthgen::FEEDBACK_FILE,
        crate::synthgen::RATINGS_FILE,
        crate::synthgen::PROBLEMS_FILE,
        crate::synthgen::TRANSCRIPT_FILE,
        cfg.synth.baseline_tutor,
    );
    if let Err(e) = fs::write(out.join("run.toml"), run_toml) {
        return Outcome::fail(summary, EXIT_INPUT, format!("cannot write run.toml: {e}"), out);
    }
    summary.notes.push(format!(
        "generated {} submissions, {} feedback messages and {} ratings",
        corpus.submissions.len(),
        corpus.feedback.len(),
        corpus.ratings.len()
    ));
    Outcome::finish(summary, EXIT_OK, out)
}

/// Cohen's kappa between two annotation exports.
pub fn cmd_agreement(cfg: &RunConfig, file_a: &Path, file_b: &Path) -> Outcome {
    let mut summary = new_summary("agreement", cfg);
    let out = &cfg.out_dir;
    let report = LabelSet::load(file_a)
        .and_then(|a| Ok((a, LabelSet::load(file_b)?)))
        .and_then(|(a, b)| agreement_report(&a, &b));
    match report {
        Ok(r) => {
            summary.warn(r.warnings.clone());
            summary.agreement = Some(r);
            Outcome::finish(summary, EXIT_OK, out)
        }
        Err(e @ (AgreementError::Io { .. } | AgreementError::Malformed { .. } | AgreementError::DisjointItems)) => {
            Outcome::fail(summary, EXIT_INPUT, e.to_string(), out)
        }
    }
}
