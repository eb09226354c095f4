//! Seeded synthetic corpora with known ground truth.
//!
//! [`generate`] produces a corpus (submissions, feedback, ratings), the
//! problem statements, a fixture-judge transcript that replays the planted
//! labels, and a ground-truth record of what was planted. The same config
//! always produces the same bytes.
//!
//! Labels follow the default rubric: a "desired" draw picks a label from the
//! dimension's desired set, an undesired draw from the remaining labels.
//! Ratings come from a logistic model in the desired-label indicators,
//! RelScore, SuccScore and the baseline indicator; for feedback without an
//! engagement pair (abandoned streams) or without a relevant sentence, the
//! missing scores enter that model as 0.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{write_jsonl, FeedbackMessage, Rating, Submission};
use crate::dimension::Dimension;
use crate::judge::{JudgeTask, ScriptedReply, TranscriptEntry};
use crate::metrics::DesiredLabelRubric;
use crate::stats::sigmoid;

pub const SUBMISSIONS_FILE: &str = "submissions.jsonl";
pub const FEEDBACK_FILE: &str = "feedback.jsonl";
pub const RATINGS_FILE: &str = "ratings.jsonl";
pub const PROBLEMS_FILE: &str = "problems.jsonl";
pub const TRANSCRIPT_FILE: &str = "judge_transcript.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

const MAX_ATTEMPTS: u32 = 12;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("n_students and n_problems must both be positive (no streams requested)")]
    NoStreams,
    #[error("at least one tutor plan is required")]
    NoTutors,
    #[error("{field} = {value} is not a probability")]
    InvalidProbability { field: String, value: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("baseline tutor `{0}` has no plan")]
    UnknownBaseline(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Either one probability for all dimensions or one per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesiredProb {
    Uniform(f64),
    PerDimension(BTreeMap<Dimension, f64>),
}

impl DesiredProb {
    pub fn get(&self, d: Dimension) -> f64 {
        match self {
            DesiredProb::Uniform(p) => *p,
            DesiredProb::PerDimension(m) => m.get(&d).copied().unwrap_or(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TutorPlan {
    pub tutor_id: String,
    /// Per-sentence probability of influencing the next edit.
    pub rel_prob: f64,
    /// Probability that a relevant sentence was applied correctly.
    pub succ_prob_given_rel: f64,
    /// Per-dimension probability of a desired label; dimensions missing from a map are always desired.
    pub desired_prob: DesiredProb,
}

/// Log-odds of a helpful rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HelpfulnessLogits {
    pub intercept: f64,
    /// Coefficients on the desired-label indicators; missing dimensions are 0.
    pub pedagogy: BTreeMap<Dimension, f64>,
    pub rel_score: f64,
    pub succ_score: f64,
    pub baseline: f64,
}

impl Default for HelpfulnessLogits {
    fn default() -> Self {
        Self {
            intercept: 0.2,
            pedagogy: BTreeMap::from([
                (Dimension::MistakeIdentification, -0.3),
                (Dimension::ProvidingGuidance, 0.35),
                (Dimension::Actionability, 0.25),
            ]),
            rel_score: 0.8,
            succ_score: 0.4,
            baseline: -0.3,
        }
    }
}

impl HelpfulnessLogits {
    pub fn pedagogy_coefficient(&self, d: Dimension) -> f64 {
        self.pedagogy.get(&d).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_students: usize,
    pub n_problems: usize,
    pub assignments: u32,
    /// Mean submissions per stream, at least 1.
    pub mean_attempts: f64,
    /// Probability that a stream ends without passing.
    pub abandon_prob: f64,
    /// Probability that a failed submission receives feedback.
    pub feedback_prob: f64,
    pub rating_prob: f64,
    pub sentences_min: usize,
    pub sentences_max: usize,
    pub baseline_tutor: String,
    /// Students are assigned to tutors round-robin.
    pub tutors: Vec<TutorPlan>,
    pub helpfulness: HelpfulnessLogits,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_students: 60,
            n_problems: 10,
            assignments: 5,
            mean_attempts: 2.8,
            abandon_prob: 0.1,
            feedback_prob: 1.0,
            rating_prob: 0.4,
            sentences_min: 2,
            sentences_max: 6,
            baseline_tutor: "baseline_tutor".into(),
            tutors: vec![
                TutorPlan {
                    tutor_id: "baseline_tutor".into(),
                    rel_prob: 0.55,
                    succ_prob_given_rel: 0.6,
                    desired_prob: DesiredProb::Uniform(0.85),
                },
                TutorPlan {
                    tutor_id: "misconception_tutor".into(),
                    rel_prob: 0.7,
                    succ_prob_given_rel: 0.62,
                    desired_prob: DesiredProb::Uniform(0.92),
                },
            ],
            helpfulness: HelpfulnessLogits::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_students == 0 || self.n_problems == 0 {
            return Err(SynthError::NoStreams);
        }
        if self.tutors.is_empty() {
            return Err(SynthError::NoTutors);
        }
        if self.assignments == 0 {
            return Err(SynthError::Invalid("assignments must be positive".into()));
        }
        if !(self.mean_attempts >= 1.0 && self.mean_attempts.is_finite()) {
            return Err(SynthError::Invalid(format!(
                "mean_attempts = {} must be at least 1",
                self.mean_attempts
            )));
        }
        if self.sentences_min == 0 || self.sentences_min > self.sentences_max {
            return Err(SynthError::Invalid(
                "need 1 <= sentences_min <= sentences_max".into(),
            ));
        }
        let mut probs = vec![
            ("abandon_prob".to_string(), self.abandon_prob),
            ("feedback_prob".to_string(), self.feedback_prob),
            ("rating_prob".to_string(), self.rating_prob),
        ];
        for t in &self.tutors {
            probs.push((format!("{}.rel_prob", t.tutor_id), t.rel_prob));
            probs.push((format!("{}.succ_prob_given_rel", t.tutor_id), t.succ_prob_given_rel));
            for d in Dimension::ALL {
                probs.push((format!("{}.desired_prob.{d}", t.tutor_id), t.desired_prob.get(d)));
            }
        }
        for (field, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::InvalidProbability { field, value });
            }
        }
        let mut ids: Vec<&str> = self.tutors.iter().map(|t| t.tutor_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SynthError::Invalid("tutor ids must be unique".into()));
        }
        if !ids.contains(&self.baseline_tutor.as_str()) {
            return Err(SynthError::UnknownBaseline(self.baseline_tutor.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemStatement {
    pub problem_id: String,
    pub statement: String,
}

/// Realized counts for one tutor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RealizedCounts {
    pub streams: usize,
    pub feedback: usize,
    pub engagement_feedback: usize,
    pub sentences_judged: usize,
    pub relevant_sentences: usize,
    pub successful_sentences: usize,
    pub desired: BTreeMap<Dimension, usize>,
    pub rated: usize,
    pub rated_helpful: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: GeneratorConfig,
    pub realized: BTreeMap<String, RealizedCounts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub submissions: Vec<Submission>,
    pub feedback: Vec<FeedbackMessage>,
    pub ratings: Vec<Rating>,
    pub problems: Vec<ProblemStatement>,
    pub transcript: Vec<TranscriptEntry>,
    pub ground_truth: GroundTruth,
}

impl SyntheticCorpus {
    /// Writes the six output files into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SynthError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let p = dir.join(SUBMISSIONS_FILE);
        write_jsonl(&p, &self.submissions).map_err(io(&p))?;
        let p = dir.join(FEEDBACK_FILE);
        write_jsonl(&p, &self.feedback).map_err(io(&p))?;
        let p = dir.join(RATINGS_FILE);
        write_jsonl(&p, &self.ratings).map_err(io(&p))?;
        let p = dir.join(PROBLEMS_FILE);
        write_jsonl(&p, &self.problems).map_err(io(&p))?;
        let p = dir.join(TRANSCRIPT_FILE);
        write_jsonl(&p, &self.transcript).map_err(io(&p))?;
        let p = dir.join(GROUND_TRUTH_FILE);
        let mut json = serde_json::to_string_pretty(&self.ground_truth).expect("serializable");
        json.push('\n');
        fs::write(&p, json).map_err(io(&p))?;
        Ok(())
    }
}

const GUIDANCE: &[&str] = &[
    "Look closely at how the loop decides when to stop",
    "Your base case does not cover an empty input",
    "Think about what value the function returns when the list has one element",
    "Consider tracing the code by hand with a small example",
    "The variable that holds the running total is reset inside the loop",
    "Check whether the comparison should include the boundary value",
    "Remember that range excludes its upper bound",
    "Try printing the intermediate result after each iteration",
    "Your recursive call does not move closer to the base case",
    "Revisit how the accumulator is updated on each step",
    "Make sure every branch of the conditional returns a value",
    "Compare the expected output in the failing test with what your code prints",
    "You are close and only one condition needs attention",
    "Notice that the second argument is never used in the body",
    "Double check the order of the arguments in the recursive call",
    "It may help to write down what the function should return for zero",
];

const PROBLEM_TOPICS: &[&str] = &[
    "sum the digits of a non-negative integer",
    "count how many elements of a list satisfy a predicate",
    "return the largest prime factor of a positive integer",
    "reverse a linked list without mutating it",
    "compute the nth Fibonacci number recursively",
    "merge two sorted lists into one sorted list",
    "remove adjacent duplicates from a string",
    "return every path from the root to a leaf of a tree",
    "check whether a number is a palindrome",
    "compose a function with itself n times",
];

fn timestamp(base: DateTime<Utc>, minutes: i64) -> String {
    (base + Duration::minutes(minutes)).format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn feedback_text(rng: &mut ChaCha8Rng, n: usize) -> String {
    let picked: Vec<&&str> = GUIDANCE.choose_multiple(rng, n.min(GUIDANCE.len())).collect();
    let mut sentences: Vec<String> = picked.iter().map(|s| format!("{s}.")).collect();
    while sentences.len() < n {
        let i = sentences.len();
        sentences.push(format!("Step {i} of the fix is to rerun the tests."));
    }
    sentences.join(" ")
}

fn code_body(problem: usize, attempt: u32, variant: u32) -> String {
    format!(
        "def solve_{problem}(x):\n    total = {variant}\n    for i in range(x + {attempt}):\n        total += i\n    return total\n"
    )
}

fn pick_label(rng: &mut ChaCha8Rng, rubric: &DesiredLabelRubric, d: Dimension, desired: bool) -> u8 {
    let pool: Vec<u8> = (1..=3).filter(|l| rubric.is_desired(d, *l) == desired).collect();
    *pool.choose(rng).expect("desired sets are proper subsets of 1..=3")
}

/// Builds a synthetic corpus. Single-threaded so that the output is a pure function of `config`.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticCorpus, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rubric = DesiredLabelRubric::default();
    let base = DateTime::parse_from_rfc3339("2024-09-02T09:00:00Z")
        .expect("valid")
        .with_timezone(&Utc);
    let beta = &config.helpfulness;

    let problems: Vec<ProblemStatement> = (0..config.n_problems)
        .map(|p| ProblemStatement {
            problem_id: format!("p{:02}", p + 1),
            statement: format!(
                "Write a function solve_{p} that should {}.",
                PROBLEM_TOPICS[p % PROBLEM_TOPICS.len()]
            ),
        })
        .collect();

    let mut out = SyntheticCorpus {
        submissions: Vec::new(),
        feedback: Vec::new(),
        ratings: Vec::new(),
        problems: problems.clone(),
        transcript: Vec::new(),
        ground_truth: GroundTruth {
            config: config.clone(),
            realized: config
                .tutors
                .iter()
                .map(|t| (t.tutor_id.clone(), RealizedCounts::default()))
                .collect(),
        },
    };
    let mut next_submission = 1usize;
    let mut next_feedback = 1usize;
    let continue_prob = 1.0 - 1.0 / config.mean_attempts;

    for student in 0..config.n_students {
        let plan = &config.tutors[student % config.tutors.len()];
        let student_id = format!("s{:04}", student + 1);
        for (p, problem) in problems.iter().enumerate() {
            let assignment_id = (p * config.assignments as usize / config.n_problems) as u32 + 1;
            let mut len = 1;
            while len < MAX_ATTEMPTS && rng.gen_bool(continue_prob) {
                len += 1;
            }
            let abandoned = rng.gen_bool(config.abandon_prob);
            let start = (student * config.n_problems + p) as i64 * 240;
            let variant: u32 = rng.gen_range(0..100);
            let realized = out.ground_truth.realized.get_mut(&plan.tutor_id).unwrap();
            realized.streams += 1;

            for attempt in 0..len {
                let passed = attempt + 1 == len && !abandoned;
                let submission_id = format!("sub{next_submission:06}");
                next_submission += 1;
                out.submissions.push(Submission {
                    submission_id: submission_id.clone(),
                    tutor_id: plan.tutor_id.clone(),
                    student_id: student_id.clone(),
                    assignment_id,
                    problem_id: problem.problem_id.clone(),
                    attempt_index: attempt,
                    timestamp: timestamp(base, start + 7 * attempt as i64),
                    code: code_body(p, attempt, variant),
                    autograder_output: if passed {
                        "All tests passed.".into()
                    } else {
                        format!("{} test(s) failed.", len - attempt)
                    },
                    passed,
                });
                if passed || !rng.gen_bool(config.feedback_prob) {
                    continue;
                }

                let feedback_id = format!("fb{next_feedback:06}");
                next_feedback += 1;
                let m = rng.gen_range(config.sentences_min..=config.sentences_max);
                let text = feedback_text(&mut rng, m);
                let fb = FeedbackMessage::new(feedback_id.clone(), submission_id.clone(), text)
                    .expect("generated text is non-empty");
                debug_assert_eq!(fb.sentences.len(), m);
                realized.feedback += 1;

                let mut labels = BTreeMap::new();
                let mut indicators = [false; 8];
                for d in Dimension::ALL {
                    let desired = rng.gen_bool(plan.desired_prob.get(d));
                    indicators[d.index()] = desired;
                    if desired {
                        *realized.desired.entry(d).or_default() += 1;
                    }
                    labels.insert(d.name().to_string(), pick_label(&mut rng, &rubric, d, desired));
                }
                out.transcript.push(TranscriptEntry {
                    task: JudgeTask::Pedagogy,
                    feedback_id: feedback_id.clone(),
                    replies: vec![ScriptedReply::Text(
                        serde_json::to_string(&labels).expect("serializable"),
                    )],
                });

                let has_next = attempt + 1 < len;
                let (mut rel_score, mut succ_score) = (0.0, 0.0);
                if has_next {
                    let mut verdicts = Vec::with_capacity(m);
                    let (mut rel_n, mut succ_n) = (0usize, 0usize);
                    for i in 0..m {
                        let rel = rng.gen_bool(plan.rel_prob);
                        let succ = rel && rng.gen_bool(plan.succ_prob_given_rel);
                        rel_n += usize::from(rel);
                        succ_n += usize::from(succ);
                        verdicts.push(if rel {
                            serde_json::json!({
                                "index": i,
                                "rel": 1,
                                "succ": u8::from(succ),
                                "rationale": if succ { "the edit applies this hint" } else { "the edit attempts this hint" },
                            })
                        } else {
                            serde_json::json!({"index": i, "rel": 0, "rationale": "no related edit"})
                        });
                    }
                    rel_score = rel_n as f64 / m as f64;
                    if rel_n > 0 {
                        succ_score = succ_n as f64 / rel_n as f64;
                    }
                    realized.engagement_feedback += 1;
                    realized.sentences_judged += m;
                    realized.relevant_sentences += rel_n;
                    realized.successful_sentences += succ_n;
                    out.transcript.push(TranscriptEntry {
                        task: JudgeTask::Engagement,
                        feedback_id: feedback_id.clone(),
                        replies: vec![ScriptedReply::Text(
                            serde_json::json!({ "sentences": verdicts }).to_string(),
                        )],
                    });
                }

                if rng.gen_bool(config.rating_prob) {
                    let mut eta = beta.intercept
                        + beta.rel_score * rel_score
                        + beta.succ_score * succ_score;
                    if plan.tutor_id == config.baseline_tutor {
                        eta += beta.baseline;
                    }
                    for d in Dimension::ALL {
                        if indicators[d.index()] {
                            eta += beta.pedagogy_coefficient(d);
                        }
                    }
                    let helpful = rng.gen_bool(sigmoid(eta));
                    let likert = if helpful { rng.gen_range(4..=5) } else { rng.gen_range(1..=3) };
                    realized.rated += 1;
                    realized.rated_helpful += usize::from(helpful);
                    out.ratings.push(Rating { submission_id: submission_id.clone(), likert });
                }
                out.feedback.push(fb);
            }
        }
    }
    Ok(out)
}
