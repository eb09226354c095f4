//! Submission logs: parsing, validation, and assembly into streams.
//!
//! Three line-delimited JSON files make up a corpus:
//!
//! - submissions: one [`Submission`] per line;
//! - feedback: `{feedback_id, submission_id, text}`;
//! - ratings (optional): `{submission_id, likert}`.
//!
//! Submissions are grouped into [`SubmissionStream`]s, one per
//! `(student_id, problem_id)` pair, ordered by `attempt_index`. Input line order
//! never matters.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::Warning;
use crate::judge::segment::{segment_sentences, SegmentError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub submission_id: String,
    pub tutor_id: String,
    pub student_id: String,
    pub assignment_id: u32,
    pub problem_id: String,
    pub attempt_index: u32,
    pub timestamp: String,
    pub code: String,
    pub autograder_output: String,
    pub passed: bool,
}

const SUBMISSION_FIELDS: &[&str] = &[
    "submission_id",
    "tutor_id",
    "student_id",
    "assignment_id",
    "problem_id",
    "attempt_index",
    "timestamp",
    "code",
    "autograder_output",
    "passed",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub feedback_id: String,
    pub submission_id: String,
    pub text: String,
    /// Filled by segmentation during parsing; never serialized to the feedback file.
    #[serde(skip)]
    pub sentences: Vec<String>,
}

impl FeedbackMessage {
    pub fn new(
        feedback_id: impl Into<String>,
        submission_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self, SegmentError> {
        let text = text.into();
        let sentences = segment_sentences(&text)?;
        Ok(Self {
            feedback_id: feedback_id.into(),
            submission_id: submission_id.into(),
            text,
            sentences,
        })
    }

    /// Number of sentences `M`.
    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }
}

const FEEDBACK_FIELDS: &[&str] = &["feedback_id", "submission_id", "text"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Likert(u8);

impl Likert {
    pub fn new(value: u8) -> Option<Self> {
        (1..=5).contains(&value).then_some(Self(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub submission_id: String,
    pub likert: u8,
}

const RATING_FIELDS: &[&str] = &["submission_id", "likert"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubmissionStream {
    pub student_id: String,
    pub problem_id: String,
    pub assignment_id: u32,
    pub tutor_id: String,
    pub submissions: Vec<Submission>,
}

impl SubmissionStream {
    pub fn last(&self) -> &Submission {
        self.submissions.last().expect("streams are never empty")
    }

    /// True when the student stopped on a failing attempt.
    pub fn is_abandoned(&self) -> bool {
        !self.last().passed
    }
}

/// One judged revision: a failed attempt, its feedback, and the next attempt.
#[derive(Debug, Clone, Copy)]
pub struct EngagementPair<'a> {
    pub prev: &'a Submission,
    pub feedback: &'a FeedbackMessage,
    pub next: &'a Submission,
}

/// Where a feedback message sits in the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackContext {
    pub tutor_id: String,
    pub assignment_id: u32,
    pub student_id: String,
    pub problem_id: String,
    pub submission_id: String,
    pub attempt_index: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkageCounts {
    pub submissions_read: usize,
    pub feedback_read: usize,
    pub ratings_read: usize,
    pub streams: usize,
    pub submissions_linked: usize,
    pub feedback_linked: usize,
    pub ratings_linked: usize,
    pub ratings_dropped: usize,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate submission_id `{0}`")]
    DuplicateSubmission(String),
    #[error("duplicate feedback_id `{0}`")]
    DuplicateFeedback(String),
    #[error("corpus validation failed:\n  {}", .issues.join("\n  "))]
    Validation { issues: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    /// Sorted by `(student_id, problem_id)`.
    pub streams: Vec<SubmissionStream>,
    pub feedback: BTreeMap<String, FeedbackMessage>,
    /// Keyed by `submission_id`.
    pub ratings: BTreeMap<String, Rating>,
    pub counts: LinkageCounts,
    pub warnings: Vec<Warning>,
    feedback_by_submission: BTreeMap<String, String>,
    /// submission_id -> (stream index, position in stream)
    locations: BTreeMap<String, (usize, usize)>,
}

impl Corpus {
    /// Reads and validates a corpus from its three files.
    pub fn parse(
        submissions_path: &Path,
        feedback_path: &Path,
        ratings_path: Option<&Path>,
    ) -> Result<Self, CorpusError> {
        let mut warnings = Vec::new();
        let submissions: Vec<Submission> =
            read_jsonl(submissions_path, SUBMISSION_FIELDS, &mut warnings)?;
        let feedback: Vec<FeedbackMessage> =
            read_jsonl(feedback_path, FEEDBACK_FIELDS, &mut warnings)?;
        let ratings: Vec<Rating> = match ratings_path {
            Some(p) => read_jsonl(p, RATING_FIELDS, &mut warnings)?,
            None => Vec::new(),
        };
        let mut corpus = Self::from_records(submissions, feedback, ratings)?;
        warnings.append(&mut corpus.warnings);
        corpus.warnings = warnings;
        Ok(corpus)
    }

    /// Assembles and validates a corpus from already-deserialized records.
    /// Feedback sentences are (re)computed here.
    pub fn from_records(
        submissions: Vec<Submission>,
        feedback: Vec<FeedbackMessage>,
        ratings: Vec<Rating>,
    ) -> Result<Self, CorpusError> {
        let mut warnings = Vec::new();
        let mut issues = Vec::new();
        let mut counts = LinkageCounts {
            submissions_read: submissions.len(),
            feedback_read: feedback.len(),
            ratings_read: ratings.len(),
            ..Default::default()
        };

        let mut by_id: BTreeMap<String, Submission> = BTreeMap::new();
        for s in submissions {
            if by_id.contains_key(&s.submission_id) {
                return Err(CorpusError::DuplicateSubmission(s.submission_id));
            }
            if chrono::DateTime::parse_from_rfc3339(&s.timestamp).is_err() {
                issues.push(format!(
                    "submission `{}`: timestamp `{}` is not ISO-8601",
                    s.submission_id, s.timestamp
                ));
            }
            by_id.insert(s.submission_id.clone(), s);
        }

        let mut grouped: BTreeMap<(String, String), Vec<Submission>> = BTreeMap::new();
        for s in by_id.values() {
            grouped
                .entry((s.student_id.clone(), s.problem_id.clone()))
                .or_default()
                .push(s.clone());
        }

        let mut streams = Vec::with_capacity(grouped.len());
        let mut locations = BTreeMap::new();
        for ((student_id, problem_id), mut subs) in grouped {
            subs.sort_by_key(|s| s.attempt_index);
            validate_stream(&student_id, &problem_id, &subs, &mut issues);
            let idx = streams.len();
            for (pos, s) in subs.iter().enumerate() {
                locations.insert(s.submission_id.clone(), (idx, pos));
            }
            streams.push(SubmissionStream {
                assignment_id: subs[0].assignment_id,
                tutor_id: subs[0].tutor_id.clone(),
                student_id,
                problem_id,
                submissions: subs,
            });
        }

        let mut feedback_map = BTreeMap::new();
        let mut feedback_by_submission = BTreeMap::new();
        for mut f in feedback {
            if feedback_map.contains_key(&f.feedback_id) {
                return Err(CorpusError::DuplicateFeedback(f.feedback_id));
            }
            match by_id.get(&f.submission_id) {
                None => issues.push(format!(
                    "feedback `{}` references unknown submission `{}`",
                    f.feedback_id, f.submission_id
                )),
                Some(s) if s.passed => issues.push(format!(
                    "feedback `{}` references passed submission `{}`",
                    f.feedback_id, f.submission_id
                )),
                Some(_) => {
                    if let Some(other) = feedback_by_submission.get(&f.submission_id) {
                        issues.push(format!(
                            "feedback `{}` and `{}` both attach to submission `{}`",
                            other, f.feedback_id, f.submission_id
                        ));
                    } else {
                        feedback_by_submission.insert(f.submission_id.clone(), f.feedback_id.clone());
                    }
                }
            }
            match segment_sentences(&f.text) {
                Ok(s) => f.sentences = s,
                Err(_) => issues.push(format!("feedback `{}` has empty text", f.feedback_id)),
            }
            feedback_map.insert(f.feedback_id.clone(), f);
        }

        let mut rating_map: BTreeMap<String, Rating> = BTreeMap::new();
        for r in ratings {
            if Likert::new(r.likert).is_none() {
                issues.push(format!(
                    "rating for submission `{}` has likert {} outside 1..=5",
                    r.submission_id, r.likert
                ));
                continue;
            }
            if !by_id.contains_key(&r.submission_id) {
                issues.push(format!("rating references unknown submission `{}`", r.submission_id));
                continue;
            }
            if !feedback_by_submission.contains_key(&r.submission_id) {
                counts.ratings_dropped += 1;
                warnings.push(Warning::new(
                    "rating-dropped",
                    format!("rating on submission `{}` which has no feedback", r.submission_id),
                ));
                continue;
            }
            if rating_map.insert(r.submission_id.clone(), r.clone()).is_some() {
                counts.ratings_dropped += 1;
                warnings.push(Warning::new(
                    "rating-duplicate",
                    format!("multiple ratings for submission `{}`; keeping the last", r.submission_id),
                ));
            }
        }

        if !issues.is_empty() {
            return Err(CorpusError::Validation { issues });
        }

        counts.streams = streams.len();
        counts.submissions_linked = by_id.len();
        counts.feedback_linked = feedback_map.len();
        counts.ratings_linked = rating_map.len();

        Ok(Self {
            streams,
            feedback: feedback_map,
            ratings: rating_map,
            counts,
            warnings,
            feedback_by_submission,
            locations,
        })
    }

    pub fn submission(&self, submission_id: &str) -> Option<&Submission> {
        let (s, p) = *self.locations.get(submission_id)?;
        Some(&self.streams[s].submissions[p])
    }

    pub fn stream_of(&self, submission_id: &str) -> Option<&SubmissionStream> {
        let (s, _) = *self.locations.get(submission_id)?;
        Some(&self.streams[s])
    }

    pub fn feedback_for_submission(&self, submission_id: &str) -> Option<&FeedbackMessage> {
        self.feedback_by_submission
            .get(submission_id)
            .and_then(|id| self.feedback.get(id))
    }

    pub fn context(&self, feedback_id: &str) -> Option<FeedbackContext> {
        let f = self.feedback.get(feedback_id)?;
        let s = self.submission(&f.submission_id)?;
        Some(FeedbackContext {
            tutor_id: s.tutor_id.clone(),
            assignment_id: s.assignment_id,
            student_id: s.student_id.clone(),
            problem_id: s.problem_id.clone(),
            submission_id: s.submission_id.clone(),
            attempt_index: s.attempt_index,
        })
    }

    /// Rating attached to a feedback message, if any.
    pub fn rating_for_feedback(&self, feedback_id: &str) -> Option<&Rating> {
        let f = self.feedback.get(feedback_id)?;
        self.ratings.get(&f.submission_id)
    }

    /// Distinct tutor ids, sorted.
    pub fn tutors(&self) -> Vec<String> {
        self.streams
            .iter()
            .map(|s| s.tutor_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Submissions preceding `submission_id` in its stream, each with its feedback.
    pub fn prior_context(&self, submission_id: &str) -> Vec<(&Submission, Option<&FeedbackMessage>)> {
        let Some(&(s, p)) = self.locations.get(submission_id) else {
            return Vec::new();
        };
        self.streams[s].submissions[..p]
            .iter()
            .map(|sub| (sub, self.feedback_for_submission(&sub.submission_id)))
            .collect()
    }

    /// Every failed, feedback-bearing submission that has a successor in its stream.
    pub fn engagement_pairs(&self) -> Vec<EngagementPair<'_>> {
        let mut pairs = Vec::new();
        for stream in &self.streams {
            for w in stream.submissions.windows(2) {
                if let Some(fb) = self.feedback_for_submission(&w[0].submission_id) {
                    pairs.push(EngagementPair {
                        prev: &w[0],
                        feedback: fb,
                        next: &w[1],
                    });
                }
            }
        }
        pairs
    }

    /// Feedback ids attached to the last submission of an abandoned stream.
    /// They count toward pedagogy and ratings but have no revision to judge.
    pub fn abandoned_feedback(&self) -> Vec<&str> {
        self.streams
            .iter()
            .filter(|s| s.is_abandoned())
            .filter_map(|s| self.feedback_by_submission.get(&s.last().submission_id))
            .map(String::as_str)
            .collect()
    }

    pub fn submissions(&self) -> impl Iterator<Item = &Submission> {
        self.streams.iter().flat_map(|s| s.submissions.iter())
    }

    /// Writes the corpus back out in its file format.
    pub fn write(
        &self,
        submissions_path: &Path,
        feedback_path: &Path,
        ratings_path: Option<&Path>,
    ) -> std::io::Result<()> {
        write_jsonl(submissions_path, self.submissions())?;
        write_jsonl(feedback_path, self.feedback.values())?;
        if let Some(p) = ratings_path {
            write_jsonl(p, self.ratings.values())?;
        }
        Ok(())
    }
}

fn validate_stream(student: &str, problem: &str, subs: &[Submission], issues: &mut Vec<String>) {
    let label = format!("stream ({student}, {problem})");
    for (expected, s) in subs.iter().enumerate() {
        if s.attempt_index as usize != expected {
            issues.push(format!(
                "{label}: attempt indices are not consecutive from 0 (found {} at position {expected})",
                s.attempt_index
            ));
            break;
        }
    }
    for w in subs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if let (Ok(ta), Ok(tb)) = (
            chrono::DateTime::parse_from_rfc3339(&a.timestamp),
            chrono::DateTime::parse_from_rfc3339(&b.timestamp),
        ) {
            if tb <= ta {
                issues.push(format!(
                    "{label}: timestamp of `{}` does not follow `{}`",
                    b.submission_id, a.submission_id
                ));
            }
        }
        if a.passed {
            issues.push(format!(
                "{label}: passed submission `{}` is not the last attempt",
                a.submission_id
            ));
        }
    }
    for s in &subs[1..] {
        if s.tutor_id != subs[0].tutor_id || s.assignment_id != subs[0].assignment_id {
            issues.push(format!(
                "{label}: submission `{}` disagrees on tutor_id/assignment_id",
                s.submission_id
            ));
        }
    }
}

fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    known_fields: &[&str],
    warnings: &mut Vec<Warning>,
) -> Result<Vec<T>, CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut extra_keys = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("expected a JSON object".into()))?;
        for k in obj.keys() {
            if !known_fields.contains(&k.as_str()) {
                extra_keys.insert(k.clone());
            }
        }
        out.push(serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?);
    }
    if !extra_keys.is_empty() {
        warnings.push(Warning::new(
            "unknown-keys",
            format!(
                "{}: ignored unknown keys {}",
                path.display(),
                extra_keys.into_iter().collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    Ok(out)
}

pub(crate) fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> std::io::Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)
}
