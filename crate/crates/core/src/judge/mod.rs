//! LLM-as-judge annotation.
//!
//! [`Judge`] renders a prompt, consults the reply cache, calls the backend with
//! bounded retries, and parses the reply. A reply that is not the required
//! JSON object triggers exactly one reprompt. Raw replies, not parsed
//! annotations, are cached, so fixing a parser never requires re-querying.

mod agreement;
mod annotation;
pub mod backend;
pub mod cache;
pub mod prompt;
pub mod segment;

pub use agreement::{agreement_report, AgreementError, AgreementReport, DimensionAgreement, LabelSet};
pub use annotation::{AnnotationError, EngagementAnnotation, PedagogyAnnotation, SentenceAttribution};
pub use backend::{
    BackendError, BackendIdentity, ChatMessage, FixtureBackend, JudgeBackend, JudgeRequest, JudgeTask,
    RemoteBackend, ScriptedReply, TranscriptEntry,
};
pub use cache::{CachedReply, ReplyCache};
pub use prompt::{PromptTemplate, PromptTemplates};
pub use segment::{segment_sentences, SegmentError};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{FeedbackMessage, Submission};
use crate::dimension::Dimension;

/// Rationale recorded for a sentence whose verdict could not be parsed.
pub const PARSE_FAILURE_RATIONALE: &str = "judge-parse-failure";
pub const IDENTICAL_CODE_RATIONALE: &str = "no code change between submissions";

const SYSTEM_PROMPT: &str =
    "You are a careful annotator. Follow the instructions exactly and reply only with the requested JSON object.";
const REPROMPT: &str = "Your previous reply could not be parsed. Reply again with only the JSON object in exactly the requested format, with no other text.";

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("backend failed for `{feedback_id}` after {attempts} attempt(s): {source}")]
    Backend {
        feedback_id: String,
        attempts: usize,
        #[source]
        source: BackendError,
    },
    #[error("unparseable {task} reply for `{feedback_id}`: {reason}")]
    Unparseable {
        task: &'static str,
        feedback_id: String,
        reason: String,
    },
    #[error("reply cache: {0}")]
    Cache(#[from] std::io::Error),
}

impl JudgeError {
    /// Backend failures abort a run; parse failures only exclude one item.
    pub fn is_backend(&self) -> bool {
        matches!(self, JudgeError::Backend { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: usize) -> Self {
        Self { max_retries, base_delay: Duration::ZERO, max_delay: Duration::ZERO }
    }

    fn delay(&self, retry: usize) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << retry.min(16))
            .min(self.max_delay)
    }
}

#[derive(Debug, Default)]
struct Counters {
    backend_requests: AtomicUsize,
    retries: AtomicUsize,
    cache_hits: AtomicUsize,
    cache_misses: AtomicUsize,
    reprompts: AtomicUsize,
    sentence_parse_failures: AtomicUsize,
    identical_code_skips: AtomicUsize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeStats {
    pub backend_requests: usize,
    pub retries: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub reprompts: usize,
    pub sentence_parse_failures: usize,
    pub identical_code_skips: usize,
}

/// Prior attempt shown to the pedagogy judge.
pub type PriorAttempt<'a> = (&'a Submission, Option<&'a FeedbackMessage>);

pub struct Judge<'b> {
    backend: &'b dyn JudgeBackend,
    cache: Option<ReplyCache>,
    templates: PromptTemplates,
    retry: RetryPolicy,
    counters: Counters,
}

impl<'b> Judge<'b> {
    pub fn new(backend: &'b dyn JudgeBackend) -> Self {
        Self {
            backend,
            cache: None,
            templates: PromptTemplates::default(),
            retry: RetryPolicy::default(),
            counters: Counters::default(),
        }
    }

    pub fn with_cache(mut self, cache: ReplyCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_templates(mut self, templates: PromptTemplates) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn stats(&self) -> JudgeStats {
        let c = &self.counters;
        JudgeStats {
            backend_requests: c.backend_requests.load(Ordering::SeqCst),
            retries: c.retries.load(Ordering::SeqCst),
            cache_hits: c.cache_hits.load(Ordering::SeqCst),
            cache_misses: c.cache_misses.load(Ordering::SeqCst),
            reprompts: c.reprompts.load(Ordering::SeqCst),
            sentence_parse_failures: c.sentence_parse_failures.load(Ordering::SeqCst),
            identical_code_skips: c.identical_code_skips.load(Ordering::SeqCst),
        }
    }

    pub fn annotate_pedagogy(
        &self,
        problem_statement: &str,
        prior_context: &[PriorAttempt<'_>],
        code: &str,
        feedback: &FeedbackMessage,
    ) -> Result<PedagogyAnnotation, JudgeError> {
        let history = render_history(prior_context);
        let sentences = prompt::numbered_sentences(&feedback.sentences);
        let rubric = prompt::rubric_text();
        let template = &self.templates.pedagogy;
        let content = template.render(&[
            ("problem", problem_statement),
            ("history", &history),
            ("code", code),
            ("feedback_sentences", &sentences),
            ("rubric", &rubric),
        ]);
        let key = self.key(
            JudgeTask::Pedagogy,
            template,
            &[problem_statement, &history, code, &feedback.text],
        );
        let reply = self.obtain(JudgeTask::Pedagogy, &feedback.feedback_id, &key, content, |r| {
            parse_pedagogy(r).is_ok()
        })?;
        parse_pedagogy(&reply).map(|labels| PedagogyAnnotation {
            feedback_id: feedback.feedback_id.clone(),
            labels,
        })
        .map_err(|reason| JudgeError::Unparseable {
            task: "pedagogy",
            feedback_id: feedback.feedback_id.clone(),
            reason,
        })
    }

    pub fn annotate_engagement(
        &self,
        prev_code: &str,
        feedback: &FeedbackMessage,
        next_code: &str,
    ) -> Result<EngagementAnnotation, JudgeError> {
        let m = feedback.sentences.len();
        if prev_code == next_code {
            self.counters.identical_code_skips.fetch_add(1, Ordering::SeqCst);
            return Ok(EngagementAnnotation {
                feedback_id: feedback.feedback_id.clone(),
                per_sentence: (0..m)
                    .map(|i| SentenceAttribution {
                        sentence_index: i,
                        rel: false,
                        succ: None,
                        rationale: IDENTICAL_CODE_RATIONALE.into(),
                    })
                    .collect(),
            });
        }
        let sentences = prompt::numbered_sentences(&feedback.sentences);
        let template = &self.templates.engagement;
        let content = template.render(&[
            ("prev_code", prev_code),
            ("next_code", next_code),
            ("feedback_sentences", &sentences),
        ]);
        let key = self.key(JudgeTask::Engagement, template, &[prev_code, &feedback.text, next_code]);
        let reply = self.obtain(JudgeTask::Engagement, &feedback.feedback_id, &key, content, |r| {
            parse_engagement(r, m).is_ok()
        })?;
        let (per_sentence, failures) =
            parse_engagement(&reply, m).map_err(|reason| JudgeError::Unparseable {
                task: "engagement",
                feedback_id: feedback.feedback_id.clone(),
                reason,
            })?;
        self.counters.sentence_parse_failures.fetch_add(failures, Ordering::SeqCst);
        Ok(EngagementAnnotation {
            feedback_id: feedback.feedback_id.clone(),
            per_sentence,
        })
    }

    fn key(&self, task: JudgeTask, template: &PromptTemplate, inputs: &[&str]) -> String {
        let identity = self.backend.identity().cache_key_part();
        let mut parts = vec![identity.as_str(), template.hash(), task.name()];
        parts.extend_from_slice(inputs);
        cache::content_key(parts)
    }

    /// Cached reply, or a fresh one with at most one reprompt.
    fn obtain(
        &self,
        task: JudgeTask,
        feedback_id: &str,
        key: &str,
        content: String,
        valid: impl Fn(&str) -> bool,
    ) -> Result<String, JudgeError> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(key)? {
                self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(hit.reply);
            }
            self.counters.cache_misses.fetch_add(1, Ordering::SeqCst);
        }

        let mut request = JudgeRequest {
            task,
            item_id: feedback_id.to_string(),
            messages: vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(content)],
        };
        let mut reply = self.send(&request)?;
        let mut reprompted = false;
        if !valid(&reply) {
            self.counters.reprompts.fetch_add(1, Ordering::SeqCst);
            request.messages.push(ChatMessage::assistant(reply));
            request.messages.push(ChatMessage::user(REPROMPT));
            reply = self.send(&request)?;
            reprompted = true;
        }
        if let Some(cache) = &self.cache {
            cache.put(&CachedReply {
                key: key.to_string(),
                task,
                feedback_id: feedback_id.to_string(),
                reply: reply.clone(),
                reprompted,
            })?;
        }
        Ok(reply)
    }

    fn send(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        let mut attempt = 0;
        loop {
            self.counters.backend_requests.fetch_add(1, Ordering::SeqCst);
            match self.backend.complete(request) {
                Ok(r) => return Ok(r),
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    log::warn!("judge request for `{}` failed ({e}); retrying", request.item_id);
                    std::thread::sleep(self.retry.delay(attempt));
                    self.counters.retries.fetch_add(1, Ordering::SeqCst);
                    attempt += 1;
                }
                Err(source) => {
                    return Err(JudgeError::Backend {
                        feedback_id: request.item_id.clone(),
                        attempts: attempt + 1,
                        source,
                    })
                }
            }
        }
    }
}

fn render_history(prior: &[PriorAttempt<'_>]) -> String {
    if prior.is_empty() {
        return "(none)".into();
    }
    let mut out = String::new();
    for (sub, fb) in prior {
        out.push_str(&format!(
            "### Attempt {}\n```\n{}\n```\nAutograder: {}\n",
            sub.attempt_index,
            sub.code.trim_end(),
            sub.autograder_output.trim()
        ));
        if let Some(fb) = fb {
            out.push_str(&format!("Tutor feedback: {}\n", fb.text.trim()));
        }
    }
    out
}

/// The outermost JSON value in a reply, tolerating code fences and chatter.
fn extract_json(reply: &str) -> Option<Value> {
    if let Ok(v) = serde_json::from_str(reply.trim()) {
        return Some(v);
    }
    let start = reply.find(['{', '['])?;
    let end = reply.rfind(['}', ']'])?;
    if end < start {
        return None;
    }
    serde_json::from_str(&reply[start..=end]).ok()
}

fn as_small_int(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64().or_else(|| {
            n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64)
        }),
        Value::String(s) => s.trim().parse().ok(),
        Value::Bool(b) => Some(u64::from(*b)),
        _ => None,
    }
}

pub fn parse_pedagogy(reply: &str) -> Result<BTreeMap<Dimension, u8>, String> {
    let value = extract_json(reply).ok_or("reply is not JSON")?;
    let obj = value.as_object().ok_or("reply is not a JSON object")?;
    let mut labels = BTreeMap::new();
    for d in Dimension::ALL {
        let v = obj.get(d.name()).ok_or_else(|| format!("missing {d}"))?;
        match as_small_int(v) {
            Some(l @ 1..=3) => {
                labels.insert(d, l as u8);
            }
            _ => return Err(format!("{d} label {v} is not 1, 2 or 3")),
        }
    }
    Ok(labels)
}

/// Parses per-sentence verdicts for a message of `m` sentences. Entries that
/// are missing or malformed become `rel = 0` with [`PARSE_FAILURE_RATIONALE`];
/// their number is returned alongside.
pub fn parse_engagement(reply: &str, m: usize) -> Result<(Vec<SentenceAttribution>, usize), String> {
    let value = extract_json(reply).ok_or("reply is not JSON")?;
    let items = match &value {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("sentences")
            .and_then(Value::as_array)
            .ok_or("reply has no `sentences` array")?,
        _ => return Err("reply is neither an object nor an array".into()),
    };

    let mut by_index: BTreeMap<usize, &Value> = BTreeMap::new();
    for (pos, item) in items.iter().enumerate() {
        let idx = item
            .get("index")
            .or_else(|| item.get("sentence_index"))
            .and_then(as_small_int)
            .map(|i| i as usize)
            .unwrap_or(pos);
        by_index.entry(idx).or_insert(item);
    }

    let mut failures = 0;
    let out = (0..m)
        .map(|i| match by_index.get(&i).and_then(|v| parse_sentence(i, v)) {
            Some(s) => s,
            None => {
                failures += 1;
                SentenceAttribution {
                    sentence_index: i,
                    rel: false,
                    succ: None,
                    rationale: PARSE_FAILURE_RATIONALE.into(),
                }
            }
        })
        .collect();
    Ok((out, failures))
}

fn parse_sentence(index: usize, v: &Value) -> Option<SentenceAttribution> {
    let rel = match as_small_int(v.get("rel")?)? {
        0 => false,
        1 => true,
        _ => return None,
    };
    let rationale = v
        .get("rationale")
        .and_then(Value::as_str)
        .unwrap_or("")
        .trim()
        .to_string();
    let succ = if rel {
        match as_small_int(v.get("succ")?)? {
            0 => Some(false),
            1 => Some(true),
            _ => return None,
        }
    } else {
        None
    };
    if rel && rationale.is_empty() {
        return None;
    }
    Some(SentenceAttribution { sentence_index: index, rel, succ, rationale })
}
