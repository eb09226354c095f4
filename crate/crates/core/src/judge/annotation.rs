use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::Dimension;

/// Rubric labels for one feedback message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedagogyAnnotation {
    pub feedback_id: String,
    pub labels: BTreeMap<Dimension, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("annotation for `{0}` is missing dimension {1}")]
    MissingDimension(String, Dimension),
    #[error("annotation for `{feedback_id}`: {dimension} label {label} outside 1..=3")]
    LabelOutOfRange {
        feedback_id: String,
        dimension: Dimension,
        label: u8,
    },
    #[error("engagement annotation for `{feedback_id}` has {got} sentences, expected {expected}")]
    SentenceCount {
        feedback_id: String,
        got: usize,
        expected: usize,
    },
    #[error("engagement annotation for `{feedback_id}` sentence {index}: {reason}")]
    Sentence {
        feedback_id: String,
        index: usize,
        reason: String,
    },
}

impl PedagogyAnnotation {
    pub fn label(&self, dimension: Dimension) -> u8 {
        self.labels[&dimension]
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        for d in Dimension::ALL {
            match self.labels.get(&d) {
                None => return Err(AnnotationError::MissingDimension(self.feedback_id.clone(), d)),
                Some(&label) if !(1..=3).contains(&label) => {
                    return Err(AnnotationError::LabelOutOfRange {
                        feedback_id: self.feedback_id.clone(),
                        dimension: d,
                        label,
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Judge verdict for one sentence of a feedback message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceAttribution {
    pub sentence_index: usize,
    #[serde(with = "bit")]
    pub rel: bool,
    #[serde(with = "opt_bit", default, skip_serializing_if = "Option::is_none")]
    pub succ: Option<bool>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementAnnotation {
    pub feedback_id: String,
    pub per_sentence: Vec<SentenceAttribution>,
}

impl EngagementAnnotation {
    pub fn rel_count(&self) -> usize {
        self.per_sentence.iter().filter(|s| s.rel).count()
    }

    pub fn succ_count(&self) -> usize {
        self.per_sentence.iter().filter(|s| s.succ == Some(true)).count()
    }

    /// Checks structure against the number of sentences `m` in the feedback.
    pub fn validate(&self, m: usize) -> Result<(), AnnotationError> {
        if self.per_sentence.len() != m {
            return Err(AnnotationError::SentenceCount {
                feedback_id: self.feedback_id.clone(),
                got: self.per_sentence.len(),
                expected: m,
            });
        }
        for (i, s) in self.per_sentence.iter().enumerate() {
            let fail = |reason: &str| AnnotationError::Sentence {
                feedback_id: self.feedback_id.clone(),
                index: i,
                reason: reason.to_string(),
            };
            if s.sentence_index != i {
                return Err(fail("sentence_index out of order"));
            }
            if s.rel != s.succ.is_some() {
                return Err(fail("succ must be present exactly when rel = 1"));
            }
            if s.rel && s.rationale.trim().is_empty() {
                return Err(fail("rationale required when rel = 1"));
            }
        }
        Ok(())
    }
}

mod bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("expected bit 0 or 1, got {other}"))),
        }
    }
}

mod opt_bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_some(&u8::from(*b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
        match Option::<u8>::deserialize(d)? {
            None => Ok(None),
            Some(0) => Ok(Some(false)),
            Some(1) => Ok(Some(true)),
            Some(other) => Err(D::Error::custom(format!("expected bit 0 or 1, got {other}"))),
        }
    }
}
