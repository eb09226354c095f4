use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One axis of the pedagogical rubric. Every axis is labeled 1..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    MistakeIdentification,
    MistakeLocation,
    RevealingAnswer,
    ProvidingGuidance,
    Actionability,
    Coherence,
    TutorTone,
    Humanness,
}

impl Dimension {
    /// Rubric order; also the row order of every table.
    pub const ALL: [Dimension; 8] = [
        Dimension::MistakeIdentification,
        Dimension::MistakeLocation,
        Dimension::RevealingAnswer,
        Dimension::ProvidingGuidance,
        Dimension::Actionability,
        Dimension::Coherence,
        Dimension::TutorTone,
        Dimension::Humanness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::MistakeIdentification => "mistake_identification",
            Dimension::MistakeLocation => "mistake_location",
            Dimension::RevealingAnswer => "revealing_answer",
            Dimension::ProvidingGuidance => "providing_guidance",
            Dimension::Actionability => "actionability",
            Dimension::Coherence => "coherence",
            Dimension::TutorTone => "tutor_tone",
            Dimension::Humanness => "humanness",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|d| *d == self).unwrap()
    }

    /// The question the judge answers for this dimension.
    pub fn question(self) -> &'static str {
        match self {
            Dimension::MistakeIdentification => {
                "Has the tutor identified or recognized a mistake in the student's response?"
            }
            Dimension::MistakeLocation => {
                "Does the tutor's response accurately point to a genuine mistake and its location?"
            }
            Dimension::RevealingAnswer => {
                "Does the tutor reveal the final answer (whether correct or not)?"
            }
            Dimension::ProvidingGuidance => {
                "Does the tutor offer correct and relevant guidance, such as an explanation, elaboration, hint, or examples?"
            }
            Dimension::Actionability => {
                "Is it clear from the tutor's feedback what the student should do next?"
            }
            Dimension::Coherence => {
                "Is the tutor's response logically consistent with the student's previous responses?"
            }
            Dimension::TutorTone => "Is the tutor's response encouraging, neutral, or offensive?",
            Dimension::Humanness => {
                "Does the tutor's response sound natural rather than robotic or artificial?"
            }
        }
    }

    /// Label meanings, indexed by `label - 1`.
    pub fn label_names(self) -> [&'static str; 3] {
        match self {
            Dimension::RevealingAnswer => ["Yes (correct)", "Yes (incorrect)", "No"],
            Dimension::TutorTone => ["Encouraging", "Neutral", "Offensive"],
            _ => ["Yes", "To some extent", "No"],
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown pedagogical dimension `{0}`")]
pub struct UnknownDimension(pub String);

impl FromStr for Dimension {
    type Err = UnknownDimension;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| UnknownDimension(s.to_string()))
    }
}
