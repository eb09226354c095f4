//! Versioned prompt templates with `{name}` placeholders.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dimension::Dimension;

pub const DEFAULT_PEDAGOGY: &str = include_str!("../../prompts/pedagogy.v1.txt");
pub const DEFAULT_ENGAGEMENT: &str = include_str!("../../prompts/engagement.v1.txt");

pub const PLACEHOLDERS: &[&str] = &[
    "problem",
    "history",
    "code",
    "prev_code",
    "next_code",
    "feedback_sentences",
    "rubric",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    hash: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        Self { text, hash }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(std::fs::read_to_string(path)?))
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Substitutes every `{name}` for which a value is given. Other braces are
    /// left alone, so literal JSON in a template is safe.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = self.text.clone();
        for (name, value) in values {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub pedagogy: PromptTemplate,
    pub engagement: PromptTemplate,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            pedagogy: PromptTemplate::new(DEFAULT_PEDAGOGY),
            engagement: PromptTemplate::new(DEFAULT_ENGAGEMENT),
        }
    }
}

/// The rubric block shown to the pedagogy judge.
pub fn rubric_text() -> String {
    let mut out = String::new();
    for d in Dimension::ALL {
        let labels = d.label_names();
        out.push_str(&format!(
            "- {}: {} (1: {}; 2: {}; 3: {})\n",
            d.name(),
            d.question(),
            labels[0],
            labels[1],
            labels[2]
        ));
    }
    out
}

pub fn numbered_sentences(sentences: &[String]) -> String {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| format!("[{i}] {s}"))
        .collect::<Vec<_>>()
        .join("\n")
}
