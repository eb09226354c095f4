//! Warnings collected while running the pipeline.
//!
//! Nothing in the pipeline only logs: every condition an analyst should know
//! about is returned as a [`Warning`] and ends up in `summary.json`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Warning {
    /// Stable machine-readable category, e.g. `rating-dropped`.
    pub code: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

/// Appends `incoming` to `sink`, skipping entries already present.
pub fn merge_unique(sink: &mut Vec<Warning>, incoming: impl IntoIterator<Item = Warning>) {
    for w in incoming {
        if !sink.contains(&w) {
            sink.push(w);
        }
    }
}
