//! Run configuration, read from a TOML file.
//!
//! ```toml
//! out_dir = "out"
//!
//! [inputs]
//! submissions = "data/submissions.jsonl"
//! feedback = "data/feedback.jsonl"
//! ratings = "data/ratings.jsonl"      # optional
//! problems = "data/problems.jsonl"    # optional
//!
//! [judge]
//! backend = "remote"                  # or "fixture" with `transcript = ...`
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4.1"
//! api_key_env = "OPENAI_API_KEY"
//! parallelism = 8
//!
//! [analysis]
//! baseline_tutor = "baseline_tutor"
//!
//! [rubric]
//! tutor_tone = [1, 2]
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.
//! Unknown keys are errors. The API key itself never appears in the file, only
//! the name of the environment variable holding it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::Dimension;
use crate::distributions::DEFAULT_MIN_UNDESIRED_N;
use crate::metrics::DesiredLabelRubric;
use crate::perception::DEFAULT_LIKERT_CUTOFF;
use crate::synthgen::GeneratorConfig;

pub const ENDPOINT_ENV: &str = "TUTOR_EVAL_ENDPOINT";
pub const MODEL_ENV: &str = "TUTOR_EVAL_MODEL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Fixture,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fixture" => Ok(BackendKind::Fixture),
            "remote" => Ok(BackendKind::Remote),
            other => Err(format!("unknown backend `{other}` (expected remote or fixture)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub submissions: PathBuf,
    pub feedback: PathBuf,
    #[serde(default)]
    pub ratings: Option<PathBuf>,
    #[serde(default)]
    pub problems: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeConfig {
    pub backend: BackendKind,
    pub transcript: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: usize,
    pub backoff_ms: u64,
    pub pedagogy_template: Option<PathBuf>,
    pub engagement_template: Option<PathBuf>,
    /// Defaults to `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub parallelism: usize,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Fixture,
            transcript: None,
            endpoint: None,
            model: None,
            api_key_env: None,
            timeout_secs: 60,
            max_retries: 3,
            backoff_ms: 500,
            pedagogy_template: None,
            engagement_template: None,
            cache_dir: None,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub baseline_tutor: String,
    /// The tutor compared against the baseline; inferred when the corpus has exactly two.
    pub comparison_tutor: Option<String>,
    pub likert_cutoff: u8,
    pub min_undesired_n: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            baseline_tutor: "baseline_tutor".into(),
            comparison_tutor: None,
            likert_cutoff: DEFAULT_LIKERT_CUTOFF,
            min_undesired_n: DEFAULT_MIN_UNDESIRED_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub inputs: Option<InputPaths>,
    #[serde(default)]
    pub judge: JudgeConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Desired-label overrides per dimension.
    #[serde(default)]
    pub rubric: BTreeMap<Dimension, BTreeSet<u8>>,
    #[serde(default)]
    pub synth: GeneratorConfig,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: default_out_dir(),
            inputs: None,
            judge: JudgeConfig::default(),
            analysis: AnalysisConfig::default(),
            rubric: BTreeMap::new(),
            synth: GeneratorConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Reads, resolves and validates a config file, then applies the
    /// endpoint/model environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.message().to_string(),
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.base_dir = base.to_path_buf();
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(i) = &mut self.inputs {
            fix(&mut i.submissions);
            fix(&mut i.feedback);
            i.ratings.iter_mut().for_each(fix);
            i.problems.iter_mut().for_each(fix);
        }
        let j = &mut self.judge;
        for p in [
            &mut j.transcript,
            &mut j.pedagogy_template,
            &mut j.engagement_template,
            &mut j.cache_dir,
        ] {
            p.iter_mut().for_each(fix);
        }
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(e) = lookup(ENDPOINT_ENV) {
            self.judge.endpoint = Some(e);
        }
        if let Some(m) = lookup(MODEL_ENV) {
            self.judge.model = Some(m);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.judge.parallelism == 0 {
            return Err(ConfigError::Invalid("judge.parallelism must be at least 1".into()));
        }
        if !(1..=5).contains(&self.analysis.likert_cutoff) {
            return Err(ConfigError::Invalid("analysis.likert_cutoff must be in 1..=5".into()));
        }
        self.rubric()?;
        Ok(())
    }

    pub fn rubric(&self) -> Result<DesiredLabelRubric, ConfigError> {
        DesiredLabelRubric::with_overrides(&self.rubric)
            .map_err(|e| ConfigError::Invalid(format!("rubric: {e}")))
    }

    pub fn inputs(&self) -> Result<&InputPaths, ConfigError> {
        self.inputs
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("missing [inputs] section".into()))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.judge.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    /// Remote backend settings, reading the key from the named variable.
    pub fn remote_settings(
        &self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(String, String, Option<String>), ConfigError> {
        let j = &self.judge;
        let endpoint = j.endpoint.clone().ok_or_else(|| {
            ConfigError::Invalid(format!("remote backend needs judge.endpoint or {ENDPOINT_ENV}"))
        })?;
        let model = j.model.clone().ok_or_else(|| {
            ConfigError::Invalid(format!("remote backend needs judge.model or {MODEL_ENV}"))
        })?;
        let key = match &j.api_key_env {
            Some(var) => Some(lookup(var).ok_or_else(|| {
                ConfigError::Invalid(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        Ok((endpoint, model, key))
    }

    /// Config snapshot for the run summary: paths relative to the config
    /// directory (or bare file names outside it), no secrets.
    pub fn snapshot(&self) -> serde_json::Value {
        let root = self.base_dir.clone();
        let mut c = self.clone();
        let rel = |p: &mut PathBuf| {
            if let Ok(r) = p.strip_prefix(&root) {
                *p = r.to_path_buf();
            } else if let Some(name) = p.file_name() {
                *p = PathBuf::from(name);
            }
        };
        rel(&mut c.out_dir);
        if let Some(i) = &mut c.inputs {
            rel(&mut i.submissions);
            rel(&mut i.feedback);
            i.ratings.iter_mut().for_each(rel);
            i.problems.iter_mut().for_each(rel);
        }
        for p in [
            &mut c.judge.transcript,
            &mut c.judge.pedagogy_template,
            &mut c.judge.engagement_template,
            &mut c.judge.cache_dir,
        ] {
            p.iter_mut().for_each(rel);
        }
        serde_json::to_value(&c).expect("serializable")
    }
}
