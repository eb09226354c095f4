//! Batch evaluation of AI-tutor feedback on programming assignments.
//!
//! Feedback is scored along two axes:
//!
//! - **pedagogical quality**: an LLM judge labels every feedback message on an
//!   eight-dimension rubric, summarized per dimension as the *desired annotation
//!   match rate* (DAMR);
//! - **behavioral engagement**: for every pair of consecutive submissions the
//!   judge decides, sentence by sentence, whether the feedback influenced the
//!   student's edit (`rel`) and whether the change was applied correctly
//!   (`succ`), summarized as RelScore and SuccScore.
//!
//! Tutors are then compared with exact and rank-based tests, and student
//! helpfulness ratings are modeled with logistic regression.
//!
//! The crate is organized as one module per pipeline stage:
//!
//! | module            | purpose                                                   |
//! |-------------------|-----------------------------------------------------------|
//! | [`corpus`]        | parse and validate submission / feedback / rating logs    |
//! | [`judge`]         | sentence segmentation, judge backends, reply cache, κ     |
//! | [`metrics`]       | DAMR, RelScore, SuccScore and grouped aggregates          |
//! | [`stats`]         | Fisher, Mann-Whitney U, Holm, Cohen's h/κ, logistic fits  |
//! | [`perception`]    | helpfulness datasets and the three regression models      |
//! | [`distributions`] | desired-vs-undesired engagement comparisons               |
//! | [`synthgen`]      | seeded synthetic corpora with planted ground truth        |
//! | [`report`]        | markdown/CSV tables, delta chart SVG, `summary.json`      |
//! | [`pipeline`]      | the `validate`/`annotate`/`evaluate`/`synth`/`agreement` commands |
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod config;
pub mod corpus;
pub mod diag;
pub mod dimension;
pub mod distributions;
pub mod judge;
pub mod metrics;
pub mod perception;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synthgen;

pub use corpus::{Corpus, FeedbackMessage, Rating, Submission, SubmissionStream};
pub use diag::Warning;
pub use dimension::Dimension;
