//! Statistical kernel.
//!
//! Everything here is a pure function over plain slices and is safe to call
//! from any thread. All arithmetic is `f64`.

mod effect;
mod fisher;
mod holm;
mod kappa;
mod logit;
mod mwu;
mod result;

pub use effect::cohens_h;
pub use fisher::{fisher_exact_two_sided, ContingencyTable2x2};
pub use holm::holm_adjust;
pub use kappa::{cohens_kappa, KappaResult};
pub use logit::{logit_fit, mcfadden_r2, DesignMatrix, RegressionFit, INTERCEPT};
pub use mwu::{mann_whitney_u, MwuMethod, MwuResult, EXACT_MAX_TOTAL};
pub use result::StatResult;
pub(crate) use logit::sigmoid;
pub(crate) use result::adjust_family;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("sample `{0}` is empty")]
    EmptySample(&'static str),
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no observations")]
    NoObservations,
    #[error("design has {rows} rows but {cols} columns")]
    TooFewRows { rows: usize, cols: usize },
    #[error("outcome has {outcomes} entries but design has {rows} rows")]
    OutcomeLength { outcomes: usize, rows: usize },
    #[error("complete or quasi-complete separation involving: {}", .covariates.join(", "))]
    Separation { covariates: Vec<String> },
    #[error("information matrix is singular (rank deficient design)")]
    RankDeficient,
    #[error("null log-likelihood is zero")]
    ZeroNullLikelihood,
}

/// Two-sided standard-normal tail probability `P(|Z| >= |z|)`.
pub(crate) fn normal_two_sided(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}
