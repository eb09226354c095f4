use serde::{Deserialize, Serialize};

/// One hypothesis test as carried into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test_name: String,
    pub group: String,
    pub statistic: f64,
    pub effect_size: Option<f64>,
    pub p_raw: f64,
    pub p_holm: f64,
    /// Tests sharing a family id were Holm-adjusted together.
    pub family_id: String,
    pub n_a: usize,
    pub n_b: usize,
}

impl StatResult {
    pub const CSV_HEADER: &'static str = "test_name,group,statistic,effect_size,p_raw,p_holm,family_id,n_a,n_b";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.test_name,
            self.group,
            self.statistic,
            self.effect_size.map(|e| e.to_string()).unwrap_or_default(),
            self.p_raw,
            self.p_holm,
            self.family_id,
            self.n_a,
            self.n_b
        )
    }
}

/// Fills `p_holm` for every result sharing `family_id`.
pub(crate) fn adjust_family(results: &mut [StatResult]) {
    let raw: Vec<f64> = results.iter().map(|r| r.p_raw).collect();
    for (r, adj) in results.iter_mut().zip(super::holm_adjust(&raw)) {
        r.p_holm = adj;
    }
}
