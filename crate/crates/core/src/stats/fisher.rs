use serde::{Deserialize, Serialize};

use super::StatsError;

/// `[[a, b], [c, d]]`: rows are tutors, columns are matched / unmatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

/// Relative slack when deciding whether a table is "as extreme" as the observed one.
const TIE_TOLERANCE: f64 = 1e-7;

/// Two-sided Fisher exact test by the probability-mass rule: the p-value is the
/// total hypergeometric probability of all tables with the observed margins
/// that are no more probable than the observed table.
pub fn fisher_exact_two_sided(t: &ContingencyTable2x2) -> Result<f64, StatsError> {
    let n = t.total();
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let row1 = t.a + t.b;
    let col1 = t.a + t.c;
    let lo = col1.saturating_sub(n - row1);
    let hi = row1.min(col1);

    let lf = LogFactorials::up_to(n as usize);
    let log_denom = lf.choose(n, col1);
    let log_p = |x: u64| lf.choose(row1, x) + lf.choose(n - row1, col1 - x) - log_denom;

    let observed = log_p(t.a);
    let threshold = observed + TIE_TOLERANCE.ln_1p();
    let mut p = 0.0;
    for x in lo..=hi {
        let lp = log_p(x);
        if lp <= threshold {
            p += lp.exp();
        }
    }
    Ok(p.min(1.0))
}

struct LogFactorials(Vec<f64>);

impl LogFactorials {
    fn up_to(n: usize) -> Self {
        let mut v = Vec::with_capacity(n + 1);
        v.push(0.0);
        for i in 1..=n {
            v.push(v[i - 1] + (i as f64).ln());
        }
        Self(v)
    }

    fn choose(&self, n: u64, k: u64) -> f64 {
        self.0[n as usize] - self.0[k as usize] - self.0[(n - k) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn small_tables() {
        let p = fisher_exact_two_sided(&ContingencyTable2x2::new(2, 0, 0, 2)).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        let p = fisher_exact_two_sided(&ContingencyTable2x2::new(5, 5, 5, 5)).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_table_errors() {
        assert_eq!(
            fisher_exact_two_sided(&ContingencyTable2x2::new(0, 0, 0, 0)),
            Err(StatsError::EmptyTable)
        );
    }

    #[test]
    fn classic_tea_tasting() {
        // 3 of 4 cups correct: two-sided p = 34/70
        let p = fisher_exact_two_sided(&ContingencyTable2x2::new(3, 1, 1, 3)).unwrap();
        assert_abs_diff_eq!(p, 34.0 / 70.0, epsilon = 1e-12);
    }

    #[test]
    fn large_counts_stay_finite() {
        let p = fisher_exact_two_sided(&ContingencyTable2x2::new(2900, 100, 6900, 130)).unwrap();
        assert!(p > 0.0 && p < 1e-3, "{p}");
    }

    proptest! {
        #[test]
        fn invariant_under_row_and_column_swap(a in 0u64..30, b in 0u64..30, c in 0u64..30, d in 0u64..30) {
            prop_assume!(a + b + c + d > 0);
            let p = fisher_exact_two_sided(&ContingencyTable2x2::new(a, b, c, d)).unwrap();
            let swapped = fisher_exact_two_sided(&ContingencyTable2x2::new(d, c, b, a)).unwrap();
            let transposed = fisher_exact_two_sided(&ContingencyTable2x2::new(a, c, b, d)).unwrap();
            prop_assert!((p - swapped).abs() < 1e-12);
            prop_assert!((p - transposed).abs() < 1e-12);
            prop_assert!(p > 0.0 && p <= 1.0);
        }
    }
}
