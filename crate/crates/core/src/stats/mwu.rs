use serde::{Deserialize, Serialize};

use super::{normal_two_sided, StatsError};

/// Pooled sample sizes up to this use the exact permutation distribution.
pub const EXACT_MAX_TOTAL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    /// U of the first sample: pairs where it is larger, ties counting ½.
    pub u: f64,
    pub p_two_sided: f64,
    pub method: MwuMethod,
    /// Every pooled value is identical.
    pub degenerate_variance: bool,
}

/// Two-sided Mann-Whitney U test.
///
/// Small samples (`n_a + n_b <= 20`) use the exact permutation distribution of
/// U computed from the pooled midranks, so ties are handled exactly. Larger
/// samples use the normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney_u(sample_a: &[f64], sample_b: &[f64]) -> Result<MwuResult, StatsError> {
    if sample_a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if sample_b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    let na = sample_a.len();
    let nb = sample_b.len();
    let n = na + nb;

    let (doubled_ranks, tie_sizes) = doubled_midranks(sample_a, sample_b);
    let doubled_rank_sum_a: u64 = doubled_ranks[..na].iter().sum();
    // 2U = 2R_a - n_a(n_a + 1)
    let doubled_u = doubled_rank_sum_a as i64 - (na * (na + 1)) as i64;
    let u = doubled_u as f64 / 2.0;
    let degenerate = tie_sizes.len() == 1;

    if degenerate {
        return Ok(MwuResult {
            u,
            p_two_sided: 1.0,
            method: if n <= EXACT_MAX_TOTAL { MwuMethod::Exact } else { MwuMethod::Normal },
            degenerate_variance: true,
        });
    }

    let doubled_mean = (na * nb) as i64;
    if n <= EXACT_MAX_TOTAL {
        let observed_dev = (doubled_u - doubled_mean).abs();
        let dist = doubled_rank_sum_distribution(&doubled_ranks, na);
        let offset = (na * (na + 1)) as i64;
        let mut extreme: u128 = 0;
        let mut total: u128 = 0;
        for (sum, &count) in dist.iter().enumerate() {
            if count == 0 {
                continue;
            }
            total += count;
            if (sum as i64 - offset - doubled_mean).abs() >= observed_dev {
                extreme += count;
            }
        }
        return Ok(MwuResult {
            u,
            p_two_sided: (extreme as f64 / total as f64).min(1.0),
            method: MwuMethod::Exact,
            degenerate_variance: false,
        });
    }

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let deviation = (u - naf * nbf / 2.0).abs();
    let z = ((deviation - 0.5).max(0.0)) / variance.sqrt();
    Ok(MwuResult {
        u,
        p_two_sided: normal_two_sided(z),
        method: MwuMethod::Normal,
        degenerate_variance: false,
    })
}

/// Twice the midrank of every pooled value (a first, then b) and the sizes of
/// the tie groups.
fn doubled_midranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));

    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks are 1-based: (i+1 + j+1) is twice the midrank
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// `dist[s]` = number of size-`k` subsets of `values` summing to `s`.
fn doubled_rank_sum_distribution(values: &[u64], k: usize) -> Vec<u128> {
    let max_sum: u64 = values.iter().sum();
    let width = max_sum as usize + 1;
    let mut table = vec![vec![0u128; width]; k + 1];
    table[0][0] = 1;
    for &v in values {
        let v = v as usize;
        for size in (1..=k).rev() {
            let (lower, upper) = table.split_at_mut(size);
            let prev = &lower[size - 1];
            let cur = &mut upper[0];
            for s in (v..width).rev() {
                cur[s] += prev[s - v];
            }
        }
    }
    table.swap_remove(k)
}
