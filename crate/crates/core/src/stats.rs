//! Two-sided Mann-Whitney U test and the pairwise comparison table.
//!
//! Small samples (n1 + n2 <= 16) get the exact permutation distribution of U,
//! which stays exact under ties because it is built from the observed
//! midranks. Larger samples use the normal approximation with tie and
//! continuity correction.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::median;

/// Largest combined size for which `Method::Auto` picks the exact test.
pub const EXACT_THRESHOLD: usize = 16;
/// Largest combined size the exact test accepts at all.
pub const EXACT_LIMIT: usize = 120;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample label is empty")]
    EmptyLabel,
    #[error("sample `{0}` has no values")]
    EmptySample(String),
    #[error("sample `{label}` holds {value}, outside [0, 1]")]
    OutOfRange { label: String, value: f64 },
    #[error("sample `{label}` has {len} value(s); the normal approximation needs at least 2")]
    DegenerateSample { label: String, len: usize },
    #[error("exact test supports at most {EXACT_LIMIT} values in total, got {0}")]
    ExactTooLarge(usize),
    #[error("significance level {0} is not in (0, 1)")]
    BadAlpha(f64),
}

/// Per-run metric values of one method/model combination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    label: String,
    values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        let label = label.into();
        if label.is_empty() {
            return Err(StatsError::EmptyLabel);
        }
        if values.is_empty() {
            return Err(StatsError::EmptySample(label));
        }
        if let Some(&value) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(StatsError::OutOfRange { label, value });
        }
        Ok(Sample { label, values })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn median(&self) -> f64 {
        median(&self.values)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatResult {
    pub label_1: String,
    pub label_2: String,
    pub n_1: usize,
    pub n_2: usize,
    pub median_1: f64,
    pub median_2: f64,
    /// U of the first sample.
    pub u_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// `Exact` or `Asymptotic`, never `Auto`.
    pub method: Method,
}

/// U statistic of `a` and two-sided p-value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UTest {
    pub u: f64,
    pub p_value: f64,
    pub method: Method,
}

pub fn mann_whitney_u(
    a: &Sample,
    b: &Sample,
    method: Method,
    alpha: f64,
) -> Result<StatResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadAlpha(alpha));
    }
    if method == Method::Asymptotic {
        for s in [a, b] {
            if s.values.len() < 2 {
                return Err(StatsError::DegenerateSample {
                    label: s.label.clone(),
                    len: s.values.len(),
                });
            }
        }
    }
    let test = u_test(&a.values, &b.values, method)?;
    Ok(StatResult {
        label_1: a.label.clone(),
        label_2: b.label.clone(),
        n_1: a.values.len(),
        n_2: b.values.len(),
        median_1: a.median(),
        median_2: b.median(),
        u_statistic: test.u,
        p_value: test.p_value,
        significant: test.p_value < alpha,
        method: test.method,
    })
}

/// The test on raw values, without the [0, 1] domain check.
pub fn u_test(a: &[f64], b: &[f64], method: Method) -> Result<UTest, StatsError> {
    let n = a.len() + b.len();
    let method = match method {
        Method::Auto if n <= EXACT_THRESHOLD => Method::Exact,
        Method::Auto => Method::Asymptotic,
        m => m,
    };
    let ranks = doubled_midranks(a, b);
    let n1 = a.len() as i64;
    let n2 = b.len() as i64;
    let doubled_sum: i64 = ranks[..a.len()].iter().sum();
    // 2U = 2R - n1(n1 + 1)
    let doubled_u = doubled_sum - n1 * (n1 + 1);
    let u = doubled_u as f64 / 2.0;
    let p_value = match method {
        Method::Exact => {
            if n > EXACT_LIMIT {
                return Err(StatsError::ExactTooLarge(n));
            }
            exact_p(&ranks, a.len(), doubled_sum)
        }
        _ => asymptotic_p(&ranks, u, n1 as f64, n2 as f64),
    };
    Ok(UTest { u, p_value, method })
}

/// Twice the midrank of each value in the pooled sample, `a` first.
fn doubled_midranks(a: &[f64], b: &[f64]) -> Vec<i64> {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0i64; pooled.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && pooled[order[end + 1]] == pooled[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end+1 share their mean
        let doubled = (start + end + 2) as i64;
        for &i in &order[start..=end] {
            ranks[i] = doubled;
        }
        start = end + 1;
    }
    ranks
}

/// Share of the C(n, n1) rank assignments whose U lies at least as far from
/// n1*n2/2 as the observed one.
fn exact_p(ranks: &[i64], n1: usize, observed_sum: i64) -> f64 {
    let n = ranks.len();
    let max_sum = ranks.iter().sum::<i64>() as usize;
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0u128; max_sum + 1]; n1 + 1];
    ways[0][0] = 1;
    for &r in ranks {
        let r = r as usize;
        for k in (1..=n1).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let from = &lower[k - 1];
            let to = &mut upper[0];
            for s in (r..=max_sum).rev() {
                to[s] += from[s - r];
            }
        }
    }
    // 2R - (n1(n1+1) + n1*n2) is twice the distance of U from its mean
    let centre = (n1 * (n1 + 1) + n1 * (n - n1)) as i64;
    let observed = (observed_sum - centre).abs();
    let mut extreme = 0u128;
    let mut total = 0u128;
    for (s, &count) in ways[n1].iter().enumerate() {
        total += count;
        if (s as i64 - centre).abs() >= observed {
            extreme += count;
        }
    }
    extreme as f64 / total as f64
}

fn asymptotic_p(ranks: &[i64], u: f64, n1: f64, n2: f64) -> f64 {
    let n = n1 + n2;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(variance > 0.0) {
        return 1.0;
    }
    let mu = n1 * n2 / 2.0;
    let z = ((u - mu).abs() - 0.5) / libm::sqrt(variance);
    libm::erfc(z / core::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}

/// One cell of the pairwise table.
#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub label_1: String,
    pub label_2: String,
    pub result: Result<StatResult, StatsError>,
}

/// Every unordered pair of samples. Labels are sorted; the first label walks
/// forward while its partner runs from the last label back towards it.
pub fn pairwise_table(samples: &[Sample], method: Method, alpha: f64) -> Vec<PairOutcome> {
    let mut sorted: Vec<&Sample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.label.cmp(&b.label));
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        for j in (i + 1..sorted.len()).rev() {
            let (a, b) = (sorted[i], sorted[j]);
            out.push(PairOutcome {
                label_1: a.label.clone(),
                label_2: b.label.clone(),
                result: mann_whitney_u(a, b, method, alpha),
            });
        }
    }
    out
}
