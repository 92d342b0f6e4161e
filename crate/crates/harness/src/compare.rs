//! Pairwise model comparisons from a metrics CSV: sample construction,
//! Mann-Whitney U per pair, and the CSV and text tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use kgbench_core::metrics::{median, Metric};
use kgbench_core::stats::{pairwise_table, Method as TestMethod, Sample, StatsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::MetricRow;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Every run's value enters the model's sample.
    #[default]
    PerRun,
    /// One value per (method, graph kind): the median over its runs.
    PerMethodMedian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Missing {
    /// Not-computable values count as 0.
    #[default]
    Zero,
    /// Not-computable values are left out.
    Skip,
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("{metric}: need at least two models with values, found {found}")]
    TooFewModels { metric: String, found: usize },
    #[error("{metric}: {source}")]
    Sample {
        metric: String,
        #[source]
        source: StatsError,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub metric: String,
    pub label_1: String,
    pub label_2: String,
    pub n_1: usize,
    pub n_2: usize,
    pub median_1: Option<f64>,
    pub median_2: Option<f64>,
    pub u_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: Option<bool>,
    pub method: Option<TestMethod>,
    pub error: Option<String>,
}

/// One sample per model for `metric`.
pub fn build_samples(rows: &[MetricRow], metric: Metric, pooling: Pooling, missing: Missing) -> Result<Vec<Sample>, StatsError> {
    let mut blocks: BTreeMap<&str, BTreeMap<(&str, &str), Vec<f64>>> = BTreeMap::new();
    for row in rows {
        let value = match (row.record.get(metric).value(), missing) {
            (Some(v), _) => v,
            (None, Missing::Zero) => 0.0,
            (None, Missing::Skip) => continue,
        };
        blocks
            .entry(&row.model)
            .or_default()
            .entry((&row.method, &row.graph_kind))
            .or_default()
            .push(value);
    }
    blocks
        .into_iter()
        .map(|(model, blocks)| {
            let values: Vec<f64> = match pooling {
                Pooling::PerRun => blocks.into_values().flatten().collect(),
                Pooling::PerMethodMedian => blocks.values().map(|v| median(v)).collect(),
            };
            Sample::new(model, values)
        })
        .collect()
}

pub struct CompareOptions {
    pub pooling: Pooling,
    pub missing: Missing,
    pub method: TestMethod,
    pub alpha: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            pooling: Pooling::PerRun,
            missing: Missing::Zero,
            method: TestMethod::Auto,
            alpha: 0.05,
        }
    }
}

/// Table 1 style comparisons for each named metric, in the order given.
pub fn compare(rows: &[MetricRow], metrics: &[String], opts: &CompareOptions) -> Result<Vec<Comparison>, CompareError> {
    let mut out = Vec::new();
    for name in metrics {
        let metric = Metric::from_name(name).ok_or_else(|| CompareError::UnknownMetric(name.clone()))?;
        let samples = build_samples(rows, metric, opts.pooling, opts.missing).map_err(|source| CompareError::Sample {
            metric: name.clone(),
            source,
        })?;
        if samples.len() < 2 {
            return Err(CompareError::TooFewModels {
                metric: name.clone(),
                found: samples.len(),
            });
        }
        let sizes: BTreeMap<&str, usize> = samples.iter().map(|s| (s.label(), s.values().len())).collect();
        for pair in pairwise_table(&samples, opts.method, opts.alpha) {
            let (n_1, n_2) = (sizes[pair.label_1.as_str()], sizes[pair.label_2.as_str()]);
            out.push(match pair.result {
                Ok(r) => Comparison {
                    metric: name.clone(),
                    label_1: r.label_1,
                    label_2: r.label_2,
                    n_1,
                    n_2,
                    median_1: Some(r.median_1),
                    median_2: Some(r.median_2),
                    u_statistic: Some(r.u_statistic),
                    p_value: Some(r.p_value),
                    significant: Some(r.significant),
                    method: Some(r.method),
                    error: None,
                },
                Err(e) => Comparison {
                    metric: name.clone(),
                    label_1: pair.label_1,
                    label_2: pair.label_2,
                    n_1,
                    n_2,
                    median_1: None,
                    median_2: None,
                    u_statistic: None,
                    p_value: None,
                    significant: None,
                    method: None,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(out)
}

fn method_name(m: TestMethod) -> &'static str {
    match m {
        TestMethod::Auto => "auto",
        TestMethod::Exact => "exact",
        TestMethod::Asymptotic => "asymptotic",
    }
}

pub const STATS_HEADER: [&str; 12] = [
    "metric",
    "model_1",
    "model_2",
    "n_1",
    "n_2",
    "median_1",
    "median_2",
    "u_statistic",
    "p_value",
    "significant",
    "method",
    "error",
];

pub fn write_stats_csv(path: &Path, rows: &[Comparison]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(STATS_HEADER)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for c in rows {
        w.write_record([
            c.metric.clone(),
            c.label_1.clone(),
            c.label_2.clone(),
            c.n_1.to_string(),
            c.n_2.to_string(),
            opt(c.median_1),
            opt(c.median_2),
            opt(c.u_statistic),
            opt(c.p_value),
            c.significant.map(|s| s.to_string()).unwrap_or_default(),
            c.method.map(method_name).unwrap_or_default().to_string(),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

/// Fixed-width table with the columns of Table 1.
pub fn text_table(rows: &[Comparison]) -> String {
    let mut cells: Vec<[String; 6]> = vec![[
        "Metric".into(),
        "Model 1".into(),
        "Model 2".into(),
        "Median 1 / 2".into(),
        "p-value".into(),
        "Sig.".into(),
    ]];
    for c in rows {
        let medians = match (c.median_1, c.median_2) {
            (Some(a), Some(b)) => format!("{a:.3} / {b:.3}"),
            _ => "-".into(),
        };
        let p = match (&c.error, c.p_value) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(p)) => format_p(p),
            (None, None) => "-".into(),
        };
        cells.push([
            c.metric.clone(),
            c.label_1.clone(),
            c.label_2.clone(),
            medians,
            p,
            if c.significant == Some(true) { "*".into() } else { String::new() },
        ]);
    }
    let mut widths = [0usize; 6];
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in &cells {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{cell:<w$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use kgbench_core::metrics::{Measure, MetricRecord, NaReason, RatioTriple};

    fn row(model: &str, method: &str, run: u32, v: Option<f64>) -> MetricRow {
        let m = v.map(Measure::Value).unwrap_or(Measure::na(NaReason::InvalidRdf));
        MetricRow {
            model: model.into(),
            method: method.into(),
            graph_kind: "observation".into(),
            run,
            file: String::new(),
            record: MetricRecord {
                rdf_valid: v.is_some(),
                triple_count: 1,
                compliance: RatioTriple { class: m, property: m, avg: m },
                coverage: RatioTriple { class: m, property: m, avg: m },
                shacl_violations: None,
                shacl_violation_ratio: Measure::na(NaReason::NoShapes),
            },
        }
    }

    #[test]
    fn two_models_one_row() {
        let rows: Vec<MetricRow> = (1..=5)
            .map(|r| row("a", "d2kg", r, Some(r as f64 / 10.0)))
            .chain((1..=5).map(|r| row("b", "d2kg", r, Some(0.5 + r as f64 / 10.0))))
            .collect();
        let out = compare(&rows, &["compliance".into()], &CompareOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].label_1.as_str(), out[0].label_2.as_str()), ("a", "b"));
        assert_eq!(out[0].method, Some(TestMethod::Exact));
        assert!(text_table(&out).contains("0.300 / 0.800"));
    }

    #[test]
    fn single_model_is_an_error() {
        let rows = vec![row("a", "d2kg", 1, Some(0.1)), row("a", "d2kg", 2, Some(0.2))];
        assert!(matches!(
            compare(&rows, &["coverage".into()], &CompareOptions::default()),
            Err(CompareError::TooFewModels { found: 1, .. })
        ));
    }

    #[test]
    fn missing_policy() {
        let rows = vec![row("a", "x", 1, None), row("a", "x", 2, Some(0.4))];
        let zero = build_samples(&rows, Metric::ComplianceAvg, Pooling::PerRun, Missing::Zero).unwrap();
        assert_eq!(zero[0].values(), vec![0.0, 0.4]);
        let skip = build_samples(&rows, Metric::ComplianceAvg, Pooling::PerRun, Missing::Skip).unwrap();
        assert_eq!(skip[0].values(), vec![0.4]);
    }

    #[test]
    fn per_method_median_pooling() {
        let rows = vec![
            row("a", "x", 1, Some(0.1)),
            row("a", "x", 2, Some(0.3)),
            row("a", "y", 1, Some(0.9)),
        ];
        let s = build_samples(&rows, Metric::ComplianceAvg, Pooling::PerMethodMedian, Missing::Zero).unwrap();
        assert_eq!(s[0].values().len(), 2);
        assert!((s[0].values()[0] - 0.2).abs() < 1e-15);
        assert_eq!(s[0].values()[1], 0.9);
    }

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(0.0004), "<0.001");
        assert_eq!(format_p(0.2711), "0.271");
    }
}
