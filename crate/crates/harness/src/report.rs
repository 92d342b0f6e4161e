//! Presentation artifacts: summary table, grouped bar charts and the
//! heatmap. Every chart is an SVG plus the JSON it was drawn from.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kgbench_core::metrics::{aggregate, summarize, Measure, Metric, MetricRecord, MetricStats};
use serde::Serialize;
use thiserror::Error;

use crate::evaluate::MetricRow;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: {0}")]
    Empty(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn io(path: &Path, e: impl ToString) -> ReportError {
    ReportError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub method: String,
    pub graph_kind: String,
    pub records: usize,
    pub valid_count: usize,
    pub metrics: BTreeMap<&'static str, MetricStats>,
}

impl SummaryRow {
    pub fn stats(&self, metric: Metric) -> &MetricStats {
        &self.metrics[metric.name()]
    }

    pub fn label(&self) -> String {
        format!("{} / {} / {}", self.model, self.method, self.graph_kind)
    }
}

/// One row per (model, method, graph kind), sorted.
pub fn build_summary(rows: &[MetricRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<MetricRecord>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((&row.model, &row.method, &row.graph_kind))
            .or_default()
            .push(row.record.clone());
    }
    groups
        .into_iter()
        .map(|((model, method, graph_kind), records)| {
            let agg = aggregate(&records);
            SummaryRow {
                model: model.into(),
                method: method.into(),
                graph_kind: graph_kind.into(),
                records: agg.records,
                valid_count: agg.valid_count,
                metrics: agg.metrics.into_iter().map(|(m, s)| (m.name(), s)).collect(),
            }
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    let mut header = vec!["model".to_string(), "method".into(), "graph_kind".into(), "records".into(), "valid_count".into()];
    for m in Metric::ALL {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_std", m.name()));
    }
    w.write_record(&header).map_err(|e| io(path, e))?;
    for row in summary {
        let mut rec = vec![
            row.model.clone(),
            row.method.clone(),
            row.graph_kind.clone(),
            row.records.to_string(),
            row.valid_count.to_string(),
        ];
        for m in Metric::ALL {
            let s = row.stats(m);
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        w.write_record(&rec).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    GroupedBar,
    Heatmap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    Solid,
    Hatched,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bar {
    pub term: &'static str,
    pub graph_kind: String,
    pub fill: Fill,
    pub n: usize,
    pub mean: Measure,
    pub std: Measure,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarGroup {
    pub label: String,
    pub bars: Vec<Bar>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarChart {
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub groups: Vec<BarGroup>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricGroup {
    Compliance,
    Coverage,
}

impl MetricGroup {
    fn metrics(self) -> [(&'static str, Metric); 2] {
        match self {
            MetricGroup::Compliance => [("class", Metric::ComplianceClass), ("property", Metric::ComplianceProperty)],
            MetricGroup::Coverage => [("class", Metric::CoverageClass), ("property", Metric::CoverageProperty)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricGroup::Compliance => "compliance",
            MetricGroup::Coverage => "coverage",
        }
    }
}

fn kind_order(kind: &str) -> (u8, &str) {
    match kind {
        "observation" => (0, kind),
        "action" => (1, kind),
        _ => (2, kind),
    }
}

/// One bar group per model; within it class and property bars for each
/// graph kind, over all runs of every method. Action bars are hatched.
pub fn bar_chart(rows: &[MetricRow], group: MetricGroup) -> Result<BarChart, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty(format!("{} chart has no records", group.name())));
    }
    let mut by_model: BTreeMap<&str, BTreeMap<(u8, &str), Vec<&MetricRecord>>> = BTreeMap::new();
    for row in rows {
        by_model
            .entry(&row.model)
            .or_default()
            .entry(kind_order(&row.graph_kind))
            .or_default()
            .push(&row.record);
    }
    let groups = by_model
        .into_iter()
        .map(|(model, kinds)| {
            let mut bars = Vec::new();
            for (term, metric) in group.metrics() {
                for ((_, kind), records) in &kinds {
                    let measures: Vec<Measure> = records.iter().map(|r| r.get(metric)).collect();
                    let s = summarize(&measures);
                    bars.push(Bar {
                        term,
                        graph_kind: kind.to_string(),
                        fill: if *kind == "action" { Fill::Hatched } else { Fill::Solid },
                        n: s.n,
                        mean: s.mean,
                        std: s.std,
                    });
                }
            }
            BarGroup {
                label: model.to_string(),
                bars,
            }
        })
        .collect();
    let title = match group {
        MetricGroup::Compliance => "Ontology compliance",
        MetricGroup::Coverage => "Ontology coverage",
    };
    Ok(BarChart {
        kind: ChartKind::GroupedBar,
        title: title.into(),
        x_label: "Model".into(),
        y_label: format!("{} (mean over runs, error bar = std)", group.name()),
        groups,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatmapColumn {
    pub key: &'static str,
    pub label: &'static str,
    pub inverted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub value: Measure,
    /// Position on the colour scale, 1 = best. Absent for white cells.
    pub scale: Option<f64>,
    pub color: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Heatmap {
    pub kind: ChartKind,
    pub title: String,
    pub columns: Vec<HeatmapColumn>,
    pub rows: Vec<String>,
    pub cells: Vec<Vec<HeatmapCell>>,
}

const LOW: (f64, f64, f64) = (255.0, 255.0, 204.0);
const MID: (f64, f64, f64) = (65.0, 182.0, 196.0);
const HIGH: (f64, f64, f64) = (37.0, 52.0, 148.0);
pub const WHITE: &str = "#ffffff";

/// Pale yellow at 0 through teal to blue at 1.
pub fn scale_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (a, b, u) = if t < 0.5 { (LOW, MID, t * 2.0) } else { (MID, HIGH, (t - 0.5) * 2.0) };
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn heatmap_columns() -> Vec<(HeatmapColumn, Option<Metric>)> {
    let col = |key, label, inverted, metric| (HeatmapColumn { key, label, inverted }, metric);
    vec![
        col("valid_count", "Valid KGs", false, None),
        col("triple_count", "Triples", false, Some(Metric::TripleCount)),
        col("shacl_violation_ratio", "SHACL viol./triple", true, Some(Metric::ShaclViolationRatio)),
        col("compliance_class", "Compl. C", false, Some(Metric::ComplianceClass)),
        col("compliance_property", "Compl. P", false, Some(Metric::ComplianceProperty)),
        col("compliance_avg", "Compl. AVG", false, Some(Metric::ComplianceAvg)),
        col("coverage_class", "Cov. C", false, Some(Metric::CoverageClass)),
        col("coverage_property", "Cov. P", false, Some(Metric::CoverageProperty)),
        col("coverage_avg", "Cov. AVG", false, Some(Metric::CoverageAvg)),
    ]
}

/// Column-wise min-max normalisation; an all-equal column sits at 0 (1 when
/// inverted). Not-computable cells are white.
pub fn heatmap(summary: &[SummaryRow]) -> Result<Heatmap, ReportError> {
    if summary.is_empty() {
        return Err(ReportError::Empty("heatmap has no rows".into()));
    }
    let columns = heatmap_columns();
    let values: Vec<Vec<Measure>> = summary
        .iter()
        .map(|row| {
            columns
                .iter()
                .map(|(_, metric)| match metric {
                    None => Measure::Value(row.valid_count as f64),
                    Some(m) => row.stats(*m).mean,
                })
                .collect()
        })
        .collect();
    let mut cells: Vec<Vec<HeatmapCell>> = vec![Vec::new(); summary.len()];
    for (c, (column, _)) in columns.iter().enumerate() {
        let present: Vec<f64> = values.iter().filter_map(|r| r[c].value()).collect();
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (r, row) in values.iter().enumerate() {
            let cell = match row[c].value() {
                None => HeatmapCell {
                    value: row[c],
                    scale: None,
                    color: WHITE.into(),
                },
                Some(v) => {
                    let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                    let t = if column.inverted { 1.0 - t } else { t };
                    HeatmapCell {
                        value: row[c],
                        scale: Some(t),
                        color: scale_color(t),
                    }
                }
            };
            cells[r].push(cell);
        }
    }
    Ok(Heatmap {
        kind: ChartKind::Heatmap,
        title: "Summary metrics averaged over runs".into(),
        columns: columns.into_iter().map(|(c, _)| c).collect(),
        rows: summary.iter().map(SummaryRow::label).collect(),
        cells,
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const SERIES_COLORS: [&str; 2] = ["#2c7fb8", "#fdae61"];

pub fn bar_chart_svg(chart: &BarChart) -> String {
    let bars_per_group = chart.groups.iter().map(|g| g.bars.len()).max().unwrap_or(0).max(1);
    let (bar_w, gap, plot_h, left, top) = (18.0, 28.0, 260.0, 60.0, 40.0);
    let group_w = bars_per_group as f64 * bar_w + gap;
    let width = (left + chart.groups.len() as f64 * group_w + 20.0).max(left + 320.0);
    let height = top + plot_h + 110.0;
    let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str("<defs>\n");
    for (i, color) in SERIES_COLORS.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<pattern id="hatch{i}" patternUnits="userSpaceOnUse" width="6" height="6" patternTransform="rotate(45)"><rect width="6" height="6" fill="{color}" fill-opacity="0.35"/><line x1="0" y1="0" x2="0" y2="6" stroke="{color}" stroke-width="3"/></pattern>"#
        );
    }
    s.push_str("</defs>\n");
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, esc(&chart.title));
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            width - 20.0,
            left - 6.0,
            y(v) + 4.0,
            y = y(v)
        );
    }
    for (g, group) in chart.groups.iter().enumerate() {
        let x0 = left + gap / 2.0 + g as f64 * group_w;
        for (b, bar) in group.bars.iter().enumerate() {
            let x = x0 + b as f64 * bar_w;
            let series = usize::from(bar.term != "class");
            let fill = match bar.fill {
                Fill::Solid => SERIES_COLORS[series].to_string(),
                Fill::Hatched => format!("url(#hatch{series})"),
            };
            let Some(mean) = bar.mean.value() else { continue };
            let _ = writeln!(
                s,
                r##"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{fill}" stroke="#333333" stroke-width="0.5"><title>{} {} {}: {mean:.3}</title></rect>"##,
                y(mean),
                bar_w - 2.0,
                y(0.0) - y(mean),
                esc(&group.label),
                bar.term,
                esc(&bar.graph_kind)
            );
            if let Some(std) = bar.std.value() {
                let cx = x + (bar_w - 2.0) / 2.0;
                let _ = writeln!(
                    s,
                    r##"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="#000000"/>"##,
                    y(mean + std),
                    y(mean - std)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + (group.bars.len() as f64 * bar_w) / 2.0,
            top + plot_h + 16.0,
            esc(&group.label)
        );
    }
    let legend_y = top + plot_h + 40.0;
    let legend = [
        ("class, observation", SERIES_COLORS[0].to_string()),
        ("class, action", "url(#hatch0)".to_string()),
        ("property, observation", SERIES_COLORS[1].to_string()),
        ("property, action", "url(#hatch1)".to_string()),
    ];
    for (i, (label, fill)) in legend.iter().enumerate() {
        let x = left + (i / 2) as f64 * 160.0;
        let legend_y = legend_y + (i % 2) as f64 * 18.0;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{legend_y:.1}" width="12" height="12" fill="{fill}" stroke="#333333" stroke-width="0.5"/><text x="{:.1}" y="{:.1}">{label}</text>"##,
            x + 16.0,
            legend_y + 10.0
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, width / 2.0, height - 10.0, esc(&chart.x_label));
    s.push_str("</svg>\n");
    s
}

fn cell_text(m: Measure, key: &str) -> String {
    match m.value() {
        None => String::new(),
        Some(v) if key == "valid_count" => format!("{v:.0}"),
        Some(v) if key == "triple_count" => format!("{v:.1}"),
        Some(v) => format!("{v:.2}"),
    }
}

pub fn heatmap_svg(map: &Heatmap) -> String {
    let (cell_w, cell_h, left, top) = (78.0, 22.0, 240.0, 60.0);
    let width = left + map.columns.len() as f64 * cell_w + 10.0;
    let height = top + map.rows.len() as f64 * cell_h + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, esc(&map.title));
    for (c, col) in map.columns.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            left + c as f64 * cell_w + cell_w / 2.0,
            top - 8.0,
            esc(col.label)
        );
    }
    for (r, label) in map.rows.iter().enumerate() {
        let y = top + r as f64 * cell_h;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, y + 15.0, esc(label));
        for (c, cell) in map.cells[r].iter().enumerate() {
            let x = left + c as f64 * cell_w;
            let text = cell_text(cell.value, map.columns[c].key);
            let ink = if cell.scale.is_some_and(|t| t > 0.6) { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{cell_w:.1}" height="{cell_h:.1}" fill="{}" stroke="#cccccc"/><text x="{:.1}" y="{:.1}" text-anchor="middle" fill="{ink}">{text}</text>"##,
                cell.color,
                x + cell_w / 2.0,
                y + 15.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(value).expect("report data serializes") + "\n";
    fs::write(path, text).map_err(|e| io(path, e))
}

/// Writes `summary.csv`, `summary.json`, `charts/*.{svg,json}` and, when
/// given, a copy of the stats table into `out_dir`.
pub fn write_report(rows: &[MetricRow], stats_csv: Option<&Path>, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty("no metric rows".into()));
    }
    let charts = out_dir.join("charts");
    fs::create_dir_all(&charts).map_err(|e| io(&charts, e))?;
    let mut written = Vec::new();

    let summary = build_summary(rows);
    let path = out_dir.join("summary.csv");
    write_summary_csv(&path, &summary)?;
    written.push(path);
    let path = out_dir.join("summary.json");
    write_json(&path, &summary)?;
    written.push(path);

    for group in [MetricGroup::Compliance, MetricGroup::Coverage] {
        let chart = bar_chart(rows, group)?;
        let stem = format!("{}_bars", group.name());
        let path = charts.join(format!("{stem}.json"));
        write_json(&path, &chart)?;
        written.push(path);
        let path = charts.join(format!("{stem}.svg"));
        fs::write(&path, bar_chart_svg(&chart)).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    let map = heatmap(&summary)?;
    let path = charts.join("heatmap.json");
    write_json(&path, &map)?;
    written.push(path);
    let path = charts.join("heatmap.svg");
    fs::write(&path, heatmap_svg(&map)).map_err(|e| io(&path, e))?;
    written.push(path);

    if let Some(stats) = stats_csv {
        let path = out_dir.join("stats.csv");
        if fs::canonicalize(stats).ok() != fs::canonicalize(&path).ok() {
            fs::copy(stats, &path).map_err(|e| io(stats, e))?;
        }
        written.push(path);
    }
    Ok(written)
}
