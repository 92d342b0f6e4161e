//! Evaluation of generated Turtle files: parse, SHACL-validate, and score
//! against the ontology. Also the metrics CSV both ways.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kgbench_core::metrics::{extract_ontology_terms, Measure, MetricRecord, OntologyTermSets, RatioTriple};
use kgbench_core::rdf::parse_turtle;
use kgbench_core::shacl::{parse_shapes, validate, ShapesGraph, ValidationReport, ACTION_SHAPES, OBSERVATION_SHAPES};
use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::pipeline::{ExperimentManifest, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("shapes {reference}: {message}")]
    Shapes { reference: String, message: String },
    #[error("ontology {path}: {message}")]
    Ontology { path: PathBuf, message: String },
    #[error("no .ttl files under {0}")]
    NoGraphs(PathBuf),
    #[error("{path} line {line}: {message}")]
    Csv { path: PathBuf, line: u64, message: String },
}

fn io(path: &Path, e: impl ToString) -> EvalError {
    EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Loads a shapes file, or a bundled set named `builtin:observation` or
/// `builtin:action`.
pub fn load_shapes(reference: &str, workdir: &Path) -> Result<ShapesGraph, EvalError> {
    let shapes_error = |message: String| EvalError::Shapes {
        reference: reference.to_string(),
        message,
    };
    let text = match reference {
        "builtin:observation" => OBSERVATION_SHAPES.to_string(),
        "builtin:action" => ACTION_SHAPES.to_string(),
        path => {
            let path = workdir.join(path);
            fs::read_to_string(&path).map_err(|e| shapes_error(e.to_string()))?
        }
    };
    let graph = parse_turtle(&text).map_err(|e| shapes_error(e.to_string()))?;
    parse_shapes(&graph).map_err(|e| shapes_error(e.to_string()))
}

/// Which shapes apply to which graphs: `common` to all, `by_kind` only to
/// graphs of that kind.
#[derive(Clone, Debug, Default)]
pub struct ShapesSelection {
    pub common: Vec<ShapesGraph>,
    pub by_kind: BTreeMap<String, Vec<ShapesGraph>>,
}

impl ShapesSelection {
    /// Each argument is `REF` or `KIND=REF`.
    pub fn from_args(args: &[String], workdir: &Path) -> Result<Self, EvalError> {
        let mut sel = ShapesSelection::default();
        for arg in args {
            match arg.split_once('=') {
                Some((kind, reference)) => sel
                    .by_kind
                    .entry(kind.to_string())
                    .or_default()
                    .push(load_shapes(reference, workdir)?),
                None => sel.common.push(load_shapes(arg, workdir)?),
            }
        }
        Ok(sel)
    }

    pub fn for_kind(&self, kind: &str) -> Option<ShapesGraph> {
        let mut all = self
            .common
            .iter()
            .chain(self.by_kind.get(kind).into_iter().flatten())
            .cloned();
        let first = all.next()?;
        Some(all.fold(first, ShapesGraph::merge))
    }
}

pub fn load_ontology_terms(path: &Path) -> Result<OntologyTermSets, EvalError> {
    let ontology_error = |message: String| EvalError::Ontology {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| ontology_error(e.to_string()))?;
    let graph = parse_turtle(&text).map_err(|e| ontology_error(e.to_string()))?;
    extract_ontology_terms(&graph).map_err(|e| ontology_error(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub model: String,
    pub method: String,
    pub graph_kind: String,
    pub run: u32,
    pub file: String,
    pub record: MetricRecord,
}

/// Parses and validates one Turtle document.
pub fn evaluate_text(text: &str, terms: &OntologyTermSets, shapes: Option<&ShapesGraph>) -> (MetricRecord, Option<ValidationReport>) {
    match parse_turtle(text) {
        Ok(graph) => {
            let report = shapes.map(|s| validate(&graph, s));
            (MetricRecord::evaluate(&graph, terms, report.as_ref()), report)
        }
        Err(_) => (MetricRecord::invalid(), None),
    }
}

fn run_index(stem: &str) -> u32 {
    stem.strip_prefix("run_").and_then(|n| n.parse().ok()).unwrap_or(0)
}

/// Evaluates every `.ttl` file under `run_dir`. Labels come from the
/// `experiment.json` next to each file, or else the parent directory name.
pub fn evaluate_dir(run_dir: &Path, terms: &OntologyTermSets, shapes: &ShapesSelection) -> Result<Vec<MetricRow>, EvalError> {
    if !run_dir.is_dir() {
        return Err(io(run_dir, "not a readable directory"));
    }
    let mut manifests: BTreeMap<PathBuf, Option<ExperimentManifest>> = BTreeMap::new();
    let mut rows = Vec::new();
    for entry in WalkDir::new(run_dir).sort_by_file_name() {
        let entry = entry.map_err(|e| io(run_dir, e))?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "ttl") {
            continue;
        }
        let parent = path.parent().unwrap_or(run_dir).to_path_buf();
        let manifest = manifests
            .entry(parent.clone())
            .or_insert_with(|| {
                fs::read_to_string(parent.join(MANIFEST_FILE))
                    .ok()
                    .and_then(|t| serde_json::from_str(&t).ok())
            })
            .clone();
        let (model, method, graph_kind) = match manifest {
            Some(m) => (m.model_id, m.method.to_string(), m.graph_kind.to_string()),
            None => (
                parent
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                String::new(),
                String::new(),
            ),
        };
        let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
        let (record, _) = evaluate_text(&text, terms, shapes.for_kind(&graph_kind).as_ref());
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let file = path
            .strip_prefix(run_dir)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        rows.push(MetricRow {
            model,
            method,
            graph_kind,
            run: run_index(&stem),
            file,
            record,
        });
    }
    if rows.is_empty() {
        return Err(EvalError::NoGraphs(run_dir.to_path_buf()));
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [MetricRow]) {
    rows.sort_by(|a, b| {
        (&a.model, &a.method, &a.graph_kind, a.run, &a.file).cmp(&(&b.model, &b.method, &b.graph_kind, b.run, &b.file))
    });
}

pub const METRICS_HEADER: [&str; 15] = [
    "model",
    "method",
    "graph_kind",
    "run",
    "file",
    "rdf_valid",
    "triple_count",
    "shacl_violations",
    "shacl_violation_ratio",
    "compliance_class",
    "compliance_property",
    "compliance_avg",
    "coverage_class",
    "coverage_property",
    "coverage_avg",
];

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<(), EvalError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(METRICS_HEADER).map_err(|e| io(path, e))?;
    for row in rows {
        let r = &row.record;
        w.write_record([
            row.model.clone(),
            row.method.clone(),
            row.graph_kind.clone(),
            row.run.to_string(),
            row.file.clone(),
            r.rdf_valid.to_string(),
            r.triple_count.to_string(),
            r.shacl_violations.map(|v| v.to_string()).unwrap_or_default(),
            r.shacl_violation_ratio.to_string(),
            r.compliance.class.to_string(),
            r.compliance.property.to_string(),
            r.compliance.avg.to_string(),
            r.coverage.class.to_string(),
            r.coverage.property.to_string(),
            r.coverage.avg.to_string(),
        ])
        .map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRow>, EvalError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io(path, e))?;
    let headers = reader.headers().map_err(|e| io(path, e))?.clone();
    let col = |name: &str| -> Result<usize, EvalError> {
        headers.iter().position(|h| h == name).ok_or_else(|| EvalError::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let idx: Vec<usize> = METRICS_HEADER.iter().map(|h| col(h)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| EvalError::Csv {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let measure = |i: usize| -> Result<Measure, EvalError> {
            field(i)
                .parse::<Measure>()
                .map_err(|e| bad(format!("{}: {e}", METRICS_HEADER[i])))
        };
        let rdf_valid = match field(5) {
            "true" | "True" | "1" => true,
            "false" | "False" | "0" => false,
            other => return Err(bad(format!("rdf_valid `{other}`"))),
        };
        let shacl_violations = match field(7) {
            "" => None,
            v => Some(v.parse().map_err(|_| bad(format!("shacl_violations `{v}`")))?),
        };
        rows.push(MetricRow {
            model: field(0).to_string(),
            method: field(1).to_string(),
            graph_kind: field(2).to_string(),
            run: field(3).parse().map_err(|_| bad(format!("run `{}`", field(3))))?,
            file: field(4).to_string(),
            record: MetricRecord {
                rdf_valid,
                triple_count: field(6).parse().map_err(|_| bad(format!("triple_count `{}`", field(6))))?,
                shacl_violations,
                shacl_violation_ratio: measure(8)?,
                compliance: RatioTriple {
                    class: measure(9)?,
                    property: measure(10)?,
                    avg: measure(11)?,
                },
                coverage: RatioTriple {
                    class: measure(12)?,
                    property: measure(13)?,
                    avg: measure(14)?,
                },
            },
        });
    }
    Ok(rows)
}
