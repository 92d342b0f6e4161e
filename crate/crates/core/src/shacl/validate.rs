use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use super::shapes::{Constraint, NodeShape, PropertyShape, ShapesGraph, Target};
use crate::rdf::{Graph, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Class,
    MinCount,
    NodeKind,
    Or,
    QualifiedMinCount,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub focus_node: Term,
    pub path: Option<String>,
    pub value: Option<Term>,
    pub constraint_kind: ConstraintKind,
    pub source_shape: Term,
    pub message: String,
}

/// Outcome of validating one data graph. `conforms()` is true exactly when
/// there are no violations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    conforms: bool,
    violations: Vec<Violation>,
}

impl Default for ValidationReport {
    fn default() -> Self {
        ValidationReport::new(Vec::new())
    }
}

impl ValidationReport {
    pub fn new(violations: Vec<Violation>) -> Self {
        ValidationReport {
            conforms: violations.is_empty(),
            violations,
        }
    }

    pub fn conforms(&self) -> bool {
        self.conforms
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count_of(&self, kind: ConstraintKind) -> usize {
        self.violations
            .iter()
            .filter(|v| v.constraint_kind == kind)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("violation ratio undefined for a graph with no triples")]
pub struct EmptyGraphRatio;

/// Violations per triple.
pub fn violation_ratio(report: &ValidationReport, data: &Graph) -> Result<f64, EmptyGraphRatio> {
    if data.is_empty() {
        return Err(EmptyGraphRatio);
    }
    Ok(report.len() as f64 / data.len() as f64)
}

/// Validates `data` against every shape. Only explicit `rdf:type` triples
/// select targets and satisfy `sh:class`.
pub fn validate(data: &Graph, shapes: &ShapesGraph) -> ValidationReport {
    let mut violations = Vec::new();
    for shape in &shapes.shapes {
        for focus in focus_nodes(data, shape) {
            check_node_shape(data, shape, focus, &mut violations);
        }
    }
    ValidationReport::new(violations)
}

fn focus_nodes<'g>(data: &'g Graph, shape: &NodeShape) -> BTreeSet<&'g Term> {
    let mut nodes = BTreeSet::new();
    for target in &shape.targets {
        match target {
            Target::Class(class) => nodes.extend(data.instances_of(class)),
            Target::SubjectsOf(predicate) => nodes.extend(data.subjects_of_predicate(predicate)),
        }
    }
    nodes
}

fn conforms_to(data: &Graph, shape: &NodeShape, node: &Term) -> bool {
    let mut scratch = Vec::new();
    check_node_shape(data, shape, node, &mut scratch);
    scratch.is_empty()
}

fn check_node_shape(data: &Graph, shape: &NodeShape, focus: &Term, out: &mut Vec<Violation>) {
    for constraint in &shape.constraints {
        if let Some((kind, message)) = value_failure(data, constraint, focus) {
            out.push(Violation {
                focus_node: focus.clone(),
                path: None,
                value: Some(focus.clone()),
                constraint_kind: kind,
                source_shape: shape.id.clone(),
                message,
            });
        }
    }
    for property in &shape.property_shapes {
        check_property_shape(data, property, focus, out);
    }
}

fn check_property_shape(
    data: &Graph,
    shape: &PropertyShape,
    focus: &Term,
    out: &mut Vec<Violation>,
) {
    let values: Vec<&Term> = data.objects(focus, &shape.path).collect();
    let violation = |value: Option<&Term>, kind, message| Violation {
        focus_node: focus.clone(),
        path: Some(shape.path.clone()),
        value: value.cloned(),
        constraint_kind: kind,
        source_shape: shape.id.clone(),
        message,
    };
    for constraint in &shape.constraints {
        match constraint {
            Constraint::MinCount(min) => {
                if (values.len() as u64) < *min {
                    out.push(violation(
                        None,
                        ConstraintKind::MinCount,
                        format!("less than {min} values for <{}> on {focus}", shape.path),
                    ));
                }
            }
            Constraint::QualifiedValueShape { shape: nested, min_count } => {
                let conforming = values
                    .iter()
                    .filter(|v| conforms_to(data, nested, v))
                    .count() as u64;
                if conforming < *min_count {
                    out.push(violation(
                        None,
                        ConstraintKind::QualifiedMinCount,
                        format!(
                            "{conforming} values for <{}> conform to the qualified shape, need {min_count}",
                            shape.path
                        ),
                    ));
                }
            }
            per_value => {
                for value in &values {
                    if let Some((kind, message)) = value_failure(data, per_value, value) {
                        out.push(violation(Some(value), kind, message));
                    }
                }
            }
        }
    }
}

/// Checks a constraint that applies to one value node at a time.
fn value_failure(data: &Graph, constraint: &Constraint, value: &Term) -> Option<(ConstraintKind, String)> {
    match constraint {
        Constraint::Class(class) => (!data.has_type(value, class))
            .then(|| (ConstraintKind::Class, format!("{value} is not an instance of <{class}>"))),
        Constraint::NodeKind(kind) => (!kind.matches(value))
            .then(|| (ConstraintKind::NodeKind, format!("{value} is not of node kind {kind:?}"))),
        Constraint::Or(alternatives) => (!alternatives.iter().any(|alt| conforms_to(data, alt, value)))
            .then(|| (ConstraintKind::Or, format!("{value} conforms to none of the sh:or alternatives"))),
        // count constraints only appear on property shapes
        Constraint::MinCount(_) | Constraint::QualifiedValueShape { .. } => None,
    }
}
