use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::rdf::vocab::{RDF_TYPE, SH, XSD_INTEGER, XSD_NON_NEGATIVE_INTEGER};
use crate::rdf::{extract_list, Graph, ListError, Term};

const MAX_NESTING: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeParseError {
    #[error("unsupported SHACL term {0}")]
    Unsupported(String),
    #[error("invalid value for {property} on shape {shape}: {reason}")]
    InvalidValue {
        shape: Term,
        property: &'static str,
        reason: String,
    },
    #[error("malformed list in shape {shape}: {source}")]
    List { shape: Term, source: ListError },
    #[error("shape {0} nests too deeply or refers to itself")]
    TooDeep(Term),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "iri", rename_all = "snake_case")]
pub enum Target {
    Class(String),
    SubjectsOf(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Iri,
    BlankNode,
    Literal,
    BlankNodeOrIri,
    BlankNodeOrLiteral,
    IriOrLiteral,
}

impl NodeKind {
    fn from_iri(iri: &str) -> Option<Self> {
        Some(match iri.strip_prefix(SH)? {
            "IRI" => NodeKind::Iri,
            "BlankNode" => NodeKind::BlankNode,
            "Literal" => NodeKind::Literal,
            "BlankNodeOrIRI" => NodeKind::BlankNodeOrIri,
            "BlankNodeOrLiteral" => NodeKind::BlankNodeOrLiteral,
            "IRIOrLiteral" => NodeKind::IriOrLiteral,
            _ => return None,
        })
    }

    pub fn matches(self, term: &Term) -> bool {
        match self {
            NodeKind::Iri => term.is_iri(),
            NodeKind::BlankNode => term.is_blank(),
            NodeKind::Literal => term.is_literal(),
            NodeKind::BlankNodeOrIri => !term.is_literal(),
            NodeKind::BlankNodeOrLiteral => !term.is_iri(),
            NodeKind::IriOrLiteral => !term.is_blank(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Class(String),
    MinCount(u64),
    NodeKind(NodeKind),
    Or(Vec<NodeShape>),
    QualifiedValueShape { shape: Box<NodeShape>, min_count: u64 },
}

/// A shape without a path: its constraints apply to the node itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeShape {
    pub id: Term,
    pub targets: Vec<Target>,
    pub constraints: Vec<Constraint>,
    pub property_shapes: Vec<PropertyShape>,
}

impl NodeShape {
    /// The `sh:or` alternatives, if the shape has one.
    pub fn or_alternatives(&self) -> Option<&[NodeShape]> {
        self.constraints.iter().find_map(|c| match c {
            Constraint::Or(alts) => Some(alts.as_slice()),
            _ => None,
        })
    }
}

/// A shape constraining the values reached through a single predicate path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyShape {
    pub id: Term,
    pub path: String,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ShapesGraph {
    pub shapes: Vec<NodeShape>,
}

impl ShapesGraph {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Concatenates the shapes of several graphs.
    pub fn merge(mut self, other: ShapesGraph) -> ShapesGraph {
        self.shapes.extend(other.shapes);
        self
    }
}

const SUPPORTED_PREDICATES: &[&str] = &[
    "targetClass",
    "targetSubjectsOf",
    "property",
    "path",
    "class",
    "minCount",
    "nodeKind",
    "or",
    "qualifiedValueShape",
    "qualifiedMinCount",
];

const SUPPORTED_OBJECTS: &[&str] = &[
    "NodeShape",
    "PropertyShape",
    "IRI",
    "BlankNode",
    "Literal",
    "BlankNodeOrIRI",
    "BlankNodeOrLiteral",
    "IRIOrLiteral",
];

/// Reads every `sh:NodeShape` instance of `graph`.
///
/// Any `sh:` term outside the supported subset is rejected rather than
/// skipped, so a shapes file never validates less than it says.
pub fn parse_shapes(graph: &Graph) -> Result<ShapesGraph, ShapeParseError> {
    check_vocabulary(graph)?;
    let node_shape = Term::iri(format!("{SH}NodeShape"));
    let roots: BTreeSet<&Term> = graph.subjects_with(RDF_TYPE, &node_shape);
    let reader = Reader { graph };
    let shapes = roots
        .into_iter()
        .map(|root| reader.node_shape(root, 0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ShapesGraph { shapes })
}

fn check_vocabulary(graph: &Graph) -> Result<(), ShapeParseError> {
    for t in graph.iter() {
        if let Some(local) = t.predicate_iri().strip_prefix(SH) {
            if !SUPPORTED_PREDICATES.contains(&local) {
                return Err(ShapeParseError::Unsupported(format!("sh:{local}")));
            }
        }
        if let Some(local) = t.object().as_iri().and_then(|o| o.strip_prefix(SH)) {
            if !SUPPORTED_OBJECTS.contains(&local) {
                return Err(ShapeParseError::Unsupported(format!("sh:{local}")));
            }
        }
    }
    Ok(())
}

struct Reader<'g> {
    graph: &'g Graph,
}

impl Reader<'_> {
    fn values(&self, node: &Term, local: &str) -> Vec<Term> {
        let predicate = format!("{SH}{local}");
        self.graph.objects(node, &predicate).cloned().collect()
    }

    fn iri_values(
        &self,
        node: &Term,
        local: &'static str,
    ) -> Result<Vec<String>, ShapeParseError> {
        self.values(node, local)
            .into_iter()
            .map(|v| match v {
                Term::Iri(iri) => Ok(iri),
                other => Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: local,
                    reason: format!("expected an IRI, found {other}"),
                }),
            })
            .collect()
    }

    fn count_value(
        &self,
        node: &Term,
        local: &'static str,
    ) -> Result<Option<u64>, ShapeParseError> {
        let values = self.values(node, local);
        let invalid = |reason: String| ShapeParseError::InvalidValue {
            shape: node.clone(),
            property: local,
            reason,
        };
        match values.as_slice() {
            [] => Ok(None),
            [Term::Literal(lit)]
                if lit.datatype == XSD_INTEGER || lit.datatype == XSD_NON_NEGATIVE_INTEGER =>
            {
                let digits = lit.lexical.strip_prefix('+').unwrap_or(&lit.lexical);
                digits
                    .parse::<u64>()
                    .map(Some)
                    .map_err(|_| invalid(format!("`{}` is not a non-negative integer", lit.lexical)))
            }
            [other] => Err(invalid(format!("expected an integer literal, found {other}"))),
            _ => Err(invalid(String::from("more than one value"))),
        }
    }

    fn common_constraints(
        &self,
        node: &Term,
        depth: usize,
        out: &mut Vec<Constraint>,
    ) -> Result<(), ShapeParseError> {
        for class in self.iri_values(node, "class")? {
            out.push(Constraint::Class(class));
        }
        for kind in self.iri_values(node, "nodeKind")? {
            let kind = NodeKind::from_iri(&kind).ok_or_else(|| ShapeParseError::InvalidValue {
                shape: node.clone(),
                property: "nodeKind",
                reason: format!("unknown node kind <{kind}>"),
            })?;
            out.push(Constraint::NodeKind(kind));
        }
        for head in self.values(node, "or") {
            let members = extract_list(self.graph, &head).map_err(|source| ShapeParseError::List {
                shape: node.clone(),
                source,
            })?;
            if members.len() < 2 {
                return Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: "or",
                    reason: format!("needs at least 2 alternatives, found {}", members.len()),
                });
            }
            let alternatives = members
                .iter()
                .map(|m| self.node_shape(m, depth + 1))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(Constraint::Or(alternatives));
        }
        Ok(())
    }

    fn node_shape(&self, node: &Term, depth: usize) -> Result<NodeShape, ShapeParseError> {
        if depth > MAX_NESTING {
            return Err(ShapeParseError::TooDeep(node.clone()));
        }
        for local in ["path", "minCount", "qualifiedValueShape", "qualifiedMinCount"] {
            if !self.values(node, local).is_empty() {
                return Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: local,
                    reason: format!("sh:{local} is only supported on property shapes"),
                });
            }
        }
        let mut targets = Vec::new();
        for class in self.iri_values(node, "targetClass")? {
            targets.push(Target::Class(class));
        }
        for predicate in self.iri_values(node, "targetSubjectsOf")? {
            targets.push(Target::SubjectsOf(predicate));
        }
        let mut constraints = Vec::new();
        self.common_constraints(node, depth, &mut constraints)?;
        let property_shapes = self
            .values(node, "property")
            .iter()
            .map(|p| self.property_shape(p, depth + 1))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NodeShape {
            id: node.clone(),
            targets,
            constraints,
            property_shapes,
        })
    }

    fn property_shape(&self, node: &Term, depth: usize) -> Result<PropertyShape, ShapeParseError> {
        if depth > MAX_NESTING {
            return Err(ShapeParseError::TooDeep(node.clone()));
        }
        let path = match self.values(node, "path").as_slice() {
            [Term::Iri(iri)] => iri.clone(),
            [] => {
                return Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: "path",
                    reason: String::from("property shape without sh:path"),
                })
            }
            [_] => return Err(ShapeParseError::Unsupported(String::from("sh:path (non-IRI path)"))),
            _ => {
                return Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: "path",
                    reason: String::from("more than one sh:path"),
                })
            }
        };
        for local in ["targetClass", "targetSubjectsOf", "property"] {
            if !self.values(node, local).is_empty() {
                return Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: local,
                    reason: format!("sh:{local} on a property shape is not supported"),
                });
            }
        }
        let mut constraints = Vec::new();
        self.common_constraints(node, depth, &mut constraints)?;
        if let Some(n) = self.count_value(node, "minCount")? {
            constraints.push(Constraint::MinCount(n));
        }
        let qualified = self.values(node, "qualifiedValueShape");
        let qualified_min = self.count_value(node, "qualifiedMinCount")?;
        match (qualified.as_slice(), qualified_min) {
            ([], None) => {}
            ([shape], Some(min_count)) => constraints.push(Constraint::QualifiedValueShape {
                shape: Box::new(self.node_shape(shape, depth + 1)?),
                min_count,
            }),
            // a qualified shape without a count constrains nothing
            ([shape], None) => {
                self.node_shape(shape, depth + 1)?;
            }
            ([], Some(_)) => {
                return Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: "qualifiedMinCount",
                    reason: String::from("no sh:qualifiedValueShape"),
                })
            }
            _ => {
                return Err(ShapeParseError::InvalidValue {
                    shape: node.clone(),
                    property: "qualifiedValueShape",
                    reason: String::from("more than one value"),
                })
            }
        }
        Ok(PropertyShape {
            id: node.clone(),
            path,
            constraints,
        })
    }
}
