//! Dynamic path extraction: the model lists `subject | relation | object`
//! paths, and relations are mapped onto ontology properties by exact local
//! name. Anything that does not map is dropped and counted.

use std::collections::BTreeMap;

use kgbench_core::metrics::OntologyTermSets;
use kgbench_core::rdf::vocab::{OWL_ANNOTATION_PROPERTY, OWL_DATATYPE_PROPERTY, RDF_TYPE};
use kgbench_core::rdf::{local_name, Graph, Literal, Term, Triple};
use serde::{Deserialize, Serialize};

pub const DATA_NS: &str = "http://example.org/data/";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextPath {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl TextPath {
    pub fn new(subject: &str, relation: &str, object: &str) -> Self {
        TextPath {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpeStats {
    pub paths: usize,
    pub mapped: usize,
    pub dropped_relations: usize,
    pub dropped_classes: usize,
    pub unparsed_lines: usize,
}

fn clean(s: &str) -> &str {
    s.trim().trim_matches(|c| c == '`' || c == '*').trim()
}

/// Parses one path per line. Accepts `s | r | o`, optionally bulleted or
/// numbered, and the tuple form `(s, r, o)`.
pub fn parse_paths(text: &str) -> (Vec<TextPath>, usize) {
    let mut paths = Vec::new();
    let mut unparsed = 0;
    for line in text.lines() {
        let mut line = line.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        line = line.trim_start_matches(['-', '*', '•']).trim_start();
        if let Some(dot) = line.find(". ") {
            if line[..dot].chars().all(|c| c.is_ascii_digit()) && dot > 0 {
                line = &line[dot + 2..];
            }
        }
        let fields: Vec<&str> = if line.contains('|') {
            line.split('|').collect()
        } else if line.starts_with('(') && line.ends_with(')') {
            line[1..line.len() - 1].splitn(3, ',').collect()
        } else {
            Vec::new()
        };
        match fields.as_slice() {
            [s, r, o] if ![s, r, o].iter().any(|f| clean(f).is_empty()) => {
                paths.push(TextPath::new(clean(s), clean(r), clean(o)));
            }
            _ => unparsed += 1,
        }
    }
    (paths, unparsed)
}

/// Local-name lookup over the ontology census. When two namespaces share a
/// local name the lexicographically smallest IRI wins.
#[derive(Clone, Debug, Default)]
pub struct TermMap {
    properties: BTreeMap<String, String>,
    classes: BTreeMap<String, String>,
    literal_valued: Vec<String>,
}

impl TermMap {
    pub fn new(terms: &OntologyTermSets, ontology: &Graph) -> Self {
        let index = |set: &std::collections::BTreeSet<String>| {
            let mut map = BTreeMap::new();
            for iri in set {
                map.entry(local_name(iri).to_string()).or_insert_with(|| iri.clone());
            }
            map
        };
        let mut literal_valued: Vec<String> = [OWL_DATATYPE_PROPERTY, OWL_ANNOTATION_PROPERTY]
            .iter()
            .flat_map(|c| ontology.instances_of(c))
            .filter_map(|t| t.as_iri().map(str::to_string))
            .collect();
        literal_valued.sort();
        TermMap {
            properties: index(&terms.properties),
            classes: index(&terms.classes),
            literal_valued,
        }
    }

    pub fn property(&self, name: &str) -> Option<&str> {
        self.properties.get(name).map(String::as_str)
    }

    pub fn class(&self, name: &str) -> Option<&str> {
        self.classes.get(name).map(String::as_str)
    }

    fn is_literal_valued(&self, iri: &str) -> bool {
        self.literal_valued.binary_search_by(|p| p.as_str().cmp(iri)).is_ok()
    }
}

/// Turns free text into an IRI under [`DATA_NS`].
pub fn entity_iri(name: &str) -> String {
    let mut local = String::new();
    for word in name.split(|c: char| !c.is_alphanumeric() && c != '_' && c != '-') {
        if word.is_empty() {
            continue;
        }
        if !local.is_empty() {
            local.push('_');
        }
        local.push_str(word);
    }
    if local.is_empty() {
        local.push_str("entity");
    }
    format!("{DATA_NS}{local}")
}

fn strip_prefix_name(s: &str) -> &str {
    // "obot:Kitchen" and "<...#Kitchen>" both reduce to the local name
    let s = s.trim_start_matches('<').trim_end_matches('>');
    local_name(s)
}

/// Assembles mapped paths into a graph that carries the ontology's prefixes
/// plus `ex:` for extracted entities.
pub fn assemble_graph(paths: &[TextPath], map: &TermMap, prefixes: &BTreeMap<String, String>) -> (Graph, DpeStats) {
    let mut graph = Graph::new();
    for (p, ns) in prefixes {
        graph.set_prefix(p.clone(), ns.clone());
    }
    graph.set_prefix("ex", DATA_NS);
    let mut stats = DpeStats {
        paths: paths.len(),
        ..DpeStats::default()
    };
    for path in paths {
        let subject = Term::iri(entity_iri(&path.subject));
        let relation = strip_prefix_name(&path.relation);
        let triple = if matches!(relation, "type" | "a") {
            match map.class(strip_prefix_name(&path.object)) {
                Some(class) => Triple::new(subject, Term::iri(RDF_TYPE), Term::iri(class)),
                None => {
                    stats.dropped_classes += 1;
                    continue;
                }
            }
        } else {
            match map.property(relation) {
                Some(property) => {
                    let quoted = path.object.len() >= 2 && path.object.starts_with('"') && path.object.ends_with('"');
                    let object = if quoted {
                        Term::Literal(Literal::string(&path.object[1..path.object.len() - 1]))
                    } else if map.is_literal_valued(property) {
                        Term::Literal(Literal::string(path.object.as_str()))
                    } else {
                        Term::iri(entity_iri(&path.object))
                    };
                    Triple::new(subject, Term::iri(property), object)
                }
                None => {
                    stats.dropped_relations += 1;
                    continue;
                }
            }
        };
        graph.insert(triple.expect("mapped terms form a valid triple"));
        stats.mapped += 1;
    }
    (graph, stats)
}
