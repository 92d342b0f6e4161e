use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Bound;

use thiserror::Error;

use super::term::{is_absolute_iri, Term};
use super::vocab::RDF_TYPE;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TripleError {
    #[error("literal in subject position")]
    LiteralSubject,
    #[error("predicate must be an IRI")]
    NonIriPredicate,
    #[error("IRI is not absolute: {0}")]
    RelativeIri(String),
}

/// A subject-predicate-object statement. Subjects are IRIs or blank nodes and
/// predicates are IRIs; both are checked on construction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    subject: Term,
    predicate: Term,
    object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, TripleError> {
        if subject.is_literal() {
            return Err(TripleError::LiteralSubject);
        }
        if !predicate.is_iri() {
            return Err(TripleError::NonIriPredicate);
        }
        for term in [&subject, &predicate, &object] {
            if let Term::Iri(iri) = term {
                if !is_absolute_iri(iri) {
                    return Err(TripleError::RelativeIri(iri.clone()));
                }
            }
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &Term {
        &self.predicate
    }

    /// The predicate IRI as a string slice.
    pub fn predicate_iri(&self) -> &str {
        match &self.predicate {
            Term::Iri(iri) => iri,
            _ => unreachable!("predicate is an IRI by construction"),
        }
    }

    pub fn object(&self) -> &Term {
        &self.object
    }

    pub fn into_parts(self) -> (Term, Term, Term) {
        (self.subject, self.predicate, self.object)
    }
}

/// A set of triples plus the prefix table it was written with.
///
/// Equality compares triple sets and ignores prefixes. Blank nodes compare by
/// label; use [`Graph::is_isomorphic`] to compare up to blank-node renaming.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    triples: BTreeSet<Triple>,
    prefixes: BTreeMap<String, String>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for Graph {}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple; returns false if it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        self.triples.insert(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn set_prefix(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.prefixes.insert(prefix.into(), namespace.into());
    }

    /// All triples with the given subject.
    pub fn triples_of<'a>(&'a self, subject: &'a Term) -> impl Iterator<Item = &'a Triple> + 'a {
        let lower = Triple {
            subject: subject.clone(),
            predicate: Term::min_value(),
            object: Term::min_value(),
        };
        self.triples
            .range((Bound::Included(lower), Bound::Unbounded))
            .take_while(move |t| &t.subject == subject)
    }

    /// Objects of `(subject, predicate, ?)`.
    pub fn objects<'a>(
        &'a self,
        subject: &'a Term,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a Term> + 'a {
        let lower = Triple {
            subject: subject.clone(),
            predicate: Term::Iri(String::from(predicate)),
            object: Term::min_value(),
        };
        self.triples
            .range((Bound::Included(lower), Bound::Unbounded))
            .take_while(move |t| &t.subject == subject && t.predicate_iri() == predicate)
            .map(|t| &t.object)
    }

    /// Subjects of `(?, predicate, object)`, deduplicated and ordered.
    pub fn subjects_with(&self, predicate: &str, object: &Term) -> BTreeSet<&Term> {
        self.triples
            .iter()
            .filter(|t| t.predicate_iri() == predicate && &t.object == object)
            .map(|t| &t.subject)
            .collect()
    }

    /// Distinct subjects having at least one `predicate` triple.
    pub fn subjects_of_predicate(&self, predicate: &str) -> BTreeSet<&Term> {
        self.triples
            .iter()
            .filter(|t| t.predicate_iri() == predicate)
            .map(|t| &t.subject)
            .collect()
    }

    /// Explicit `rdf:type` check; no subclass reasoning.
    pub fn has_type(&self, node: &Term, class: &str) -> bool {
        let lower = Triple {
            subject: node.clone(),
            predicate: Term::Iri(String::from(RDF_TYPE)),
            object: Term::Iri(String::from(class)),
        };
        self.triples.contains(&lower)
    }

    /// Instances of `class` by explicit `rdf:type`.
    pub fn instances_of(&self, class: &str) -> BTreeSet<&Term> {
        self.subjects_with(RDF_TYPE, &Term::Iri(String::from(class)))
    }

    /// True when both graphs are equal up to a bijective renaming of blank nodes.
    pub fn is_isomorphic(&self, other: &Graph) -> bool {
        super::iso::isomorphic(self, other)
    }
}

impl Extend<Triple> for Graph {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        self.triples.extend(iter)
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        Graph {
            triples: iter.into_iter().collect(),
            prefixes: BTreeMap::new(),
        }
    }
}

impl<'a> IntoIterator for &'a Graph {
    type Item = &'a Triple;
    type IntoIter = alloc::collections::btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

pub(crate) fn collect_blank_nodes(graph: &Graph) -> Vec<Term> {
    let mut seen = BTreeSet::new();
    for t in graph.iter() {
        if t.subject.is_blank() {
            seen.insert(t.subject.clone());
        }
        if t.object.is_blank() {
            seen.insert(t.object.clone());
        }
    }
    seen.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::term::Literal;

    fn iri(s: &str) -> Term {
        Term::iri(s)
    }

    #[test]
    fn triple_invariants() {
        let lit = Term::Literal(Literal::string("x"));
        assert_eq!(
            Triple::new(lit.clone(), iri("http://e/p"), iri("http://e/o")),
            Err(TripleError::LiteralSubject)
        );
        assert_eq!(
            Triple::new(iri("http://e/s"), Term::blank("b0"), iri("http://e/o")),
            Err(TripleError::NonIriPredicate)
        );
        assert!(matches!(
            Triple::new(iri("e:s"), iri("p"), lit),
            Err(TripleError::RelativeIri(_))
        ));
    }

    #[test]
    fn set_semantics() {
        let mut g = Graph::new();
        let t = Triple::new(iri("http://e/s"), iri("http://e/p"), iri("http://e/o")).unwrap();
        assert!(g.insert(t.clone()));
        assert!(!g.insert(t));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn object_lookup_is_exact() {
        let mut g = Graph::new();
        for (s, p, o) in [
            ("http://e/a", "http://e/p", "http://e/1"),
            ("http://e/a", "http://e/p", "http://e/2"),
            ("http://e/a", "http://e/q", "http://e/3"),
            ("http://e/ab", "http://e/p", "http://e/4"),
        ] {
            g.insert(Triple::new(iri(s), iri(p), iri(o)).unwrap());
        }
        let a = iri("http://e/a");
        let objs: Vec<_> = g.objects(&a, "http://e/p").collect();
        assert_eq!(objs, [&iri("http://e/1"), &iri("http://e/2")]);
        assert_eq!(g.triples_of(&a).count(), 3);
    }
}
