use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use super::graph::Graph;
use super::term::Term;
use super::vocab::{RDF_FIRST, RDF_NIL, RDF_REST};

/// Members of an `rdf:first` / `rdf:rest` chain, in order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RdfList(pub Vec<Term>);

impl RdfList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Term> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ListError {
    #[error("list cell {0} is revisited (cycle)")]
    Cycle(Term),
    #[error("list cell {0} has no rdf:first")]
    MissingFirst(Term),
    #[error("list cell {0} has no rdf:rest")]
    MissingRest(Term),
    #[error("list cell {0} has several rdf:first or rdf:rest values")]
    Branching(Term),
    #[error("list head {0} is a literal")]
    LiteralCell(Term),
}

/// Walks the collection rooted at `head` until `rdf:nil`.
pub fn extract_list(graph: &Graph, head: &Term) -> Result<RdfList, ListError> {
    let nil = Term::iri(RDF_NIL);
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    let mut cell = head.clone();
    while cell != nil {
        if cell.is_literal() {
            return Err(ListError::LiteralCell(cell));
        }
        if !seen.insert(cell.clone()) {
            return Err(ListError::Cycle(cell));
        }
        let first = single(graph.objects(&cell, RDF_FIRST), &cell, ListError::MissingFirst)?;
        let rest = single(graph.objects(&cell, RDF_REST), &cell, ListError::MissingRest)?;
        items.push(first);
        cell = rest;
    }
    Ok(RdfList(items))
}

fn single<'a>(
    mut values: impl Iterator<Item = &'a Term>,
    cell: &Term,
    missing: fn(Term) -> ListError,
) -> Result<Term, ListError> {
    let first = values.next().ok_or_else(|| missing(cell.clone()))?;
    if values.next().is_some() {
        return Err(ListError::Branching(cell.clone()));
    }
    Ok(first.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::graph::Triple;
    use crate::rdf::turtle::parse_turtle;

    #[test]
    fn nil_is_empty() {
        let g = Graph::new();
        assert!(extract_list(&g, &Term::iri(RDF_NIL)).unwrap().is_empty());
    }

    #[test]
    fn parsed_collection() {
        let g = parse_turtle("<http://e/s> <http://e/p> ( <http://e/a> <http://e/b> \"c\" ) .").unwrap();
        let head = g.objects(&Term::iri("http://e/s"), "http://e/p").next().unwrap().clone();
        let list = extract_list(&g, &head).unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list.0[1], Term::iri("http://e/b"));
    }

    #[test]
    fn cycle_is_an_error() {
        let mut g = Graph::new();
        let (a, b) = (Term::blank("a"), Term::blank("b"));
        for (s, p, o) in [
            (&a, RDF_FIRST, Term::iri("http://e/1")),
            (&a, RDF_REST, b.clone()),
            (&b, RDF_FIRST, Term::iri("http://e/2")),
            (&b, RDF_REST, a.clone()),
        ] {
            g.insert(Triple::new(s.clone(), Term::iri(p), o).unwrap());
        }
        assert!(matches!(extract_list(&g, &a), Err(ListError::Cycle(_))));
    }

    #[test]
    fn missing_rest() {
        let mut g = Graph::new();
        let a = Term::blank("a");
        g.insert(Triple::new(a.clone(), Term::iri(RDF_FIRST), Term::iri("http://e/1")).unwrap());
        assert_eq!(extract_list(&g, &a), Err(ListError::MissingRest(a)));
    }
}
