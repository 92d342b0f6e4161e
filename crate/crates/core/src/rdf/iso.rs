//! Graph isomorphism up to blank-node renaming: colour refinement followed by
//! a backtracking search inside colour classes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::graph::{collect_blank_nodes, Graph, Triple};
use super::term::Term;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Ground(Term),
    Colour(usize),
}

type Signature = (usize, Vec<(bool, String, Key)>);

struct Side<'g> {
    graph: &'g Graph,
    blanks: Vec<Term>,
    index: BTreeMap<Term, usize>,
    incident: Vec<Vec<&'g Triple>>,
}

impl<'g> Side<'g> {
    fn new(graph: &'g Graph) -> Self {
        let blanks = collect_blank_nodes(graph);
        let index: BTreeMap<Term, usize> =
            blanks.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let mut incident = vec![Vec::new(); blanks.len()];
        for t in graph.iter() {
            if let Some(&i) = index.get(t.subject()) {
                incident[i].push(t);
            }
            if let Some(&i) = index.get(t.object()) {
                if t.subject() != t.object() {
                    incident[i].push(t);
                }
            }
        }
        Side {
            graph,
            blanks,
            index,
            incident,
        }
    }

    fn signature(&self, node: usize, colours: &[usize]) -> Signature {
        let me = &self.blanks[node];
        let key = |term: &Term| match self.index.get(term) {
            Some(&j) => Key::Colour(colours[j]),
            None => Key::Ground(term.clone()),
        };
        let mut edges: Vec<(bool, String, Key)> = self.incident[node]
            .iter()
            .flat_map(|t| {
                let pred = String::from(t.predicate_iri());
                let mut out = Vec::with_capacity(2);
                if t.subject() == me {
                    out.push((true, pred.clone(), key(t.object())));
                }
                if t.object() == me {
                    out.push((false, pred, key(t.subject())));
                }
                out
            })
            .collect();
        edges.sort();
        (colours[node], edges)
    }

    fn ground_triples(&self) -> BTreeSet<&'g Triple> {
        self.graph
            .iter()
            .filter(|t| !t.subject().is_blank() && !t.object().is_blank())
            .collect()
    }
}

pub(crate) fn isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let left = Side::new(a);
    let right = Side::new(b);
    if left.blanks.len() != right.blanks.len() {
        return false;
    }
    if left.blanks.is_empty() {
        return a == b;
    }
    if left.ground_triples() != right.ground_triples() {
        return false;
    }

    let (colours_a, colours_b) = refine(&left, &right);
    let mut hist_a = colours_a.clone();
    let mut hist_b = colours_b.clone();
    hist_a.sort_unstable();
    hist_b.sort_unstable();
    if hist_a != hist_b {
        return false;
    }

    let mut class_size: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &colours_a {
        *class_size.entry(c).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..left.blanks.len()).collect();
    order.sort_by_key(|&i| (class_size[&colours_a[i]], colours_a[i], i));

    let mut search = Search {
        left: &left,
        right: &right,
        colours_a: &colours_a,
        colours_b: &colours_b,
        mapping: vec![None; left.blanks.len()],
        used: vec![false; right.blanks.len()],
    };
    search.assign(&order, 0)
}

fn refine(left: &Side<'_>, right: &Side<'_>) -> (Vec<usize>, Vec<usize>) {
    let mut ca = vec![0usize; left.blanks.len()];
    let mut cb = vec![0usize; right.blanks.len()];
    let mut distinct = 1usize;
    loop {
        let mut interner: BTreeMap<Signature, usize> = BTreeMap::new();
        let sig_a: Vec<Signature> = (0..ca.len()).map(|i| left.signature(i, &ca)).collect();
        let sig_b: Vec<Signature> = (0..cb.len()).map(|i| right.signature(i, &cb)).collect();
        for sig in sig_a.iter().chain(sig_b.iter()) {
            let next = interner.len();
            interner.entry(sig.clone()).or_insert(next);
        }
        let next_a: Vec<usize> = sig_a.iter().map(|s| interner[s]).collect();
        let next_b: Vec<usize> = sig_b.iter().map(|s| interner[s]).collect();
        let now = interner.len();
        ca = next_a;
        cb = next_b;
        if now == distinct {
            return (ca, cb);
        }
        distinct = now;
    }
}

struct Search<'s, 'g> {
    left: &'s Side<'g>,
    right: &'s Side<'g>,
    colours_a: &'s [usize],
    colours_b: &'s [usize],
    mapping: Vec<Option<usize>>,
    used: Vec<bool>,
}

impl Search<'_, '_> {
    fn assign(&mut self, order: &[usize], depth: usize) -> bool {
        let Some(&node) = order.get(depth) else {
            return true;
        };
        for candidate in 0..self.right.blanks.len() {
            if self.used[candidate] || self.colours_b[candidate] != self.colours_a[node] {
                continue;
            }
            self.mapping[node] = Some(candidate);
            self.used[candidate] = true;
            if self.consistent(node) && self.assign(order, depth + 1) {
                return true;
            }
            self.mapping[node] = None;
            self.used[candidate] = false;
        }
        false
    }

    /// Every triple touching `node` whose blank endpoints are all mapped must
    /// exist in the right-hand graph.
    fn consistent(&self, node: usize) -> bool {
        self.left.incident[node].iter().all(|t| {
            let map = |term: &Term| -> Option<Term> {
                match self.left.index.get(term) {
                    Some(&i) => self.mapping[i].map(|j| self.right.blanks[j].clone()),
                    None => Some(term.clone()),
                }
            };
            match (map(t.subject()), map(t.object())) {
                (Some(s), Some(o)) => Triple::new(s, t.predicate().clone(), o)
                    .map(|mapped| self.right.graph.contains(&mapped))
                    .unwrap_or(false),
                _ => true,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: Term, p: &str, o: Term) -> Triple {
        Triple::new(s, Term::iri(p), o).unwrap()
    }

    #[test]
    fn renamed_blanks_are_isomorphic() {
        let a: Graph = [
            t(Term::blank("x"), "http://e/p", Term::blank("y")),
            t(Term::blank("y"), "http://e/q", Term::iri("http://e/o")),
        ]
        .into_iter()
        .collect();
        let b: Graph = [
            t(Term::blank("m"), "http://e/p", Term::blank("n")),
            t(Term::blank("n"), "http://e/q", Term::iri("http://e/o")),
        ]
        .into_iter()
        .collect();
        assert!(a.is_isomorphic(&b));
        assert_ne!(a, b);
    }

    #[test]
    fn structure_matters() {
        let a: Graph = [
            t(Term::blank("x"), "http://e/p", Term::blank("y")),
            t(Term::blank("y"), "http://e/p", Term::blank("x")),
        ]
        .into_iter()
        .collect();
        let b: Graph = [
            t(Term::blank("x"), "http://e/p", Term::blank("y")),
            t(Term::blank("x"), "http://e/p", Term::blank("z")),
        ]
        .into_iter()
        .collect();
        assert!(!a.is_isomorphic(&b));
    }

    #[test]
    fn symmetric_structures_need_search() {
        // two disjoint 2-cycles versus one 4-cycle: refinement alone cannot tell
        let cyc = |labels: &[&str]| -> Vec<Triple> {
            (0..labels.len())
                .map(|i| {
                    t(
                        Term::blank(labels[i]),
                        "http://e/p",
                        Term::blank(labels[(i + 1) % labels.len()]),
                    )
                })
                .collect()
        };
        let mut two: Vec<Triple> = cyc(&["a", "b"]);
        two.extend(cyc(&["c", "d"]));
        let a: Graph = two.into_iter().collect();
        let b: Graph = cyc(&["w", "x", "y", "z"]).into_iter().collect();
        assert!(!a.is_isomorphic(&b));
        let c: Graph = {
            let mut v = cyc(&["q", "r"]);
            v.extend(cyc(&["s", "u"]));
            v.into_iter().collect()
        };
        assert!(a.is_isomorphic(&c));
    }
}
