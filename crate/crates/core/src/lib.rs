//! Knowledge-graph evaluation primitives: an RDF model with a Turtle reader and
//! writer, a SHACL validator for the core constraint subset, ontology
//! compliance and coverage metrics, and the Mann-Whitney U test.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod rdf;
pub mod shacl;
pub mod metrics;
pub mod stats;
