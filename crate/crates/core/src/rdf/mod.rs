//! RDF data model and Turtle syntax.

mod graph;
mod iso;
mod list;
mod term;
mod turtle;
pub mod vocab;

pub use graph::{Graph, Triple, TripleError};
pub use list::{extract_list, ListError, RdfList};
pub use term::{is_absolute_iri, local_name, Literal, Term};
pub use turtle::{compact_iri, parse_turtle, resolve_iri, serialize_turtle, ParseError, ParseErrorKind};
