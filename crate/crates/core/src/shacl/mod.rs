//! SHACL validation for the constraint subset used by the bundled shapes:
//! `sh:targetClass`, `sh:targetSubjectsOf`, `sh:property` with an IRI
//! `sh:path`, `sh:class`, `sh:minCount`, `sh:nodeKind`, `sh:or`, and
//! `sh:qualifiedValueShape` with `sh:qualifiedMinCount`.

mod shapes;
mod validate;

pub use shapes::{
    parse_shapes, Constraint, NodeKind, NodeShape, PropertyShape, ShapeParseError, ShapesGraph,
    Target,
};
pub use validate::{
    validate, violation_ratio, ConstraintKind, EmptyGraphRatio, ValidationReport, Violation,
};

/// Shapes for observation graphs (environment, component, location).
pub const OBSERVATION_SHAPES: &str = include_str!("../../shapes/observation.ttl");
/// Shapes for action graphs (instruction, workflow, action).
pub const ACTION_SHAPES: &str = include_str!("../../shapes/action.ttl");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{parse_turtle, Term};
    use alloc::format;

    fn shapes(doc: &str) -> ShapesGraph {
        parse_shapes(&parse_turtle(doc).unwrap()).unwrap()
    }

    const PREFIXES: &str = "@prefix sh: <http://www.w3.org/ns/shacl#> .\n\
        @prefix ex: <http://example.org/> .\n\
        @prefix obot: <https://w3id.org/onto-bot#> .\n\
        @prefix dul: <http://www.ontologydesignpatterns.org/ont/dul/DUL.owl#> .\n";

    #[test]
    fn bundled_observation_shapes() {
        let s = shapes(OBSERVATION_SHAPES);
        assert_eq!(s.len(), 3);
        let ids: alloc::vec::Vec<_> = s.shapes.iter().map(|n| n.id.as_iri().unwrap()).collect();
        assert_eq!(
            ids,
            [
                "https://w3id.org/onto-bot#ComponentShape",
                "https://w3id.org/onto-bot#EnvironmentShape",
                "https://w3id.org/onto-bot#LocationShape",
            ]
        );
    }

    #[test]
    fn component_shape_or_has_ten_members() {
        let s = shapes(OBSERVATION_SHAPES);
        let component = &s.shapes[0];
        let affordance = component
            .property_shapes
            .iter()
            .find(|p| p.path == "https://w3id.org/onto-bot#hasAffordance")
            .unwrap();
        let Constraint::Or(alts) = &affordance.constraints[0] else {
            panic!("expected sh:or");
        };
        assert_eq!(alts.len(), 10);
        assert_eq!(alts[0].constraints, [Constraint::Class("https://w3id.org/onto-bot#Affordance".into())]);
    }

    #[test]
    fn bundled_action_shapes() {
        let s = shapes(ACTION_SHAPES);
        assert_eq!(s.len(), 3);
        let action = s
            .shapes
            .iter()
            .find(|n| n.id == Term::iri("https://w3id.org/onto-bot#ActionShape"))
            .unwrap();
        assert_eq!(action.or_alternatives().unwrap().len(), 4);
        assert_eq!(action.property_shapes.len(), 3);
    }

    #[test]
    fn empty_graph_has_no_shapes() {
        assert!(shapes("").is_empty());
    }

    #[test]
    fn unsupported_vocabulary_is_rejected() {
        let doc = format!("{PREFIXES}ex:S a sh:NodeShape ; sh:targetClass ex:C ; sh:property [ sh:path ex:p ; sh:pattern \"^a\" ] .");
        let err = parse_shapes(&parse_turtle(&doc).unwrap()).unwrap_err();
        assert_eq!(err, ShapeParseError::Unsupported("sh:pattern".into()));
        let doc = format!("{PREFIXES}ex:S a sh:NodeShape ; sh:targetClass ex:C ; sh:severity sh:Warning .");
        assert!(matches!(
            parse_shapes(&parse_turtle(&doc).unwrap()),
            Err(ShapeParseError::Unsupported(_))
        ));
    }

    #[test]
    fn malformed_counts_and_paths() {
        let bad_count = format!("{PREFIXES}ex:S a sh:NodeShape ; sh:property [ sh:path ex:p ; sh:minCount \"one\" ] .");
        assert!(matches!(
            parse_shapes(&parse_turtle(&bad_count).unwrap()),
            Err(ShapeParseError::InvalidValue { property: "minCount", .. })
        ));
        let no_path = format!("{PREFIXES}ex:S a sh:NodeShape ; sh:property [ sh:minCount 1 ] .");
        assert!(parse_shapes(&parse_turtle(&no_path).unwrap()).is_err());
        let complex_path = format!("{PREFIXES}ex:S a sh:NodeShape ; sh:property [ sh:path ( ex:p ex:q ) ] .");
        assert!(matches!(
            parse_shapes(&parse_turtle(&complex_path).unwrap()),
            Err(ShapeParseError::Unsupported(_))
        ));
        let single_or = format!("{PREFIXES}ex:S a sh:NodeShape ; sh:or ( [ sh:class ex:A ] ) .");
        assert!(parse_shapes(&parse_turtle(&single_or).unwrap()).is_err());
    }

    #[test]
    fn component_without_location() {
        let s = shapes(OBSERVATION_SHAPES);
        let data = parse_turtle(&format!("{PREFIXES}ex:X a obot:Component .")).unwrap();
        let report = validate(&data, &s);
        assert!(!report.conforms());
        assert_eq!(report.len(), 1);
        let v = &report.violations()[0];
        assert_eq!(v.constraint_kind, ConstraintKind::MinCount);
        assert_eq!(
            v.path.as_deref(),
            Some("http://www.ontologydesignpatterns.org/ont/dul/DUL.owl#hasLocation")
        );
    }

    #[test]
    fn empty_data_conforms() {
        let report = validate(&crate::rdf::Graph::new(), &shapes(OBSERVATION_SHAPES));
        assert!(report.conforms());
        let report = validate(&crate::rdf::Graph::new(), &shapes(ACTION_SHAPES));
        assert!(report.conforms());
    }

    #[test]
    fn vacuous_or_alternative_always_conforms() {
        let s = shapes(ACTION_SHAPES);
        // an action with neither precedes nor follows still satisfies the sh:or
        let data = parse_turtle(&format!(
            "{PREFIXES}ex:A a dul:Action ; <https://w3id.org/onto-bot#isAffordedBy> ex:x ; <https://w3id.org/onto-bot#actsOn> ex:y ."
        ))
        .unwrap();
        assert!(validate(&data, &s).conforms());
    }

    #[test]
    fn ratio() {
        let g = parse_turtle(&format!("{PREFIXES}ex:a ex:p ex:b .")).unwrap();
        let empty = ValidationReport::default();
        assert_eq!(violation_ratio(&empty, &g), Ok(0.0));
        assert_eq!(violation_ratio(&empty, &crate::rdf::Graph::new()), Err(EmptyGraphRatio));
    }
}
