use std::collections::BTreeSet;
use std::path::PathBuf;

use kgbench_core::metrics::{
    aggregate, compliance, coverage, extract_ontology_terms, term_usage, Measure, MetricRecord,
    OntologyTermSets,
};
use kgbench_core::rdf::{parse_turtle, Graph, Term, Triple};
use kgbench_core::shacl::{parse_shapes, validate, OBSERVATION_SHAPES};
use proptest::prelude::*;

const OBOT: &str = "https://w3id.org/onto-bot#";
const DUL: &str = "http://www.ontologydesignpatterns.org/ont/dul/DUL.owl#";
const SOMA: &str = "http://www.ease-crc.org/ont/SOMA.owl#";
const GEO: &str = "http://www.opengis.net/ont/geosparql#";

fn read(rel: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel);
    std::fs::read_to_string(path).unwrap()
}

fn ontology() -> OntologyTermSets {
    extract_ontology_terms(&parse_turtle(&read("bundle/ontology/ontobot_excerpt.ttl")).unwrap())
        .unwrap()
}

fn maverick() -> Graph {
    parse_turtle(&read("appendix_c/maverick_i2kg_observation.ttl")).unwrap()
}

fn iris(ns: &str, names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|n| format!("{ns}{n}")).collect()
}

#[test]
fn ontology_census() {
    // declarations listed by hand from the excerpt file
    let terms = ontology();
    let mut classes = iris(
        OBOT,
        &[
            "Environment", "Component", "Appliance", "Furniture", "Object", "Location",
            "Affordance", "Instruction", "Workflow",
        ],
    );
    classes.extend(iris(SOMA, &["Opening", "Closing", "Holding", "PickingUp", "PuttingDown"]));
    classes.extend(iris(DUL, &["Action", "Agent"]));
    assert_eq!(terms.classes, classes);

    let mut properties = iris(
        OBOT,
        &[
            "hasAffordance", "onTopOf", "hasNaturalLanguage", "hasWorkflow", "hasAction",
            "actsOn", "isAffordedBy",
        ],
    );
    properties.extend(iris(DUL, &["hasComponent", "hasLocation", "precedes", "follows"]));
    properties.extend(iris(GEO, &["sfContains", "sfWithin"]));
    properties.extend(iris(SOMA, &["isPerformedBy"]));
    assert_eq!(terms.properties, properties);
}

#[test]
fn maverick_usage() {
    let usage = term_usage(&maverick());
    assert_eq!(
        usage.used_classes,
        iris(OBOT, &["Environment", "Component", "Object", "Appliance", "Furniture"])
    );
    let mut props = iris(DUL, &["hasComponent", "hasLocation"]);
    props.extend(iris(OBOT, &["hasAffordance", "onTopOf"]));
    props.extend(iris(GEO, &["sfContains"]));
    assert_eq!(usage.used_properties, props);
}

#[test]
fn maverick_ratios_match_hand_count() {
    let terms = ontology();
    let usage = term_usage(&maverick());
    // 5 of 5 classes and 5 of 5 properties are declared; the ontology has 16 and 14
    let c = compliance(&usage, &terms);
    assert_eq!((c.class, c.property, c.avg), (Measure::Value(1.0), Measure::Value(1.0), Measure::Value(1.0)));
    let v = coverage(&usage, &terms);
    assert_eq!(v.class, Measure::Value(5.0 / 16.0));
    assert_eq!(v.property, Measure::Value(5.0 / 14.0));
    assert_eq!(v.avg, Measure::Value((5.0 / 16.0 + 5.0 / 14.0) / 2.0));
}

#[test]
fn gpt_o1_ratios_match_hand_count() {
    let terms = ontology();
    let g = parse_turtle(&read("appendix_c/gpt-o1_i2kg_action.ttl")).unwrap();
    let usage = term_usage(&g);
    // obot:precedes and obot:follows are not declared (the ontology has the dul: pair)
    let c = compliance(&usage, &terms);
    assert_eq!((c.class, c.property, c.avg), (Measure::Value(1.0), Measure::Value(0.75), Measure::Value(0.875)));
    let v = coverage(&usage, &terms);
    assert_eq!((v.class, v.property), (Measure::Value(7.0 / 16.0), Measure::Value(6.0 / 14.0)));
}

#[test]
fn maverick_record() {
    let g = maverick();
    let shapes = parse_shapes(&parse_turtle(OBSERVATION_SHAPES).unwrap()).unwrap();
    let report = validate(&g, &shapes);
    let record = MetricRecord::evaluate(&g, &ontology(), Some(&report));
    assert!(record.rdf_valid);
    assert_eq!(record.triple_count, 57);
    // pyshacl reports 4 violations on this graph
    assert_eq!(record.shacl_violations, Some(4));
    assert_eq!(record.shacl_violation_ratio, Measure::Value(4.0 / 57.0));
}

fn doubled(g: &Graph) -> Graph {
    let mut out = g.clone();
    out.extend(g.iter().cloned());
    out
}

proptest! {
    #[test]
    fn duplication_is_invisible(picks in prop::collection::vec(any::<prop::sample::Index>(), 1..57)) {
        let full: Vec<Triple> = maverick().iter().cloned().collect();
        let sub: Graph = picks.iter().map(|i| full[i.index(full.len())].clone()).collect();
        let terms = ontology();
        let base = (compliance(&term_usage(&sub), &terms), coverage(&term_usage(&sub), &terms));
        let twice = doubled(&sub);
        let text = kgbench_core::rdf::serialize_turtle(&sub);
        let reparsed = parse_turtle(&format!("{text}\n{text}")).unwrap();
        for g in [&twice, &reparsed] {
            let usage = term_usage(g);
            prop_assert_eq!((compliance(&usage, &terms), coverage(&usage, &terms)), base);
        }
    }

    #[test]
    fn compliant_property_never_hurts(picks in prop::collection::vec(any::<prop::sample::Index>(), 0..57), fresh in any::<prop::sample::Index>()) {
        let full: Vec<Triple> = maverick().iter().cloned().collect();
        let sub: Graph = picks.iter().map(|i| full[i.index(full.len())].clone()).collect();
        let terms = ontology();
        let unused: Vec<&String> = terms.properties.iter()
            .filter(|p| !term_usage(&sub).used_properties.contains(*p))
            .collect();
        let property = unused[fresh.index(unused.len())].clone();
        let mut grown = sub.clone();
        grown.insert(Triple::new(Term::iri("http://example.org/data/s"), Term::iri(property), Term::iri("http://example.org/data/o")).unwrap());
        let before = (compliance(&term_usage(&sub), &terms), coverage(&term_usage(&sub), &terms));
        let after = (compliance(&term_usage(&grown), &terms), coverage(&term_usage(&grown), &terms));
        if let (Some(b), Some(a)) = (before.0.property.value(), after.0.property.value()) {
            prop_assert!(a >= b);
        }
        prop_assert!(after.0.property.value().is_some());
        prop_assert!(after.1.property.value().unwrap() > before.1.property.value().unwrap());
    }

    #[test]
    fn aggregate_ignores_order(
        (values, shuffled) in prop::collection::vec(0.0f64..=1.0, 1..20)
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
    ) {
        let record = |v: &f64| {
            let mut r = MetricRecord::evaluate(&maverick(), &ontology(), None);
            r.compliance.avg = Measure::Value(*v);
            r
        };
        let a: Vec<MetricRecord> = values.iter().map(record).collect();
        let b: Vec<MetricRecord> = shuffled.iter().map(record).collect();
        prop_assert_eq!(aggregate(&a), aggregate(&b));
    }
}
