use std::path::PathBuf;
use std::time::Instant;

use kgbench_core::rdf::vocab::RDF_TYPE;
use kgbench_core::rdf::{parse_turtle, serialize_turtle, Graph, Literal, Term, Triple};
use proptest::prelude::*;

const OBOT: &str = "https://w3id.org/onto-bot#";
const DUL: &str = "http://www.ontologydesignpatterns.org/ont/dul/DUL.owl#";

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/appendix_c")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn maverick_listing() {
    let started = Instant::now();
    let g = parse_turtle(&fixture("maverick_i2kg_observation.ttl")).unwrap();
    assert!(started.elapsed().as_secs_f64() < 1.0);
    // rdflib 7.6 on the same text
    assert_eq!(g.len(), 57);
    let kitchen = Term::iri("http://example.org/data/Kitchen");
    assert!(g.has_type(&kitchen, &format!("{OBOT}Environment")));
    let hc = format!("{DUL}hasComponent");
    assert_eq!(g.objects(&kitchen, &hc).count(), 7);
}

#[test]
fn gpt_o1_listing() {
    let g = parse_turtle(&fixture("gpt-o1_i2kg_action.ttl")).unwrap();
    assert_eq!(g.len(), 108);
    let instruction = Term::iri("http://example.org/kb#Instruction_1");
    let nl = format!("{OBOT}hasNaturalLanguage");
    let text: Vec<&Term> = g.objects(&instruction, &nl).collect();
    let Term::Literal(lit) = text[0] else { panic!("expected a literal") };
    assert!(lit.lexical.starts_with("Restore the kitchen to an organized state"));
    let workflow = Term::iri("http://example.org/kb#Workflow_1");
    let has_action = format!("{OBOT}hasAction");
    assert_eq!(g.objects(&workflow, &has_action).count(), 14);
}

#[test]
fn parsing_is_deterministic() {
    let text = fixture("gpt-o1_i2kg_action.ttl");
    let a = parse_turtle(&text).unwrap();
    let b = parse_turtle(&text).unwrap();
    assert_eq!(a, b);
    assert_eq!(serialize_turtle(&a), serialize_turtle(&b));
}

#[test]
fn listings_round_trip() {
    for name in ["maverick_i2kg_observation.ttl", "gpt-o1_i2kg_action.ttl"] {
        let g = parse_turtle(&fixture(name)).unwrap();
        let again = parse_turtle(&serialize_turtle(&g)).unwrap();
        assert!(g.is_isomorphic(&again), "{name}");
        assert_eq!(g.prefixes(), again.prefixes());
    }
}

#[test]
fn duplicated_text_is_the_same_set() {
    let text = fixture("maverick_i2kg_observation.ttl");
    let doubled = format!("{text}\n{text}");
    assert_eq!(parse_turtle(&doubled).unwrap(), parse_turtle(&text).unwrap());
}

fn term_strategy(blank_ok: bool) -> BoxedStrategy<Term> {
    let iri = (0u8..6).prop_map(|i| Term::iri(format!("http://example.org/n{i}")));
    let blank = (0u8..4).prop_map(|i| Term::blank(format!("x{i}")));
    if blank_ok {
        prop_oneof![3 => iri, 1 => blank].boxed()
    } else {
        iri.boxed()
    }
}

fn literal_strategy() -> impl Strategy<Value = Term> {
    prop_oneof![
        "[a-z \"\\\\\n]{0,8}".prop_map(|s| Term::Literal(Literal::string(s))),
        (-50i64..50).prop_map(|n| Term::Literal(Literal::typed(
            n.to_string(),
            "http://www.w3.org/2001/XMLSchema#integer"
        ))),
        "[a-z]{1,5}".prop_map(|s| Term::Literal(Literal::lang(s, "en"))),
    ]
}

fn triple_strategy() -> impl Strategy<Value = Triple> {
    let predicate = prop_oneof![
        (0u8..4).prop_map(|i| Term::iri(format!("http://example.org/p{i}"))),
        Just(Term::iri(RDF_TYPE)),
    ];
    let object = prop_oneof![2 => term_strategy(true), 1 => literal_strategy()];
    (term_strategy(true), predicate, object)
        .prop_map(|(s, p, o)| Triple::new(s, p, o).expect("well-formed by construction"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_graphs_round_trip(triples in prop::collection::vec(triple_strategy(), 50)) {
        let mut g: Graph = triples.into_iter().collect();
        g.set_prefix("ex", "http://example.org/");
        let text = serialize_turtle(&g);
        let back = parse_turtle(&text).unwrap();
        prop_assert!(g.is_isomorphic(&back), "{}", text);
    }
}
