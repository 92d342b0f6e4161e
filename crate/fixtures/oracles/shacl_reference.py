"""Writes the SHACL equivalence corpus and freezes the verdicts of an
independent validator (pySHACL, inference disabled) into expected.json.

    python3 fixtures/oracles/shacl_reference.py
"""
import json
import pathlib

import pyshacl
import rdflib

ROOT = pathlib.Path(__file__).resolve().parents[2]
CORPUS = ROOT / "fixtures" / "shacl_corpus"
BUNDLED = {
    "observation": ROOT / "crates" / "core" / "shapes" / "observation.ttl",
    "action": ROOT / "crates" / "core" / "shapes" / "action.ttl",
}

P = """@prefix ex: <http://example.org/data/> .
@prefix obot: <https://w3id.org/onto-bot#> .
@prefix dul: <http://www.ontologydesignpatterns.org/ont/dul/DUL.owl#> .
@prefix soma: <http://www.ease-crc.org/ont/SOMA.owl#> .
@prefix geo: <http://www.opengis.net/ont/geosparql#> .
@prefix sh: <http://www.w3.org/ns/shacl#> .
"""

CUSTOM_SHAPES = {
    "node_kinds": P + """
ex:KindShape a sh:NodeShape ;
    sh:targetClass ex:Thing ;
    sh:property [ sh:path ex:iri ; sh:nodeKind sh:IRI ] ;
    sh:property [ sh:path ex:lit ; sh:nodeKind sh:Literal ] ;
    sh:property [ sh:path ex:blank ; sh:nodeKind sh:BlankNode ] ;
    sh:property [ sh:path ex:notLit ; sh:nodeKind sh:BlankNodeOrIRI ] ;
    sh:property [ sh:path ex:notIri ; sh:nodeKind sh:BlankNodeOrLiteral ] ;
    sh:property [ sh:path ex:notBlank ; sh:nodeKind sh:IRIOrLiteral ] .
""",
    "node_level": P + """
ex:SubjectShape a sh:NodeShape ;
    sh:targetSubjectsOf ex:owns ;
    sh:class ex:Owner ;
    sh:nodeKind sh:IRI .
ex:EitherShape a sh:NodeShape ;
    sh:targetClass ex:Item ;
    sh:or (
        [ sh:class ex:Red ]
        [ sh:property [ sh:path ex:colour ; sh:minCount 1 ] ]
    ) .
""",
    "counts": P + """
ex:CountShape a sh:NodeShape ;
    sh:targetClass ex:Box ;
    sh:property [ sh:path ex:holds ; sh:minCount 3 ] ;
    sh:property [ sh:path ex:label ; sh:minCount 0 ] ;
    sh:property [
        sh:path ex:holds ;
        sh:qualifiedValueShape [
            sh:class ex:Fruit ;
            sh:property [ sh:path ex:ripe ; sh:minCount 1 ]
        ] ;
        sh:qualifiedMinCount 2
    ] .
""",
}

CASES = [
    ("obs_empty", "observation", ""),
    ("obs_component_without_location", "observation", "ex:X a obot:Component ."),
    ("obs_component_ok", "observation", """
ex:C a obot:Component ; dul:hasLocation ex:K ; obot:hasAffordance ex:A .
ex:A a obot:Affordance ."""),
    ("obs_component_literal_location", "observation", """
ex:C a obot:Component ; dul:hasLocation "kitchen" ."""),
    ("obs_component_blank_location", "observation", """
ex:C a obot:Component ; dul:hasLocation [ a obot:Location ] ."""),
    ("obs_component_untyped_affordances", "observation", """
ex:C a obot:Component ; dul:hasLocation ex:K ; obot:hasAffordance soma:Opening, soma:Closing ."""),
    ("obs_component_typed_affordance", "observation", """
ex:C a obot:Component ; dul:hasLocation ex:K ; obot:hasAffordance ex:open1, ex:grasp1 .
ex:open1 a soma:Opening . ex:grasp1 a soma:Grasping ."""),
    ("obs_component_two_locations", "observation", """
ex:C a obot:Component ; dul:hasLocation ex:K, "shelf" ."""),
    ("obs_environment_without_component", "observation", "ex:K a obot:Environment ."),
    ("obs_environment_untyped_component", "observation", """
ex:K a obot:Environment ; dul:hasComponent ex:Thing ."""),
    ("obs_environment_mixed_components", "observation", """
ex:K a obot:Environment ; dul:hasComponent ex:T, ex:U, ex:Sub, ex:Oven .
ex:T a obot:Furniture . ex:Sub a obot:Environment ; dul:hasComponent ex:T . ex:Oven a obot:Appliance ."""),
    ("obs_location_ok", "observation", """
ex:L a obot:Location ; obot:onTopOf ex:T ; geo:sfContains ex:O ; geo:sfWithin ex:T ; geo:sfOverlaps ex:O .
ex:T a obot:Furniture . ex:O a obot:Object ."""),
    ("obs_location_bad_values", "observation", """
ex:L a obot:Location ; obot:onTopOf ex:Nothing ; geo:sfContains "jar" ; geo:sfWithin ex:O ; geo:sfOverlaps ex:E .
ex:O a obot:Object . ex:E a obot:Environment ; dul:hasComponent ex:O ."""),
    ("obs_multiply_typed", "observation", """
ex:N a obot:Component, obot:Location ; obot:onTopOf ex:Q ; obot:hasAffordance ex:Q ."""),
    ("act_empty", "action", ""),
    ("act_action_without_links", "action", "ex:A1 a dul:Action ."),
    ("act_action_ok", "action", """
ex:A1 a dul:Action ; obot:isAffordedBy soma:PickingUp ; obot:actsOn ex:Cup ; dul:precedes ex:A2 .
ex:A2 a dul:Action ; obot:isAffordedBy soma:PuttingDown ; obot:actsOn ex:Cup ; dul:follows ex:A1 ."""),
    ("act_precedes_untyped", "action", """
ex:A1 dul:precedes ex:A2 . ex:A2 a dul:Action ; obot:actsOn ex:Cup ."""),
    ("act_workflow_without_actions", "action", "ex:W a obot:Workflow ."),
    ("act_workflow_untyped_actions", "action", """
ex:W a obot:Workflow ; obot:hasAction ex:A1, ex:A2 ."""),
    ("act_workflow_one_typed_action", "action", """
ex:W a obot:Workflow ; obot:hasAction ex:A1, ex:A2 .
ex:A1 a dul:Action ; obot:isAffordedBy soma:Opening ; obot:actsOn ex:Door ."""),
    ("act_instruction_bad_workflow", "action", """
ex:I a obot:Instruction ; obot:hasWorkflow ex:W, ex:V ; obot:hasNaturalLanguage "tidy up" .
ex:V a obot:Workflow ; obot:hasAction ex:A .
ex:A a dul:Action ; obot:isAffordedBy soma:Holding ; obot:actsOn ex:Plate ."""),
    ("act_instruction_ok", "action", """
ex:I a obot:Instruction ; obot:hasNaturalLanguage "tidy up" ."""),
    ("custom_node_kinds", "node_kinds", """
ex:a a ex:Thing ; ex:iri ex:x, "no", [] ; ex:lit "yes", ex:no ; ex:blank [], ex:no ;
    ex:notLit ex:x, [], "no" ; ex:notIri "ok", [], ex:no ; ex:notBlank ex:x, "ok", [] ."""),
    ("custom_node_level", "node_level", """
ex:alice ex:owns ex:car . ex:alice a ex:Owner .
ex:bob ex:owns ex:bike .
_:anon ex:owns ex:boat .
ex:i1 a ex:Item, ex:Red .
ex:i2 a ex:Item ; ex:colour "blue" .
ex:i3 a ex:Item ."""),
    ("custom_counts", "counts", """
ex:b1 a ex:Box ; ex:holds ex:f1, ex:f2, ex:f3 .
ex:f1 a ex:Fruit ; ex:ripe true . ex:f2 a ex:Fruit ; ex:ripe false . ex:f3 a ex:Fruit .
ex:b2 a ex:Box ; ex:holds ex:f1 .
ex:b3 a ex:Box ; ex:holds ex:f3, ex:x, ex:y ."""),
]


def main():
    for name, text in CUSTOM_SHAPES.items():
        (CORPUS / "shapes" / f"{name}.ttl").write_text(text)
    expected = []
    for name, shapes, body in CASES:
        data_path = CORPUS / f"{name}.ttl"
        data_path.write_text(P + body.strip() + "\n" if body else "")
        shapes_path = BUNDLED.get(shapes, CORPUS / "shapes" / f"{shapes}.ttl")
        expected.append(run(name, data_path, shapes, shapes_path))
    for name, shapes, rel in [
        ("appendix_c_maverick_observation", "observation", "fixtures/appendix_c/maverick_i2kg_observation.ttl"),
        ("appendix_c_gpt_o1_action", "action", "fixtures/appendix_c/gpt-o1_i2kg_action.ttl"),
    ]:
        expected.append(run(name, ROOT / rel, shapes, BUNDLED[shapes], data=rel))
    (CORPUS / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    print(f"{len(expected)} cases")


def run(name, data_path, shapes, shapes_path, data=None):
    data_graph = rdflib.Graph().parse(data_path, format="turtle")
    shapes_graph = rdflib.Graph().parse(shapes_path, format="turtle")
    conforms, results, _ = pyshacl.validate(
        data_graph, shacl_graph=shapes_graph, inference="none", advanced=False
    )
    sh = rdflib.Namespace("http://www.w3.org/ns/shacl#")
    count = len(set(results.subjects(rdflib.RDF.type, sh.ValidationResult)))
    return {
        "name": name,
        "data": data or f"fixtures/shacl_corpus/{name}.ttl",
        "shapes": shapes,
        "triples": len(data_graph),
        "conforms": bool(conforms),
        "violations": count,
    }


if __name__ == "__main__":
    main()
