//! Ontology compliance and coverage of generated graphs, and their
//! aggregation over repeated runs.
//!
//! Classes used by a graph are the IRI objects of `rdf:type` triples;
//! properties used are its distinct predicates other than `rdf:type`. Both
//! are compared as sets, so repeated triples never move a ratio.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::vocab::{
    OWL_ANNOTATION_PROPERTY, OWL_CLASS, OWL_DATATYPE_PROPERTY, OWL_OBJECT_PROPERTY, RDFS_CLASS,
    RDFS_DOMAIN, RDFS_RANGE, RDF_PROPERTY, RDF_TYPE,
};
use crate::rdf::{Graph, Term};
use crate::shacl::{violation_ratio, ValidationReport};

/// Why a metric has no value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NaReason {
    /// The output was not valid Turtle.
    InvalidRdf,
    /// The ratio's denominator is zero.
    ZeroDenominator,
    /// The graph uses no ontology class or property, so structural
    /// validation against ontology shapes says nothing about it.
    NoOntologyTerms,
    /// No shapes applied to the graph.
    NoShapes,
}

impl NaReason {
    pub fn as_str(self) -> &'static str {
        match self {
            NaReason::InvalidRdf => "invalid-rdf",
            NaReason::ZeroDenominator => "zero-denominator",
            NaReason::NoOntologyTerms => "no-ontology-terms",
            NaReason::NoShapes => "no-shapes",
        }
    }
}

/// A metric value, or the reason it could not be computed. Distinct from 0.0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measure {
    Value(f64),
    NotComputable { not_computable: NaReason },
}

impl Measure {
    pub fn na(reason: NaReason) -> Self {
        Measure::NotComputable {
            not_computable: reason,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Measure::Value(v) => Some(v),
            Measure::NotComputable { .. } => None,
        }
    }

    pub fn reason(self) -> Option<NaReason> {
        match self {
            Measure::Value(_) => None,
            Measure::NotComputable { not_computable } => Some(not_computable),
        }
    }

    pub fn is_computable(self) -> bool {
        matches!(self, Measure::Value(_))
    }

    fn ratio(numerator: usize, denominator: usize) -> Self {
        if denominator == 0 {
            Measure::na(NaReason::ZeroDenominator)
        } else {
            Measure::Value(numerator as f64 / denominator as f64)
        }
    }
}

/// `NA:<reason>` for missing values, the shortest round-trip decimal otherwise.
impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Value(v) => write!(f, "{v}"),
            Measure::NotComputable { not_computable } => write!(f, "NA:{}", not_computable.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot read metric value `{0}`")]
pub struct MeasureParseError(pub String);

impl FromStr for Measure {
    type Err = MeasureParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(reason) = s.strip_prefix("NA:") {
            let reason = match reason {
                "invalid-rdf" => NaReason::InvalidRdf,
                "zero-denominator" => NaReason::ZeroDenominator,
                "no-ontology-terms" => NaReason::NoOntologyTerms,
                "no-shapes" => NaReason::NoShapes,
                _ => return Err(MeasureParseError(String::from(s))),
            };
            return Ok(Measure::na(reason));
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Measure::Value)
            .ok_or_else(|| MeasureParseError(String::from(s)))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OntologyTermSets {
    pub classes: BTreeSet<String>,
    pub properties: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermSetError {
    #[error("ontology declares no classes")]
    NoClasses,
    #[error("ontology declares no properties")]
    NoProperties,
}

/// Collects the ontology's declared classes and properties.
///
/// Classes are IRIs typed `owl:Class` or `rdfs:Class`, plus IRIs used as the
/// `rdfs:domain` or `rdfs:range` of a declared property. Properties are IRIs
/// typed `owl:ObjectProperty`, `owl:DatatypeProperty`,
/// `owl:AnnotationProperty` or `rdf:Property`. Imported terms count whenever
/// the document declares or references them in those positions.
pub fn extract_ontology_terms(ontology: &Graph) -> Result<OntologyTermSets, TermSetError> {
    let typed = |class: &str| -> BTreeSet<String> {
        ontology
            .instances_of(class)
            .into_iter()
            .filter_map(|t| t.as_iri().map(String::from))
            .collect()
    };
    let mut classes = typed(OWL_CLASS);
    classes.extend(typed(RDFS_CLASS));
    let mut properties = BTreeSet::new();
    for kind in [
        OWL_OBJECT_PROPERTY,
        OWL_DATATYPE_PROPERTY,
        OWL_ANNOTATION_PROPERTY,
        RDF_PROPERTY,
    ] {
        properties.extend(typed(kind));
    }
    for property in &properties {
        let subject = Term::iri(property.clone());
        for predicate in [RDFS_DOMAIN, RDFS_RANGE] {
            classes.extend(
                ontology
                    .objects(&subject, predicate)
                    .filter_map(|o| o.as_iri().map(String::from)),
            );
        }
    }
    if classes.is_empty() {
        return Err(TermSetError::NoClasses);
    }
    if properties.is_empty() {
        return Err(TermSetError::NoProperties);
    }
    Ok(OntologyTermSets {
        classes,
        properties,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GraphTermUsage {
    pub used_classes: BTreeSet<String>,
    pub used_properties: BTreeSet<String>,
}

impl GraphTermUsage {
    pub fn is_empty(&self) -> bool {
        self.used_classes.is_empty() && self.used_properties.is_empty()
    }

    /// True when at least one used class or property belongs to the ontology.
    pub fn touches(&self, terms: &OntologyTermSets) -> bool {
        self.used_classes.intersection(&terms.classes).next().is_some()
            || self.used_properties.intersection(&terms.properties).next().is_some()
    }
}

pub fn term_usage(graph: &Graph) -> GraphTermUsage {
    let mut usage = GraphTermUsage::default();
    for t in graph.iter() {
        if t.predicate_iri() == RDF_TYPE {
            if let Some(class) = t.object().as_iri() {
                usage.used_classes.insert(String::from(class));
            }
        } else {
            usage.used_properties.insert(String::from(t.predicate_iri()));
        }
    }
    usage
}

/// Class, property and averaged ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioTriple {
    pub class: Measure,
    pub property: Measure,
    pub avg: Measure,
}

impl RatioTriple {
    fn new(class: Measure, property: Measure) -> Self {
        let avg = match (class.value(), property.value()) {
            (Some(c), Some(p)) => Measure::Value((c + p) / 2.0),
            (Some(v), None) | (None, Some(v)) => Measure::Value(v),
            (None, None) => class,
        };
        RatioTriple {
            class,
            property,
            avg,
        }
    }

    fn invalid() -> Self {
        let na = Measure::na(NaReason::InvalidRdf);
        RatioTriple {
            class: na,
            property: na,
            avg: na,
        }
    }
}

/// Share of the graph's distinct classes and properties that the ontology defines.
pub fn compliance(usage: &GraphTermUsage, terms: &OntologyTermSets) -> RatioTriple {
    let classes = usage.used_classes.intersection(&terms.classes).count();
    let properties = usage.used_properties.intersection(&terms.properties).count();
    RatioTriple::new(
        Measure::ratio(classes, usage.used_classes.len()),
        Measure::ratio(properties, usage.used_properties.len()),
    )
}

/// Share of the ontology's classes and properties used at least once.
pub fn coverage(usage: &GraphTermUsage, terms: &OntologyTermSets) -> RatioTriple {
    let classes = usage.used_classes.intersection(&terms.classes).count();
    let properties = usage.used_properties.intersection(&terms.properties).count();
    RatioTriple::new(
        Measure::ratio(classes, terms.classes.len()),
        Measure::ratio(properties, terms.properties.len()),
    )
}

/// The metric vector of one generated graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub rdf_valid: bool,
    pub triple_count: usize,
    pub compliance: RatioTriple,
    pub coverage: RatioTriple,
    pub shacl_violations: Option<usize>,
    pub shacl_violation_ratio: Measure,
}

impl MetricRecord {
    /// Record for output that failed to parse.
    pub fn invalid() -> Self {
        MetricRecord {
            rdf_valid: false,
            triple_count: 0,
            compliance: RatioTriple::invalid(),
            coverage: RatioTriple::invalid(),
            shacl_violations: None,
            shacl_violation_ratio: Measure::na(NaReason::InvalidRdf),
        }
    }

    /// Metrics of a parsed graph. `report` is its SHACL validation against
    /// the shapes for its graph kind, if any apply.
    pub fn evaluate(
        graph: &Graph,
        terms: &OntologyTermSets,
        report: Option<&ValidationReport>,
    ) -> Self {
        let usage = term_usage(graph);
        let shacl_violation_ratio = match report {
            None => Measure::na(NaReason::NoShapes),
            Some(_) if graph.is_empty() => Measure::na(NaReason::ZeroDenominator),
            Some(_) if !usage.touches(terms) => Measure::na(NaReason::NoOntologyTerms),
            Some(report) => violation_ratio(report, graph)
                .map(Measure::Value)
                .unwrap_or(Measure::na(NaReason::ZeroDenominator)),
        };
        MetricRecord {
            rdf_valid: true,
            triple_count: graph.len(),
            compliance: compliance(&usage, terms),
            coverage: coverage(&usage, terms),
            shacl_violations: report.map(ValidationReport::len),
            shacl_violation_ratio,
        }
    }

    pub fn get(&self, metric: Metric) -> Measure {
        match metric {
            Metric::TripleCount if self.rdf_valid => Measure::Value(self.triple_count as f64),
            Metric::TripleCount => Measure::na(NaReason::InvalidRdf),
            Metric::ShaclViolationRatio => self.shacl_violation_ratio,
            Metric::ComplianceClass => self.compliance.class,
            Metric::ComplianceProperty => self.compliance.property,
            Metric::ComplianceAvg => self.compliance.avg,
            Metric::CoverageClass => self.coverage.class,
            Metric::CoverageProperty => self.coverage.property,
            Metric::CoverageAvg => self.coverage.avg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TripleCount,
    ShaclViolationRatio,
    ComplianceClass,
    ComplianceProperty,
    ComplianceAvg,
    CoverageClass,
    CoverageProperty,
    CoverageAvg,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::TripleCount,
        Metric::ShaclViolationRatio,
        Metric::ComplianceClass,
        Metric::ComplianceProperty,
        Metric::ComplianceAvg,
        Metric::CoverageClass,
        Metric::CoverageProperty,
        Metric::CoverageAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::TripleCount => "triple_count",
            Metric::ShaclViolationRatio => "shacl_violation_ratio",
            Metric::ComplianceClass => "compliance_class",
            Metric::ComplianceProperty => "compliance_property",
            Metric::ComplianceAvg => "compliance_avg",
            Metric::CoverageClass => "coverage_class",
            Metric::CoverageProperty => "coverage_property",
            Metric::CoverageAvg => "coverage_avg",
        }
    }

    /// Accepts column names plus `compliance` / `coverage` for the averages.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "compliance" => Some(Metric::ComplianceAvg),
            "coverage" => Some(Metric::CoverageAvg),
            other => Metric::ALL.into_iter().find(|m| m.name() == other),
        }
    }
}

/// Mean, sample standard deviation and median over the computable values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub n: usize,
    pub mean: Measure,
    pub std: Measure,
    pub median: Measure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub records: usize,
    pub valid_count: usize,
    pub metrics: Vec<(Metric, MetricStats)>,
}

impl AggregateSummary {
    pub fn stats(&self, metric: Metric) -> &MetricStats {
        &self
            .metrics
            .iter()
            .find(|(m, _)| *m == metric)
            .expect("every metric is aggregated")
            .1
    }
}

/// Aggregates records over runs. Missing values are skipped; a metric with
/// no computable value carries the most frequent reason.
pub fn aggregate(records: &[MetricRecord]) -> AggregateSummary {
    let valid_count = records.iter().filter(|r| r.rdf_valid).count();
    let metrics = Metric::ALL
        .into_iter()
        .map(|metric| {
            let measures: Vec<Measure> = records.iter().map(|r| r.get(metric)).collect();
            (metric, summarize(&measures))
        })
        .collect();
    AggregateSummary {
        records: records.len(),
        valid_count,
        metrics,
    }
}

pub fn summarize(measures: &[Measure]) -> MetricStats {
    let values: Vec<f64> = measures.iter().filter_map(|m| m.value()).collect();
    if values.is_empty() {
        let reason = dominant_reason(measures).unwrap_or(NaReason::ZeroDenominator);
        let na = Measure::na(reason);
        return MetricStats {
            n: 0,
            mean: na,
            std: na,
            median: na,
        };
    }
    MetricStats {
        n: values.len(),
        mean: Measure::Value(mean(&values)),
        std: Measure::Value(sample_std(&values)),
        median: Measure::Value(median(&values)),
    }
}

fn dominant_reason(measures: &[Measure]) -> Option<NaReason> {
    let mut counts: Vec<(NaReason, usize)> = Vec::new();
    for reason in measures.iter().filter_map(|m| m.reason()) {
        match counts.iter_mut().find(|(r, _)| *r == reason) {
            Some((_, n)) => *n += 1,
            None => counts.push((reason, 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    counts.first().map(|(r, _)| *r)
}

/// Sums in sorted order so the result does not depend on input order.
pub fn mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Standard deviation with Bessel's correction; 0 for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let m = mean(values);
    let mut squares: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    squares.sort_by(f64::total_cmp);
    libm::sqrt(squares.iter().sum::<f64>() / (values.len() - 1) as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::parse_turtle;
    use alloc::format;

    const PREFIXES: &str = "@prefix owl: <http://www.w3.org/2002/07/owl#> .\n\
        @prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
        @prefix obot: <https://w3id.org/onto-bot#> .\n\
        @prefix ex: <http://example.org/> .\n";

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn minimal_ontology() {
        let g = parse_turtle(&format!(
            "{PREFIXES}obot:Environment a owl:Class .\nobot:hasAction a owl:ObjectProperty ."
        ))
        .unwrap();
        let terms = extract_ontology_terms(&g).unwrap();
        assert_eq!(terms.classes, set(&["https://w3id.org/onto-bot#Environment"]));
        assert_eq!(terms.properties, set(&["https://w3id.org/onto-bot#hasAction"]));
    }

    #[test]
    fn domain_and_range_count_as_classes() {
        let g = parse_turtle(&format!(
            "{PREFIXES}ex:p a owl:ObjectProperty ; rdfs:domain ex:A ; rdfs:range ex:B .\n\
             ex:q a owl:DatatypeProperty ; rdfs:range [ owl:unionOf ( ex:C ex:D ) ] .\n\
             ex:undeclared rdfs:domain ex:Z ."
        ))
        .unwrap();
        let terms = extract_ontology_terms(&g).unwrap();
        assert_eq!(terms.classes, set(&["http://example.org/A", "http://example.org/B"]));
        assert_eq!(terms.properties.len(), 2);
    }

    #[test]
    fn empty_ontology_is_an_error() {
        assert_eq!(extract_ontology_terms(&Graph::new()), Err(TermSetError::NoClasses));
        let only_class = parse_turtle(&format!("{PREFIXES}ex:A a rdfs:Class .")).unwrap();
        assert_eq!(extract_ontology_terms(&only_class), Err(TermSetError::NoProperties));
    }

    #[test]
    fn usage_of_single_triple() {
        let g = parse_turtle(&format!("{PREFIXES}ex:a ex:p ex:b .")).unwrap();
        let usage = term_usage(&g);
        assert!(usage.used_classes.is_empty());
        assert_eq!(usage.used_properties, set(&["http://example.org/p"]));
        assert!(term_usage(&Graph::new()).is_empty());
    }

    fn terms() -> OntologyTermSets {
        OntologyTermSets {
            classes: set(&["o:A", "o:B", "o:C", "o:D"]),
            properties: set(&["o:p", "o:q"]),
        }
    }

    #[test]
    fn compliance_subset_and_disjoint() {
        let usage = GraphTermUsage {
            used_classes: set(&["o:A"]),
            used_properties: set(&["o:p", "o:q"]),
        };
        let c = compliance(&usage, &terms());
        assert_eq!((c.class, c.property, c.avg), (Measure::Value(1.0), Measure::Value(1.0), Measure::Value(1.0)));
        let made_up = GraphTermUsage {
            used_classes: BTreeSet::new(),
            used_properties: set(&["ex:madeUp"]),
        };
        let c = compliance(&made_up, &terms());
        assert_eq!(c.property, Measure::Value(0.0));
        assert_eq!(c.class, Measure::na(NaReason::ZeroDenominator));
        // the average falls back to the computable component
        assert_eq!(c.avg, Measure::Value(0.0));
    }

    #[test]
    fn coverage_bounds() {
        let empty = coverage(&GraphTermUsage::default(), &terms());
        assert_eq!((empty.class, empty.property, empty.avg), (Measure::Value(0.0), Measure::Value(0.0), Measure::Value(0.0)));
        let full = GraphTermUsage {
            used_classes: terms().classes,
            used_properties: terms().properties,
        };
        let c = coverage(&full, &terms());
        assert_eq!(c.avg, Measure::Value(1.0));
        let half = GraphTermUsage {
            used_classes: set(&["o:A", "o:X"]),
            used_properties: set(&["o:p"]),
        };
        let c = coverage(&half, &terms());
        assert_eq!((c.class, c.property, c.avg), (Measure::Value(0.25), Measure::Value(0.5), Measure::Value(0.375)));
    }

    #[test]
    fn measure_text_round_trip() {
        for m in [
            Measure::Value(0.857142857142857),
            Measure::Value(0.0),
            Measure::na(NaReason::InvalidRdf),
            Measure::na(NaReason::NoOntologyTerms),
        ] {
            assert_eq!(format!("{m}").parse::<Measure>(), Ok(m));
        }
        assert!("NA:other".parse::<Measure>().is_err());
        assert!("NaN".parse::<Measure>().is_err());
    }

    fn record_with_compliance(v: f64) -> MetricRecord {
        let mut r = MetricRecord::invalid();
        r.rdf_valid = true;
        r.triple_count = 10;
        r.compliance = RatioTriple::new(Measure::Value(v), Measure::Value(v));
        r.coverage = RatioTriple::new(Measure::Value(v), Measure::Value(v));
        r.shacl_violation_ratio = Measure::Value(0.0);
        r
    }

    #[test]
    fn aggregate_identical_records() {
        let records: Vec<_> = (0..10).map(|_| record_with_compliance(0.3)).collect();
        let s = aggregate(&records);
        assert_eq!(s.valid_count, 10);
        for (_, stats) in &s.metrics {
            assert_eq!(stats.std, Measure::Value(0.0));
        }
    }

    #[test]
    fn aggregate_arithmetic() {
        let records: Vec<_> = [0.2, 0.4, 0.6].into_iter().map(record_with_compliance).collect();
        let s = aggregate(&records);
        let stats = s.stats(Metric::ComplianceAvg);
        assert!((stats.mean.value().unwrap() - 0.4).abs() < 1e-12);
        assert!((stats.median.value().unwrap() - 0.4).abs() < 1e-12);
        assert!((stats.std.value().unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn aggregate_skips_invalid_records() {
        let records = [record_with_compliance(0.5), MetricRecord::invalid()];
        let s = aggregate(&records);
        assert_eq!(s.valid_count, 1);
        assert_eq!(s.stats(Metric::ComplianceClass).n, 1);
        let all_invalid = aggregate(&[MetricRecord::invalid(), MetricRecord::invalid()]);
        assert_eq!(all_invalid.stats(Metric::TripleCount).mean, Measure::na(NaReason::InvalidRdf));
    }

    #[test]
    fn white_cell_reasons() {
        let terms = terms();
        let empty = MetricRecord::evaluate(&Graph::new(), &terms, Some(&ValidationReport::default()));
        assert_eq!(empty.shacl_violation_ratio, Measure::na(NaReason::ZeroDenominator));
        let off_ontology = parse_turtle(&format!("{PREFIXES}ex:a ex:p ex:b .")).unwrap();
        let r = MetricRecord::evaluate(&off_ontology, &terms, Some(&ValidationReport::default()));
        assert_eq!(r.shacl_violation_ratio, Measure::na(NaReason::NoOntologyTerms));
        assert_eq!(r.compliance.property, Measure::Value(0.0));
        let r = MetricRecord::evaluate(&off_ontology, &terms, None);
        assert_eq!(r.shacl_violation_ratio, Measure::na(NaReason::NoShapes));
    }
}
