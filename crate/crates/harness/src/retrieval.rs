//! Ontology retrieval for d2kg_rag: chunk the ontology on statement
//! boundaries and rank chunks against a query.

use std::collections::BTreeMap;

use crate::provider::{EmbedRequest, ModelClient, ProviderError};

/// A retrievable piece of the ontology. `text` repeats the prefix
/// declarations so each chunk reads as standalone Turtle; `body` is what
/// gets scored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub index: usize,
    pub text: String,
    pub body: String,
}

fn is_directive(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("@prefix")
        || t.starts_with("@base")
        || t.get(..6).is_some_and(|w| w.eq_ignore_ascii_case("prefix"))
        || t.get(..4).is_some_and(|w| w.eq_ignore_ascii_case("base"))
}

/// Splits Turtle text into top-level statements, tracking strings, brackets
/// and comments well enough to find the terminating `.` of each.
fn statements(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut depth = 0i32;
    let mut chars = body.chars().peekable();
    let mut in_string: Option<char> = None;
    let mut in_comment = false;
    while let Some(c) = chars.next() {
        current.push(c);
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        if let Some(q) = in_string {
            if c == '\\' {
                if let Some(n) = chars.next() {
                    current.push(n);
                }
            } else if c == q {
                in_string = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => in_string = Some(c),
            '#' => in_comment = true,
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            '.' if depth <= 0 => {
                let ends = chars.peek().is_none_or(|n| n.is_whitespace());
                if ends {
                    let s = current.trim().to_string();
                    if !s.is_empty() {
                        out.push(s);
                    }
                    current.clear();
                }
            }
            _ => {}
        }
    }
    let tail = current.trim();
    if !tail.is_empty() && !tail.lines().all(|l| l.trim_start().starts_with('#')) {
        out.push(tail.to_string());
    }
    out
}

/// Packs whole statements into chunks of at most `chunk_size` characters of
/// body text. A statement longer than that forms a chunk of its own.
pub fn chunk_ontology(ontology_text: &str, chunk_size: usize) -> Vec<Chunk> {
    let (header, body): (Vec<&str>, Vec<&str>) =
        ontology_text.lines().partition(|l| is_directive(l));
    let header = header.join("\n");
    let body = body.join("\n");
    let mut chunks: Vec<String> = Vec::new();
    let mut current = String::new();
    for stmt in statements(&body) {
        if !current.is_empty() && current.len() + 2 + stmt.len() > chunk_size {
            chunks.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push_str("\n\n");
        }
        current.push_str(&stmt);
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
        .into_iter()
        .enumerate()
        .map(|(index, body)| Chunk {
            index,
            text: if header.is_empty() {
                body.clone()
            } else {
                format!("{header}\n\n{body}")
            },
            body,
        })
        .collect()
}

/// Lowercased word tokens; camelCase and snake_case names split into parts
/// and are also kept whole.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let mut parts = Vec::new();
        let mut start = 0;
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        for w in chars.windows(2) {
            let ((_, a), (j, b)) = (w[0], w[1]);
            if a.is_lowercase() && b.is_uppercase() {
                parts.push(&word[start..j]);
                start = j;
            }
        }
        parts.push(&word[start..]);
        if parts.len() > 1 {
            out.push(word.to_lowercase());
        }
        out.extend(parts.into_iter().map(str::to_lowercase));
    }
    out
}

fn term_frequencies(text: &str) -> BTreeMap<String, f64> {
    let mut tf = BTreeMap::new();
    for t in tokens(text) {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    tf
}

fn cosine_sparse(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let norm = |v: &BTreeMap<String, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub trait Scorer {
    /// One relevance score per chunk, higher is better.
    fn score(&mut self, query: &str, chunks: &[Chunk]) -> Result<Vec<f64>, ProviderError>;
}

/// Term-frequency cosine similarity. Deterministic and offline.
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(&mut self, query: &str, chunks: &[Chunk]) -> Result<Vec<f64>, ProviderError> {
        let q = term_frequencies(query);
        Ok(chunks
            .iter()
            .map(|c| cosine_sparse(&q, &term_frequencies(&c.body)))
            .collect())
    }
}

/// Cosine similarity of provider embeddings.
pub struct EmbeddingScorer<'c> {
    pub client: &'c mut dyn ModelClient,
    pub model: String,
    pub session_id: String,
}

impl Scorer for EmbeddingScorer<'_> {
    fn score(&mut self, query: &str, chunks: &[Chunk]) -> Result<Vec<f64>, ProviderError> {
        let mut inputs = vec![query.to_string()];
        inputs.extend(chunks.iter().map(|c| c.body.clone()));
        let vectors = self.client.embed(&EmbedRequest {
            model: self.model.clone(),
            session_id: self.session_id.clone(),
            step: "embed".into(),
            inputs,
        })?;
        let (q, rest) = vectors
            .split_first()
            .ok_or_else(|| ProviderError::Malformed("no embeddings returned".into()))?;
        Ok(rest.iter().map(|v| cosine(q, v)).collect())
    }
}

/// The `top_k` best chunks, best first; ties keep document order.
pub fn retrieve_ontology_chunks(
    chunks: &[Chunk],
    query: &str,
    top_k: usize,
    scorer: &mut dyn Scorer,
) -> Result<Vec<Chunk>, ProviderError> {
    if top_k == 0 || chunks.is_empty() {
        return Ok(Vec::new());
    }
    let scores = scorer.score(query, chunks)?;
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order.into_iter().take(top_k).map(|i| chunks[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONTOLOGY: &str = "@prefix obot: <https://w3id.org/onto-bot#> .
@prefix owl: <http://www.w3.org/2002/07/owl#> .

obot:Environment a owl:Class ;
    owl:comment \"A space. With a dot.\" .

obot:Workflow a owl:Class .

obot:hasAction a owl:ObjectProperty ;
    owl:someValuesFrom [ a owl:Class ] .
";

    #[test]
    fn statements_respect_strings_and_brackets() {
        let chunks = chunk_ontology(ONTOLOGY, 1);
        assert_eq!(chunks.len(), 3);
        assert!(chunks[0].body.contains("With a dot."));
        assert!(chunks[2].body.ends_with("[ a owl:Class ] ."));
        assert!(chunks.iter().all(|c| c.text.starts_with("@prefix obot:")));
    }

    #[test]
    fn small_statements_share_a_chunk() {
        let chunks = chunk_ontology(ONTOLOGY, 10_000);
        assert_eq!(chunks.len(), 1);
    }

    #[test]
    fn local_name_query_finds_its_chunk() {
        let chunks = chunk_ontology(ONTOLOGY, 1);
        let top = retrieve_ontology_chunks(&chunks, "the robot Workflow", 1, &mut LexicalScorer).unwrap();
        assert_eq!(top[0].index, 1);
        let top = retrieve_ontology_chunks(&chunks, "an action", 1, &mut LexicalScorer).unwrap();
        assert_eq!(top[0].index, 2);
    }

    #[test]
    fn top_k_bounds() {
        let chunks = chunk_ontology(ONTOLOGY, 1);
        assert!(retrieve_ontology_chunks(&chunks, "x", 0, &mut LexicalScorer).unwrap().is_empty());
        let all = retrieve_ontology_chunks(&chunks, "Environment", 10, &mut LexicalScorer).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[0].index, 0);
        // unscored chunks keep document order
        assert_eq!((all[1].index, all[2].index), (1, 2));
    }

    #[test]
    fn camel_case_tokens() {
        assert_eq!(tokens("hasAction x"), ["hasaction", "has", "action", "x"]);
    }

    #[test]
    fn lexical_ranking_is_deterministic() {
        let chunks = chunk_ontology(ONTOLOGY, 1);
        let a = retrieve_ontology_chunks(&chunks, "class action", 3, &mut LexicalScorer).unwrap();
        let b = retrieve_ontology_chunks(&chunks, "class action", 3, &mut LexicalScorer).unwrap();
        assert_eq!(a, b);
    }
}
