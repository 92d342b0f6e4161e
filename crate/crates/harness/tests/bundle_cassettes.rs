//! Regenerates the cassettes under fixtures/bundle. Responses are scripted
//! variations of the two Appendix C listings, recorded through the normal
//! recording client so the files are exactly what a live run would leave.
//!
//!     cargo test -p kgbench --test bundle_cassettes -- --ignored

use std::fs;
use std::path::{Path, PathBuf};

use kgbench::cassette::{cassette_path, RecordingClient};
use kgbench::config::{ConfigFile, ExperimentConfig, GraphKind, Method};
use kgbench::pipeline::{run_experiment, RunStatus};
use kgbench::provider::{EmbedRequest, ModelClient, ModelRequest, ModelResponse, ProviderError};
use serde_json::json;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Splits a listing into its prefix header and top-level subject blocks.
fn blocks(listing: &str) -> (String, Vec<String>) {
    let mut header = String::new();
    let mut blocks: Vec<String> = Vec::new();
    for line in listing.lines() {
        if line.starts_with("@prefix") {
            header.push_str(line);
            header.push('\n');
        } else if line.trim().is_empty() {
            continue;
        } else if line.starts_with(char::is_whitespace) {
            let last = blocks.last_mut().expect("continuation follows a subject line");
            last.push('\n');
            last.push_str(line);
        } else {
            blocks.push(line.to_string());
        }
    }
    (header, blocks)
}

struct Scripted {
    model: String,
    method: Method,
    kind: GraphKind,
    run: u32,
    listing: String,
}

impl Scripted {
    fn seed(&self) -> u32 {
        let m = match self.method {
            Method::I2kg => 5,
            _ => 2,
        };
        let k = match self.kind {
            GraphKind::Observation => 0,
            GraphKind::Action => 3,
        };
        self.model.len() as u32 * 7 + m + k
    }

    fn graph(&self) -> String {
        let (header, blocks) = blocks(&self.listing);
        let seed = self.seed();
        let kept: Vec<String> = blocks
            .iter()
            .enumerate()
            .filter(|(i, _)| *i == 0 || !(*i as u32 * 7 + self.run * 3 + seed).is_multiple_of(9))
            .map(|(_, b)| {
                // some runs drift off the ontology for a term or two
                if self.model.starts_with("llama") && self.method == Method::D2kg && self.run % 4 == 2 {
                    b.replace("obot:Appliance", "<http://example.org/vocab#Appliance>")
                        .replace("obot:Furniture", "<http://example.org/vocab#Furniture>")
                } else if self.model.starts_with("gpt") && self.run % 5 == 3 {
                    b.replace("obot:hasNaturalLanguage", "<http://example.org/vocab#hasText>")
                } else {
                    b.clone()
                }
            })
            .collect();
        let mut text = format!("{header}\n{}\n", kept.join("\n"));
        let broken = (self.model.starts_with("gpt") && self.method == Method::I2kg && self.kind == GraphKind::Observation && self.run == 4)
            || (self.model.starts_with("llama") && self.method == Method::D2kg && self.kind == GraphKind::Action && self.run == 9);
        if broken {
            // cut off mid-statement, as a truncated completion would be
            let cut = text.len() * 2 / 3;
            let cut = (0..=cut).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
            text.truncate(cut);
        }
        if self.run % 2 == 1 {
            text = format!("```turtle\n{text}```\n");
        }
        text
    }
}

impl ModelClient for Scripted {
    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let text = match request.step.as_str() {
            "describe" => format!(
                "A kitchen (view set {}). A countertop holds two jars, two boxes and a stack of plates. \
                 There is a fridge, a dining table with a cup and a bowl on it, two wall cabinets above \
                 the counter, an exhaust hood and a sink.",
                self.run
            ),
            _ => self.graph(),
        };
        let prompt_chars = request.prompt.text().len();
        Ok(ModelResponse {
            metadata: json!({
                "model": request.model,
                "usage": {"prompt_chars": prompt_chars, "completion_chars": text.len()},
            }),
            text,
        })
    }

    fn embed(&mut self, _: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        Err(ProviderError::Malformed("the bundle uses the lexical scorer".into()))
    }
}

#[test]
#[ignore = "rewrites fixtures/bundle/cassettes"]
fn record_bundle_cassettes() {
    let bundle = repo().join("fixtures/bundle");
    let config = ConfigFile::load(&bundle.join("config.toml")).unwrap();
    let cassettes = bundle.join(&config.cassettes);
    if cassettes.exists() {
        fs::remove_dir_all(&cassettes).unwrap();
    }
    let observation = fs::read_to_string(repo().join("fixtures/appendix_c/maverick_i2kg_observation.ttl")).unwrap();
    let action = fs::read_to_string(repo().join("fixtures/appendix_c/gpt-o1_i2kg_action.ttl")).unwrap();
    let scratch = tempfile::tempdir().unwrap();
    let factory = |exp: &ExperimentConfig, digest: &str, run: u32| -> Result<Box<dyn ModelClient>, ProviderError> {
        let inner = Scripted {
            model: exp.model.id.clone(),
            method: exp.method,
            kind: exp.graph_kind,
            run,
            listing: match exp.graph_kind {
                GraphKind::Observation => observation.clone(),
                GraphKind::Action => action.clone(),
            },
        };
        Ok(Box::new(RecordingClient::new(
            Box::new(inner),
            digest,
            run,
            cassette_path(&cassettes, digest, run),
        )))
    };
    let mut total = 0;
    for exp in config.experiments() {
        let records = run_experiment(&exp, &bundle, scratch.path(), &factory).unwrap();
        assert!(records.iter().all(|r| r.status == RunStatus::Ok));
        total += records.len();
    }
    assert_eq!(total, 80);
}
