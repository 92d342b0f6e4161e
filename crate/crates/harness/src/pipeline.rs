//! Runs an experiment: one fresh client per run, prompts assembled from the
//! static inputs plus that run's own narrative, outputs persisted as each
//! run finishes.

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use kgbench_core::metrics::{extract_ontology_terms, OntologyTermSets};
use kgbench_core::rdf::{parse_turtle, serialize_turtle, Graph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::cassette::{cassette_path, Cassette, RecordingClient, ReplayClient};
use crate::config::{sha256_hex, ConfigError, ExperimentConfig, GraphKind, Method, ScorerKind};
use crate::dpe::{assemble_graph, parse_paths, DpeStats, TermMap};
use crate::prompt::{
    build_describe_prompt, build_extraction_prompt, build_prompt, ImageInput, PromptBundle, PromptError,
    PromptInputs,
};
use crate::provider::{resolve_api_key, HttpClient, ModelClient, ModelRequest, ProviderError, RetryPolicy};
use crate::retrieval::{chunk_ontology, retrieve_ontology_chunks, Chunk, EmbeddingScorer, LexicalScorer, Scorer};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{label}: {source}")]
    Provider {
        label: String,
        #[source]
        source: ProviderError,
    },
    #[error("{label}: {source}")]
    Prompt {
        label: String,
        #[source]
        source: PromptError,
    },
    #[error("{label}: ontology unusable: {message}")]
    Ontology { label: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn is_auth(&self) -> bool {
        matches!(self, PipelineError::Provider { source: ProviderError::Auth(_), .. })
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Removes a leading ```` ``` ```` fence line and a trailing fence line, and
/// nothing else. Returns whether anything was stripped.
pub fn strip_fences(text: &str) -> (String, bool) {
    let trimmed = text.trim();
    if !trimmed.starts_with("```") {
        return (text.to_string(), false);
    }
    let body = match trimmed.find('\n') {
        Some(nl) => &trimmed[nl + 1..],
        None => "",
    };
    let body = body.trim_end();
    let body = body.strip_suffix("```").unwrap_or(body);
    (body.trim_end().to_string() + "\n", true)
}

/// Distinct per (experiment, run); never reused.
pub fn session_id(digest: &str, run_index: u32) -> String {
    sha256_hex(format!("{digest}:run:{run_index}").as_bytes())[..32].to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ProviderFailed,
    PromptFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub valid: bool,
    pub triple_count: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepUsage {
    pub step: String,
    pub metadata: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_digest: String,
    pub run_index: u32,
    pub session_id: String,
    pub model_id: String,
    pub method: Method,
    pub graph_kind: GraphKind,
    pub status: RunStatus,
    pub error: Option<String>,
    pub narrative: Option<String>,
    pub raw_output: Option<String>,
    pub fences_stripped: bool,
    pub parse: Option<ParseOutcome>,
    pub dpe: Option<DpeStats>,
    pub retrieved_chunks: Option<Vec<usize>>,
    /// Turtle file name within the experiment directory.
    pub output_file: Option<String>,
    pub usage: Vec<StepUsage>,
    pub started_at: String,
    pub finished_at: String,
}

/// Written once per experiment directory so later stages can label runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub config_digest: String,
    pub model_id: String,
    pub method: Method,
    pub graph_kind: GraphKind,
    pub runs: u32,
}

pub const MANIFEST_FILE: &str = "experiment.json";
pub const RECORDS_FILE: &str = "records.jsonl";

pub fn experiment_dir(runs_root: &Path, digest: &str) -> PathBuf {
    runs_root.join(&digest[..12.min(digest.len())])
}

pub fn run_file_stem(run_index: u32) -> String {
    format!("run_{run_index:02}")
}

/// Hands out one client per run.
pub trait ClientFactory: Sync {
    /// Called once per experiment before any run starts.
    fn prepare(&self, _exp: &ExperimentConfig, _digest: &str) -> Result<(), ProviderError> {
        Ok(())
    }

    fn client(&self, exp: &ExperimentConfig, digest: &str, run_index: u32) -> Result<Box<dyn ModelClient>, ProviderError>;
}

/// Any `Fn(exp, digest, run)` closure is a factory; handy for mocks.
impl<F> ClientFactory for F
where
    F: Fn(&ExperimentConfig, &str, u32) -> Result<Box<dyn ModelClient>, ProviderError> + Sync,
{
    fn client(&self, exp: &ExperimentConfig, digest: &str, run_index: u32) -> Result<Box<dyn ModelClient>, ProviderError> {
        self(exp, digest, run_index)
    }
}

/// Serves runs from cassettes. Never constructs an HTTP client.
pub struct ReplayFactory {
    pub cassettes: PathBuf,
}

impl ClientFactory for ReplayFactory {
    fn prepare(&self, exp: &ExperimentConfig, digest: &str) -> Result<(), ProviderError> {
        for run in 1..=exp.runs {
            let path = cassette_path(&self.cassettes, digest, run);
            if !path.is_file() {
                return Err(ProviderError::CassetteMissing {
                    label: exp.label(),
                    run,
                    path: path.display().to_string(),
                });
            }
        }
        Ok(())
    }

    fn client(&self, _exp: &ExperimentConfig, digest: &str, run_index: u32) -> Result<Box<dyn ModelClient>, ProviderError> {
        let path = cassette_path(&self.cassettes, digest, run_index);
        let cassette = Cassette::load(&path)?;
        if cassette.config_digest != digest || cassette.run_index != run_index {
            return Err(ProviderError::Cassette {
                path: path.display().to_string(),
                message: format!(
                    "belongs to {} run {}",
                    cassette.config_digest, cassette.run_index
                ),
            });
        }
        Ok(Box::new(ReplayClient::new(cassette)))
    }
}

/// Calls the provider and writes a cassette per run. With `fresh`, the
/// experiment's existing cassettes are removed first.
pub struct LiveFactory {
    pub cassettes: PathBuf,
    pub retry: RetryPolicy,
    pub fresh: bool,
}

impl ClientFactory for LiveFactory {
    fn prepare(&self, exp: &ExperimentConfig, digest: &str) -> Result<(), ProviderError> {
        resolve_api_key(&exp.model)?;
        let dir = self.cassettes.join(digest);
        if self.fresh && dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| ProviderError::Cassette {
                path: dir.display().to_string(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    fn client(&self, exp: &ExperimentConfig, digest: &str, run_index: u32) -> Result<Box<dyn ModelClient>, ProviderError> {
        let key = resolve_api_key(&exp.model)?;
        let http = HttpClient::new(&exp.model, key, self.retry)?;
        let path = cassette_path(&self.cassettes, digest, run_index);
        Ok(Box::new(RecordingClient::new(Box::new(http), digest, run_index, path)))
    }
}

/// Inputs shared by every run of an experiment, loaded once.
struct Prepared {
    ontology_text: String,
    images: Vec<ImageInput>,
    chunks: Vec<Chunk>,
    dpe: Option<(TermMap, Graph)>,
}

fn prepare_inputs(exp: &ExperimentConfig, workdir: &Path) -> Result<Prepared, PipelineError> {
    let label = exp.label();
    let onto_path = workdir.join(&exp.ontology);
    let ontology_text = fs::read_to_string(&onto_path).map_err(io_error(&onto_path))?;
    let needs_images = exp.method == Method::I2kg || exp.method.is_narrative();
    let images = if needs_images {
        exp.images
            .iter()
            .map(|p| ImageInput::load(&workdir.join(p)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| PipelineError::Prompt {
                label: label.clone(),
                source,
            })?
    } else {
        Vec::new()
    };
    let chunks = if exp.method == Method::D2kgRag {
        chunk_ontology(&ontology_text, exp.rag.chunk_size)
    } else {
        Vec::new()
    };
    let dpe = if exp.method == Method::Dpe {
        let graph = parse_turtle(&ontology_text).map_err(|e| PipelineError::Ontology {
            label: label.clone(),
            message: e.to_string(),
        })?;
        let terms: OntologyTermSets = extract_ontology_terms(&graph).map_err(|e| PipelineError::Ontology {
            label: label.clone(),
            message: e.to_string(),
        })?;
        Some((TermMap::new(&terms, &graph), graph))
    } else {
        None
    };
    Ok(Prepared {
        ontology_text,
        images,
        chunks,
        dpe,
    })
}

fn now() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).expect("timestamp formats")
}

enum StepError {
    Provider(ProviderError),
    Prompt(PromptError),
}

impl From<ProviderError> for StepError {
    fn from(e: ProviderError) -> Self {
        StepError::Provider(e)
    }
}

impl From<PromptError> for StepError {
    fn from(e: PromptError) -> Self {
        StepError::Prompt(e)
    }
}

struct Run<'a> {
    exp: &'a ExperimentConfig,
    inputs: &'a Prepared,
    client: &'a mut dyn ModelClient,
    record: RunRecord,
    turtle: Option<String>,
}

impl Run<'_> {
    fn call(&mut self, step: &str, prompt: PromptBundle) -> Result<String, ProviderError> {
        let request = ModelRequest {
            model: self.exp.model.provider_model().to_string(),
            session_id: self.record.session_id.clone(),
            step: step.to_string(),
            prompt,
        };
        let response = self.client.complete(&request)?;
        self.record.usage.push(StepUsage {
            step: step.to_string(),
            metadata: response.metadata,
        });
        Ok(response.text)
    }

    fn steps(&mut self) -> Result<(), StepError> {
        let exp = self.exp;
        let inputs = self.inputs;
        let narrative = if exp.method.is_narrative() {
            let text = self.call("describe", build_describe_prompt(&inputs.images)?)?;
            self.record.narrative = Some(text.clone());
            Some(text)
        } else {
            None
        };
        if let Some((map, ontology)) = &inputs.dpe {
            let prompt = build_extraction_prompt(
                exp.graph_kind,
                narrative.as_deref().unwrap_or(""),
                &inputs.ontology_text,
                &exp.task,
            )?;
            let raw = self.call("extract", prompt)?;
            let (paths, unparsed) = parse_paths(&raw);
            let (graph, mut stats) = assemble_graph(&paths, map, ontology.prefixes());
            stats.unparsed_lines = unparsed;
            self.record.raw_output = Some(raw);
            self.record.parse = Some(ParseOutcome {
                valid: true,
                triple_count: Some(graph.len()),
                error: None,
            });
            self.record.dpe = Some(stats);
            self.turtle = Some(serialize_turtle(&graph));
            return Ok(());
        }
        let retrieved: Option<Vec<String>> = if exp.method == Method::D2kgRag {
            let mut query = narrative.clone().unwrap_or_default();
            if exp.graph_kind == GraphKind::Action {
                query.push('\n');
                query.push_str(&exp.task);
            }
            let top = {
                let mut lexical = LexicalScorer;
                let mut embedding;
                let scorer: &mut dyn Scorer = match exp.rag.scorer {
                    ScorerKind::Lexical => &mut lexical,
                    ScorerKind::Embedding => {
                        embedding = EmbeddingScorer {
                            client: &mut *self.client,
                            model: exp.model.embedding_model.clone().unwrap_or_default(),
                            session_id: self.record.session_id.clone(),
                        };
                        &mut embedding
                    }
                };
                retrieve_ontology_chunks(&inputs.chunks, &query, exp.rag.top_k, scorer)?
            };
            self.record.retrieved_chunks = Some(top.iter().map(|c| c.index).collect());
            Some(top.into_iter().map(|c| c.text).collect())
        } else {
            None
        };
        let prompt = build_prompt(
            exp.method,
            exp.graph_kind,
            &PromptInputs {
                ontology_text: &inputs.ontology_text,
                retrieved: retrieved.as_deref(),
                narrative: narrative.as_deref(),
                task: &exp.task,
                images: &inputs.images,
            },
        )?;
        let raw = self.call("generate", prompt)?;
        let (stripped, fenced) = strip_fences(&raw);
        self.record.fences_stripped = fenced;
        self.record.parse = Some(match parse_turtle(&stripped) {
            Ok(g) => ParseOutcome {
                valid: true,
                triple_count: Some(g.len()),
                error: None,
            },
            Err(e) => ParseOutcome {
                valid: false,
                triple_count: None,
                error: Some(e.to_string()),
            },
        });
        self.record.raw_output = Some(raw);
        self.turtle = Some(stripped);
        Ok(())
    }
}

/// Runs one run to completion. Fatal provider errors come back as `Err`;
/// everything else is recorded in the returned record.
fn run_once(
    exp: &ExperimentConfig,
    inputs: &Prepared,
    digest: &str,
    run_index: u32,
    factory: &dyn ClientFactory,
) -> Result<(RunRecord, Option<String>), ProviderError> {
    let mut record = RunRecord {
        config_digest: digest.to_string(),
        run_index,
        session_id: session_id(digest, run_index),
        model_id: exp.model.id.clone(),
        method: exp.method,
        graph_kind: exp.graph_kind,
        status: RunStatus::Ok,
        error: None,
        narrative: None,
        raw_output: None,
        fences_stripped: false,
        parse: None,
        dpe: None,
        retrieved_chunks: None,
        output_file: None,
        usage: Vec::new(),
        started_at: now(),
        finished_at: String::new(),
    };
    let mut client = factory.client(exp, digest, run_index)?;
    let outcome = {
        let mut run = Run {
            exp,
            inputs,
            client: client.as_mut(),
            record,
            turtle: None,
        };
        let result = run.steps();
        record = run.record;
        result.map(|()| run.turtle)
    };
    let turtle = match outcome {
        Ok(turtle) => {
            client.finish()?;
            turtle
        }
        Err(StepError::Provider(e)) if e.is_fatal() => return Err(e),
        Err(StepError::Provider(e)) => {
            record.status = RunStatus::ProviderFailed;
            record.error = Some(e.to_string());
            None
        }
        Err(StepError::Prompt(e)) => {
            record.status = RunStatus::PromptFailed;
            record.error = Some(e.to_string());
            None
        }
    };
    record.finished_at = now();
    Ok((record, turtle))
}

fn write_new(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(io_error(path))
}

/// Runs every run of `exp`, writing `run_XX.ttl`, `run_XX.json`,
/// `records.jsonl` and `experiment.json` under the experiment directory.
/// Returns the records in run order.
pub fn run_experiment(
    exp: &ExperimentConfig,
    workdir: &Path,
    runs_root: &Path,
    factory: &dyn ClientFactory,
) -> Result<Vec<RunRecord>, PipelineError> {
    let label = exp.label();
    let digest = exp.digest(workdir)?;
    let provider_error = |source| PipelineError::Provider {
        label: label.clone(),
        source,
    };
    factory.prepare(exp, &digest).map_err(provider_error)?;
    let inputs = prepare_inputs(exp, workdir)?;

    let dir = experiment_dir(runs_root, &digest);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_error(&dir))?;
    }
    fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let manifest = ExperimentManifest {
        config_digest: digest.clone(),
        model_id: exp.model.id.clone(),
        method: exp.method,
        graph_kind: exp.graph_kind,
        runs: exp.runs,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    write_new(&manifest_path, &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))?;
    let records_path = dir.join(RECORDS_FILE);
    let journal: Mutex<File> = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&records_path)
            .map_err(io_error(&records_path))?,
    );

    let persist = |record: &mut RunRecord, turtle: Option<String>| -> Result<(), PipelineError> {
        let stem = run_file_stem(record.run_index);
        if let Some(turtle) = turtle {
            let name = format!("{stem}.ttl");
            write_new(&dir.join(&name), &turtle)?;
            record.output_file = Some(name);
        }
        let json = serde_json::to_string_pretty(record).expect("record serializes") + "\n";
        write_new(&dir.join(format!("{stem}.json")), &json)?;
        let line = serde_json::to_string(record).expect("record serializes") + "\n";
        let mut file = journal.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes()).map_err(io_error(&records_path))
    };

    let work = |run_index: u32| -> Result<RunRecord, PipelineError> {
        let (mut record, turtle) = run_once(exp, &inputs, &digest, run_index, factory).map_err(provider_error)?;
        persist(&mut record, turtle)?;
        Ok(record)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.parallelism.max(1))
        .build()
        .expect("thread pool builds");
    pool.install(|| (1..=exp.runs).into_par_iter().map(work).collect())
}
