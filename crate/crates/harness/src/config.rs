//! Experiment configuration: a versioned TOML file naming models, methods,
//! graph kinds, run counts and input paths. Paths are relative to the
//! working directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dpe,
    D2kg,
    D2kgRag,
    I2kg,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dpe, Method::D2kg, Method::D2kgRag, Method::I2kg];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dpe => "dpe",
            Method::D2kg => "d2kg",
            Method::D2kgRag => "d2kg_rag",
            Method::I2kg => "i2kg",
        }
    }

    /// Methods that first turn the images into a textual description.
    pub fn is_narrative(self) -> bool {
        !matches!(self, Method::I2kg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s || (s == "d2kg-rag" && *m == Method::D2kgRag))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Observation,
    Action,
}

impl GraphKind {
    pub const ALL: [GraphKind; 2] = [GraphKind::Observation, GraphKind::Action];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Observation => "observation",
            GraphKind::Action => "action",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraphKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown graph kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// Chat-completions style, with image parts.
    #[default]
    Chat,
    /// Plain completion style; images travel in a side field.
    Completion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    #[serde(default)]
    pub dialect: Dialect,
    pub endpoint: String,
    /// Name sent to the provider; defaults to `id`.
    #[serde(default)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Methods this model runs; defaults to the experiment's list.
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub embedding_model: Option<String>,
}

impl ModelConfig {
    pub fn provider_model(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Lexical,
    Embedding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RagConfig {
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub scorer: ScorerKind,
}

impl Default for RagConfig {
    fn default() -> Self {
        RagConfig {
            chunk_size: default_chunk_size(),
            top_k: default_top_k(),
            scorer: ScorerKind::Lexical,
        }
    }
}

fn default_chunk_size() -> usize {
    1200
}

fn default_top_k() -> usize {
    4
}

fn default_runs() -> u32 {
    10
}

fn default_parallelism() -> usize {
    1
}

fn default_runs_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_cassettes() -> PathBuf {
    PathBuf::from("cassettes")
}

/// The config file as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub task: String,
    pub ontology: PathBuf,
    #[serde(default)]
    pub images: Vec<PathBuf>,
    pub methods: Vec<Method>,
    pub graph_kinds: Vec<GraphKind>,
    /// Shapes per graph kind: a path, or `builtin:observation` / `builtin:action`.
    #[serde(default)]
    pub shapes: BTreeMap<GraphKind, Vec<String>>,
    #[serde(default)]
    pub rag: RagConfig,
    #[serde(default = "default_runs_dir")]
    pub runs_dir: PathBuf,
    #[serde(default = "default_cassettes")]
    pub cassettes: PathBuf,
    pub models: Vec<ModelConfig>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ConfigFile = toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        file.check()?;
        Ok(file)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.runs == 0 {
            return invalid("runs must be at least 1".into());
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1".into());
        }
        if self.models.is_empty() {
            return invalid("no models configured".into());
        }
        let mut ids: Vec<&str> = self.models.iter().map(|m| m.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("model id `{}` appears twice", w[0]));
        }
        if self.methods.contains(&Method::I2kg) && self.images.is_empty() {
            return invalid("method i2kg needs at least one image".into());
        }
        if self.methods.iter().any(|m| m.is_narrative()) && self.images.is_empty() {
            return invalid("narrative methods describe the images, so at least one image is needed".into());
        }
        if self.graph_kinds.contains(&GraphKind::Action) && self.task.trim().is_empty() {
            return invalid("graph kind action needs a task".into());
        }
        if self.methods.contains(&Method::D2kgRag) && self.rag.chunk_size == 0 {
            return invalid("rag.chunk_size must be positive".into());
        }
        for model in &self.models {
            if let Some(methods) = &model.methods {
                if let Some(m) = methods.iter().find(|m| !self.methods.contains(m)) {
                    return invalid(format!("model `{}` lists method {m} not in `methods`", model.id));
                }
            }
            if self.rag.scorer == ScorerKind::Embedding
                && self.methods.contains(&Method::D2kgRag)
                && model.embedding_model.is_none()
            {
                return invalid(format!("model `{}` needs embedding_model for the embedding scorer", model.id));
            }
        }
        Ok(())
    }

    /// Every (model, method, graph kind) combination, in config order.
    pub fn experiments(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for model in &self.models {
            let methods = model.methods.as_ref().unwrap_or(&self.methods);
            for &method in methods {
                for &graph_kind in &self.graph_kinds {
                    out.push(ExperimentConfig {
                        model: model.clone(),
                        method,
                        graph_kind,
                        runs: self.runs,
                        parallelism: self.parallelism,
                        task: self.task.clone(),
                        ontology: self.ontology.clone(),
                        images: self.images.clone(),
                        rag: self.rag.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn shapes_for(&self, kind: GraphKind) -> &[String] {
        self.shapes.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// One model running one method for one graph kind.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub method: Method,
    pub graph_kind: GraphKind,
    pub runs: u32,
    pub parallelism: usize,
    pub task: String,
    pub ontology: PathBuf,
    pub images: Vec<PathBuf>,
    pub rag: RagConfig,
}

/// The contents an experiment's digest covers. Endpoint, credentials, run
/// count and parallelism stay out, so the same cassettes replay against
/// another endpoint or a longer run.
#[derive(Serialize)]
struct DigestInput<'a> {
    version: u32,
    model_id: &'a str,
    provider_model: &'a str,
    dialect: Dialect,
    method: Method,
    graph_kind: GraphKind,
    task: &'a str,
    ontology_sha256: String,
    images_sha256: Vec<String>,
    rag: Option<&'a RagConfig>,
    embedding_model: Option<&'a str>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ExperimentConfig {
    /// Hex SHA-256 over the experiment's semantic inputs, including the
    /// bytes of the ontology and images.
    pub fn digest(&self, workdir: &Path) -> Result<String, ConfigError> {
        let read = |p: &Path| {
            let path = workdir.join(p);
            std::fs::read(&path).map_err(|source| ConfigError::Io { path, source })
        };
        let rag = self.method == Method::D2kgRag;
        let input = DigestInput {
            version: CONFIG_VERSION,
            model_id: &self.model.id,
            provider_model: self.model.provider_model(),
            dialect: self.model.dialect,
            method: self.method,
            graph_kind: self.graph_kind,
            task: if self.graph_kind == GraphKind::Action { &self.task } else { "" },
            ontology_sha256: sha256_hex(&read(&self.ontology)?),
            images_sha256: self
                .images
                .iter()
                .map(|p| read(p).map(|b| sha256_hex(&b)))
                .collect::<Result<_, _>>()?,
            rag: rag.then_some(&self.rag),
            embedding_model: if rag && self.rag.scorer == ScorerKind::Embedding {
                self.model.embedding_model.as_deref()
            } else {
                None
            },
        };
        let json = serde_json::to_vec(&input).expect("digest input serializes");
        Ok(sha256_hex(&json))
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.model.id, self.method, self.graph_kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
task = "Tidy up."
ontology = "onto.ttl"
images = ["a.png"]
methods = ["d2kg", "i2kg"]
graph_kinds = ["observation", "action"]

[[models]]
id = "m1"
endpoint = "http://localhost:1/v1"
api_key_env = "M1_KEY"
"#;

    fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: PathBuf::from("inline"),
            source,
        })?;
        file.check()?;
        Ok(file)
    }

    #[test]
    fn defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.runs, 10);
        assert_eq!(c.parallelism, 1);
        assert_eq!(c.rag, RagConfig::default());
        assert_eq!(c.experiments().len(), 4);
        assert_eq!(c.models[0].provider_model(), "m1");
    }

    #[test]
    fn invariants_are_checked() {
        let no_images = MINIMAL.replace("images = [\"a.png\"]", "");
        assert!(matches!(parse(&no_images), Err(ConfigError::Invalid(_))));
        let no_task = MINIMAL.replace("task = \"Tidy up.\"", "");
        assert!(matches!(parse(&no_task), Err(ConfigError::Invalid(_))));
        let v2 = MINIMAL.replace("version = 1", "version = 2");
        assert!(matches!(parse(&v2), Err(ConfigError::Version(2))));
        let unknown = format!("{MINIMAL}\nsecret = \"x\"");
        assert!(matches!(parse(&unknown), Err(ConfigError::Toml { .. })));
    }

    #[test]
    fn digest_ignores_endpoint_and_runs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("onto.ttl"), "@prefix : <http://e/> .").unwrap();
        std::fs::write(dir.path().join("a.png"), [1u8, 2, 3]).unwrap();
        let a = parse(MINIMAL).unwrap().experiments()[0].clone();
        let mut b = a.clone();
        b.model.endpoint = "https://elsewhere/v1".into();
        b.model.api_key_env = Some("OTHER".into());
        b.runs = 3;
        b.parallelism = 8;
        assert_eq!(a.digest(dir.path()).unwrap(), b.digest(dir.path()).unwrap());
        let mut c = a.clone();
        c.graph_kind = GraphKind::Action;
        assert_ne!(a.digest(dir.path()).unwrap(), c.digest(dir.path()).unwrap());
        let before = a.digest(dir.path()).unwrap();
        std::fs::write(dir.path().join("a.png"), [9u8]).unwrap();
        assert_ne!(a.digest(dir.path()).unwrap(), before);
    }

    #[test]
    fn method_names() {
        assert_eq!("d2kg-rag".parse::<Method>(), Ok(Method::D2kgRag));
        assert_eq!("d2kg_rag".parse::<Method>(), Ok(Method::D2kgRag));
        assert!("dpe2".parse::<Method>().is_err());
    }
}
