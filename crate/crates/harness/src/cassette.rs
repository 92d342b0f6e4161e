//! Cassettes: the recorded request/response pairs of one run, keyed by
//! experiment digest and run index. Replay serves responses from the file
//! and never builds an HTTP client.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::provider::{EmbedRequest, ModelClient, ModelRequest, ModelResponse, ProviderError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub step: String,
    pub request_hash: String,
    pub response_text: String,
    #[serde(default)]
    pub metadata: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub config_digest: String,
    pub run_index: u32,
    pub interactions: Vec<Interaction>,
}

pub fn cassette_path(root: &Path, digest: &str, run_index: u32) -> PathBuf {
    root.join(digest).join(format!("run_{run_index:02}.json"))
}

fn cassette_error(path: &Path, message: impl ToString) -> ProviderError {
    ProviderError::Cassette {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path).map_err(|e| cassette_error(path, e))?;
        serde_json::from_str(&text).map_err(|e| cassette_error(path, e))
    }

    /// Writes through a temporary file so readers never see half a cassette.
    pub fn save(&self, path: &Path) -> Result<(), ProviderError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| cassette_error(path, e))?;
        }
        let mut text = serde_json::to_string_pretty(self).expect("cassette serializes");
        text.push('\n');
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(|e| cassette_error(path, e))?;
        fs::rename(&tmp, path).map_err(|e| cassette_error(path, e))
    }
}

/// Wraps a live client and writes every exchange to a cassette when the run
/// finishes.
pub struct RecordingClient {
    inner: Box<dyn ModelClient>,
    cassette: Cassette,
    path: PathBuf,
}

impl RecordingClient {
    pub fn new(inner: Box<dyn ModelClient>, digest: &str, run_index: u32, path: PathBuf) -> Self {
        RecordingClient {
            inner,
            cassette: Cassette {
                config_digest: digest.to_string(),
                run_index,
                interactions: Vec::new(),
            },
            path,
        }
    }
}

impl ModelClient for RecordingClient {
    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let response = self.inner.complete(request)?;
        self.cassette.interactions.push(Interaction {
            step: request.step.clone(),
            request_hash: request.hash(),
            response_text: response.text.clone(),
            metadata: response.metadata.clone(),
        });
        Ok(response)
    }

    fn embed(&mut self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        let vectors = self.inner.embed(request)?;
        self.cassette.interactions.push(Interaction {
            step: request.step.clone(),
            request_hash: request.hash(),
            response_text: serde_json::to_string(&vectors).expect("vectors serialize"),
            metadata: Value::Null,
        });
        Ok(vectors)
    }

    fn finish(self: Box<Self>) -> Result<(), ProviderError> {
        self.cassette.save(&self.path)
    }
}

/// Serves a recorded run. Each request must match the recorded step and
/// request hash, in order.
pub struct ReplayClient {
    cassette: Cassette,
    cursor: usize,
}

impl ReplayClient {
    pub fn new(cassette: Cassette) -> Self {
        ReplayClient { cassette, cursor: 0 }
    }

    fn next(&mut self, step: &str, hash: &str) -> Result<&Interaction, ProviderError> {
        let mismatch = |message: String| ProviderError::CassetteMismatch {
            step: step.to_string(),
            message,
        };
        let interaction = self
            .cassette
            .interactions
            .get(self.cursor)
            .ok_or_else(|| mismatch(format!("cassette has only {} interactions", self.cursor)))?;
        if interaction.step != step {
            return Err(mismatch(format!("recorded step is `{}`", interaction.step)));
        }
        if interaction.request_hash != hash {
            return Err(mismatch(format!(
                "request hash {hash} differs from recorded {}",
                interaction.request_hash
            )));
        }
        self.cursor += 1;
        Ok(interaction)
    }
}

impl ModelClient for ReplayClient {
    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let i = self.next(&request.step, &request.hash())?;
        Ok(ModelResponse {
            text: i.response_text.clone(),
            metadata: i.metadata.clone(),
        })
    }

    fn embed(&mut self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        let step = request.step.clone();
        let i = self.next(&step, &request.hash())?;
        serde_json::from_str(&i.response_text).map_err(|e| ProviderError::CassetteMismatch {
            step,
            message: format!("recorded embeddings unreadable: {e}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{Part, PromptBundle};

    struct Echo;

    impl ModelClient for Echo {
        fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
            Ok(ModelResponse {
                text: format!("echo {}", request.step),
                metadata: serde_json::json!({"model": request.model}),
            })
        }

        fn embed(&mut self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
            Ok(request.inputs.iter().map(|s| vec![s.len() as f64, 0.5]).collect())
        }
    }

    fn request(step: &str) -> ModelRequest {
        ModelRequest {
            model: "m".into(),
            session_id: "s".into(),
            step: step.into(),
            prompt: PromptBundle {
                template_id: "t".into(),
                parts: vec![Part::Text { text: "p".into() }],
            },
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = cassette_path(dir.path(), "abc", 3);
        let mut rec = Box::new(RecordingClient::new(Box::new(Echo), "abc", 3, path.clone()));
        let live = rec.complete(&request("describe")).unwrap();
        let embed = EmbedRequest {
            model: "e".into(),
            session_id: "s".into(),
            step: "embed".into(),
            inputs: vec!["ab".into(), "c".into()],
        };
        let vectors = rec.embed(&embed).unwrap();
        rec.finish().unwrap();
        assert!(path.ends_with("abc/run_03.json"));

        let cassette = Cassette::load(&path).unwrap();
        assert_eq!(cassette.run_index, 3);
        let mut replay = ReplayClient::new(cassette);
        assert_eq!(replay.complete(&request("describe")).unwrap(), live);
        assert_eq!(replay.embed(&embed).unwrap(), vectors);
        assert!(matches!(
            replay.complete(&request("generate")),
            Err(ProviderError::CassetteMismatch { .. })
        ));
    }

    #[test]
    fn replay_checks_request_hash() {
        let cassette = Cassette {
            config_digest: "d".into(),
            run_index: 1,
            interactions: vec![Interaction {
                step: "generate".into(),
                request_hash: "not-the-hash".into(),
                response_text: "x".into(),
                metadata: Value::Null,
            }],
        };
        let err = ReplayClient::new(cassette).complete(&request("generate")).unwrap_err();
        assert!(matches!(err, ProviderError::CassetteMismatch { .. }));
        assert!(!err.is_fatal());
    }
}
