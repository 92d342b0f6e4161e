//! Prompt assembly. The d2kg templates are the published ones, byte for
//! byte; i2kg swaps the description block for image attachments and
//! d2kg_rag fills the ontology block with retrieved chunks.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GraphKind, Method};

pub const D2KG_OBSERVATION: &str = include_str!("../templates/d2kg_observation.txt");
pub const D2KG_ACTION: &str = include_str!("../templates/d2kg_action.txt");
pub const I2KG_OBSERVATION: &str = include_str!("../templates/i2kg_observation.txt");
pub const I2KG_ACTION: &str = include_str!("../templates/i2kg_action.txt");
pub const DESCRIBE_SCENE: &str = include_str!("../templates/describe_scene.txt");
pub const DPE_EXTRACT: &str = include_str!("../templates/dpe_extract.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("missing prompt input: {0}")]
    MissingInput(&'static str),
    #[error("cannot read image {path}: {message}")]
    Image { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text { text: String },
    Image { media_type: String, data: String },
}

/// An ordered user message made of text and image parts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub parts: Vec<Part>,
}

impl PromptBundle {
    /// The text parts, concatenated.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.as_str()),
                Part::Image { .. } => None,
            })
            .collect()
    }

    pub fn image_count(&self) -> usize {
        self.parts
            .iter()
            .filter(|p| matches!(p, Part::Image { .. }))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageInput {
    pub name: String,
    pub media_type: String,
    pub bytes: Vec<u8>,
}

impl ImageInput {
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let bytes = std::fs::read(path).map_err(|e| PromptError::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let media_type = match ext.as_str() {
            "png" => "image/png",
            "jpg" | "jpeg" => "image/jpeg",
            "webp" => "image/webp",
            "gif" => "image/gif",
            _ => {
                return Err(PromptError::Image {
                    path: path.display().to_string(),
                    message: format!("unsupported image extension `{ext}`"),
                })
            }
        };
        Ok(ImageInput {
            name: path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string(),
            media_type: media_type.to_string(),
            bytes,
        })
    }

    fn part(&self) -> Part {
        Part::Image {
            media_type: self.media_type.clone(),
            data: STANDARD.encode(&self.bytes),
        }
    }
}

/// Inputs for the graph-generation prompt.
#[derive(Clone, Copy, Debug, Default)]
pub struct PromptInputs<'a> {
    pub ontology_text: &'a str,
    /// Retrieved chunks; replaces the ontology text for d2kg_rag.
    pub retrieved: Option<&'a [String]>,
    pub narrative: Option<&'a str>,
    pub task: &'a str,
    pub images: &'a [ImageInput],
}

/// Replaces `{name}` placeholders in one pass, so substituted text is never
/// scanned again.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn non_empty<'a>(value: Option<&'a str>, what: &'static str) -> Result<&'a str, PromptError> {
    value
        .filter(|v| !v.trim().is_empty())
        .ok_or(PromptError::MissingInput(what))
}

/// Builds the graph-generation prompt for `method` and `kind`. DPE uses
/// [`build_extraction_prompt`] instead.
pub fn build_prompt(
    method: Method,
    kind: GraphKind,
    inputs: &PromptInputs<'_>,
) -> Result<PromptBundle, PromptError> {
    let joined;
    let ontology = match (method, inputs.retrieved) {
        (Method::D2kgRag, Some(chunks)) => {
            joined = chunks.join("\n\n");
            non_empty(Some(&joined), "retrieved ontology chunks")?
        }
        (Method::D2kgRag, None) => return Err(PromptError::MissingInput("retrieved ontology chunks")),
        _ => non_empty(Some(inputs.ontology_text), "ontology text")?,
    };
    let task = match kind {
        GraphKind::Action => non_empty(Some(inputs.task), "robot task")?,
        GraphKind::Observation => "",
    };
    let (template, template_id) = match (method, kind) {
        (Method::I2kg, GraphKind::Observation) => (I2KG_OBSERVATION, "i2kg_observation"),
        (Method::I2kg, GraphKind::Action) => (I2KG_ACTION, "i2kg_action"),
        (Method::Dpe, _) => return Err(PromptError::MissingInput("dpe uses the extraction prompt")),
        (_, GraphKind::Observation) => (D2KG_OBSERVATION, "d2kg_observation"),
        (_, GraphKind::Action) => (D2KG_ACTION, "d2kg_action"),
    };
    let description = if method == Method::I2kg {
        ""
    } else {
        non_empty(inputs.narrative, "environment description")?
    };
    let text = fill(
        template,
        &[
            ("ontology_txt", ontology),
            ("description_txt", description),
            ("robot_task", task),
        ],
    );
    let mut parts = vec![Part::Text { text }];
    if method == Method::I2kg {
        if inputs.images.is_empty() {
            return Err(PromptError::MissingInput("images"));
        }
        parts.extend(inputs.images.iter().map(ImageInput::part));
    }
    let template_id = if method == Method::D2kgRag {
        format!("{template_id}+rag")
    } else {
        template_id.to_string()
    };
    Ok(PromptBundle { template_id, parts })
}

/// Asks the model to describe the scene in the images.
pub fn build_describe_prompt(images: &[ImageInput]) -> Result<PromptBundle, PromptError> {
    if images.is_empty() {
        return Err(PromptError::MissingInput("images"));
    }
    let mut parts = vec![Part::Text {
        text: DESCRIBE_SCENE.to_string(),
    }];
    parts.extend(images.iter().map(ImageInput::part));
    Ok(PromptBundle {
        template_id: "describe_scene".into(),
        parts,
    })
}

/// Asks the model for `subject | relation | object` paths (DPE).
pub fn build_extraction_prompt(
    kind: GraphKind,
    narrative: &str,
    ontology_text: &str,
    task: &str,
) -> Result<PromptBundle, PromptError> {
    let narrative = non_empty(Some(narrative), "environment description")?;
    let ontology = non_empty(Some(ontology_text), "ontology text")?;
    let task_block = match kind {
        GraphKind::Action => format!(
            "Keep only the paths needed for this robot task:\nROBOT TASK: {}\n---------------------\n",
            non_empty(Some(task), "robot task")?
        ),
        GraphKind::Observation => String::new(),
    };
    let text = fill(
        DPE_EXTRACT,
        &[
            ("ontology_txt", ontology),
            ("description_txt", narrative),
            ("task_block", &task_block),
        ],
    );
    Ok(PromptBundle {
        template_id: format!("dpe_extract_{kind}"),
        parts: vec![Part::Text { text }],
    })
}
