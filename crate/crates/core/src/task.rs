//! Task-level documents: tools, tool results, resources and the Gym tuples.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::canonical::finite;
use crate::schema::InputSchema;

/// Goal text of the task, served as a text block.
pub const DESCRIPTION_URI: &str = "cube://task/description";
/// Current observation, served as a json block.
pub const OBSERVATION_URI: &str = "cube://task/observation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub description: String,
    pub input_schema: InputSchema,
}

impl Tool {
    pub fn new(name: impl Into<String>, description: impl Into<String>, input_schema: InputSchema) -> Self {
        Self { name: name.into(), description: description.into(), input_schema }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum ContentBlock {
    Text(String),
    Json(Value),
}

impl ContentBlock {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            ContentBlock::Text(s) => Some(s),
            ContentBlock::Json(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallResult {
    pub content: Vec<ContentBlock>,
    pub is_error: bool,
}

impl ToolCallResult {
    pub fn text(text: impl Into<String>) -> Self {
        Self { content: vec![ContentBlock::Text(text.into())], is_error: false }
    }

    pub fn json(value: Value) -> Self {
        Self { content: vec![ContentBlock::Json(value)], is_error: false }
    }

    /// A tool-level failure. The message is never empty.
    pub fn error(message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.is_empty() {
            message.push_str("tool call failed");
        }
        Self { content: vec![ContentBlock::Text(message)], is_error: true }
    }

    /// All text blocks joined by newlines.
    pub fn joined_text(&self) -> String {
        self.content.iter().filter_map(ContentBlock::as_text).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceDescriptor {
    pub uri: String,
    pub name: String,
    pub mime_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceContents {
    pub uri: String,
    pub mime_type: String,
    #[serde(flatten)]
    pub block: ContentBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub obs: Value,
    #[serde(serialize_with = "finite")]
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: Value,
}

impl StepResult {
    pub fn is_done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetResult {
    pub obs: Value,
    pub info: Value,
}

/// A tool invocation. `cube/step` carries the same shape under `action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub name: String,
    #[serde(default)]
    pub args: Map<String, Value>,
}

impl ActionRequest {
    /// Builds an action; `args` must be a JSON object (anything else is
    /// treated as no arguments).
    pub fn new(name: impl Into<String>, args: Value) -> Self {
        let args = match args {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        Self { name: name.into(), args }
    }

    pub fn bare(name: impl Into<String>) -> Self {
        Self { name: name.into(), args: Map::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use serde_json::json;

    #[test]
    fn content_block_shape() {
        let r = ToolCallResult::text("hi");
        assert_eq!(
            canonical::to_string(&r).unwrap(),
            r#"{"content":[{"kind":"text","payload":"hi"}],"is_error":false}"#
        );
    }

    #[test]
    fn resource_contents_flatten_round_trip() {
        let c = ResourceContents {
            uri: OBSERVATION_URI.into(),
            mime_type: "application/json".into(),
            block: ContentBlock::Json(json!({"agent": [0, 0]})),
        };
        let s = canonical::to_string(&c).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"json","mime_type":"application/json","payload":{"agent":[0,0]},"uri":"cube://task/observation"}"#
        );
        let back: ResourceContents = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn error_results_are_never_empty() {
        let r = ToolCallResult::error("");
        assert!(r.is_error);
        assert!(!r.joined_text().is_empty());
    }

    #[test]
    fn step_result_rejects_nan_reward() {
        let r = StepResult {
            obs: json!({}),
            reward: f64::NAN,
            terminated: false,
            truncated: false,
            info: json!({}),
        };
        assert!(canonical::to_vec(&r).is_err());
    }
}
