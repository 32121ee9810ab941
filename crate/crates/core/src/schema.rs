//! Tool input schemas and action validation.
//!
//! Schemas are a small subset of JSON Schema: an object with typed
//! properties, an optional `enum` per property and a `required` list.
//! Unknown argument keys are always rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::task::{ActionRequest, Tool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgType {
    String,
    Integer,
    Number,
    Boolean,
    Object,
    Array,
}

impl ArgType {
    pub fn accepts(self, value: &Value) -> bool {
        match self {
            ArgType::String => value.is_string(),
            // Integral floats count as integers: the canonical encoding
            // writes 3.0 as 3, so the two must be indistinguishable.
            ArgType::Integer => match value {
                Value::Number(n) => {
                    n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0)
                }
                _ => false,
            },
            ArgType::Number => value.is_number(),
            ArgType::Boolean => value.is_boolean(),
            ArgType::Object => value.is_object(),
            ArgType::Array => value.is_array(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySchema {
    #[serde(rename = "type")]
    pub ty: ArgType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(rename = "enum", default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<Value>>,
}

impl PropertySchema {
    pub fn of(ty: ArgType) -> Self {
        Self { ty, description: None, allowed: None }
    }

    pub fn string() -> Self {
        Self::of(ArgType::String)
    }

    pub fn boolean() -> Self {
        Self::of(ArgType::Boolean)
    }

    pub fn integer() -> Self {
        Self::of(ArgType::Integer)
    }

    pub fn describe(mut self, text: impl Into<String>) -> Self {
        self.description = Some(text.into());
        self
    }

    pub fn one_of<I, V>(mut self, values: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<Value>,
    {
        self.allowed = Some(values.into_iter().map(Into::into).collect());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    #[default]
    Object,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InputSchema {
    #[serde(rename = "type")]
    pub kind: SchemaKind,
    #[serde(default)]
    pub properties: BTreeMap<String, PropertySchema>,
    #[serde(default)]
    pub required: Vec<String>,
}

impl InputSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn required(mut self, name: impl Into<String>, prop: PropertySchema) -> Self {
        let name = name.into();
        self.required.push(name.clone());
        self.properties.insert(name, prop);
        self
    }

    pub fn optional(mut self, name: impl Into<String>, prop: PropertySchema) -> Self {
        self.properties.insert(name.into(), prop);
        self
    }

    /// Every required key must be a declared property.
    pub fn is_well_formed(&self) -> bool {
        self.required.iter().all(|k| self.properties.contains_key(k))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionFault {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("argument `{key}` of tool `{tool}`: {reason}")]
    ArgumentSchema { tool: String, key: String, reason: String },
}

impl ActionFault {
    /// The offending tool name or argument key.
    pub fn offending(&self) -> &str {
        match self {
            ActionFault::UnknownTool(name) => name,
            ActionFault::ArgumentSchema { key, .. } => key,
        }
    }
}

/// Checks an action against the advertised tool list.
///
/// Arguments are checked in key order, then required keys in declaration
/// order, so the reported key is deterministic.
pub fn validate_action(action: &ActionRequest, tools: &[Tool]) -> Result<(), ActionFault> {
    let tool = tools
        .iter()
        .find(|t| t.name == action.name)
        .ok_or_else(|| ActionFault::UnknownTool(action.name.clone()))?;
    let schema = &tool.input_schema;
    let fault = |key: &str, reason: String| ActionFault::ArgumentSchema {
        tool: tool.name.clone(),
        key: key.to_owned(),
        reason,
    };

    let mut keys: Vec<_> = action.args.keys().collect();
    keys.sort();
    for key in keys {
        let value = &action.args[key];
        let Some(prop) = schema.properties.get(key) else {
            return Err(fault(key, "not accepted by this tool".into()));
        };
        if !prop.ty.accepts(value) {
            return Err(fault(key, format!("expected {:?}", prop.ty).to_lowercase()));
        }
        if let Some(allowed) = &prop.allowed {
            if !allowed.contains(value) {
                return Err(fault(key, format!("{value} is not one of the allowed values")));
            }
        }
    }
    for key in &schema.required {
        if !action.args.contains_key(key) {
            return Err(fault(key, "required argument missing".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn grid_tools() -> Vec<Tool> {
        vec![
            Tool::new(
                "move",
                "Move one cell.",
                InputSchema::new().required(
                    "direction",
                    PropertySchema::string().one_of(["north", "south", "east", "west"]),
                ),
            ),
            Tool::new(
                "look",
                "Render the grid.",
                InputSchema::new().optional("legend", PropertySchema::boolean()),
            ),
        ]
    }

    #[test]
    fn accepts_valid_move() {
        let a = ActionRequest::new("move", json!({"direction": "north"}));
        assert_eq!(validate_action(&a, &grid_tools()), Ok(()));
        let look = ActionRequest::new("look", json!({}));
        assert_eq!(validate_action(&look, &grid_tools()), Ok(()));
    }

    #[test]
    fn unknown_tool() {
        let a = ActionRequest::new("fly", json!({}));
        assert_eq!(validate_action(&a, &grid_tools()), Err(ActionFault::UnknownTool("fly".into())));
    }

    #[test]
    fn type_mismatch_names_key() {
        let a = ActionRequest::new("move", json!({"direction": 7}));
        let err = validate_action(&a, &grid_tools()).unwrap_err();
        assert!(matches!(&err, ActionFault::ArgumentSchema { key, .. } if key == "direction"));
    }

    #[test]
    fn enum_missing_and_unknown_keys() {
        let tools = grid_tools();
        let bad_enum = ActionRequest::new("move", json!({"direction": "up"}));
        assert_eq!(validate_action(&bad_enum, &tools).unwrap_err().offending(), "direction");
        let missing = ActionRequest::new("move", json!({}));
        assert_eq!(validate_action(&missing, &tools).unwrap_err().offending(), "direction");
        let extra = ActionRequest::new("move", json!({"direction": "east", "speed": 2}));
        assert_eq!(validate_action(&extra, &tools).unwrap_err().offending(), "speed");
    }

    #[test]
    fn integral_float_is_an_integer() {
        assert!(ArgType::Integer.accepts(&json!(3.0)));
        assert!(!ArgType::Integer.accepts(&json!(3.5)));
        assert!(ArgType::Number.accepts(&json!(3)));
    }

    #[test]
    fn schema_wire_shape() {
        let schema = InputSchema::new().required("key", PropertySchema::string().one_of(["k0"]));
        assert_eq!(
            crate::canonical::to_string(&schema).unwrap(),
            r#"{"properties":{"key":{"enum":["k0"],"type":"string"}},"required":["key"],"type":"object"}"#
        );
        let bad: Result<InputSchema, _> = serde_json::from_value(json!({"type": "array"}));
        assert!(bad.is_err());
    }
}
