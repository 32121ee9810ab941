//! JSON-RPC 2.0 envelope.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::canonical::{self, EncodingFault};
use crate::error::{codes, RpcError};
use crate::method::Namespace;

pub const JSONRPC_VERSION: &str = "2.0";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RequestId {
    Num(i64),
    Str(String),
}

impl From<i64> for RequestId {
    fn from(n: i64) -> Self {
        RequestId::Num(n)
    }
}

impl From<&str> for RequestId {
    fn from(s: &str) -> Self {
        RequestId::Str(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    pub method: String,
    /// Always an object; an absent `params` member decodes as `{}`.
    pub params: Value,
}

impl Request {
    pub fn new(id: impl Into<RequestId>, method: impl Into<String>, params: Value) -> Self {
        Self { id: id.into(), method: method.into(), params }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    /// `None` only when answering a request whose id could not be read.
    pub id: Option<RequestId>,
    pub payload: Result<Value, RpcError>,
}

impl Response {
    pub fn ok(id: RequestId, result: Value) -> Self {
        Self { id: Some(id), payload: Ok(result) }
    }

    pub fn err(id: Option<RequestId>, error: RpcError) -> Self {
        Self { id, payload: Err(error) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RpcEnvelope {
    Request(Request),
    Response(Response),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeFault {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid request: {message}")]
    InvalidRequest { message: String, id: Option<RequestId> },
    #[error("method `{method}` is outside the tools/, resources/ and cube/ namespaces")]
    MethodNamespace { method: String, id: RequestId },
}

impl DecodeFault {
    pub fn code(&self) -> i64 {
        match self {
            DecodeFault::Parse(_) => codes::PARSE_ERROR,
            DecodeFault::InvalidRequest { .. } => codes::INVALID_REQUEST,
            DecodeFault::MethodNamespace { .. } => codes::METHOD_NOT_FOUND,
        }
    }

    pub fn id(&self) -> Option<&RequestId> {
        match self {
            DecodeFault::Parse(_) => None,
            DecodeFault::InvalidRequest { id, .. } => id.as_ref(),
            DecodeFault::MethodNamespace { id, .. } => Some(id),
        }
    }

    pub fn to_rpc_error(&self) -> RpcError {
        RpcError::new(self.code(), self.to_string())
    }

    /// The error response a server sends back for this fault.
    pub fn to_response(&self) -> Response {
        Response::err(self.id().cloned(), self.to_rpc_error())
    }
}

fn invalid(message: impl Into<String>, id: Option<RequestId>) -> DecodeFault {
    DecodeFault::InvalidRequest { message: message.into(), id }
}

pub fn encode_envelope(env: &RpcEnvelope) -> Result<Vec<u8>, EncodingFault> {
    Ok(canonical::value_to_vec(&envelope_to_value(env)?))
}

pub fn envelope_to_value(env: &RpcEnvelope) -> Result<Value, EncodingFault> {
    let mut obj = Map::new();
    obj.insert("jsonrpc".into(), Value::from(JSONRPC_VERSION));
    match env {
        RpcEnvelope::Request(req) => {
            if Namespace::of(&req.method).is_none() {
                return Err(EncodingFault(format!("method `{}` has no namespace", req.method)));
            }
            if !req.params.is_object() {
                return Err(EncodingFault("params must be an object".into()));
            }
            obj.insert("id".into(), canonical::to_value(&req.id)?);
            obj.insert("method".into(), Value::from(req.method.clone()));
            obj.insert("params".into(), req.params.clone());
        }
        RpcEnvelope::Response(resp) => {
            obj.insert(
                "id".into(),
                match &resp.id {
                    Some(id) => canonical::to_value(id)?,
                    None => Value::Null,
                },
            );
            match &resp.payload {
                Ok(result) => obj.insert("result".into(), result.clone()),
                Err(error) => obj.insert("error".into(), canonical::to_value(error)?),
            };
        }
    }
    Ok(Value::Object(obj))
}

pub fn decode_envelope(bytes: &[u8]) -> Result<RpcEnvelope, DecodeFault> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| DecodeFault::Parse(e.to_string()))?;
    envelope_from_value(value)
}

pub fn envelope_from_value(value: Value) -> Result<RpcEnvelope, DecodeFault> {
    let mut obj = match value {
        Value::Object(obj) => obj,
        Value::Array(_) => return Err(invalid("batch requests are not supported", None)),
        _ => return Err(invalid("envelope must be an object", None)),
    };
    let id = obj.remove("id");
    let parsed_id = match &id {
        Some(v) => parse_id(v),
        None => None,
    };

    match obj.remove("jsonrpc") {
        Some(Value::String(v)) if v == JSONRPC_VERSION => {}
        Some(_) => return Err(invalid("jsonrpc must be \"2.0\"", parsed_id)),
        None => return Err(invalid("missing jsonrpc member", parsed_id)),
    }

    if let Some(method) = obj.remove("method") {
        let id = match (id, parsed_id) {
            (Some(_), Some(id)) => id,
            (Some(_), None) => return Err(invalid("id must be an integer or a string", None)),
            (None, _) => return Err(invalid("missing id", None)),
        };
        let Value::String(method) = method else {
            return Err(invalid("method must be a string", Some(id)));
        };
        let params = match obj.remove("params") {
            None | Some(Value::Null) => Value::Object(Map::new()),
            Some(p @ Value::Object(_)) => p,
            Some(_) => return Err(invalid("params must be an object", Some(id))),
        };
        if let Some(key) = obj.keys().next() {
            return Err(invalid(format!("unexpected member `{key}`"), Some(id)));
        }
        if Namespace::of(&method).is_none() {
            return Err(DecodeFault::MethodNamespace { method, id });
        }
        return Ok(RpcEnvelope::Request(Request { id, method, params }));
    }

    let result = obj.remove("result");
    let error = obj.remove("error");
    if let Some(key) = obj.keys().next() {
        return Err(invalid(format!("unexpected member `{key}`"), parsed_id));
    }
    let id = match id {
        Some(Value::Null) => None,
        Some(_) if parsed_id.is_none() => {
            return Err(invalid("id must be an integer, a string or null", None))
        }
        Some(_) => parsed_id,
        None => {
            let what = if result.is_none() && error.is_none() { "missing id and method" } else { "missing id" };
            return Err(invalid(what, None));
        }
    };
    let payload = match (result, error) {
        (Some(result), None) => Ok(result),
        (None, Some(error)) => Err(serde_json::from_value::<RpcError>(error)
            .map_err(|e| invalid(format!("malformed error object: {e}"), id.clone()))?),
        (Some(_), Some(_)) => return Err(invalid("response carries both result and error", id)),
        (None, None) => return Err(invalid("missing method, result or error", id)),
    };
    Ok(RpcEnvelope::Response(Response { id, payload }))
}

fn parse_id(v: &Value) -> Option<RequestId> {
    match v {
        Value::Number(n) => n.as_i64().map(RequestId::Num),
        Value::String(s) => Some(RequestId::Str(s.clone())),
        _ => None,
    }
}
