//! Turns raw model text into an action or a typed violation.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;

use crate::game::ActionViolation;

/// Why a response could not be used as an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResponseViolation {
    NoDocument,
    MissingKey { key: String },
    NonNumeric { key: String },
    RuleViolation { detail: ActionViolation },
}

impl fmt::Display for ResponseViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseViolation::NoDocument => f.write_str("no JSON document in response"),
            ResponseViolation::MissingKey { key } => write!(f, "missing key {key:?}"),
            ResponseViolation::NonNumeric { key } => write!(f, "value of {key:?} is not numeric"),
            ResponseViolation::RuleViolation { detail } => write!(f, "rule violation: {detail}"),
        }
    }
}

/// Keys a response must contain; `action_key` is the numeric action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSchema {
    pub keys: Vec<String>,
    pub action_key: String,
}

impl ResponseSchema {
    pub fn new<I, S>(keys: I, action_key: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ResponseSchema {
            keys: keys.into_iter().map(Into::into).collect(),
            action_key: action_key.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub raw_text: String,
    pub document: Option<Map<String, Value>>,
    pub action: Option<f64>,
    pub violation: Option<ResponseViolation>,
}

impl ParsedResponse {
    /// The numeric action the document carried, even if it was later rejected
    /// by the game rules.
    pub fn extracted_action(&self, key: &str) -> Option<f64> {
        self.action.or_else(|| self.document.as_ref().and_then(|d| d.get(key)).and_then(as_number))
    }

    /// Demotes a parsed action to a rule violation.
    pub fn reject(mut self, detail: ActionViolation) -> Self {
        self.action = None;
        self.violation = Some(ResponseViolation::RuleViolation { detail });
        self
    }
}

fn as_number(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok().filter(|x| x.is_finite()),
        _ => None,
    }
}

/// Finds the first balanced `{...}` span in `raw` that parses as a JSON object.
fn first_document(raw: &str) -> Option<Map<String, Value>> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(offset) = raw[start..].find('{') {
        let open = start + offset;
        if let Some(close) = matching_brace(bytes, open) {
            if let Ok(Value::Object(map)) = serde_json::from_str(&raw[open..=close]) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses a model reply against `schema`. Never fails: problems come back as
/// a [`ResponseViolation`].
pub fn parse_response(raw: &str, schema: &ResponseSchema) -> ParsedResponse {
    let document = first_document(raw);
    let mut parsed = ParsedResponse {
        raw_text: raw.to_string(),
        document: None,
        action: None,
        violation: None,
    };
    let Some(doc) = document else {
        parsed.violation = Some(ResponseViolation::NoDocument);
        return parsed;
    };

    let violation = match doc.get(&schema.action_key) {
        None => Some(ResponseViolation::MissingKey { key: schema.action_key.clone() }),
        Some(value) => match as_number(value) {
            None => Some(ResponseViolation::NonNumeric { key: schema.action_key.clone() }),
            Some(action) => {
                parsed.action = Some(action);
                schema
                    .keys
                    .iter()
                    .find(|k| !doc.contains_key(k.as_str()))
                    .map(|k| ResponseViolation::MissingKey { key: k.clone() })
            }
        },
    };
    if violation.is_some() {
        parsed.action = None;
    }
    parsed.violation = violation;
    parsed.document = Some(doc);
    parsed
}
