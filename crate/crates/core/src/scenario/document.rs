use serde_json::Value;
use sha2::{Digest, Sha256};

use super::Scenario;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    /// `path` is a JSON pointer to the offending value (`""` for the root).
    #[error("schema violation at {path:?}: {message}")]
    SchemaViolation { path: String, message: String },
}

/// Parses a `.rvs.json` scenario document.
pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario, ParseError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let scenario: Scenario = match serde_path_to_error::deserialize(&mut de) {
        Ok(s) => s,
        Err(err) => {
            let pointer = pointer_of(err.path());
            let inner = err.into_inner();
            return Err(classify(inner, pointer));
        }
    };
    de.end().map_err(|e| ParseError::MalformedDocument(e.to_string()))?;

    for (key, node) in &scenario.states {
        if key != &node.id {
            return Err(ParseError::SchemaViolation {
                path: format!("/states/{}/id", escape(key.as_str())),
                message: format!("state id {:?} does not match its key", node.id.as_str()),
            });
        }
    }
    for (key, action) in &scenario.actions {
        if key != &action.id {
            return Err(ParseError::SchemaViolation {
                path: format!("/actions/{}/id", escape(key.as_str())),
                message: format!("action id {:?} does not match its key", action.id.as_str()),
            });
        }
    }
    Ok(scenario)
}

fn classify(err: serde_json::Error, mut pointer: String) -> ParseError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Data => {
            let message = strip_position(&err.to_string());
            // Missing fields are reported at the enclosing object.
            if let Some(field) = backticked(&message, "missing field `") {
                pointer.push('/');
                pointer.push_str(&escape(field));
            }
            ParseError::SchemaViolation { path: pointer, message }
        }
        Category::Io | Category::Syntax | Category::Eof => {
            ParseError::MalformedDocument(err.to_string())
        }
    }
}

fn backticked<'a>(message: &'a str, prefix: &str) -> Option<&'a str> {
    let rest = message.strip_prefix(prefix)?;
    rest.split('`').next()
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_owned(),
        None => message.to_owned(),
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&escape(key)),
            Segment::Enum { variant } => out.push_str(&escape(variant)),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

/// Deterministic bytes for a scenario: compact JSON, object keys sorted
/// bytewise, floats in shortest round-trip form.
pub fn canonical_serialize(s: &Scenario) -> Vec<u8> {
    let value = serde_json::to_value(s).expect("scenario values always serialize");
    let mut out = Vec::with_capacity(4096);
    write_canonical(&value, &mut out);
    out
}

pub(crate) fn write_canonical(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, k).expect("writing to a Vec cannot fail");
                out.push(b':');
                write_canonical(v, out);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(v, out);
            }
            out.push(b']');
        }
        scalar => serde_json::to_writer(&mut *out, scalar).expect("writing to a Vec cannot fail"),
    }
}

/// Lowercase hex SHA-256 of the canonical serialization.
pub fn checksum(s: &Scenario) -> String {
    hex::encode(Sha256::digest(canonical_serialize(s)))
}
