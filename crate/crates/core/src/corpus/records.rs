//! JSON Lines records for binary document / sentence classification.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CorpusError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub id: String,
    pub text: String,
    pub label: u8,
}

/// Parses one JSON object per line; blank lines are skipped.
pub fn parse_classification_records(text: &str) -> Result<Vec<ClassificationRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| CorpusError::MalformedRecord { line: line_no, reason };
        let value: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("expected a JSON object".into()))?;
        let field_str = |name: &str| {
            obj.get(name)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| malformed(format!("missing string field `{name}`")))
        };
        let id = field_str("id")?;
        let text = field_str("text")?;
        let label = obj
            .get("label")
            .and_then(Value::as_i64)
            .ok_or_else(|| malformed("missing integer field `label`".into()))?;
        if label != 0 && label != 1 {
            return Err(CorpusError::InvalidLabel { line: line_no, label });
        }
        out.push(ClassificationRecord {
            id,
            text,
            label: label as u8,
        });
    }
    Ok(out)
}

pub fn write_classification_records(records: &[ClassificationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialise"));
        out.push('\n');
    }
    out
}
