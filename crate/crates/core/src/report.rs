//! Uniform JSON records for checked inequalities and CSV table helpers.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One checked quantity: what was run, on what, the measured value, the
/// bound it was compared to, and the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub op: String,
    pub inputs: Value,
    pub value: Value,
    pub bound: Value,
    pub pass: bool,
}

impl Record {
    pub fn new(op: &str, inputs: Value, value: Value, bound: Value, pass: bool) -> Self {
        Record {
            op: op.to_string(),
            inputs,
            value,
            bound,
            pass,
        }
    }

    /// A record with nothing to compare against.
    pub fn measured(op: &str, inputs: Value, value: Value) -> Self {
        Record::new(op, inputs, value, Value::Null, true)
    }
}

/// Render rows as CSV with a header line. Fields containing commas or
/// quotes are quoted.
pub fn to_csv<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    fn field(s: &str) -> String {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.as_ref().iter().map(|s| field(s)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
