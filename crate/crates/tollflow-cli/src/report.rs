//! Report assembly: the run-report envelope, scenario digests, and the
//! flat CSV rendering of a report document.

use serde::Serialize;
use serde_json::Value;

/// Envelope printed by every subcommand.
///
/// Identical inputs must produce byte-identical reports apart from
/// `timing_ms`, which carries wall-clock time and is excluded from any
/// comparison (and from the CSV rendering entirely).
#[derive(Debug, Serialize)]
pub struct RunReport {
    /// Canonical echo of the invoked subcommand and flags.
    pub command: String,
    /// FNV-1a hash of the scenario document.
    pub scenario_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Value>,
    pub timing_ms: u128,
}

#[derive(Debug, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: u64,
    pub gap: f64,
}

/// Output style for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Pretty-printed JSON document.
    Structured,
    /// Flat `key,value` rows.
    Csv,
}

impl RunReport {
    pub fn new(command: String, scenario_digest: String) -> Self {
        RunReport {
            command,
            scenario_digest,
            solver: None,
            results: None,
            scheme: None,
            verification: None,
            timing_ms: 0,
        }
    }

    /// Renders the report in the requested format.
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Structured => serde_json::to_string_pretty(self).expect("report serializes"),
            Format::Csv => {
                let mut value = serde_json::to_value(self).expect("report serializes");
                if let Value::Object(map) = &mut value {
                    map.remove("timing_ms");
                }
                to_csv(&value)
            }
        }
    }
}

/// 64-bit FNV-1a hash rendered as fixed-width hex.
pub fn digest(text: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Flattens a JSON document into `key,value` rows with dotted paths.
pub fn to_csv(value: &Value) -> String {
    let mut rows = vec!["key,value".to_string()];
    walk(value, String::new(), &mut rows);
    let mut out = rows.join("\n");
    out.push('\n');
    out
}

fn walk(value: &Value, path: String, rows: &mut Vec<String>) {
    match value {
        Value::Object(map) => {
            for (key, child) in map {
                let next = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                walk(child, next, rows);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                walk(child, format!("{path}[{i}]"), rows);
            }
        }
        Value::Null => rows.push(format!("{path},")),
        Value::Bool(b) => rows.push(format!("{path},{b}")),
        Value::Number(n) => rows.push(format!("{path},{n}")),
        Value::String(s) => {
            if s.contains(',') || s.contains('"') || s.contains('\n') {
                let escaped = s.replace('"', "\"\"");
                rows.push(format!("{path},\"{escaped}\""));
            } else {
                rows.push(format!("{path},{s}"));
            }
        }
    }
}
