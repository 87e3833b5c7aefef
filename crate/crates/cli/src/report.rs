//! Run manifests and the fixed-precision JSON/CSV writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_sha256: Option<String>,
    pub parameters: BTreeMap<String, Value>,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, timestamp: bool) -> Self {
        RunManifest {
            tool: "crnpriv",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            argv,
            model_file: None,
            model_sha256: None,
            parameters: BTreeMap::new(),
            threads: rayon::current_num_threads(),
            started_at: timestamp.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)),
            wall_clock_seconds: None,
            clock: timestamp.then(Instant::now),
        }
    }

    pub fn model(&mut self, path: &Path, text: &str) {
        self.model_file = Some(path.display().to_string());
        self.model_sha256 = Some(hex::encode(Sha256::digest(text.as_bytes())));
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("manifest parameter serializes");
        self.parameters.insert(key.to_owned(), v);
    }

    pub fn finish(&mut self) {
        if let Some(start) = self.clock {
            self.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
        }
    }
}

/// `{"manifest": …, "result": …}` with every float written to 17
/// significant digits.
pub fn json_document(manifest: &RunManifest, result: impl Serialize) -> Result<String> {
    let mut doc = serde_json::Map::new();
    doc.insert("manifest".into(), serde_json::to_value(manifest)?);
    doc.insert("result".into(), serde_json::to_value(result)?);
    let mut out = String::new();
    write_value(&mut out, &Value::Object(doc), 0);
    out.push('\n');
    Ok(out)
}

pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0.0".into();
    }
    format!("{v:.16e}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("f64 number")));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, item, indent + 2);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push_str(": ");
                write_value(out, item, indent + 2);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// CSV text whose first line is `# manifest: <compact JSON>`.
pub fn csv_document(manifest: &RunManifest, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut out = format!("# manifest: {}\n", serde_json::to_string(manifest)?);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let body = w.into_inner().context("flushing CSV")?;
    out.push_str(&String::from_utf8(body)?);
    Ok(out)
}

/// Prefixes CSV bytes produced elsewhere with the manifest line.
pub fn with_manifest_line(manifest: &RunManifest, csv: Vec<u8>) -> Result<String> {
    Ok(format!(
        "# manifest: {}\n{}",
        serde_json::to_string(manifest)?,
        String::from_utf8(csv)?
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(0.0), "0.0");
        let back: f64 = format_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn documents_parse_as_json() {
        let m = RunManifest::new("test", vec!["crnpriv".into()], false);
        let text = json_document(&m, serde_json::json!({"a": [1.5, 2], "b": {"c": null}, "d": []})).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["result"]["a"][0], 1.5);
        assert_eq!(v["manifest"]["command"], "test");
        assert!(v["manifest"].get("started_at").is_none());
    }
}
