use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::Format;

/// Keys that carry timing or host details and are ignored when comparing runs.
pub const VOLATILE_KEYS: [&str; 2] = ["runtime", "wall_time_s"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step {
    pub name: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Runtime {
    pub jobs: usize,
    pub out: Option<String>,
    pub steps: Vec<Step>,
}

/// Everything needed to reproduce an output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub runtime: Runtime,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, jobs: usize, out: Option<&Path>) -> Self {
        Self {
            tool: "terank".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            runtime: Runtime {
                jobs,
                out: out.map(|p| p.display().to_string()),
                steps: Vec::new(),
            },
        }
    }

    pub fn add_input(&mut self, name: impl Into<String>, sha256: String) {
        self.inputs.push(InputDigest {
            name: name.into(),
            sha256,
        });
    }

    /// Records the time since `start` as step `name`.
    pub fn record_step(&mut self, name: &str, start: Instant) {
        self.runtime.steps.push(Step {
            name: name.to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Removes every [`VOLATILE_KEYS`] entry, at any depth.
pub fn strip_volatile(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for key in VOLATILE_KEYS {
                map.remove(key);
            }
            map.values_mut().for_each(strip_volatile);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_volatile),
        _ => {}
    }
}

/// Digest of a JSON document with timing removed, so reruns hash equal.
pub fn stable_digest(value: &Value) -> String {
    let mut v = value.clone();
    strip_volatile(&mut v);
    sha256_hex(v.to_string().as_bytes())
}

/// `{ "manifest": .., "records": [..] }` document or plain CSV rows.
#[derive(Debug, Serialize, Deserialize)]
pub struct RecordsFile<T> {
    pub manifest: RunManifest,
    pub records: Vec<T>,
}

#[derive(Serialize)]
struct RecordsOut<'a, T> {
    manifest: &'a RunManifest,
    records: &'a [T],
}

pub fn write_records<T: Serialize>(
    manifest: &RunManifest,
    records: &[T],
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(io::BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    match format {
        Format::Json => {
            let doc = RecordsOut { manifest, records };
            serde_json::to_writer_pretty(&mut sink, &doc)?;
            writeln!(sink)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut sink);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    sink.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn timing_does_not_change_the_digest() {
        let a = json!({"runtime": {"jobs": 1}, "records": [{"score": 1.0, "wall_time_s": 0.1}]});
        let b = json!({"runtime": {"jobs": 8}, "records": [{"score": 1.0, "wall_time_s": 9.0}]});
        let c = json!({"runtime": {"jobs": 8}, "records": [{"score": 2.0, "wall_time_s": 9.0}]});
        assert_eq!(stable_digest(&a), stable_digest(&b));
        assert_ne!(stable_digest(&a), stable_digest(&c));
    }
}
