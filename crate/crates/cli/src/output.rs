use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde_json::{json, Value};

/// Where results go and whether the timestamp line is written.
#[derive(Debug, Clone)]
pub struct Sink {
    pub out: Option<PathBuf>,
    pub deterministic: bool,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Sink {
    /// Wrap `result` in an envelope naming the command.
    pub fn json(&self, command: &str, result: Value) -> anyhow::Result<()> {
        let mut doc = serde_json::Map::new();
        if !self.deterministic {
            doc.insert("generated_unix".into(), json!(now()));
        }
        doc.insert("command".into(), json!(command));
        doc.insert("result".into(), result);
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.emit(text.as_bytes())
    }

    /// CSV body, preceded by a `# generated_unix=` comment line unless
    /// deterministic.
    pub fn csv(&self, body: &[u8]) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        if !self.deterministic {
            writeln!(buf, "# generated_unix={}", now())?;
        }
        buf.extend_from_slice(body);
        self.emit(&buf)
    }

    fn emit(&self, bytes: &[u8]) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(bytes)?;
                Ok(stdout.flush()?)
            }
        }
    }
}
