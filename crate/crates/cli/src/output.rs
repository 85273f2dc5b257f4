use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped on every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Meta {
    /// `config` must exclude anything that may not change results (output
    /// paths, thread count).
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Meta {
        let canonical = serde_json::to_string(&(command, seed, config)).expect("config serializes");
        Meta {
            tool: "poseval",
            version: VERSION,
            command: command.to_string(),
            seed,
            config_sha256: hex::encode(Sha256::digest(canonical.as_bytes())),
        }
    }

    pub fn csv_header(&self) -> String {
        format!(
            "# {} {}\n# command: {}\n# seed: {}\n# config_sha256: {}\n",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }

    /// Pretty JSON of `{"meta": ..., <key>: payload}`.
    pub fn json(&self, key: &str, payload: &impl Serialize) -> anyhow::Result<String> {
        let mut map = serde_json::Map::new();
        map.insert("meta".into(), serde_json::to_value(self)?);
        map.insert(key.into(), serde_json::to_value(payload)?);
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(())
}

/// CSV body with a metadata header.
pub struct CsvOut {
    meta: Meta,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(meta: &Meta, header: &[&str]) -> anyhow::Result<CsvOut> {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(CsvOut {
            meta: meta.clone(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> anyhow::Result<Vec<u8>> {
        let body = self.writer.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        let mut out = self.meta.csv_header().into_bytes();
        out.extend(body);
        Ok(out)
    }
}

/// Shortest round-trip decimal; `-0` prints as `0`.
pub fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Atomic file write when a path is given, stdout otherwise.
pub fn deliver(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}
