use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, RunConfig};

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let mut file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| PipelineError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    /// As configured for external inputs; relative to the output directory
    /// for files a stage wrote.
    pub path: String,
    pub sha256: String,
}

/// What a stage read and wrote, and under which configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub config: RunConfig,
}

/// Output directory of one stage; remembers every file written.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
    inputs: Vec<FileDigest>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(root).map_err(|e| PipelineError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new(), inputs: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Records an external input (path as configured).
    pub fn record_input(&mut self, role: &str, path: &Path) -> Result<(), PipelineError> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileDigest { role: role.into(), path: path.display().to_string(), sha256 });
        Ok(())
    }

    /// Records an input produced by an earlier stage in this directory.
    pub fn record_local_input(&mut self, role: &str, name: &str) -> Result<(), PipelineError> {
        let sha256 = sha256_file(&self.path(name))?;
        self.inputs.push(FileDigest { role: role.into(), path: name.into(), sha256 });
        Ok(())
    }

    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<(), PipelineError>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let file = fs::File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| PipelineError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::format(self.path(name), e))?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }

    pub fn write_json_compact<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let text = serde_json::to_string(value).map_err(|e| PipelineError::format(self.path(name), e))?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }

    /// Writes a delimited table from rows that serialize to flat records.
    pub fn write_csv<T: Serialize>(&mut self, name: &str, header: &[&str], rows: &[T]) -> Result<(), PipelineError> {
        let path = self.path(name);
        let mut buf = Vec::new();
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
            w.write_record(header).map_err(|e| PipelineError::format(&path, e))?;
            for r in rows {
                w.serialize(r).map_err(|e| PipelineError::format(&path, e))?;
            }
            w.flush().map_err(|e| PipelineError::io(&path, e))?;
        }
        self.write_with(name, |w| w.write_all(&buf))
    }

    /// Writes `run_config.toml` and `provenance_<stage>.json`.
    pub fn finish(mut self, stage: &str, cfg: &RunConfig) -> Result<Vec<String>, PipelineError> {
        let toml = cfg.to_toml()?;
        self.write_with("run_config.toml", |w| w.write_all(toml.as_bytes()))?;
        let outputs = self
            .written
            .iter()
            .map(|name| {
                Ok(FileDigest { role: "output".into(), path: name.clone(), sha256: sha256_file(&self.path(name))? })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let prov = Provenance {
            stage: stage.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            master_seed: cfg.master_seed,
            inputs: std::mem::take(&mut self.inputs),
            outputs,
            config: cfg.clone(),
        };
        self.write_json(&format!("provenance_{stage}.json"), &prov)?;
        Ok(self.written)
    }
}
