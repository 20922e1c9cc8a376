use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const RESULTS: &str = "results.jsonl";

/// One metric row. Rows without a bound carry the `unbounded` flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub timestamp: u64,
    pub config_hash: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub bound: Option<f64>,
    pub flags: Vec<String>,
}

/// Output directory of one subcommand: resolved config, hash, and append-only results.
pub struct RunDir {
    dir: PathBuf,
    experiment: String,
    hash: String,
}

impl RunDir {
    /// Creates `<out>/<command>`, or reopens it if it was written by the same config.
    pub fn open(config: &ExperimentConfig, command: &str) -> Result<Self> {
        let dir = config.output.dir.join(command);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let hash = config.hash();
        let hash_file = dir.join("config.sha256");
        if hash_file.exists() {
            let stored = fs::read_to_string(&hash_file)?;
            if stored.trim() != hash {
                bail!(
                    "{} holds results of a different configuration (hash {}); use another --out",
                    dir.display(),
                    stored.trim()
                );
            }
        } else {
            fs::write(dir.join("config.toml"), config.to_toml())?;
            fs::write(&hash_file, format!("{hash}\n"))?;
        }
        Ok(Self {
            dir,
            experiment: format!("{}/{command}", config.name),
            hash,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn append_jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.path(name);
        drop_torn_tail(&path)?;
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut buf = String::new();
        for row in rows {
            buf.push_str(&serde_json::to_string(row)?);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    /// Rows of a JSONL file; a torn final line from an interrupted write is dropped.
    pub fn read_jsonl<T: DeserializeOwned>(&self, name: &str) -> Result<Vec<T>> {
        read_jsonl(&self.path(name))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        fs::write(self.path(name), serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    pub fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn record(
        &self,
        metric: impl Into<String>,
        value: f64,
        stderr: Option<f64>,
        bound: Option<f64>,
        mut flags: Vec<String>,
    ) -> ResultRecord {
        if bound.is_none() {
            flags.push("unbounded".into());
        }
        ResultRecord {
            experiment: self.experiment.clone(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config_hash: self.hash.clone(),
            metric: metric.into(),
            value,
            stderr,
            bound,
            flags,
        }
    }

    pub fn write_records(&self, records: &[ResultRecord]) -> Result<()> {
        self.append_jsonl(RESULTS, records)
    }
}

/// Cuts a file back to its last newline so appends start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<()> {
    let Ok(bytes) = fs::read(path) else {
        return Ok(());
    };
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(row) => rows.push(row),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(e).with_context(|| format!("{}:{}", path.display(), i + 1)),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torn_last_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        fs::write(&p, "{\"a\":1}\n{\"a\":2}\n{\"a\":").unwrap();
        let rows: Vec<serde_json::Value> = read_jsonl(&p).unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn appends_start_after_a_torn_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::default();
        c.output.dir = dir.path().to_path_buf();
        let run = RunDir::open(&c, "t").unwrap();
        fs::write(run.path("x.jsonl"), "{\"a\":1}\n{\"a\"").unwrap();
        run.append_jsonl("x.jsonl", &[serde_json::json!({"a": 2})]).unwrap();
        assert_eq!(fs::read_to_string(run.path("x.jsonl")).unwrap(), "{\"a\":1}\n{\"a\":2}\n");
    }

    #[test]
    fn changed_config_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::default();
        c.output.dir = dir.path().to_path_buf();
        RunDir::open(&c, "bounds").unwrap();
        RunDir::open(&c, "bounds").unwrap();
        c.seed = 1;
        assert!(RunDir::open(&c, "bounds").is_err());
    }
}
