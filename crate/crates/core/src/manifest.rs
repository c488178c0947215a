//! Run manifest written next to every output.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InputHash {
    pub path: PathBuf,
    /// Hex SHA-256 of the file contents.
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Effective settings after merging flags, config file and defaults.
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub started: String,
    pub finished: Option<String>,
}

pub fn hash_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config: serde_json::Value, inputs: &[&Path]) -> io::Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.to_path_buf(),
                    sha256: hash_file(p)?,
                })
            })
            .collect::<io::Result<_>>()?;
        Ok(RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            inputs,
            started: now(),
            finished: None,
        })
    }

    pub fn finish(&mut self) {
        self.finished = Some(now());
    }

    /// True when both runs had the same command, settings and inputs.
    pub fn same_run(&self, other: &RunManifest) -> bool {
        self.command == other.command
            && self.version == other.version
            && self.seed == other.seed
            && self.config == other.config
            && self.inputs == other.inputs
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        let f = File::create(&path)?;
        serde_json::to_writer_pretty(f, self).map_err(io::Error::other)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let f = File::open(path)?;
        serde_json::from_reader(f).map_err(io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_are_stable_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "x,y\n1,2\n").unwrap();
        let h = hash_file(&p).unwrap();
        assert_eq!(h.len(), 64);
        assert_eq!(h, hash_file(&p).unwrap());

        let mut m = RunManifest::start("design", 7, serde_json::json!({"a": 1}), &[&p]).unwrap();
        m.finish();
        let out = m.write(dir.path()).unwrap();
        let back = RunManifest::read(&out).unwrap();
        assert_eq!(back, m);

        let again = RunManifest::start("design", 7, serde_json::json!({"a": 1}), &[&p]).unwrap();
        assert!(again.same_run(&m));
        std::fs::write(&p, "x,y\n1,3\n").unwrap();
        let changed = RunManifest::start("design", 7, serde_json::json!({"a": 1}), &[&p]).unwrap();
        assert!(!changed.same_run(&m));
    }
}
