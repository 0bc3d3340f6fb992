//! Run manifests: what ran, with which config and inputs, producing which
//! artifacts. Written atomically (temp file + rename) at the end of a run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    /// Input path -> SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
    pub started: String,
    pub finished: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> RunManifest {
        RunManifest {
            command: command.into(),
            config: BTreeMap::new(),
            seeds: Vec::new(),
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
            started: now_utc(),
            finished: String::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    pub fn record_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    /// Stamp the end time and write. Refuses to record artifacts that do
    /// not exist on disk.
    pub fn finish_and_write(mut self, path: &Path) -> Result<()> {
        for artifact in &self.artifacts {
            if !Path::new(artifact).exists() {
                return Err(Error::Data(format!(
                    "manifest names missing artifact '{artifact}'"
                )));
            }
        }
        self.finished = now_utc();
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Directory name component for a fresh run: timestamp plus seed.
pub fn run_dir_name(seed: u64) -> String {
    format!(
        "{}-seed{}",
        chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ"),
        seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_changes_iff_contents_change() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        std::fs::write(&a, "hello").unwrap();
        let h1 = sha256_file(&a).unwrap();
        let h2 = sha256_file(&a).unwrap();
        assert_eq!(h1, h2);
        std::fs::write(&a, "hello!").unwrap();
        assert_ne!(sha256_file(&a).unwrap(), h1);
    }

    #[test]
    fn sha256_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("abc.txt");
        std::fs::write(&a, "abc").unwrap();
        assert_eq!(
            sha256_file(&a).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trips_and_checks_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = dir.path().join("out.bin");
        std::fs::write(&artifact, "x").unwrap();
        let mut m = RunManifest::new("zcounts");
        m.seeds.push(7);
        m.record_input(&artifact).unwrap();
        m.record_artifact(&artifact);
        let path = dir.path().join("manifest.json");
        m.finish_and_write(&path).unwrap();
        let loaded: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(loaded.command, "zcounts");
        assert_eq!(loaded.seeds, vec![7]);
        assert!(!loaded.finished.is_empty());
    }

    #[test]
    fn missing_artifact_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("train");
        m.record_artifact(&dir.path().join("never-written.ckpt"));
        assert!(m.finish_and_write(&dir.path().join("m.json")).is_err());
    }
}
