//! Artifact store.
//!
//! ```text
//! <root>/.lock
//! <root>/<network hash[..16]>/<command>/<input hash[..16]>/manifest.json
//! <root>/<network hash[..16]>/<command>.latest      path of the newest run
//! ```
//!
//! The input hash covers the command, its parameters, the seed, the config
//! hash and the content of every input file, so rerunning with different
//! inputs lands in a new directory and identical reruns rewrite identical
//! bytes.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{file_sha256, path_sha256, read_json, sha256_hex, write_atomic, write_json};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: Vec<InputRecord>,
    pub params: BTreeMap<String, String>,
    pub outputs: Vec<OutputRecord>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_hash,
            inputs: Vec::new(),
            params: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = path_sha256(path)?;
        self.inputs.push(InputRecord { role: role.into(), path: path.to_path_buf(), sha256 });
        Ok(())
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.into(), value.to_string());
    }

    /// Hash of everything that determines the outputs. Input paths are left
    /// out; only their content counts.
    pub fn input_hash(&self) -> String {
        let mut s = format!("{}\n{}\n{}\n", self.command, self.seed, self.config_hash);
        for i in &self.inputs {
            s.push_str(&format!("{}={}\n", i.role, i.sha256));
        }
        for (k, v) in &self.params {
            s.push_str(&format!("{k}:{v}\n"));
        }
        sha256_hex(s.as_bytes())
    }

    /// Records every regular file in `dir` other than the manifest itself
    /// and writes the manifest.
    pub fn finish(mut self, dir: &Path) -> Result<Manifest> {
        let mut files: Vec<PathBuf> = walk(dir)?
            .into_iter()
            .filter(|p| p.file_name().is_some_and(|n| n != MANIFEST && n != LOCK))
            .collect();
        files.sort();
        self.outputs = files
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(dir).expect("walked under dir").to_string_lossy().replace('\\', "/");
                Ok(OutputRecord { file: rel, sha256: file_sha256(p)? })
            })
            .collect::<Result<_>>()?;
        write_json(&dir.join(MANIFEST), &self)?;
        Ok(self)
    }

    pub fn load(dir: &Path) -> Result<Manifest> {
        read_json(&dir.join(MANIFEST))
    }
}

fn walk(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else if p.is_file() && p.extension().is_none_or(|x| x != "tmp") {
            out.push(p);
        }
    }
    Ok(out)
}

/// Held while a command writes into a store; released on drop.
#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
}

impl StoreLock {
    pub fn acquire(dir: &Path) -> Result<StoreLock> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(StoreLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn lock(&self) -> Result<StoreLock> {
        StoreLock::acquire(&self.root)
    }

    pub fn run_dir(&self, network_hash: &str, command: &str, input_hash: &str) -> PathBuf {
        self.root.join(short(network_hash)).join(command).join(short(input_hash))
    }

    fn latest_file(&self, network_hash: &str, kind: &str) -> PathBuf {
        self.root.join(short(network_hash)).join(format!("{kind}.latest"))
    }

    pub fn set_latest(&self, network_hash: &str, kind: &str, dir: &Path) -> Result<()> {
        let text = dir.to_string_lossy().into_owned();
        write_atomic(&self.latest_file(network_hash, kind), |w| writeln!(w, "{text}"))
    }

    pub fn latest(&self, network_hash: &str, kind: &str) -> Result<PathBuf> {
        let f = self.latest_file(network_hash, kind);
        let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
        Ok(PathBuf::from(text.trim()))
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(16)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = StoreLock::acquire(dir.path()).unwrap();
        assert!(matches!(StoreLock::acquire(dir.path()), Err(Error::Locked(_))));
        drop(a);
        StoreLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn input_hash_ignores_paths_but_not_content() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        std::fs::write(&a, "x").unwrap();
        std::fs::write(&b, "x").unwrap();
        let mut m1 = Manifest::new("fit", 1, "c".into());
        m1.input("samples", &a).unwrap();
        let mut m2 = Manifest::new("fit", 1, "c".into());
        m2.input("samples", &b).unwrap();
        assert_eq!(m1.input_hash(), m2.input_hash());
        std::fs::write(&b, "y").unwrap();
        let mut m3 = Manifest::new("fit", 1, "c".into());
        m3.input("samples", &b).unwrap();
        assert_ne!(m1.input_hash(), m3.input_hash());
        let mut m4 = m1.clone();
        m4.seed = 2;
        assert_ne!(m1.input_hash(), m4.input_hash());
    }
}
