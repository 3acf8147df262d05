//! Run manifests: resolved settings, a hash over them, and input digests.
//! No timestamps, so identical reruns produce identical manifests.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Read;
use std::path::{Path, PathBuf};

pub struct Manifest {
    command: &'static str,
    settings: BTreeMap<String, String>,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            settings: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl Display) {
        self.settings.insert(key.to_string(), value.to_string());
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.push((name.to_string(), path.to_path_buf()));
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Write `<command>_manifest.txt` into `dir` and return its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, String> {
        let mut settings_block = String::new();
        for (key, value) in &self.settings {
            settings_block.push_str(&format!("setting.{key}={value}\n"));
        }
        let config_hash = hex_digest(settings_block.as_bytes());

        let mut text = String::new();
        text.push_str(&format!("tool_version={}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("command={}\n", self.command));
        text.push_str(&format!("config_hash={config_hash}\n"));
        text.push_str(&settings_block);
        for (name, path) in &self.inputs {
            let digest = sha256_file(path)?;
            text.push_str(&format!("input.{name}.path={}\n", path.display()));
            text.push_str(&format!("input.{name}.sha256={digest}\n"));
        }
        for (idx, name) in self.outputs.iter().enumerate() {
            text.push_str(&format!("output.{idx}={name}\n"));
        }
        let path = dir.join(format!("{}_manifest.txt", self.command));
        std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(path)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, String> {
    let mut file =
        std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buffer = [0u8; 65536];
    loop {
        let n = file
            .read(&mut buffer)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buffer[..n]);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
