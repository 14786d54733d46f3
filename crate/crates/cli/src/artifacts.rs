//! Deterministic experiment artifacts: full-precision CSVs and a manifest
//! with content hashes. Nothing written here may depend on wall time or
//! thread schedule; re-running a command must reproduce every byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Format a float with 17 significant digits so readers can re-verify
/// oracle values bit for bit.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

/// An output directory collecting CSVs plus a manifest.
pub struct ArtifactDir {
    root: PathBuf,
    /// (key, value) pairs echoed into the manifest, insertion order.
    entries: Vec<(String, String)>,
    /// Relative file names written so far.
    files: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn record(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn record_float(&mut self, key: &str, value: f64) {
        self.record(key, full(value));
    }

    /// Write a CSV file with the given header and rows.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
    ) -> std::io::Result<()> {
        let mut body = String::new();
        body.push_str(header);
        body.push('\n');
        for row in rows {
            body.push_str(&row);
            body.push('\n');
        }
        self.write_file(name, body.as_bytes())
    }

    pub fn write_file(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Write the manifest: config echo first, then one content-hash line per
    /// artifact. Must be called last.
    pub fn finalize(mut self) -> std::io::Result<PathBuf> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        self.files.sort();
        for name in &self.files {
            let bytes = fs::read(self.root.join(name))?;
            let digest = Sha256::digest(&bytes);
            out.push_str(&format!("sha256:{name}={}\n", hex(&digest)));
        }
        let path = self.root.join("manifest.txt");
        let mut f = fs::File::create(&path)?;
        f.write_all(out.as_bytes())?;
        Ok(path)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
