//! Run manifests. Every subcommand appends one line to `manifest.log` in
//! its output directory: binary version, subcommand, a hash of the
//! effective semantic configuration, and content hashes of every input it
//! read. No timestamps and no absolute paths go in, so two runs of the
//! same pipeline on the same inputs write byte-identical lines wherever
//! they land.

use md5::{Digest, Md5};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.log";

pub fn hex_md5(data: &[u8]) -> String {
    let digest = Md5::digest(data);
    digest.iter().fold(String::new(), |mut out, byte| {
        let _ = write!(out, "{byte:02x}");
        out
    })
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    let data = std::fs::read(path)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    Ok(hex_md5(&data))
}

/// Directory hash: md5 over the sorted list of `relative-path:content-md5`
/// lines, so the hash is independent of where the tree sits on disk.
fn hash_dir(root: &Path) -> Result<String, CliError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let listing = std::fs::read_dir(&dir)
            .map_err(|e| CliError::Domain(format!("{}: {e}", dir.display())))?;
        for entry in listing {
            let entry = entry.map_err(|e| CliError::Domain(e.to_string()))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let relative = path
                    .strip_prefix(root)
                    .expect("walked paths sit under the root")
                    .to_string_lossy()
                    .replace('\\', "/");
                entries.push((relative, hash_file(&path)?));
            }
        }
    }
    entries.sort();
    let mut combined = String::new();
    for (relative, digest) in entries {
        let _ = writeln!(combined, "{relative}:{digest}");
    }
    Ok(hex_md5(combined.as_bytes()))
}

/// One manifest line under construction.
pub struct Manifest {
    command: &'static str,
    config_repr: String,
    inputs: Vec<(String, String)>,
}

impl Manifest {
    /// `config_repr` is the subcommand's effective semantic configuration
    /// rendered as a stable string — parameters that change results, never
    /// paths or times.
    pub fn new(command: &'static str, config_repr: String) -> Self {
        Manifest {
            command,
            config_repr,
            inputs: Vec::new(),
        }
    }

    pub fn input_file(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        let digest = hash_file(path)?;
        self.inputs.push((name.to_string(), digest));
        Ok(())
    }

    pub fn input_dir(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        let digest = hash_dir(path)?;
        self.inputs.push((name.to_string(), digest));
        Ok(())
    }

    pub fn line(&self) -> String {
        let mut line = format!(
            "mimir {} {} config={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            hex_md5(self.config_repr.as_bytes())
        );
        for (name, digest) in &self.inputs {
            let _ = write!(line, " {name}={digest}");
        }
        line
    }

    /// Append the line to `manifest.log` next to (or inside) `out`.
    pub fn append(&self, out: &Path, out_is_dir: bool) -> Result<(), CliError> {
        let path = manifest_path(out, out_is_dir);
        let mut text = self.line();
        text.push('\n');
        use std::io::Write as _;
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        file.write_all(text.as_bytes())
            .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        log::info!("manifest: {}", self.line());
        Ok(())
    }
}

/// Directory outputs keep the log inside; file outputs keep it beside.
fn manifest_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join(MANIFEST_FILE)
    } else {
        match out.parent() {
            Some(parent) if parent != Path::new("") => parent.join(MANIFEST_FILE),
            _ => PathBuf::from(MANIFEST_FILE),
        }
    }
}
