use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use noimu::kv::KeyValues;
use noimu::{Error, Result};

use crate::settings::{Settings, RUN_PREFIX};

pub const MANIFEST: &str = "manifest.txt";

/// A freshly created output directory and its manifest.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    manifest: KeyValues,
    outputs: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn meta(key: &str) -> String {
    format!("{RUN_PREFIX}{key}")
}

impl RunDir {
    /// Creates the run directory, refusing one that already exists, and
    /// records the resolved configuration.
    pub fn create(settings: &Settings, command: &str, inputs: &[&Path]) -> Result<Self> {
        let path = settings.out()?.to_path_buf();
        if path.exists() {
            return Err(Error::Config(format!("{} already exists; choose a new run directory", path.display())));
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::create_dir(&path).map_err(|e| Error::io(&path, e))?;
        let mut manifest = settings.kv.clone();
        let hash = crc32fast::hash(settings.kv.to_string().as_bytes());
        manifest.set(&meta("command"), command);
        manifest.set(&meta("version"), env!("CARGO_PKG_VERSION"));
        manifest.set(&meta("config_hash"), format!("{hash:08x}"));
        manifest.set(&meta("seed"), settings.seed()?);
        if !inputs.is_empty() {
            let list: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
            manifest.set(&meta("inputs"), list.join(","));
        }
        manifest.set(&meta("started_unix_s"), unix_now());
        Ok(Self { path, manifest, outputs: Vec::new() })
    }

    /// Path of an output file, remembered for the manifest.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.path.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.output(name);
        std::fs::write(&p, contents).map_err(|e| Error::io(p, e))
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.set(&meta(key), value);
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.set(&meta("outputs"), self.outputs.join(","));
        self.manifest.set(&meta("finished_unix_s"), unix_now());
        self.manifest.save(&self.path.join(MANIFEST))?;
        Ok(self.path)
    }

    /// Removes a run that failed before producing anything usable.
    pub fn discard(self) {
        let _ = std::fs::remove_dir_all(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_existing_directory() {
        let dir = tempfile::tempdir().unwrap();
        let settings = Settings { kv: KeyValues::new(), out: Some(dir.path().to_path_buf()) };
        assert!(matches!(RunDir::create(&settings, "x", &[]), Err(Error::Config(_))));
        let settings = Settings { kv: KeyValues::new(), out: Some(dir.path().join("a/b")) };
        let mut run = RunDir::create(&settings, "x", &[]).unwrap();
        run.write("f.txt", "1").unwrap();
        let path = run.finish().unwrap();
        let m = KeyValues::load(&path.join(MANIFEST)).unwrap();
        assert_eq!(m.get("run.outputs"), Some("f.txt"));
        assert_eq!(m.get("run.command"), Some("x"));
    }
}
