//! Output directory handling: artifact writes, the run log and the
//! checksum manifest.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "artifacts.sha256";
pub const LOG: &str = "run.log";

pub struct RunDir {
    pub path: PathBuf,
    /// Mirror log lines to stderr.
    pub echo: bool,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), echo: true })
    }

    /// Opens an existing directory without creating it.
    pub fn open(path: &Path) -> Result<Self> {
        if !path.is_dir() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Ok(Self { path: path.to_path_buf(), echo: true })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.file(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    }

    /// Reads a required artifact; a missing file is reported by name.
    pub fn read(&self, name: &str) -> Result<String> {
        let p = self.file(name);
        if !p.is_file() {
            return Err(Error::MissingArtifact(p));
        }
        fs::read_to_string(&p).map_err(|e| Error::io(p, e))
    }

    /// Starts a fresh log.
    pub fn reset_log(&self) -> Result<()> {
        self.write(LOG, "")
    }

    pub fn log(&self, line: impl AsRef<str>) -> Result<()> {
        let line = line.as_ref();
        if self.echo {
            eprintln!("{line}");
        }
        let p = self.file(LOG);
        let mut f = OpenOptions::new().create(true).append(true).open(&p).map_err(|e| Error::io(&p, e))?;
        writeln!(f, "{line}").map_err(|e| Error::io(&p, e))
    }

    /// Rewrites the manifest over every regular file in the directory, in
    /// `sha256sum` format and name order.
    pub fn seal(&self) -> Result<String> {
        let mut names: Vec<String> = fs::read_dir(&self.path)
            .map_err(|e| Error::io(&self.path, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n != MANIFEST)
            .collect();
        names.sort();
        let mut out = String::new();
        for n in names {
            let p = self.file(&n);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            out.push_str(&format!("{}  {n}\n", hex::encode(Sha256::digest(&bytes))));
        }
        self.write(MANIFEST, &out)?;
        Ok(out)
    }
}
