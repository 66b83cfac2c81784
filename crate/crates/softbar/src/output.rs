//! Output directories, the run lockfile and file writers.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;

pub const LOCK_FILE: &str = ".softbar.lock";

/// An output directory held exclusively for the lifetime of the value.
#[derive(Debug)]
pub struct OutputDir {
    path: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    /// Creates `path` if needed and takes its lock.
    pub fn acquire(path: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))?;
        let lock = path.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(HarnessError::Locked(path.display().to_string()));
            }
            Err(e) => return Err(HarnessError::io(&lock, e)),
        }
        Ok(Self {
            path: path.to_path_buf(),
            lock,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn csv(&self, name: &str) -> Result<csv::Writer<File>, HarnessError> {
        let p = self.file(name);
        let f = File::create(&p).map_err(|e| HarnessError::io(&p, e))?;
        Ok(csv::Writer::from_writer(f))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), HarnessError> {
        let p = self.file(name);
        fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
