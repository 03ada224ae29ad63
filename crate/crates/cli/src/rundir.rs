//! Output directories with a per-run lock file.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

pub const LOCK_FILE: &str = ".lock";

/// Output directory held for the lifetime of the value.
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Create `path` if needed and take its lock. Fails if another run holds it.
    pub fn acquire(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path)?;
        let lock = path.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Usage(format!(
                    "output directory {} is locked by another run (delete {} if it is stale)",
                    path.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: impl AsRef<Path>) -> PathBuf {
        self.path.join(name)
    }

    pub fn create(&self, name: impl AsRef<Path>) -> Result<BufWriter<File>, CliError> {
        let path = self.file(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn write(&self, name: impl AsRef<Path>, contents: &str) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        w.write_all(contents.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.path.join(LOCK_FILE));
    }
}
