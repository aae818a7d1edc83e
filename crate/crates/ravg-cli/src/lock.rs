//! Advisory file lock guarding snapshot writes: `<path>.lock` is created
//! exclusively and removed on drop, so two commands cannot write the same
//! snapshot concurrently.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use ravg::{Error, Result};

pub struct SnapshotLock {
    lock_path: PathBuf,
}

impl SnapshotLock {
    pub fn acquire(target: &Path) -> Result<Self> {
        let lock_path = PathBuf::from(format!("{}.lock", target.display()));
        match OpenOptions::new().write(true).create_new(true).open(&lock_path) {
            Ok(_) => Ok(SnapshotLock { lock_path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::InvalidParameter(format!(
                    "snapshot {} is locked by another process (stale? remove {})",
                    target.display(),
                    lock_path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for SnapshotLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock_path);
    }
}
