//! Content-addressed blob storage, kept apart from the event log.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::Result;
use crate::ids::ImageId;

pub trait BlobStore: Send + Sync {
    /// Stores `bytes` under `id`. Storing the same id twice is a no-op.
    fn put(&self, id: &ImageId, bytes: &[u8]) -> Result<()>;
    fn get(&self, id: &ImageId) -> Result<Option<Vec<u8>>>;
}

/// `<root>/<first two hex chars>/<full id>`.
#[derive(Debug, Clone)]
pub struct FsBlobStore {
    root: PathBuf,
}

impl FsBlobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, id: &ImageId) -> PathBuf {
        self.root.join(&id.as_str()[..2]).join(id.as_str())
    }
}

impl BlobStore for FsBlobStore {
    fn put(&self, id: &ImageId, bytes: &[u8]) -> Result<()> {
        let path = self.path_for(id);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("blob path has a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile_in(dir)?;
        tmp.1.write_all(bytes)?;
        tmp.1.sync_all()?;
        drop(tmp.1);
        // rename is atomic; a concurrent writer of the same id wrote the same bytes
        fs::rename(&tmp.0, &path)?;
        Ok(())
    }

    fn get(&self, id: &ImageId) -> Result<Option<Vec<u8>>> {
        match fs::read(self.path_for(id)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

fn tempfile_in(dir: &Path) -> io::Result<(PathBuf, fs::File)> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    loop {
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => return Ok((path, f)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Default)]
pub struct MemBlobStore {
    blobs: Mutex<HashMap<ImageId, Vec<u8>>>,
}

impl BlobStore for MemBlobStore {
    fn put(&self, id: &ImageId, bytes: &[u8]) -> Result<()> {
        self.blobs
            .lock()
            .unwrap()
            .entry(id.clone())
            .or_insert_with(|| bytes.to_vec());
        Ok(())
    }

    fn get(&self, id: &ImageId) -> Result<Option<Vec<u8>>> {
        Ok(self.blobs.lock().unwrap().get(id).cloned())
    }
}
