//! Content-addressed files under the service's data directory.

use crate::ServiceError;
use qpress::imagecore::{load_pgm, store_pgm, RasterImage};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let root = root.into();
        for sub in ["images", "blobs"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join("jobs.log")
    }

    /// Stores the canonical PGM encoding and returns its SHA-256 digest.
    /// The flag is true when the image was not stored before.
    pub fn put_image(&self, image: &RasterImage) -> Result<(String, bool), ServiceError> {
        let bytes = store_pgm(image);
        let id = hex::encode(Sha256::digest(&bytes));
        let path = self.image_path(&id);
        if path.exists() {
            return Ok((id, false));
        }
        write_atomic(&path, &bytes)?;
        Ok((id, true))
    }

    pub fn image_bytes(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        if !is_digest(id) {
            return Err(ServiceError::NotFound(format!("image {id}")));
        }
        match std::fs::read(self.image_path(id)) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ServiceError::NotFound(format!("image {id}"))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn image(&self, id: &str) -> Result<RasterImage, ServiceError> {
        let bytes = self.image_bytes(id)?;
        load_pgm(&bytes).map_err(|e| ServiceError::Internal(format!("stored image {id} is unreadable: {e}")))
    }

    pub fn put_blob(&self, job_id: &str, bytes: &[u8]) -> Result<(), ServiceError> {
        write_atomic(&self.blob_path(job_id), bytes)?;
        Ok(())
    }

    pub fn blob(&self, job_id: &str) -> Result<Vec<u8>, ServiceError> {
        Ok(std::fs::read(self.blob_path(job_id))?)
    }

    fn image_path(&self, id: &str) -> PathBuf {
        self.root.join("images").join(format!("{id}.pgm"))
    }

    fn blob_path(&self, job_id: &str) -> PathBuf {
        self.root.join("blobs").join(format!("{job_id}.qprs"))
    }
}

fn is_digest(id: &str) -> bool {
    id.len() == 64 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Writes to a temp file beside `path`, syncs it, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
