//! Content-addressed storage.
//!
//! Every blob is addressed by the SHA-256 of its bytes. Reads recompute the
//! digest, so a blob altered at rest is reported as [`CasError::Corrupt`]
//! rather than returned.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::hash::{sha256, Hash256, HashParseError};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentId(pub Hash256);

impl ContentId {
    pub fn of(content: &[u8]) -> Self {
        ContentId(sha256(content))
    }

    pub fn digest(&self) -> &Hash256 {
        &self.0
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentId({})", self.0)
    }
}

impl FromStr for ContentId {
    type Err = HashParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Hash256::from_hex(s).map(ContentId)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CasError {
    #[error("content {0} not found")]
    NotFound(ContentId),
    #[error("stored content for {0} does not hash to its id")]
    Corrupt(ContentId),
    #[error("hash collision on {0}")]
    Collision(ContentId),
    #[error("content store I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// A write-once store of immutable blobs. There is no delete or overwrite.
pub trait ContentStore: Send + Sync {
    fn put(&mut self, content: &[u8]) -> Result<ContentId, CasError>;
    fn get(&self, id: &ContentId) -> Result<Vec<u8>, CasError>;
    fn contains(&self, id: &ContentId) -> bool;
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    blobs: HashMap<ContentId, Vec<u8>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ContentStore for MemoryStore {
    fn put(&mut self, content: &[u8]) -> Result<ContentId, CasError> {
        let id = ContentId::of(content);
        match self.blobs.get(&id) {
            Some(existing) if existing != content => Err(CasError::Collision(id)),
            Some(_) => Ok(id),
            None => {
                self.blobs.insert(id, content.to_vec());
                Ok(id)
            }
        }
    }

    fn get(&self, id: &ContentId) -> Result<Vec<u8>, CasError> {
        let blob = self.blobs.get(id).ok_or(CasError::NotFound(*id))?;
        if ContentId::of(blob) != *id {
            return Err(CasError::Corrupt(*id));
        }
        Ok(blob.clone())
    }

    fn contains(&self, id: &ContentId) -> bool {
        self.blobs.contains_key(id)
    }

    fn len(&self) -> usize {
        self.blobs.len()
    }
}

/// One file per blob, named by the lowercase hex content id.
#[derive(Debug, Clone)]
pub struct DirStore {
    dir: PathBuf,
    count: usize,
}

impl DirStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CasError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let count = fs::read_dir(&dir)?
            .filter_map(Result::ok)
            .filter(|e| {
                e.file_name()
                    .to_str()
                    .is_some_and(|n| Hash256::from_hex(n).is_ok())
            })
            .count();
        Ok(DirStore { dir, count })
    }

    pub fn path_of(&self, id: &ContentId) -> PathBuf {
        self.dir.join(id.to_string())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl ContentStore for DirStore {
    fn put(&mut self, content: &[u8]) -> Result<ContentId, CasError> {
        let id = ContentId::of(content);
        let path = self.path_of(&id);
        if path.exists() {
            return match fs::read(&path)? {
                existing if existing == content => Ok(id),
                existing if ContentId::of(&existing) == id => Err(CasError::Collision(id)),
                _ => Err(CasError::Corrupt(id)),
            };
        }
        let tmp = self.dir.join(format!(".{id}.tmp"));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(content)?;
        file.sync_all()?;
        fs::rename(&tmp, &path)?;
        self.count += 1;
        Ok(id)
    }

    fn get(&self, id: &ContentId) -> Result<Vec<u8>, CasError> {
        let blob = match fs::read(self.path_of(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CasError::NotFound(*id))
            }
            Err(e) => return Err(e.into()),
        };
        if ContentId::of(&blob) != *id {
            return Err(CasError::Corrupt(*id));
        }
        Ok(blob)
    }

    fn contains(&self, id: &ContentId) -> bool {
        self.path_of(id).exists()
    }

    fn len(&self) -> usize {
        self.count
    }
}
