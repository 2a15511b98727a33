//! Content-addressed storage for encrypted payloads.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::envelope::EncryptedPayload;
use crate::error::{LedgerError, Result};

/// Stands in for the shared storage parties publish payloads to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PayloadStore {
    items: BTreeMap<String, Vec<u8>>,
}

impl PayloadStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores the payload and returns its hash.
    pub fn put(&mut self, payload: &EncryptedPayload) -> String {
        let hash = payload.hash_hex();
        self.items.insert(hash.clone(), payload.to_bytes());
        hash
    }

    pub fn get(&self, hash: &str) -> Result<EncryptedPayload> {
        let bytes = self
            .items
            .get(hash)
            .ok_or_else(|| LedgerError::MissingPayload(hash.to_string()))?;
        EncryptedPayload::from_bytes(bytes)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Writes every payload as `<hash>.bin` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (hash, bytes) in &self.items {
            fs::write(dir.join(format!("{hash}.bin")), bytes)?;
        }
        Ok(())
    }

    /// Loads `<hash>.bin` files, rejecting any whose content does not hash to its name.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut items = BTreeMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(hash) = name.strip_suffix(".bin") else {
                continue;
            };
            let bytes = fs::read(&path)?;
            if EncryptedPayload::from_bytes(&bytes)?.hash_hex() != hash {
                return Err(LedgerError::Malformed(format!("{name} does not match its hash")));
            }
            items.insert(hash.to_string(), bytes);
        }
        Ok(Self { items })
    }
}
