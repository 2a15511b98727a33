//! Per-party signing and encryption keys.

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::error::{LedgerError, Result};

/// A party's signing pair and its key-agreement pair for hybrid encryption.
pub struct KeyPair {
    signing: SigningKey,
    encryption: StaticSecret,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self {
            signing: SigningKey::generate(rng),
            encryption: StaticSecret::random_from_rng(rng),
        }
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }

    pub fn encryption_public(&self) -> PublicKey {
        PublicKey::from(&self.encryption)
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        self.signing.sign(message)
    }

    pub(crate) fn encryption_secret(&self) -> &StaticSecret {
        &self.encryption
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("verifying", &hex::encode(self.verifying_key().as_bytes()))
            .finish_non_exhaustive()
    }
}

pub(crate) fn decode_32(text: &str, what: &'static str) -> Result<[u8; 32]> {
    let bytes = hex::decode(text).map_err(|e| LedgerError::Malformed(format!("{what}: {e}")))?;
    bytes
        .try_into()
        .map_err(|_| LedgerError::Malformed(format!("{what}: expected 32 bytes")))
}

pub fn parse_verifying_key(text: &str) -> Result<VerifyingKey> {
    VerifyingKey::from_bytes(&decode_32(text, "verifying key")?)
        .map_err(|_| LedgerError::Malformed("verifying key is not a curve point".into()))
}

pub fn parse_encryption_key(text: &str) -> Result<PublicKey> {
    Ok(PublicKey::from(decode_32(text, "encryption key")?))
}
