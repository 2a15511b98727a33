//! Hybrid encryption of gradient payloads.
//!
//! A fresh symmetric key encrypts the payload with ChaCha20-Poly1305. That
//! key is wrapped for the recipient with a key derived from an X25519
//! exchange between a one-off sender key and the recipient's public key.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use fairdl_core::numerics::SparseUpdate;
use fairdl_core::Scalar;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::error::{LedgerError, Result};
use crate::keys::KeyPair;

const KEK_LABEL: &[u8] = b"fairdl envelope key wrap v1";

/// A fresh symmetric key, revealed only during audits.
#[derive(Clone, PartialEq, Eq)]
pub struct FreshKey([u8; 32]);

impl FreshKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl std::fmt::Debug for FreshKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FreshKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedPayload {
    pub ephemeral_public: [u8; 32],
    pub wrap_nonce: [u8; 12],
    /// The fresh key encrypted for the recipient, tag included.
    pub wrapped_key: Vec<u8>,
    pub nonce: [u8; 12],
    /// Payload ciphertext with its authentication tag.
    pub ciphertext: Vec<u8>,
}

impl EncryptedPayload {
    /// Length-prefixed byte encoding; the stored file and the hashed content.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.wrapped_key.len() + self.ciphertext.len());
        out.extend_from_slice(&self.ephemeral_public);
        out.extend_from_slice(&self.wrap_nonce);
        out.extend_from_slice(&(self.wrapped_key.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.wrapped_key);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&(self.ciphertext.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let ephemeral_public = cur.array::<32>()?;
        let wrap_nonce = cur.array::<12>()?;
        let n = cur.len_prefix()?;
        let wrapped_key = cur.take(n)?.to_vec();
        let nonce = cur.array::<12>()?;
        let n = cur.len_prefix()?;
        let ciphertext = cur.take(n)?.to_vec();
        if cur.pos != bytes.len() {
            return Err(LedgerError::Malformed("trailing bytes after payload".into()));
        }
        Ok(Self {
            ephemeral_public,
            wrap_nonce,
            wrapped_key,
            nonce,
            ciphertext,
        })
    }

    /// SHA-256 of [`Self::to_bytes`], lowercase hex.
    pub fn hash_hex(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    /// Recovers the fresh key with the recipient's secret.
    pub fn unwrap_key(&self, recipient: &KeyPair) -> Result<FreshKey> {
        let kek = key_encryption_key(
            recipient.encryption_secret(),
            &PublicKey::from(self.ephemeral_public),
            &recipient.encryption_public(),
        );
        let raw = ChaCha20Poly1305::new(&kek)
            .decrypt(Nonce::from_slice(&self.wrap_nonce), self.wrapped_key.as_slice())
            .map_err(|_| LedgerError::Crypto("key unwrap failed"))?;
        let bytes: [u8; 32] = raw
            .try_into()
            .map_err(|_| LedgerError::Crypto("wrapped key has wrong length"))?;
        Ok(FreshKey(bytes))
    }

    pub fn open(&self, recipient: &KeyPair) -> Result<Vec<u8>> {
        let fsk = self.unwrap_key(recipient)?;
        self.open_with(&fsk)
    }

    pub fn open_with(&self, fsk: &FreshKey) -> Result<Vec<u8>> {
        ChaCha20Poly1305::new(Key::from_slice(&fsk.0))
            .decrypt(Nonce::from_slice(&self.nonce), self.ciphertext.as_slice())
            .map_err(|_| LedgerError::Crypto("payload decryption failed"))
    }

    /// The payload this envelope would be if `plaintext` had been sealed
    /// under `fsk` with the recorded nonce and wrapping.
    pub fn reseal(&self, plaintext: &[u8], fsk: &FreshKey) -> Result<Self> {
        let ciphertext = ChaCha20Poly1305::new(Key::from_slice(&fsk.0))
            .encrypt(Nonce::from_slice(&self.nonce), plaintext)
            .map_err(|_| LedgerError::Crypto("payload encryption failed"))?;
        Ok(Self {
            ciphertext,
            ..self.clone()
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| LedgerError::Malformed("truncated payload".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn len_prefix(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.array::<8>()?))
            .map_err(|_| LedgerError::Malformed("length prefix overflows".into()))
    }
}

fn key_encryption_key(secret: &StaticSecret, peer: &PublicKey, recipient: &PublicKey) -> Key {
    let shared = secret.diffie_hellman(peer);
    let mut h = Sha256::new();
    h.update(KEK_LABEL);
    h.update(shared.as_bytes());
    h.update(peer.as_bytes());
    h.update(recipient.as_bytes());
    let digest = h.finalize();
    *Key::from_slice(&digest)
}

/// Seals `plaintext` for `recipient`. Returns the envelope and the fresh key.
pub fn seal<R: RngCore + CryptoRng>(
    plaintext: &[u8],
    recipient: &PublicKey,
    rng: &mut R,
) -> Result<(EncryptedPayload, FreshKey)> {
    let mut fsk = [0u8; 32];
    rng.fill_bytes(&mut fsk);
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let mut wrap_nonce = [0u8; 12];
    rng.fill_bytes(&mut wrap_nonce);
    let ephemeral = StaticSecret::random_from_rng(&mut *rng);
    let ephemeral_public = PublicKey::from(&ephemeral);

    // The sender derives with (ephemeral, recipient); the recipient with
    // (its secret, ephemeral public). Both bind the same two public keys.
    let shared = ephemeral.diffie_hellman(recipient);
    let mut h = Sha256::new();
    h.update(KEK_LABEL);
    h.update(shared.as_bytes());
    h.update(ephemeral_public.as_bytes());
    h.update(recipient.as_bytes());
    let kek = *Key::from_slice(&h.finalize());

    let wrapped_key = ChaCha20Poly1305::new(&kek)
        .encrypt(Nonce::from_slice(&wrap_nonce), fsk.as_slice())
        .map_err(|_| LedgerError::Crypto("key wrap failed"))?;
    let ciphertext = ChaCha20Poly1305::new(Key::from_slice(&fsk))
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .map_err(|_| LedgerError::Crypto("payload encryption failed"))?;
    Ok((
        EncryptedPayload {
            ephemeral_public: ephemeral_public.to_bytes(),
            wrap_nonce,
            wrapped_key,
            nonce,
            ciphertext,
        },
        FreshKey(fsk),
    ))
}

/// Little-endian encoding: parameter count, entry count, then
/// `(index: u64, value: f64 bits)` pairs. `f32` values widen exactly.
pub fn encode_update<T: Scalar>(update: &SparseUpdate<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 16 * update.len());
    out.extend_from_slice(&(update.param_count() as u64).to_le_bytes());
    out.extend_from_slice(&(update.len() as u64).to_le_bytes());
    for &(i, v) in update.entries() {
        out.extend_from_slice(&(i as u64).to_le_bytes());
        out.extend_from_slice(&v.as_f64().to_bits().to_le_bytes());
    }
    out
}

pub fn decode_update<T: Scalar>(bytes: &[u8]) -> Result<SparseUpdate<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let param_count = cur.len_prefix()?;
    let n = cur.len_prefix()?;
    if n.checked_mul(16).map_or(true, |b| b != bytes.len() - 16) {
        return Err(LedgerError::Malformed("update length does not match entry count".into()));
    }
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let i = cur.len_prefix()?;
        let v = f64::from_bits(u64::from_le_bytes(cur.array::<8>()?));
        entries.push((i, T::lit(v)));
    }
    Ok(SparseUpdate::new(param_count, entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn seal_open_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let alice = KeyPair::generate(&mut rng);
        let eve = KeyPair::generate(&mut rng);
        for len in [0usize, 1, 17, 4096] {
            let msg: Vec<u8> = (0..len).map(|i| (i * 7 % 251) as u8).collect();
            let (env, fsk) = seal(&msg, &alice.encryption_public(), &mut rng).unwrap();
            assert_eq!(env.open(&alice).unwrap(), msg);
            assert_eq!(env.unwrap_key(&alice).unwrap(), fsk);
            assert!(env.open(&eve).is_err());
            let back = EncryptedPayload::from_bytes(&env.to_bytes()).unwrap();
            assert_eq!(back, env);
            assert_eq!(env.reseal(&msg, &fsk).unwrap(), env);
        }
    }

    #[test]
    fn tampering_is_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let bob = KeyPair::generate(&mut rng);
        let (mut env, _) = seal(b"gradients", &bob.encryption_public(), &mut rng).unwrap();
        let before = env.hash_hex();
        env.ciphertext[0] ^= 1;
        assert_ne!(env.hash_hex(), before);
        assert!(env.open(&bob).is_err());
    }

    #[test]
    fn update_encoding_is_exact() {
        let u = SparseUpdate::new(10, vec![(1, 0.1f64), (7, -3.25e-7)]).unwrap();
        assert_eq!(decode_update::<f64>(&encode_update(&u)).unwrap(), u);
        let v = SparseUpdate::new(4, vec![(0, 0.1f32), (3, f32::MIN_POSITIVE)]).unwrap();
        assert_eq!(decode_update::<f32>(&encode_update(&v)).unwrap(), v);
        assert!(decode_update::<f64>(&[0u8; 15]).is_err());
    }
}
