//! Signing keys, verification keys and signature envelopes.
//!
//! One EdDSA scheme (Ed25519) sits behind [`SignatureScheme`]; every
//! signature covers the canonical bytes of a record, never a transport form.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer as _, Verifier as _};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::encoding::{tag, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed key: {0}")]
pub struct MalformedKey(pub String);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub const ZERO: PublicKey = PublicKey([0; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, MalformedKey> {
        let raw: [u8; 32] = bytes
            .try_into()
            .map_err(|_| MalformedKey(format!("public key must be 32 bytes, got {}", bytes.len())))?;
        Ok(Self(raw))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for PublicKey {
    type Err = MalformedKey;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s.trim()).map_err(|e| MalformedKey(e.to_string()))?;
        Self::from_slice(&bytes)
    }
}

impl CanonicalEncode for PublicKey {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.0);
    }
}

impl CanonicalDecode for PublicKey {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(Self(dec.fixed()?))
    }
}

/// An Ed25519 signing key. Debug output never shows the secret.
#[derive(Clone)]
pub struct SecretKey(ed25519_dalek::SigningKey);

impl SecretKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(ed25519_dalek::SigningKey::from_bytes(&bytes))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, MalformedKey> {
        let raw: [u8; 32] = bytes
            .try_into()
            .map_err(|_| MalformedKey(format!("secret key must be 32 bytes, got {}", bytes.len())))?;
        Ok(Self::from_bytes(raw))
    }

    pub fn from_hex(s: &str) -> Result<Self, MalformedKey> {
        let bytes = hex::decode(s.trim()).map_err(|e| MalformedKey(e.to_string()))?;
        Self::from_slice(&bytes)
    }

    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill(&mut seed);
        Self::from_bytes(seed)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.verifying_key().to_bytes())
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey(pub={:?})", self.public_key())
    }
}

/// The signature scheme interface. Exactly one implementation exists so the
/// wire format stays fixed.
pub trait SignatureScheme {
    fn sign(key: &SecretKey, message: &[u8]) -> [u8; 64];
    fn verify(key: &PublicKey, message: &[u8], signature: &[u8; 64]) -> bool;
}

pub struct Ed25519;

impl SignatureScheme for Ed25519 {
    fn sign(key: &SecretKey, message: &[u8]) -> [u8; 64] {
        key.0.sign(message).to_bytes()
    }

    fn verify(key: &PublicKey, message: &[u8], signature: &[u8; 64]) -> bool {
        let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&key.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(signature);
        vk.verify(message, &sig).is_ok()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureEnvelope {
    pub signer_public_key: PublicKey,
    #[serde(with = "sig_bytes")]
    pub signature_bytes: [u8; 64],
}

impl SignatureEnvelope {
    pub const ZERO: SignatureEnvelope = SignatureEnvelope {
        signer_public_key: PublicKey::ZERO,
        signature_bytes: [0; 64],
    };
}

impl fmt::Debug for SignatureEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SignatureEnvelope({:?}, {}..)",
            self.signer_public_key,
            hex::encode(&self.signature_bytes[..8])
        )
    }
}

impl CanonicalEncode for SignatureEnvelope {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::SIGNATURE_ENVELOPE, |e| {
            e.value(&self.signer_public_key);
            e.bytes(&self.signature_bytes);
        });
    }
}

impl CanonicalDecode for SignatureEnvelope {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::SIGNATURE_ENVELOPE, |d| {
            Ok(Self {
                signer_public_key: d.value()?,
                signature_bytes: d.fixed()?,
            })
        })
    }
}

/// A record that can be signed. Records that embed their own envelope sign
/// their canonical bytes with that envelope zeroed.
pub trait Signable {
    fn signing_bytes(&self) -> Vec<u8>;
}

pub fn sign<R: Signable + ?Sized>(record: &R, key: &SecretKey) -> SignatureEnvelope {
    SignatureEnvelope {
        signer_public_key: key.public_key(),
        signature_bytes: Ed25519::sign(key, &record.signing_bytes()),
    }
}

/// Checks the envelope against its own signer key.
pub fn verify_signature<R: Signable + ?Sized>(record: &R, envelope: &SignatureEnvelope) -> bool {
    Ed25519::verify(
        &envelope.signer_public_key,
        &record.signing_bytes(),
        &envelope.signature_bytes,
    )
}

/// Checks the envelope and that it was produced by `expected`.
pub fn verify_signed_by<R: Signable + ?Sized>(
    record: &R,
    envelope: &SignatureEnvelope,
    expected: &PublicKey,
) -> bool {
    envelope.signer_public_key == *expected && verify_signature(record, envelope)
}

mod sig_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 64], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 64], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(s).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("signature must be 64 bytes"))
    }
}
