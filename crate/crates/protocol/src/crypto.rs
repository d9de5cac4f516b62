//! Cryptographic primitives behind semantic interfaces.
//!
//! The default configuration is PBKDF2-HMAC-SHA1 for key derivation (over the
//! length-prefixed material), HMAC-SHA1 tags, AES-128-GCM for symmetric
//! encryption, RSA-OAEP(SHA-256) for the nonce challenge and RSA PKCS#1 v1.5
//! (SHA-256) signatures. Every call made through a [`CryptoSuite`] is counted
//! so per-party operation budgets can be reported.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes128Gcm, Nonce};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use rand_chacha::ChaCha20Rng;
use rsa::pkcs1::{DecodeRsaPrivateKey, DecodeRsaPublicKey, EncodeRsaPrivateKey, EncodeRsaPublicKey};
use rsa::pkcs1v15::{Signature, SigningKey, VerifyingKey};
use rsa::signature::{SignatureEncoding, Signer, Verifier};
use rsa::{Oaep, RsaPrivateKey, RsaPublicKey};
use sha1::Sha1;
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::error::CryptoError;
use crate::wire::{encode_fields, FieldReader};

pub const SYMMETRIC_KEY_LEN: usize = 16;
pub const GCM_NONCE_LEN: usize = 12;
pub const KDF_ITERATIONS: u32 = 1000;
pub const KDF_SALT: &[u8] = b"esafe/kdf/v1";

/// 128-bit secret. Equality is constant-time.
#[derive(Clone)]
pub struct SymmetricKey([u8; SYMMETRIC_KEY_LEN]);

impl SymmetricKey {
    pub fn from_bytes(bytes: [u8; SYMMETRIC_KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SYMMETRIC_KEY_LEN] =
            bytes.try_into().map_err(|_| CryptoError::KeyLength(bytes.len()))?;
        Ok(Self(arr))
    }

    pub fn random(rng: &mut (impl RngCore + CryptoRng)) -> Self {
        let mut k = [0u8; SYMMETRIC_KEY_LEN];
        rng.fill_bytes(&mut k);
        Self(k)
    }

    pub fn as_bytes(&self) -> &[u8; SYMMETRIC_KEY_LEN] {
        &self.0
    }
}

impl PartialEq for SymmetricKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl Eq for SymmetricKey {}

impl std::fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KdfAlgorithm {
    #[default]
    Pbkdf2Sha1,
    Pbkdf2Sha256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MacAlgorithm {
    #[default]
    HmacSha1,
    HmacSha256,
}

impl MacAlgorithm {
    pub fn tag_len(self) -> usize {
        match self {
            Self::HmacSha1 => 20,
            Self::HmacSha256 => 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuiteConfig {
    pub kdf: KdfAlgorithm,
    pub mac: MacAlgorithm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacTag {
    pub algorithm: MacAlgorithm,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureBlob(pub Vec<u8>);

/// Symmetric ciphertext: `nonce ‖ ciphertext ‖ tag`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherBlob(pub Vec<u8>);

/// Public-key ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PkCipherBlob(pub Vec<u8>);

pub fn kdf_with(algorithm: KdfAlgorithm, material: &[u8]) -> Result<SymmetricKey, CryptoError> {
    if material.is_empty() {
        return Err(CryptoError::EmptyMaterial);
    }
    // HMAC zero-pads short keys, so "a" and "a\0" would derive the same
    // key; the length prefix keeps distinct materials distinct.
    let len = u32::try_from(material.len()).map_err(|_| CryptoError::MessageTooLong)?;
    let mut password = len.to_be_bytes().to_vec();
    password.extend_from_slice(material);
    let mut out = [0u8; SYMMETRIC_KEY_LEN];
    match algorithm {
        KdfAlgorithm::Pbkdf2Sha1 => {
            pbkdf2::pbkdf2_hmac::<Sha1>(&password, KDF_SALT, KDF_ITERATIONS, &mut out)
        }
        KdfAlgorithm::Pbkdf2Sha256 => {
            pbkdf2::pbkdf2_hmac::<Sha256>(&password, KDF_SALT, KDF_ITERATIONS, &mut out)
        }
    }
    Ok(SymmetricKey(out))
}

/// Key derivation over length-prefixed parts, e.g. `kdf(K ‖ ID_S ‖ ID_I)`.
pub fn kdf_parts(algorithm: KdfAlgorithm, parts: &[&[u8]]) -> Result<SymmetricKey, CryptoError> {
    kdf_with(algorithm, &encode_fields(parts))
}

/// HMAC over an arbitrary-length key.
pub fn hmac_bytes(algorithm: MacAlgorithm, key: &[u8], msg: &[u8]) -> Vec<u8> {
    match algorithm {
        MacAlgorithm::HmacSha1 => {
            let mut m = <Hmac<Sha1> as Mac>::new_from_slice(key).expect("any key length");
            m.update(msg);
            m.finalize().into_bytes().to_vec()
        }
        MacAlgorithm::HmacSha256 => {
            let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("any key length");
            m.update(msg);
            m.finalize().into_bytes().to_vec()
        }
    }
}

pub fn mac_with(algorithm: MacAlgorithm, key: &SymmetricKey, msg: &[u8]) -> MacTag {
    MacTag { algorithm, bytes: hmac_bytes(algorithm, key.as_bytes(), msg) }
}

/// Constant-time tag check; truncated or extended tags are rejected.
pub fn mac_verify_with(algorithm: MacAlgorithm, key: &SymmetricKey, msg: &[u8], tag: &[u8]) -> bool {
    let expected = hmac_bytes(algorithm, key.as_bytes(), msg);
    expected.len() == tag.len() && bool::from(expected.ct_eq(tag))
}

/// AES-128-GCM with an explicit nonce; the nonce is prepended to the output.
pub fn sym_seal(key: &SymmetricKey, nonce: &[u8; GCM_NONCE_LEN], plaintext: &[u8]) -> CipherBlob {
    let cipher = Aes128Gcm::new_from_slice(key.as_bytes()).expect("16-byte key");
    let ct = cipher.encrypt(Nonce::from_slice(nonce), plaintext).expect("in-memory buffer");
    let mut out = Vec::with_capacity(GCM_NONCE_LEN + ct.len());
    out.extend_from_slice(nonce);
    out.extend_from_slice(&ct);
    CipherBlob(out)
}

pub fn sym_open(key: &SymmetricKey, blob: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if blob.len() < GCM_NONCE_LEN + 16 {
        return Err(CryptoError::Decrypt);
    }
    let cipher = Aes128Gcm::new_from_slice(key.as_bytes()).expect("16-byte key");
    let (nonce, ct) = blob.split_at(GCM_NONCE_LEN);
    cipher.decrypt(Nonce::from_slice(nonce), ct).map_err(|_| CryptoError::Decrypt)
}

/// RSA public key with its canonical PKCS#1 DER encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey(RsaPublicKey);

impl PublicKey {
    pub fn to_der(&self) -> Vec<u8> {
        self.0.to_pkcs1_der().expect("encodable key").as_bytes().to_vec()
    }

    pub fn from_der(der: &[u8]) -> Result<Self, CryptoError> {
        RsaPublicKey::from_pkcs1_der(der).map(Self).map_err(|_| CryptoError::KeyEncoding)
    }
}

#[derive(Clone)]
pub struct PrivateKey(RsaPrivateKey);

impl std::fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

impl PrivateKey {
    pub fn generate(rng: &mut (impl RngCore + CryptoRng), bits: usize) -> Result<Self, CryptoError> {
        RsaPrivateKey::new(rng, bits).map(Self).map_err(|e| CryptoError::KeyGeneration(e.to_string()))
    }

    pub fn from_der(der: &[u8]) -> Result<Self, CryptoError> {
        RsaPrivateKey::from_pkcs1_der(der).map(Self).map_err(|_| CryptoError::KeyEncoding)
    }

    pub fn to_der(&self) -> Vec<u8> {
        self.0.to_pkcs1_der().expect("encodable key").as_bytes().to_vec()
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.to_public_key())
    }
}

pub fn pk_encrypt(
    rng: &mut (impl RngCore + CryptoRng),
    pk: &PublicKey,
    msg: &[u8],
) -> Result<PkCipherBlob, CryptoError> {
    pk.0
        .encrypt(rng, Oaep::new::<Sha256>(), msg)
        .map(PkCipherBlob)
        .map_err(|_| CryptoError::MessageTooLong)
}

pub fn pk_decrypt(sk: &PrivateKey, blob: &[u8]) -> Result<Vec<u8>, CryptoError> {
    sk.0.decrypt(Oaep::new::<Sha256>(), blob).map_err(|_| CryptoError::Decrypt)
}

pub fn sign_message(sk: &PrivateKey, msg: &[u8]) -> SignatureBlob {
    let signer = SigningKey::<Sha256>::new(sk.0.clone());
    SignatureBlob(signer.sign(msg).to_vec())
}

/// Total: malformed signatures are rejections, never errors.
pub fn verify_signature(pk: &PublicKey, msg: &[u8], sig: &[u8]) -> bool {
    let Ok(sig) = Signature::try_from(sig) else { return false };
    VerifyingKey::<Sha256>::new(pk.0.clone()).verify(msg, &sig).is_ok()
}

/// Binding of a subject identity to a public key, signed by an authority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject_id: Vec<u8>,
    pub subject_key: Vec<u8>,
    pub signature: Vec<u8>,
}

impl Certificate {
    fn signed_part(subject_id: &[u8], subject_key: &[u8]) -> Vec<u8> {
        encode_fields(&[b"esafe/cert/v1", subject_id, subject_key])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_fields(&[&self.subject_id, &self.subject_key, &self.signature])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = FieldReader::new(bytes);
        let cert = Self {
            subject_id: r.field().ok_or(CryptoError::KeyEncoding)?.to_vec(),
            subject_key: r.field().ok_or(CryptoError::KeyEncoding)?.to_vec(),
            signature: r.field().ok_or(CryptoError::KeyEncoding)?.to_vec(),
        };
        if !r.is_done() {
            return Err(CryptoError::KeyEncoding);
        }
        Ok(cert)
    }

    pub fn subject_public_key(&self) -> Result<PublicKey, CryptoError> {
        PublicKey::from_der(&self.subject_key)
    }
}

pub fn cert_issue(authority: &PrivateKey, subject: &PublicKey, subject_id: &[u8]) -> Certificate {
    let subject_key = subject.to_der();
    let signature = sign_message(authority, &Certificate::signed_part(subject_id, &subject_key)).0;
    Certificate { subject_id: subject_id.to_vec(), subject_key, signature }
}

pub fn cert_verify(authority: &PublicKey, cert: &Certificate) -> bool {
    verify_signature(
        authority,
        &Certificate::signed_part(&cert.subject_id, &cert.subject_key),
        &cert.signature,
    )
}

/// A doctor's credential store: key pair plus certificate.
#[derive(Debug, Clone)]
pub struct KeyPairWithCert {
    pub public: PublicKey,
    pub private: PrivateKey,
    pub cert: Certificate,
}

impl KeyPairWithCert {
    /// Certificate verifies under `authority` and names the held key pair.
    pub fn is_consistent(&self, authority: &PublicKey) -> bool {
        cert_verify(authority, &self.cert)
            && self.cert.subject_key == self.public.to_der()
            && self.private.public_key() == self.public
    }
}

/// Certificate authority used once at system initialisation.
#[derive(Debug, Clone)]
pub struct Authority {
    key: PrivateKey,
}

impl Authority {
    pub fn new(key: PrivateKey) -> Self {
        Self { key }
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public_key()
    }

    pub fn issue(&self, subject_id: &[u8], subject: PrivateKey) -> KeyPairWithCert {
        let public = subject.public_key();
        let cert = cert_issue(&self.key, &public, subject_id);
        KeyPairWithCert { public, private: subject, cert }
    }
}

/// Per-party operation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub sym_enc: u64,
    pub sym_dec: u64,
    pub mac: u64,
    pub kdf: u64,
    pub cs_enc: u64,
    pub pk_enc: u64,
    pub pk_dec: u64,
    pub sign: u64,
    pub verify: u64,
}

impl std::ops::Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, o: Self) -> Self {
        Self {
            sym_enc: self.sym_enc - o.sym_enc,
            sym_dec: self.sym_dec - o.sym_dec,
            mac: self.mac - o.mac,
            kdf: self.kdf - o.kdf,
            cs_enc: self.cs_enc - o.cs_enc,
            pk_enc: self.pk_enc - o.pk_enc,
            pk_dec: self.pk_dec - o.pk_dec,
            sign: self.sign - o.sign,
            verify: self.verify - o.verify,
        }
    }
}

/// A party's handle on the primitives: algorithm choice, randomness, counters.
#[derive(Debug, Clone)]
pub struct CryptoSuite {
    config: SuiteConfig,
    rng: ChaCha20Rng,
    counts: OpCounts,
}

impl CryptoSuite {
    pub fn new(config: SuiteConfig, rng: ChaCha20Rng) -> Self {
        Self { config, rng, counts: OpCounts::default() }
    }

    pub fn config(&self) -> SuiteConfig {
        self.config
    }

    pub fn counts(&self) -> OpCounts {
        self.counts
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn random_bytes(&mut self, len: usize) -> Vec<u8> {
        let mut v = vec![0u8; len];
        self.rng.fill_bytes(&mut v);
        v
    }

    pub fn random_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn kdf(&mut self, parts: &[&[u8]]) -> Result<SymmetricKey, CryptoError> {
        self.counts.kdf += 1;
        kdf_parts(self.config.kdf, parts)
    }

    pub fn mac(&mut self, key: &SymmetricKey, msg: &[u8]) -> MacTag {
        self.counts.mac += 1;
        mac_with(self.config.mac, key, msg)
    }

    pub fn mac_verify(&mut self, key: &SymmetricKey, msg: &[u8], tag: &[u8]) -> bool {
        self.counts.mac += 1;
        mac_verify_with(self.config.mac, key, msg, tag)
    }

    pub fn sym_enc(&mut self, key: &SymmetricKey, plaintext: &[u8]) -> CipherBlob {
        self.counts.sym_enc += 1;
        let mut nonce = [0u8; GCM_NONCE_LEN];
        self.rng.fill_bytes(&mut nonce);
        sym_seal(key, &nonce, plaintext)
    }

    pub fn sym_dec(&mut self, key: &SymmetricKey, blob: &[u8]) -> Result<Vec<u8>, CryptoError> {
        self.counts.sym_dec += 1;
        sym_open(key, blob)
    }

    pub fn pk_enc(&mut self, pk: &PublicKey, msg: &[u8]) -> Result<PkCipherBlob, CryptoError> {
        self.counts.pk_enc += 1;
        pk_encrypt(&mut self.rng, pk, msg)
    }

    pub fn pk_dec(&mut self, sk: &PrivateKey, blob: &[u8]) -> Result<Vec<u8>, CryptoError> {
        self.counts.pk_dec += 1;
        pk_decrypt(sk, blob)
    }

    pub fn sign(&mut self, sk: &PrivateKey, msg: &[u8]) -> SignatureBlob {
        self.counts.sign += 1;
        sign_message(sk, msg)
    }

    pub fn verify(&mut self, pk: &PublicKey, msg: &[u8], sig: &[u8]) -> bool {
        self.counts.verify += 1;
        verify_signature(pk, msg, sig)
    }

    pub fn cert_verify(&mut self, authority: &PublicKey, cert: &Certificate) -> bool {
        self.counts.verify += 1;
        cert_verify(authority, cert)
    }

    /// Counts one compressive encryption performed outside this module.
    pub fn record_cs_enc(&mut self) {
        self.counts.cs_enc += 1;
    }
}
