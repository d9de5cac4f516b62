use thiserror::Error;

use crate::wire::Heading;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("symmetric key must be 16 bytes, got {0}")]
    KeyLength(usize),
    #[error("key derivation material is empty")]
    EmptyMaterial,
    #[error("decryption failed")]
    Decrypt,
    #[error("malformed key or certificate encoding")]
    KeyEncoding,
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
    #[error("message too long for public-key encryption")]
    MessageTooLong,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("message truncated")]
    Truncated,
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("unknown heading code {0}")]
    UnknownHeading(u8),
    #[error("too many fields ({0})")]
    TooManyFields(usize),
    #[error("expected {expected} fields, got {actual}")]
    FieldCount { expected: usize, actual: usize },
    #[error("field {index} has invalid length {len}")]
    FieldLength { index: usize, len: usize },
}

/// Why an inbound message was ignored. The receiving party's state is unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DropReason {
    #[error("malformed message: {0}")]
    Malformed(WireError),
    #[error("expected {expected:?}, got {got:?}")]
    UnexpectedHeading { expected: Option<Heading>, got: Heading },
    #[error("message from unexpected sender")]
    UnexpectedSender,
    #[error("session number mismatch")]
    WrongSession,
    #[error("timestamp outside freshness window")]
    Stale,
    #[error("session number already used")]
    Replayed,
    #[error("pairing request failed verification")]
    PairingRejected,
    #[error("identity mismatch")]
    WrongIdentity,
}

/// Why a session was torn down. The party returns to its last stable phase.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbortReason {
    #[error("MAC verification failed")]
    BadMac,
    #[error("signature verification failed")]
    BadSignature,
    #[error("certificate verification failed")]
    BadCertificate,
    #[error("decryption failed")]
    DecryptFailed,
    #[error("payload invalid: {0}")]
    BadPayload(String),
    #[error("timed out")]
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("dropped: {0}")]
    Dropped(DropReason),
    #[error("aborted: {0}")]
    Aborted(AbortReason),
}

impl Rejection {
    pub fn is_abort(&self) -> bool {
        matches!(self, Self::Aborted(_))
    }
}

impl From<DropReason> for Rejection {
    fn from(r: DropReason) -> Self {
        Self::Dropped(r)
    }
}

impl From<AbortReason> for Rejection {
    fn from(r: AbortReason) -> Self {
        Self::Aborted(r)
    }
}

impl From<WireError> for Rejection {
    fn from(e: WireError) -> Self {
        Self::Dropped(DropReason::Malformed(e))
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger corrupt at byte {0}")]
    Corrupt(u64),
    #[error("record rejected: signature does not verify")]
    Unverified,
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Codec(#[from] esafe_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}
