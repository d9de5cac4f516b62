//! Session plumbing shared by the parties: roles, outbound actions,
//! freshness and replay tracking, the command payload.

use std::collections::HashSet;

use esafe_core::codec::ShiftKey;

use crate::crypto::SymmetricKey;
use crate::error::WireError;

pub const DEFAULT_FRESHNESS_WINDOW: u64 = 30;
pub const NONCE_LEN: usize = 16;
pub const RM_LEN: usize = 16;
pub const MAX_COMMAND_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Role {
    Smartphone = 1,
    Imd = 2,
    Programmer = 3,
    DoctorPhone = 4,
}

impl Role {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Smartphone),
            2 => Some(Self::Imd),
            3 => Some(Self::Programmer),
            4 => Some(Self::DoctorPhone),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Smartphone => "smartphone",
            Self::Imd => "imd",
            Self::Programmer => "programmer",
            Self::DoctorPhone => "doctor-phone",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Something a party wants sent after handling an input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    /// Serialized wire message for the radio link.
    Wire { to: Role, bytes: Vec<u8> },
    /// Payload for the out-of-band service (SMS, email).
    OutOfBand { to: Role, payload: Vec<u8> },
}

/// Accept iff `|now − ts| ≤ window`.
pub fn freshness_check(ts: u64, now: u64, window: u64) -> bool {
    ts.abs_diff(now) <= window
}

/// Session numbers already consumed by a party.
#[derive(Debug, Clone, Default)]
pub struct ReplayCache {
    seen: HashSet<u64>,
}

impl ReplayCache {
    pub fn contains(&self, sn: u64) -> bool {
        self.seen.contains(&sn)
    }

    /// Returns false if `sn` was already present.
    pub fn insert(&mut self, sn: u64) -> bool {
        self.seen.insert(sn)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Opaque therapy command: a 16-bit application tag followed by payload bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct Command {
    bytes: Vec<u8>,
}

impl Command {
    pub fn new(tag: u16, payload: &[u8]) -> Result<Self, WireError> {
        let mut bytes = tag.to_be_bytes().to_vec();
        bytes.extend_from_slice(payload);
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < 2 || bytes.len() > MAX_COMMAND_LEN {
            return Err(WireError::FieldLength { index: 0, len: bytes.len() });
        }
        Ok(Self { bytes: bytes.to_vec() })
    }

    pub fn tag(&self) -> u16 {
        u16::from_be_bytes([self.bytes[0], self.bytes[1]])
    }

    pub fn payload(&self) -> &[u8] {
        &self.bytes[2..]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

impl std::fmt::Debug for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Command(tag={}, {} bytes)", self.tag(), self.payload().len())
    }
}

/// Snapshot of the session secrets a party currently holds, for tests and
/// key-agreement checks. Never serialized.
#[derive(Debug, Clone, Default)]
pub struct SessionSecrets {
    pub sn: Option<u64>,
    pub k_i: Option<SymmetricKey>,
    pub k_p: Option<SymmetricKey>,
    pub k_r: Option<SymmetricKey>,
    pub k_d: Option<ShiftKey>,
    pub rm: Option<Vec<u8>>,
    pub nonce: Option<Vec<u8>>,
    pub cmd: Option<Command>,
}
