//! Canonical message encoding.
//!
//! `heading (1) ‖ session (8, BE) ‖ field_count (1) ‖ { len (4, BE) ‖ bytes }*`.
//! MAC inputs and signed strings use the same length-prefixed field encoding
//! without the frame header.

use crate::error::WireError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Heading {
    PairReq = 1,
    PairSucc = 2,
    AuthReq = 3,
    Optional = 4,
    ReadAuthReq = 5,
    ReadAllow = 6,
    ReadReady = 7,
    ReadReq = 8,
    WriteAuthReq = 9,
    WriteAllow = 10,
    WriteReady = 11,
    WriteReq = 12,
    SetAllow = 13,
    WriteSucc = 14,
}

impl Heading {
    pub const ALL: [Heading; 14] = [
        Self::PairReq,
        Self::PairSucc,
        Self::AuthReq,
        Self::Optional,
        Self::ReadAuthReq,
        Self::ReadAllow,
        Self::ReadReady,
        Self::ReadReq,
        Self::WriteAuthReq,
        Self::WriteAllow,
        Self::WriteReady,
        Self::WriteReq,
        Self::SetAllow,
        Self::WriteSucc,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, WireError> {
        match code {
            1..=14 => Ok(Self::ALL[code as usize - 1]),
            other => Err(WireError::UnknownHeading(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PairReq => "pair_req",
            Self::PairSucc => "pair_succ",
            Self::AuthReq => "auth_req",
            Self::Optional => "optional",
            Self::ReadAuthReq => "read_auth_req",
            Self::ReadAllow => "read_allow",
            Self::ReadReady => "read_ready",
            Self::ReadReq => "read_req",
            Self::WriteAuthReq => "write_auth_req",
            Self::WriteAllow => "write_allow",
            Self::WriteReady => "write_ready",
            Self::WriteReq => "write_req",
            Self::SetAllow => "set_allow",
            Self::WriteSucc => "write_succ",
        }
    }
}

impl std::fmt::Display for Heading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "R{} {}", self.code(), self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub heading: Heading,
    pub session: u64,
    pub fields: Vec<Vec<u8>>,
}

impl WireMessage {
    pub fn new(heading: Heading, session: u64, fields: Vec<Vec<u8>>) -> Self {
        Self { heading, session, fields }
    }

    pub fn encode(&self) -> Vec<u8> {
        assert!(self.fields.len() <= u8::MAX as usize, "field count fits one byte");
        let body: usize = self.fields.iter().map(|f| 4 + f.len()).sum();
        let mut out = Vec::with_capacity(10 + body);
        out.push(self.heading.code());
        out.extend_from_slice(&self.session.to_be_bytes());
        out.push(self.fields.len() as u8);
        for f in &self.fields {
            push_field(&mut out, f);
        }
        out
    }

    /// Strict decode: unknown headings, short reads and trailing bytes are errors.
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < 10 {
            return Err(WireError::Truncated);
        }
        let heading = Heading::from_code(bytes[0])?;
        let session = u64::from_be_bytes(bytes[1..9].try_into().expect("8 bytes"));
        let count = bytes[9] as usize;
        let mut reader = FieldReader::new(&bytes[10..]);
        let mut fields = Vec::with_capacity(count);
        for _ in 0..count {
            fields.push(reader.field().ok_or(WireError::Truncated)?.to_vec());
        }
        if !reader.is_done() {
            return Err(WireError::TrailingBytes(reader.remaining()));
        }
        Ok(Self { heading, session, fields })
    }

    /// Fields, checked against the expected count.
    pub fn expect_fields(&self, n: usize) -> Result<&[Vec<u8>], WireError> {
        if self.fields.len() != n {
            return Err(WireError::FieldCount { expected: n, actual: self.fields.len() });
        }
        Ok(&self.fields)
    }
}

fn push_field(out: &mut Vec<u8>, f: &[u8]) {
    let len = u32::try_from(f.len()).expect("field under 4 GiB");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(f);
}

/// Length-prefixed concatenation of byte strings.
pub fn encode_fields(parts: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| 4 + p.len()).sum());
    for p in parts {
        push_field(&mut out, p);
    }
    out
}

/// Cursor over a sequence of length-prefixed fields.
pub struct FieldReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> FieldReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn field(&mut self) -> Option<&'a [u8]> {
        let rest = &self.buf[self.pos..];
        if rest.len() < 4 {
            return None;
        }
        let len = u32::from_be_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        let body = rest.get(4..4usize.checked_add(len)?)?;
        self.pos += 4 + len;
        Some(body)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Split a buffer holding exactly `n` fields.
pub fn decode_exact(buf: &[u8], n: usize) -> Result<Vec<&[u8]>, WireError> {
    let mut r = FieldReader::new(buf);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(r.field().ok_or(WireError::Truncated)?);
    }
    if !r.is_done() {
        return Err(WireError::TrailingBytes(r.remaining()));
    }
    Ok(out)
}

pub fn u64_field(v: u64) -> [u8; 8] {
    v.to_be_bytes()
}

pub fn parse_u64(bytes: &[u8], index: usize) -> Result<u64, WireError> {
    let arr: [u8; 8] =
        bytes.try_into().map_err(|_| WireError::FieldLength { index, len: bytes.len() })?;
    Ok(u64::from_be_bytes(arr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_layout() {
        let m = WireMessage::new(Heading::PairSucc, 0x0102030405060708, vec![b"ab".to_vec()]);
        assert_eq!(
            m.encode(),
            [2, 1, 2, 3, 4, 5, 6, 7, 8, 1, 0, 0, 0, 2, b'a', b'b']
        );
    }

    #[test]
    fn heading_codes_are_bijective() {
        for (i, h) in Heading::ALL.iter().enumerate() {
            assert_eq!(h.code() as usize, i + 1);
            assert_eq!(Heading::from_code(h.code()).unwrap(), *h);
        }
        assert!(Heading::from_code(0).is_err());
        assert!(Heading::from_code(15).is_err());
    }

    #[test]
    fn rejects_trailing_and_truncated() {
        let mut bytes = WireMessage::new(Heading::ReadReq, 9, vec![vec![1, 2, 3]]).encode();
        for cut in 0..bytes.len() {
            assert!(WireMessage::decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        bytes.push(0);
        assert_eq!(WireMessage::decode(&bytes), Err(WireError::TrailingBytes(1)));
    }

    #[test]
    fn field_boundaries_are_unambiguous() {
        assert_ne!(encode_fields(&[b"ab", b"c"]), encode_fields(&[b"a", b"bc"]));
        assert_ne!(encode_fields(&[b"", b"a"]), encode_fields(&[b"a", b""]));
    }

    proptest! {
        #[test]
        fn round_trip(code in 1u8..=14, sn: u64,
                      fields in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..40), 0..8)) {
            let m = WireMessage::new(Heading::from_code(code).unwrap(), sn, fields);
            prop_assert_eq!(WireMessage::decode(&m.encode()).unwrap(), m);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = WireMessage::decode(&bytes);
        }
    }
}
