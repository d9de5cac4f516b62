//! Per-party state machines.
//!
//! Each party expects exactly one heading at a time. Anything else is
//! dropped without touching state. Failed MACs, signatures, certificates or
//! decryptions abort the session: the party forgets the session keys and
//! falls back to its last stable phase.

mod imd;
mod programmer;
mod smartphone;

pub use imd::{Imd, ImdConfig, ImdPhase};
pub use programmer::{Programmer, ProgrammerConfig, ProgrammerPhase};
pub use smartphone::{Smartphone, SmartphoneConfig, SmartphonePhase};

use crate::crypto::{CryptoSuite, OpCounts, SymmetricKey};
use crate::error::{AbortReason, DropReason, Rejection};
use crate::session::{freshness_check, Outbound, Role, SessionSecrets};
use crate::wire::{encode_fields, parse_u64, Heading, WireMessage};

pub type Handled = Result<Vec<Outbound>, Rejection>;

pub trait Party {
    fn role(&self) -> Role;

    /// Handles one inbound wire message.
    fn receive(&mut self, from: Role, bytes: &[u8], now: u64) -> Handled;

    /// The single heading this party will currently act on.
    fn expected_next(&self) -> Option<Heading>;

    fn phase_name(&self) -> &'static str;

    fn counts(&self) -> OpCounts;

    fn secrets(&self) -> SessionSecrets;

    /// Gives up on the session in progress, as if a timer expired.
    fn timeout(&mut self) -> Option<AbortReason>;
}

/// Parses `bytes` and checks heading, sender and session number.
pub(crate) fn accept(
    bytes: &[u8],
    from: Role,
    expected: Option<(Heading, Role)>,
    session: Option<u64>,
) -> Result<WireMessage, Rejection> {
    let msg = WireMessage::decode(bytes)?;
    let Some((heading, sender)) = expected else {
        return Err(DropReason::UnexpectedHeading { expected: None, got: msg.heading }.into());
    };
    if msg.heading != heading {
        return Err(DropReason::UnexpectedHeading { expected: Some(heading), got: msg.heading }.into());
    }
    if from != sender {
        return Err(DropReason::UnexpectedSender.into());
    }
    if let Some(sn) = session {
        if msg.session != sn {
            return Err(DropReason::WrongSession.into());
        }
    }
    Ok(msg)
}

pub(crate) fn fields(msg: &WireMessage, n: usize) -> Result<&[Vec<u8>], Rejection> {
    Ok(msg.expect_fields(n)?)
}

pub(crate) fn timestamp(bytes: &[u8], index: usize) -> Result<u64, Rejection> {
    Ok(parse_u64(bytes, index)?)
}

pub(crate) fn check_fresh(ts: u64, now: u64, window: u64) -> Result<(), Rejection> {
    if freshness_check(ts, now, window) {
        Ok(())
    } else {
        Err(DropReason::Stale.into())
    }
}

/// MAC input: the bracketed items in table order, length-prefixed.
pub fn mac_input(heading: Option<Heading>, sn: u64, items: &[&[u8]]) -> Vec<u8> {
    let h = heading.map(|h| [h.code()]);
    let sn = sn.to_be_bytes();
    let mut parts: Vec<&[u8]> = Vec::with_capacity(items.len() + 2);
    if let Some(h) = &h {
        parts.push(h);
    }
    parts.push(&sn);
    parts.extend_from_slice(items);
    encode_fields(&parts)
}

pub(crate) fn verify_mac(
    suite: &mut CryptoSuite,
    key: &SymmetricKey,
    input: &[u8],
    tag: &[u8],
) -> Result<(), AbortReason> {
    if suite.mac_verify(key, input, tag) {
        Ok(())
    } else {
        Err(AbortReason::BadMac)
    }
}

pub(crate) fn wire(to: Role, heading: Heading, sn: u64, fields: Vec<Vec<u8>>) -> Outbound {
    Outbound::Wire { to, bytes: WireMessage::new(heading, sn, fields).encode() }
}

pub(crate) fn bad_payload(e: impl std::fmt::Display) -> AbortReason {
    AbortReason::BadPayload(e.to_string())
}
