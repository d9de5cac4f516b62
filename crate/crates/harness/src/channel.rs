//! The shared radio medium, with an attacker sitting on every link.

use std::collections::VecDeque;

use esafe_protocol::flow::{Delivery, Network};
use esafe_protocol::Role;

/// Attacker capabilities on the radio medium.
pub trait Attacker {
    /// Sees each transmission and decides what goes on air in its place.
    /// Return `vec![d]` to pass it through, an empty vector to drop it.
    fn intercept(&mut self, d: Delivery, _now: u64) -> Vec<Delivery> {
        vec![d]
    }

    /// Called only when the out-of-band service is exposed to the attacker.
    fn observe_out_of_band(&mut self, _payload: &[u8], _now: u64) {}
}

/// No attacker at all.
#[derive(Debug, Default, Clone)]
pub struct NoAttacker;

impl Attacker for NoAttacker {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Event {
    /// Sent by a party and delivered unchanged.
    Sent = 0,
    /// Sent by a party and suppressed by the attacker.
    Dropped = 1,
    /// Put on air by the attacker.
    Injected = 2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub from: Role,
    pub to: Role,
    pub time: u64,
    pub event: Event,
    pub bytes: Vec<u8>,
}

/// Append-only record of everything that crossed the medium.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn push(&mut self, e: TranscriptEntry) {
        self.entries.push(e);
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries that actually reached the air (sent or injected).
    pub fn on_air(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.entries.iter().filter(|e| e.event != Event::Dropped)
    }

    /// `from (1) ‖ to (1) ‖ event (1) ‖ time (8, BE) ‖ len (4, BE) ‖ wire bytes`, repeated.
    pub fn dump(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in &self.entries {
            out.push(e.from.code());
            out.push(e.to.code());
            out.push(e.event as u8);
            out.extend_from_slice(&e.time.to_be_bytes());
            out.extend_from_slice(&(e.bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&e.bytes);
        }
        out
    }

    pub fn parse_dump(mut bytes: &[u8]) -> Option<Self> {
        let mut t = Transcript::default();
        while !bytes.is_empty() {
            if bytes.len() < 15 {
                return None;
            }
            let from = Role::from_code(bytes[0])?;
            let to = Role::from_code(bytes[1])?;
            let event = match bytes[2] {
                0 => Event::Sent,
                1 => Event::Dropped,
                2 => Event::Injected,
                _ => return None,
            };
            let time = u64::from_be_bytes(bytes[3..11].try_into().ok()?);
            let len = u32::from_be_bytes(bytes[11..15].try_into().ok()?) as usize;
            let body = bytes.get(15..15 + len)?.to_vec();
            t.push(TranscriptEntry { from, to, time, event, bytes: body });
            bytes = &bytes[15 + len..];
        }
        Some(t)
    }
}

/// In-order medium; without interference every message is delivered once.
pub struct Channel<A> {
    queue: VecDeque<Delivery>,
    transcript: Transcript,
    attacker: A,
    oob_exposed: bool,
}

impl<A: Attacker> Channel<A> {
    pub fn new(attacker: A, oob_exposed: bool) -> Self {
        Self { queue: VecDeque::new(), transcript: Transcript::default(), attacker, oob_exposed }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn attacker(&self) -> &A {
        &self.attacker
    }

    pub fn attacker_mut(&mut self) -> &mut A {
        &mut self.attacker
    }

    pub fn into_parts(self) -> (Transcript, A) {
        (self.transcript, self.attacker)
    }

    /// Puts an attacker-crafted message on air.
    pub fn inject(&mut self, d: Delivery, now: u64) {
        self.transcript.push(TranscriptEntry { from: d.from, to: d.to, time: now, event: Event::Injected, bytes: d.bytes.clone() });
        self.queue.push_back(d);
    }
}

impl<A: Attacker> Network for Channel<A> {
    fn submit(&mut self, d: Delivery, now: u64) {
        let original = d.clone();
        let out = self.attacker.intercept(d, now);
        let passed = out.contains(&original);
        let event = if passed { Event::Sent } else { Event::Dropped };
        self.transcript.push(TranscriptEntry {
            from: original.from,
            to: original.to,
            time: now,
            event,
            bytes: original.bytes.clone(),
        });
        let mut kept_original = false;
        for o in out {
            if o == original && !kept_original {
                kept_original = true;
                self.queue.push_back(o);
            } else {
                self.inject(o, now);
            }
        }
    }

    fn poll(&mut self, _now: u64) -> Option<Delivery> {
        self.queue.pop_front()
    }

    fn observe_out_of_band(&mut self, payload: &[u8], now: u64) {
        if self.oob_exposed {
            self.attacker.observe_out_of_band(payload, now);
        }
    }
}
