//! Replay and bit-flip campaigns against full sessions.
//!
//! Both work the same way: rerun a full session and swap the `index`-th
//! message that a party puts on air for something else, then watch whether
//! the recipient moves on.

use esafe_core::seed::seeded_rng;
use esafe_protocol::flow::Delivery;
use esafe_protocol::{DeploymentConfig, Heading, Rejection, Role, WireMessage};
use rand::Rng;

use crate::channel::Attacker;
use crate::scenario::{run_with, Passive, Scenario, ScenarioConfig};
use crate::HarnessError;

/// How long after the recorded session the replays happen.
pub const REPLAY_DELAY_SECONDS: u64 = 3600;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Patch {
    Replace(Vec<u8>),
    FlipBit(usize),
}

/// Swaps the `index`-th submitted message and notes whether its
/// recipient ever transmits afterwards.
#[derive(Debug, Clone)]
pub struct Substitute {
    index: usize,
    patch: Patch,
    seen: usize,
    pub original: Option<Delivery>,
    pub recipient_spoke: bool,
}

impl Substitute {
    pub fn new(index: usize, patch: Patch) -> Self {
        Self { index, patch, seen: 0, original: None, recipient_spoke: false }
    }
}

impl Attacker for Substitute {
    fn intercept(&mut self, d: Delivery, _now: u64) -> Vec<Delivery> {
        let i = self.seen;
        self.seen += 1;
        if i == self.index {
            let bytes = match &self.patch {
                Patch::Replace(b) => b.clone(),
                Patch::FlipBit(bit) => {
                    let mut b = d.bytes.clone();
                    let bit = bit % (b.len() * 8);
                    b[bit / 8] ^= 1 << (bit % 8);
                    b
                }
            };
            self.original = Some(d.clone());
            return vec![Delivery { bytes, ..d }];
        }
        if let Some(orig) = &self.original {
            if d.from == orig.to {
                self.recipient_spoke = true;
            }
        }
        vec![d]
    }
}

/// Result of one substituted run.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub index: usize,
    pub from: Role,
    pub to: Role,
    pub heading: Option<Heading>,
    /// The recipient replied or the session still finished.
    pub accepted: bool,
    pub recipient_rejection: Option<Rejection>,
    pub completed: bool,
    pub aborted: bool,
}

fn substituted_run(config: &ScenarioConfig, seed: u64, start_time: u64, index: usize, patch: Patch) -> Result<Verdict, HarnessError> {
    let run = run_with(config, seed, start_time, Substitute::new(index, patch))?;
    let orig = run
        .attacker
        .original
        .clone()
        .ok_or_else(|| HarnessError::Precondition(format!("session has fewer than {} messages", index + 1)))?;
    let completed = run.completed();
    Ok(Verdict {
        index,
        from: orig.from,
        to: orig.to,
        heading: WireMessage::decode(&orig.bytes).ok().map(|m| m.heading),
        accepted: run.attacker.recipient_spoke || completed,
        recipient_rejection: run.rejections_by(orig.to).first().map(|r| (*r).clone()),
        completed,
        aborted: run.any_aborted(),
    })
}

fn full(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig { scenario: Scenario::Full, degraded_oob: false, ..config.clone() }
}

/// Every message of an honest full session, as submitted.
pub fn record_full_session(config: &ScenarioConfig, seed: u64) -> Result<Vec<Delivery>, HarnessError> {
    let run = run_with(&full(config), seed, DeploymentConfig::default().start_time, Passive::default())?;
    if !run.completed() {
        return Err(HarnessError::Precondition("honest full session did not complete".into()));
    }
    Ok(run.attacker.seen)
}

/// Records a full session, then feeds each of its messages to the same
/// recipient in a fresh session an hour later, at the exact point where
/// that recipient is waiting for a message of that kind.
pub fn replay_sweep(config: &ScenarioConfig, seed: u64, fresh_seed: u64) -> Result<Vec<Verdict>, HarnessError> {
    let config = full(config);
    let recorded = record_full_session(&config, seed)?;
    let fresh = record_full_session(&config, fresh_seed)?;
    if fresh.len() != recorded.len() {
        return Err(HarnessError::Precondition("sessions differ in shape".into()));
    }
    let start = DeploymentConfig::default().start_time + REPLAY_DELAY_SECONDS;
    let plan: Vec<usize> = (0..recorded.len()).collect();
    parallel_map(&plan, |&i| {
        let old = &recorded[i];
        if (fresh[i].from, fresh[i].to) != (old.from, old.to) {
            return Err(HarnessError::Precondition(format!("message {i} changes direction between sessions")));
        }
        substituted_run(&config, fresh_seed, start, i, Patch::Replace(old.bytes.clone()))
    })
}

/// Messages whose fields carry a MAC tag.
pub fn is_mac_protected(from: Role, heading: Heading) -> bool {
    matches!(
        (from, heading),
        (Role::Smartphone, Heading::PairReq)
            | (Role::Programmer, Heading::ReadAuthReq)
            | (Role::Smartphone, Heading::ReadAllow)
            | (Role::Imd, Heading::ReadReq)
            | (Role::Programmer, Heading::WriteAuthReq)
            | (Role::Smartphone, Heading::WriteAllow)
            | (Role::Programmer, Heading::WriteReq)
            | (Role::Smartphone, Heading::SetAllow)
    )
}

/// Flips `mutations` single bits, spread round-robin over the MAC-protected
/// messages of a full session, each at a seeded random position.
pub fn mutation_fuzz(config: &ScenarioConfig, seed: u64, mutations: usize) -> Result<Vec<Verdict>, HarnessError> {
    let config = full(config);
    let recorded = record_full_session(&config, seed)?;
    let targets: Vec<(usize, usize)> = recorded
        .iter()
        .enumerate()
        .filter_map(|(i, d)| {
            let m = WireMessage::decode(&d.bytes).ok()?;
            is_mac_protected(d.from, m.heading).then_some((i, d.bytes.len() * 8))
        })
        .collect();
    if targets.is_empty() {
        return Err(HarnessError::Precondition("no MAC-protected messages recorded".into()));
    }
    let mut rng = seeded_rng("esafe/mutation-fuzz", &seed.to_be_bytes());
    let plan: Vec<(usize, usize)> = (0..mutations)
        .map(|k| {
            let (index, bits) = targets[k % targets.len()];
            (index, rng.gen_range(0..bits))
        })
        .collect();
    let start = DeploymentConfig::default().start_time;
    parallel_map(&plan, |&(index, bit)| substituted_run(&config, seed, start, index, Patch::FlipBit(bit)))
}

/// Order-preserving map over worker threads; runs are independent.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R, HarnessError> + Sync,
) -> Result<Vec<R>, HarnessError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Result<Vec<R>, HarnessError>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("fuzz worker panicked")?);
        }
        Ok(out)
    })
}
