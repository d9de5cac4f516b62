//! Attacker models and attack experiments against the implant access protocols.
//!
//! Everything runs over a simulated [`channel::Channel`] that keeps a
//! byte-exact transcript, so any run can be replayed or inspected later.

pub mod channel;
pub mod fuzz;
pub mod guess;
pub mod ks;
pub mod mitm;
pub mod scenario;

pub use channel::{Attacker, Channel, NoAttacker, Transcript, TranscriptEntry};
pub use scenario::{run_session, AttackerKind, Outcome, Scenario, ScenarioConfig, SessionRun};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Codec(#[from] esafe_core::Error),
    #[error(transparent)]
    Setup(#[from] esafe_protocol::SetupError),
    #[error(transparent)]
    Crypto(#[from] esafe_protocol::CryptoError),
    #[error(transparent)]
    Wire(#[from] esafe_protocol::WireError),
    #[error("attack precondition not met: {0}")]
    Precondition(String),
}
