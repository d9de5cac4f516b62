//! Pairing, authentication and access protocols between a patient's
//! smartphone, an implant and a doctor's programmer.
//!
//! Parties are explicit state machines fed one serialized message at a time
//! ([`party::Party::receive`]). [`flow`] wires them to a [`flow::Network`] and
//! runs whole protocols; the adversary harness substitutes its own network.

pub mod crypto;
pub mod cs;
mod error;
pub mod evidence;
pub mod flow;
pub mod party;
pub mod session;
pub mod wire;

pub use error::{AbortReason, CryptoError, DropReason, LedgerError, Rejection, SetupError, WireError};
pub use evidence::{evidence_verify, EvidenceLedger, EvidenceRecord};
pub use flow::{auth_flow, pair_flow, read_flow, write_flow, Credentials, Deployment, DeploymentConfig, DirectNetwork, Network};
pub use session::{freshness_check, Command, Role};
pub use wire::{Heading, WireMessage};
