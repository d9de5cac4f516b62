#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use esafe_core::recovery::synth_sparse_signal;
use esafe_core::BoundedSignal;
use esafe_protocol::cs::{CsContext, CsProfile};
use esafe_protocol::flow::{Delivery, Network};
use esafe_protocol::{Credentials, Deployment, DeploymentConfig};

pub const RSA_BITS: usize = 1024;

pub fn credentials() -> &'static Credentials {
    static C: OnceLock<Credentials> = OnceLock::new();
    C.get_or_init(|| Credentials::generate(b"protocol-tests", &DeploymentConfig::default().id_d, RSA_BITS).unwrap())
}

pub fn context() -> Arc<CsContext> {
    static C: OnceLock<Arc<CsContext>> = OnceLock::new();
    C.get_or_init(|| CsContext::new(CsProfile::standard()).unwrap()).clone()
}

pub fn config(seed: u64) -> DeploymentConfig {
    DeploymentConfig { seed: seed.to_be_bytes().to_vec(), ..DeploymentConfig::default() }
}

pub fn deployment(seed: u64) -> Deployment {
    Deployment::with_context(&config(seed), credentials(), context()).unwrap()
}

pub fn signal(seed: u64) -> BoundedSignal {
    let p = CsProfile::standard();
    synth_sparse_signal(&seed.to_be_bytes(), p.n, 10, p.lower, p.upper).unwrap().signal
}

/// In-order network that keeps every message it carried.
#[derive(Default, Clone)]
pub struct Recorder {
    queue: VecDeque<Delivery>,
    pub transcript: Vec<Delivery>,
    pub oob: Vec<Vec<u8>>,
}

impl Network for Recorder {
    fn submit(&mut self, d: Delivery, _now: u64) {
        self.transcript.push(d.clone());
        self.queue.push_back(d);
    }

    fn poll(&mut self, _now: u64) -> Option<Delivery> {
        self.queue.pop_front()
    }

    fn observe_out_of_band(&mut self, payload: &[u8], _now: u64) {
        self.oob.push(payload.to_vec());
    }
}

pub fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
