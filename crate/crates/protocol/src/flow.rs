//! Wiring the parties together and driving the four protocols.

use std::collections::VecDeque;
use std::sync::Arc;

use esafe_core::seed::seeded_rng;
use esafe_core::BoundedSignal;

use crate::crypto::{Authority, CryptoSuite, KeyPairWithCert, PrivateKey, SuiteConfig};
use crate::cs::{CsContext, CsProfile};
use crate::error::{AbortReason, Rejection, SetupError};
use crate::evidence::EvidenceLedger;
use crate::party::{
    Imd, ImdConfig, Party, Programmer, ProgrammerConfig, ProgrammerPhase, Smartphone, SmartphoneConfig,
    SmartphonePhase,
};
use crate::session::{Command, Outbound, Role, DEFAULT_FRESHNESS_WINDOW};

/// Simulated seconds per radio hop.
pub const HOP_SECONDS: u64 = 1;
/// Simulated seconds for the doctor to read RM off the phone and type it in.
pub const OOB_ENTRY_SECONDS: u64 = 5;
/// Deliveries after which a flow is declared stalled.
pub const HOP_BUDGET: usize = 64;

/// One wire message in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub from: Role,
    pub to: Role,
    pub bytes: Vec<u8>,
}

/// The radio medium between parties.
pub trait Network {
    fn submit(&mut self, delivery: Delivery, now: u64);

    fn poll(&mut self, now: u64) -> Option<Delivery>;

    /// Called when the smartphone hands RM to the out-of-band service.
    /// The default medium does not see it.
    fn observe_out_of_band(&mut self, _payload: &[u8], _now: u64) {}
}

/// Lossless in-order delivery.
#[derive(Debug, Default, Clone)]
pub struct DirectNetwork {
    queue: VecDeque<Delivery>,
}

impl Network for DirectNetwork {
    fn submit(&mut self, delivery: Delivery, _now: u64) {
        self.queue.push_back(delivery);
    }

    fn poll(&mut self, _now: u64) -> Option<Delivery> {
        self.queue.pop_front()
    }
}

/// Authority and doctor key material created at system initialisation.
#[derive(Debug, Clone)]
pub struct Credentials {
    pub authority: Authority,
    pub doctor: KeyPairWithCert,
}

impl Credentials {
    /// Deterministic RSA keys for the CA and one doctor.
    pub fn generate(seed: &[u8], id_d: &[u8], bits: usize) -> Result<Self, SetupError> {
        let mut rng = seeded_rng("esafe/credentials", seed);
        let authority = Authority::new(PrivateKey::generate(&mut rng, bits)?);
        let doctor = authority.issue(id_d, PrivateKey::generate(&mut rng, bits)?);
        Ok(Self { authority, doctor })
    }
}

#[derive(Debug, Clone)]
pub struct DeploymentConfig {
    pub seed: Vec<u8>,
    pub master_key: Vec<u8>,
    /// Key entered on the smartphone; defaults to `master_key`.
    pub entered_key: Option<Vec<u8>>,
    pub id_s: Vec<u8>,
    pub id_i: Vec<u8>,
    pub id_d: Vec<u8>,
    pub freshness_window: u64,
    pub start_time: u64,
    pub suite: SuiteConfig,
    pub profile: CsProfile,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            seed: b"esafe".to_vec(),
            master_key: b"patient master key".to_vec(),
            entered_key: None,
            id_s: b"ID_S:phone-01".to_vec(),
            id_i: b"ID_I:imd-0001".to_vec(),
            id_d: b"ID_D:dr-0042".to_vec(),
            freshness_window: DEFAULT_FRESHNESS_WINDOW,
            start_time: 1_700_000_000,
            suite: SuiteConfig::default(),
            profile: CsProfile::standard(),
        }
    }
}

/// Everyone involved in one patient's care, plus a shared simulated clock.
#[derive(Clone)]
pub struct Deployment {
    pub smartphone: Smartphone,
    pub imd: Imd,
    pub programmer: Programmer,
    /// Messages that reached the doctor's phone out of band.
    pub doctor_phone: Vec<Vec<u8>>,
    pub clock: u64,
    pub cs: Arc<CsContext>,
}

impl Deployment {
    pub fn new(config: &DeploymentConfig, credentials: &Credentials) -> Result<Self, SetupError> {
        Self::with_context(config, credentials, CsContext::new(config.profile.clone())?)
    }

    /// Reuses precomputed matrices; `cs` must match `config.profile`.
    pub fn with_context(
        config: &DeploymentConfig,
        credentials: &Credentials,
        cs: Arc<CsContext>,
    ) -> Result<Self, SetupError> {
        if cs.profile() != &config.profile {
            return Err(SetupError::Config("context does not match profile".into()));
        }
        if credentials.doctor.cert.subject_id != config.id_d {
            return Err(SetupError::Config("credentials issued to a different doctor".into()));
        }
        let suite = |role: &str| CryptoSuite::new(config.suite, seeded_rng(&format!("esafe/party/{role}"), &config.seed));
        let smartphone = Smartphone::new(
            SmartphoneConfig {
                id_s: config.id_s.clone(),
                id_i: config.id_i.clone(),
                master_key: config.entered_key.clone().unwrap_or_else(|| config.master_key.clone()),
                ca_public: credentials.authority.public_key(),
                freshness_window: config.freshness_window,
            },
            cs.clone(),
            suite("smartphone"),
            EvidenceLedger::in_memory(),
        );
        let imd = Imd::new(
            ImdConfig {
                id_i: config.id_i.clone(),
                master_key: config.master_key.clone(),
                freshness_window: config.freshness_window,
            },
            cs.clone(),
            suite("imd"),
        );
        let programmer = Programmer::new(
            ProgrammerConfig {
                id_d: config.id_d.clone(),
                target_id_i: config.id_i.clone(),
                freshness_window: config.freshness_window,
            },
            credentials.doctor.clone(),
            cs.clone(),
            suite("programmer"),
        );
        Ok(Self { smartphone, imd, programmer, doctor_phone: Vec::new(), clock: config.start_time, cs })
    }

    /// Replaces the smartphone's in-memory ledger, e.g. with a file-backed one.
    pub fn set_ledger(&mut self, ledger: EvidenceLedger) {
        self.smartphone.set_ledger(ledger);
    }

    pub fn party_mut(&mut self, role: Role) -> Option<&mut dyn Party> {
        match role {
            Role::Smartphone => Some(&mut self.smartphone),
            Role::Imd => Some(&mut self.imd),
            Role::Programmer => Some(&mut self.programmer),
            Role::DoctorPhone => None,
        }
    }

    /// Hands a party's output to the network or the out-of-band service.
    pub fn dispatch(&mut self, from: Role, out: Vec<Outbound>, net: &mut dyn Network) {
        for o in out {
            match o {
                Outbound::Wire { to, bytes } => net.submit(Delivery { from, to, bytes }, self.clock),
                Outbound::OutOfBand { payload, .. } => {
                    net.observe_out_of_band(&payload, self.clock);
                    self.doctor_phone.push(payload);
                }
            }
        }
    }

    /// Delivers one message, advancing the clock by one hop.
    pub fn deliver(&mut self, d: Delivery, net: &mut dyn Network) -> Result<(), Rejection> {
        self.clock += HOP_SECONDS;
        let now = self.clock;
        let Some(party) = self.party_mut(d.to) else {
            return Ok(());
        };
        let out = party.receive(d.from, &d.bytes, now)?;
        self.dispatch(d.to, out, net);
        Ok(())
    }

    /// Delivers until the network is quiet or the hop budget runs out.
    pub fn pump(&mut self, net: &mut dyn Network, log: &mut FlowLog) {
        for _ in 0..HOP_BUDGET {
            let Some(d) = net.poll(self.clock) else { return };
            let to = d.to;
            log.hops += 1;
            if let Err(r) = self.deliver(d, net) {
                log.rejections.push((to, r));
            }
        }
        log.stalled = true;
    }

    /// Expires every party's pending session, recording who gave up.
    pub fn expire(&mut self, log: &mut FlowLog) {
        for role in [Role::Smartphone, Role::Imd, Role::Programmer] {
            if let Some(r) = self.party_mut(role).and_then(|p| p.timeout()) {
                log.timeouts.push((role, r));
            }
        }
    }
}

/// What happened while a flow ran.
#[derive(Debug, Clone, Default)]
pub struct FlowLog {
    pub completed: bool,
    pub hops: usize,
    pub stalled: bool,
    pub rejections: Vec<(Role, Rejection)>,
    pub timeouts: Vec<(Role, AbortReason)>,
}

impl FlowLog {
    pub fn aborted(&self) -> bool {
        self.rejections.iter().any(|(_, r)| r.is_abort()) || !self.timeouts.is_empty()
    }
}

/// Pairing: the smartphone pairs with the IMD.
pub fn pair_flow(dep: &mut Deployment, net: &mut dyn Network) -> FlowLog {
    let mut log = FlowLog::default();
    let out = dep.smartphone.start_pairing(dep.clock);
    dep.dispatch(Role::Smartphone, out, net);
    dep.pump(net, &mut log);
    log.completed = dep.smartphone.phase() == SmartphonePhase::Paired;
    if !log.completed {
        dep.expire(&mut log);
    }
    log
}

/// Dual-factor authentication; ends with `K_p` on both sides.
pub fn auth_flow(dep: &mut Deployment, net: &mut dyn Network) -> FlowLog {
    let mut log = FlowLog::default();
    dep.doctor_phone.clear();
    let out = dep.programmer.start_auth(dep.clock);
    dep.dispatch(Role::Programmer, out, net);
    dep.pump(net, &mut log);
    if dep.programmer.phase() == ProgrammerPhase::AwaitRm {
        if let Some(rm) = dep.doctor_phone.last().cloned() {
            dep.clock += OOB_ENTRY_SECONDS;
            if let Err(r) = dep.programmer.enter_rm(&rm) {
                log.rejections.push((Role::Programmer, r));
            }
        }
    }
    log.completed = dep.programmer.phase() == ProgrammerPhase::Authenticated
        && dep.smartphone.phase() == SmartphonePhase::AwaitReadAuth;
    if !log.completed {
        dep.expire(&mut log);
    }
    log
}

/// Read access: the IMD's signals end up reconstructed at the programmer.
pub fn read_flow(dep: &mut Deployment, net: &mut dyn Network, data: Vec<BoundedSignal>) -> FlowLog {
    let mut log = FlowLog::default();
    dep.imd.set_data(data);
    match dep.programmer.start_read(dep.clock) {
        Ok(out) => dep.dispatch(Role::Programmer, out, net),
        Err(r) => log.rejections.push((Role::Programmer, r)),
    }
    dep.pump(net, &mut log);
    log.completed = dep.programmer.phase() == ProgrammerPhase::ReadComplete;
    if !log.completed {
        dep.expire(&mut log);
    }
    log
}

/// Write access: the command is applied and its evidence stored.
pub fn write_flow(dep: &mut Deployment, net: &mut dyn Network, cmd: Command) -> FlowLog {
    let mut log = FlowLog::default();
    let applied_before = dep.imd.applied_commands().len();
    match dep.programmer.start_write(cmd, dep.clock) {
        Ok(out) => dep.dispatch(Role::Programmer, out, net),
        Err(r) => log.rejections.push((Role::Programmer, r)),
    }
    dep.pump(net, &mut log);
    log.completed = dep.programmer.phase() == ProgrammerPhase::WriteComplete
        && dep.imd.applied_commands().len() == applied_before + 1;
    if !log.completed {
        dep.expire(&mut log);
    }
    log
}
