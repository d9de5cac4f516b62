//! Scenario configuration and single-session runs under an attacker model.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use esafe_core::recovery::{measurements_for_cr, synth_sparse_signal};
use esafe_core::BoundedSignal;
use esafe_protocol::cs::{CsContext, CsProfile};
use esafe_protocol::flow::{auth_flow, pair_flow, read_flow, write_flow, Delivery, FlowLog};
use esafe_protocol::{Command, Credentials, Deployment, DeploymentConfig, Heading, Rejection, Role, WireMessage};

use crate::channel::{Attacker, Channel, Transcript};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Pair,
    Auth,
    Read,
    Write,
    /// Pairing followed by two complete read/write access sessions.
    Full,
}

impl FromStr for Scenario {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pair" => Self::Pair,
            "auth" => Self::Auth,
            "read" => Self::Read,
            "write" => Self::Write,
            "full" => Self::Full,
            other => return Err(HarnessError::Config(format!("unknown scenario {other:?}"))),
        })
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pair => "pair",
            Self::Auth => "auth",
            Self::Read => "read",
            Self::Write => "write",
            Self::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackerKind {
    None,
    /// Eavesdrops on every link.
    Passive,
    /// Re-sends every message it sees immediately after the original.
    Replay,
    /// Sits between the programmer and everyone else, keeps C2 and blocks it.
    Mitm,
}

impl FromStr for AttackerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "none" => Self::None,
            "passive" => Self::Passive,
            "replay" => Self::Replay,
            "mitm" => Self::Mitm,
            other => return Err(HarnessError::Config(format!("unknown attacker {other:?}"))),
        })
    }
}

impl std::fmt::Display for AttackerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Passive => "passive",
            Self::Replay => "replay",
            Self::Mitm => "mitm",
        })
    }
}

/// Parameters of an experiment, read from `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub attacker: AttackerKind,
    pub cr: f64,
    /// `None` sends unquantized measurements.
    pub qs: Option<u32>,
    pub n: usize,
    pub lower: i64,
    pub upper: i64,
    pub sparsity: usize,
    pub seeds: Vec<u64>,
    pub trials: usize,
    pub degraded_oob: bool,
    pub rsa_bits: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Read,
            attacker: AttackerKind::None,
            cr: 50.0,
            qs: Some(20),
            n: 512,
            lower: 590,
            upper: 1487,
            sparsity: 10,
            seeds: vec![1],
            trials: 100,
            degraded_oob: false,
            rsa_bits: 2048,
        }
    }
}

/// `"1,2,5"` or `"1..20"` (inclusive) or a mix.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Config(format!("bad seed list {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool, HarnessError> {
    match s {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(HarnessError::Config(format!("expected a boolean, got {other:?}"))),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |what: &str| HarnessError::Config(format!("line {}: bad {what} {v:?}", lineno + 1));
            match k {
                "scenario" => c.scenario = v.parse()?,
                "attacker" => c.attacker = v.parse()?,
                "cr" | "CR" => c.cr = v.parse().map_err(|_| num("cr"))?,
                "qs" => {
                    let q: u32 = v.parse().map_err(|_| num("qs"))?;
                    c.qs = (q > 0).then_some(q);
                }
                "n" | "N" => c.n = v.parse().map_err(|_| num("n"))?,
                "lower" => c.lower = v.parse().map_err(|_| num("lower"))?,
                "upper" => c.upper = v.parse().map_err(|_| num("upper"))?,
                "sparsity" => c.sparsity = v.parse().map_err(|_| num("sparsity"))?,
                "seeds" => c.seeds = parse_seeds(v)?,
                "trials" => c.trials = v.parse().map_err(|_| num("trials"))?,
                "degraded_oob" => c.degraded_oob = parse_bool(v)?,
                "rsa_bits" => c.rsa_bits = v.parse().map_err(|_| num("rsa_bits"))?,
                other => return Err(HarnessError::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "scenario = {}\nattacker = {}\ncr = {}\nqs = {}\nn = {}\nlower = {}\nupper = {}\nsparsity = {}\nseeds = {}\ntrials = {}\ndegraded_oob = {}\nrsa_bits = {}\n",
            self.scenario,
            self.attacker,
            self.cr,
            self.qs.unwrap_or(0),
            self.n,
            self.lower,
            self.upper,
            self.sparsity,
            seeds.join(","),
            self.trials,
            self.degraded_oob,
            self.rsa_bits,
        )
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(0.0..100.0).contains(&self.cr) {
            return Err(HarnessError::Config(format!("cr {} outside [0, 100)", self.cr)));
        }
        if self.upper - self.lower < 2 {
            return Err(HarnessError::Config("bounds too narrow".into()));
        }
        if self.sparsity == 0 || self.sparsity >= self.n {
            return Err(HarnessError::Config("sparsity must be in 1..n".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("no seeds".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<CsProfile, HarnessError> {
        Ok(CsProfile {
            n: self.n,
            m: measurements_for_cr(self.n, self.cr)?,
            lower: self.lower,
            upper: self.upper,
            quant_step: self.qs,
            ..CsProfile::standard()
        })
    }

    pub fn context(&self) -> Result<Arc<CsContext>, HarnessError> {
        shared_context(self.profile()?)
    }

    /// ECG-range test signal for a seed.
    pub fn signal(&self, seed: u64) -> Result<BoundedSignal, HarnessError> {
        let mut s = b"signal/".to_vec();
        s.extend_from_slice(&seed.to_be_bytes());
        Ok(synth_sparse_signal(&s, self.n, self.sparsity, self.lower, self.upper)?.signal)
    }

    pub fn deployment(&self, seed: u64) -> Result<Deployment, HarnessError> {
        self.deployment_at(seed, DeploymentConfig::default().start_time)
    }

    pub fn deployment_at(&self, seed: u64, start_time: u64) -> Result<Deployment, HarnessError> {
        let config = DeploymentConfig {
            seed: seed.to_be_bytes().to_vec(),
            start_time,
            profile: self.profile()?,
            ..DeploymentConfig::default()
        };
        Ok(Deployment::with_context(&config, &shared_credentials(self.rsa_bits)?, self.context()?)?)
    }
}

/// Matrices are deterministic per profile; build each once per process.
pub fn shared_context(profile: CsProfile) -> Result<Arc<CsContext>, HarnessError> {
    static CACHE: OnceLock<Mutex<Vec<Arc<CsContext>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(c) = cache.lock().expect("cache lock").iter().find(|c| c.profile() == &profile) {
        return Ok(c.clone());
    }
    let c = CsContext::new(profile)?;
    cache.lock().expect("cache lock").push(c.clone());
    Ok(c)
}

/// The system-wide CA and the doctor's credentials, generated once per key size.
pub fn shared_credentials(bits: usize) -> Result<Credentials, HarnessError> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Credentials>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("cache lock");
    if let Some(c) = guard.get(&bits) {
        return Ok(c.clone());
    }
    let c = Credentials::generate(b"esafe/system", &DeploymentConfig::default().id_d, bits)?;
    guard.insert(bits, c.clone());
    Ok(c)
}

/// Records everything; never interferes.
#[derive(Debug, Default, Clone)]
pub struct Passive {
    pub seen: Vec<Delivery>,
    pub oob: Vec<Vec<u8>>,
}

impl Attacker for Passive {
    fn intercept(&mut self, d: Delivery, _now: u64) -> Vec<Delivery> {
        self.seen.push(d.clone());
        vec![d]
    }

    fn observe_out_of_band(&mut self, payload: &[u8], _now: u64) {
        self.oob.push(payload.to_vec());
    }
}

/// Sends a second copy of every message straight after the first.
#[derive(Debug, Default, Clone)]
pub struct Replayer {
    pub replayed: usize,
}

impl Attacker for Replayer {
    fn intercept(&mut self, d: Delivery, _now: u64) -> Vec<Delivery> {
        self.replayed += 1;
        vec![d.clone(), d]
    }
}

/// Man in the middle on the programmer's links: relays everything,
/// but keeps the IMD's data reply for itself.
#[derive(Debug, Default, Clone)]
pub struct MitmRelay {
    pub sn: Option<u64>,
    pub encrypted_nonce: Option<Vec<u8>>,
    pub key_blob: Option<Vec<u8>>,
    pub c2: Option<Vec<u8>>,
    pub rm: Option<Vec<u8>>,
}

impl Attacker for MitmRelay {
    fn intercept(&mut self, d: Delivery, _now: u64) -> Vec<Delivery> {
        let Ok(msg) = WireMessage::decode(&d.bytes) else { return vec![d] };
        match (d.from, d.to, msg.heading) {
            (Role::Smartphone, Role::Programmer, Heading::AuthReq) if msg.fields.len() == 2 => {
                self.sn = Some(msg.session);
                self.encrypted_nonce = Some(msg.fields[1].clone());
            }
            (Role::Smartphone, Role::Programmer, Heading::ReadReady) if msg.fields.len() == 1 => {
                self.key_blob = Some(msg.fields[0].clone());
            }
            (Role::Imd, Role::Programmer, Heading::ReadReq) if msg.fields.len() == 2 => {
                self.c2 = Some(msg.fields[0].clone());
                return Vec::new();
            }
            _ => {}
        }
        vec![d]
    }

    fn observe_out_of_band(&mut self, payload: &[u8], _now: u64) {
        self.rm = Some(payload.to_vec());
    }
}

/// One of the attacker models, chosen at run time.
#[derive(Debug, Clone)]
pub enum AnyAttacker {
    None,
    Passive(Passive),
    Replay(Replayer),
    Mitm(MitmRelay),
}

impl AnyAttacker {
    pub fn new(kind: AttackerKind) -> Self {
        match kind {
            AttackerKind::None => Self::None,
            AttackerKind::Passive => Self::Passive(Passive::default()),
            AttackerKind::Replay => Self::Replay(Replayer::default()),
            AttackerKind::Mitm => Self::Mitm(MitmRelay::default()),
        }
    }
}

impl Attacker for AnyAttacker {
    fn intercept(&mut self, d: Delivery, now: u64) -> Vec<Delivery> {
        match self {
            Self::None => vec![d],
            Self::Passive(a) => a.intercept(d, now),
            Self::Replay(a) => a.intercept(d, now),
            Self::Mitm(a) => a.intercept(d, now),
        }
    }

    fn observe_out_of_band(&mut self, payload: &[u8], now: u64) {
        match self {
            Self::None => {}
            Self::Passive(a) => a.observe_out_of_band(payload, now),
            Self::Replay(a) => a.observe_out_of_band(payload, now),
            Self::Mitm(a) => a.observe_out_of_band(payload, now),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Succeeded,
    Aborted,
    Incomplete,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Succeeded => "succeeded",
            Self::Aborted => "aborted",
            Self::Incomplete => "incomplete",
        })
    }
}

/// Everything a run produced.
pub struct SessionRun<A = AnyAttacker> {
    pub transcript: Transcript,
    pub flows: Vec<(&'static str, FlowLog)>,
    pub outcomes: Vec<(Role, Outcome)>,
    pub attacker: A,
    pub deployment: Deployment,
    pub data: Vec<BoundedSignal>,
    pub commands: Vec<Command>,
}

impl<A> SessionRun<A> {
    pub fn completed(&self) -> bool {
        self.flows.iter().all(|(_, f)| f.completed)
    }

    pub fn outcome(&self, role: Role) -> Outcome {
        self.outcomes.iter().find(|(r, _)| *r == role).map(|(_, o)| *o).expect("every party has an outcome")
    }

    pub fn any_aborted(&self) -> bool {
        self.outcomes.iter().any(|(_, o)| *o == Outcome::Aborted)
    }

    /// Rejections raised by `role` across all flows, in order.
    pub fn rejections_by(&self, role: Role) -> Vec<&Rejection> {
        self.flows.iter().flat_map(|(_, f)| f.rejections.iter()).filter(|(r, _)| *r == role).map(|(_, rej)| rej).collect()
    }
}

/// Runs `config.scenario` once under `config.attacker`.
pub fn run_session(config: &ScenarioConfig, seed: u64) -> Result<SessionRun, HarnessError> {
    run_with(config, seed, DeploymentConfig::default().start_time, AnyAttacker::new(config.attacker))
}

/// Runs `config.scenario` once with a caller-supplied attacker and clock origin.
pub fn run_with<A: Attacker>(
    config: &ScenarioConfig,
    seed: u64,
    start_time: u64,
    attacker: A,
) -> Result<SessionRun<A>, HarnessError> {
    let mut dep = config.deployment_at(seed, start_time)?;
    let mut net = Channel::new(attacker, config.degraded_oob);
    let data = vec![config.signal(seed)?];
    let mut flows: Vec<(&'static str, FlowLog)> = Vec::new();
    let mut commands = Vec::new();

    let rounds = match config.scenario {
        Scenario::Pair => 0,
        Scenario::Full => 2,
        _ => 1,
    };
    flows.push(("pair", pair_flow(&mut dep, &mut net)));
    for round in 0..rounds {
        if !flows.last().expect("pairing ran").1.completed {
            break;
        }
        flows.push(("auth", auth_flow(&mut dep, &mut net)));
        if config.scenario == Scenario::Auth || !flows.last().expect("auth ran").1.completed {
            break;
        }
        flows.push(("read", read_flow(&mut dep, &mut net, data.clone())));
        if config.scenario == Scenario::Read || !flows.last().expect("read ran").1.completed {
            break;
        }
        let cmd = Command::new(round as u16, format!("therapy-update-{seed}-{round}").as_bytes())?;
        commands.push(cmd.clone());
        flows.push(("write", write_flow(&mut dep, &mut net, cmd)));
    }

    let all_done = flows.iter().all(|(_, f)| f.completed);
    let outcomes = [Role::Smartphone, Role::Imd, Role::Programmer]
        .into_iter()
        .map(|role| {
            let aborted = flows.iter().any(|(_, f)| {
                f.rejections.iter().any(|(r, rej)| *r == role && rej.is_abort())
                    || f.timeouts.iter().any(|(r, _)| *r == role)
            });
            let o = if aborted {
                Outcome::Aborted
            } else if all_done {
                Outcome::Succeeded
            } else {
                Outcome::Incomplete
            };
            (role, o)
        })
        .collect();
    let (transcript, attacker) = net.into_parts();
    Ok(SessionRun { transcript, flows, outcomes, attacker, deployment: dep, data, commands })
}
