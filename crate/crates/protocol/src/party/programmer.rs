use std::sync::Arc;

use esafe_core::codec::ShiftKey;
use log::warn;

use super::{accept, bad_payload, fields, mac_input, verify_mac, wire, Handled, Party};
use crate::crypto::{CryptoSuite, KeyPairWithCert, OpCounts, SymmetricKey};
use crate::cs::CsContext;
use crate::error::{AbortReason, DropReason, Rejection};
use crate::evidence::signed_bytes;
use crate::session::{Command, Outbound, Role, SessionSecrets, RM_LEN};
use crate::wire::Heading;

#[derive(Debug, Clone)]
pub struct ProgrammerConfig {
    pub id_d: Vec<u8>,
    /// The implant this programmer is configured to talk to.
    pub target_id_i: Vec<u8>,
    pub freshness_window: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgrammerPhase {
    Loaded,
    AwaitAuthReply,
    AwaitRm,
    Authenticated,
    AwaitKd,
    AwaitData,
    ReadComplete,
    AwaitWriteReady,
    AwaitWriteSucc,
    WriteComplete,
}

#[derive(Clone, Default)]
struct Access {
    sn: u64,
    id_s: Vec<u8>,
    nonce: Vec<u8>,
    rm: Vec<u8>,
    k_p: Option<SymmetricKey>,
    k_d: Option<ShiftKey>,
    k_r: Option<SymmetricKey>,
    c2: Vec<u8>,
    cmd: Option<Command>,
}

/// The doctor's programmer, loaded with the credentials from the doctor's USB store.
#[derive(Clone)]
pub struct Programmer {
    config: ProgrammerConfig,
    credentials: KeyPairWithCert,
    cs: Arc<CsContext>,
    suite: CryptoSuite,
    phase: ProgrammerPhase,
    access: Access,
    recovered: Vec<Vec<f64>>,
}

impl Programmer {
    pub fn new(config: ProgrammerConfig, credentials: KeyPairWithCert, cs: Arc<CsContext>, suite: CryptoSuite) -> Self {
        Self {
            config,
            credentials,
            cs,
            suite,
            phase: ProgrammerPhase::Loaded,
            access: Access::default(),
            recovered: Vec::new(),
        }
    }

    pub fn phase(&self) -> ProgrammerPhase {
        self.phase
    }

    /// Signals reconstructed by the last completed read.
    pub fn recovered(&self) -> &[Vec<f64>] {
        &self.recovered
    }

    /// C2 as received in the last completed read.
    pub fn received_ciphertext(&self) -> &[u8] {
        &self.access.c2
    }

    pub fn config(&self) -> &ProgrammerConfig {
        &self.config
    }

    /// Step (iii): open a new access session.
    pub fn start_auth(&mut self, now: u64) -> Vec<Outbound> {
        let sn = self.suite.random_u64();
        self.access = Access { sn, ..Access::default() };
        self.recovered.clear();
        self.phase = ProgrammerPhase::AwaitAuthReply;
        vec![wire(
            Role::Smartphone,
            Heading::AuthReq,
            sn,
            vec![
                self.config.id_d.clone(),
                now.to_be_bytes().to_vec(),
                self.credentials.public.to_der(),
                self.credentials.cert.to_bytes(),
            ],
        )]
    }

    /// The doctor types in RM from their phone; `K_p` follows.
    pub fn enter_rm(&mut self, rm: &[u8]) -> Result<(), Rejection> {
        if self.phase != ProgrammerPhase::AwaitRm {
            return Err(DropReason::UnexpectedHeading { expected: self.expected_next(), got: Heading::Optional }.into());
        }
        if rm.len() != RM_LEN {
            return Err(self.abort(bad_payload("random message has the wrong length")));
        }
        let k_p = self
            .suite
            .kdf(&[rm, &self.access.sn.to_be_bytes(), &self.access.nonce])
            .expect("non-empty material");
        self.access.rm = rm.to_vec();
        self.access.k_p = Some(k_p);
        self.phase = ProgrammerPhase::Authenticated;
        Ok(())
    }

    /// Step (vi) in its read-request form.
    pub fn start_read(&mut self, now: u64) -> Result<Vec<Outbound>, Rejection> {
        if self.phase != ProgrammerPhase::Authenticated {
            return Err(DropReason::UnexpectedHeading { expected: self.expected_next(), got: Heading::ReadAuthReq }.into());
        }
        let sn = self.access.sn;
        let ts4 = now.to_be_bytes();
        let k_p = self.access.k_p.clone().expect("authenticated");
        let tag = self.suite.mac(&k_p, &mac_input(Some(Heading::ReadAuthReq), sn, &[&ts4]));
        self.phase = ProgrammerPhase::AwaitKd;
        Ok(vec![wire(Role::Smartphone, Heading::ReadAuthReq, sn, vec![ts4.to_vec(), tag.bytes])])
    }

    /// Step (xii): sign the command against the data just read.
    pub fn start_write(&mut self, cmd: Command, now: u64) -> Result<Vec<Outbound>, Rejection> {
        if self.phase != ProgrammerPhase::ReadComplete {
            return Err(DropReason::UnexpectedHeading { expected: self.expected_next(), got: Heading::WriteAuthReq }.into());
        }
        Ok(self.signed_write(cmd.clone(), cmd, now))
    }

    /// Signs `signed` but later sends `sent`. Models a programmer whose
    /// signature does not match the command it actually transmits.
    pub fn start_write_mismatched(&mut self, signed: Command, sent: Command, now: u64) -> Result<Vec<Outbound>, Rejection> {
        if self.phase != ProgrammerPhase::ReadComplete {
            return Err(DropReason::UnexpectedHeading { expected: self.expected_next(), got: Heading::WriteAuthReq }.into());
        }
        Ok(self.signed_write(signed, sent, now))
    }

    fn signed_write(&mut self, signed: Command, sent: Command, now: u64) -> Vec<Outbound> {
        let sn = self.access.sn;
        let k_d_bytes = self.access.k_d.as_ref().expect("read completed").to_bytes();
        let msg = signed_bytes(
            &self.config.id_d,
            &self.access.id_s,
            &self.config.target_id_i,
            &self.access.c2,
            &k_d_bytes,
            signed.as_bytes(),
            now,
        );
        let sig = self.suite.sign(&self.credentials.private, &msg);
        let ts6 = now.to_be_bytes();
        let k_p = self.access.k_p.clone().expect("authenticated");
        let tag = self.suite.mac(&k_p, &mac_input(Some(Heading::WriteAuthReq), sn, &[&sig.0, &ts6]));
        self.access.cmd = Some(sent);
        self.phase = ProgrammerPhase::AwaitWriteReady;
        vec![wire(Role::Smartphone, Heading::WriteAuthReq, sn, vec![sig.0, ts6.to_vec(), tag.bytes])]
    }

    fn expected(&self) -> Option<(Heading, Role)> {
        use ProgrammerPhase::*;
        match self.phase {
            AwaitAuthReply => Some((Heading::AuthReq, Role::Smartphone)),
            AwaitKd => Some((Heading::ReadReady, Role::Smartphone)),
            AwaitData => Some((Heading::ReadReq, Role::Imd)),
            AwaitWriteReady => Some((Heading::WriteReady, Role::Smartphone)),
            AwaitWriteSucc => Some((Heading::WriteSucc, Role::Imd)),
            Loaded | AwaitRm | Authenticated | ReadComplete | WriteComplete => None,
        }
    }

    fn abort(&mut self, reason: AbortReason) -> Rejection {
        warn!("programmer aborts session: {reason}");
        self.access = Access::default();
        self.phase = ProgrammerPhase::Loaded;
        Rejection::Aborted(reason)
    }

    /// (iv).
    fn on_auth_reply(&mut self, f: &[Vec<u8>]) -> Handled {
        let nonce = match self.suite.pk_dec(&self.credentials.private, &f[1]) {
            Ok(n) => n,
            Err(_) => return Err(self.abort(AbortReason::DecryptFailed)),
        };
        self.access.id_s = f[0].clone();
        self.access.nonce = nonce;
        self.phase = ProgrammerPhase::AwaitRm;
        Ok(Vec::new())
    }

    /// (ix) → (x).
    fn on_kd(&mut self, sn: u64, f: &[Vec<u8>]) -> Handled {
        let k_p = self.access.k_p.clone().expect("authenticated");
        let k_d_bytes = match self.suite.sym_dec(&k_p, &f[0]) {
            Ok(p) => p,
            Err(_) => return Err(self.abort(AbortReason::DecryptFailed)),
        };
        let k_d = ShiftKey::from_bytes(&k_d_bytes, self.cs.profile().range()).map_err(|e| self.abort(bad_payload(e)))?;
        if k_d.len() != self.cs.profile().n {
            return Err(self.abort(bad_payload("shift key length does not match N")));
        }
        let k_r = self.suite.kdf(&[&k_d_bytes, &sn.to_be_bytes()]).expect("non-empty material");
        self.access.k_d = Some(k_d);
        self.access.k_r = Some(k_r);
        self.phase = ProgrammerPhase::AwaitData;
        Ok(vec![wire(Role::Imd, Heading::ReadReq, sn, Vec::new())])
    }

    /// (xi): check HMAC5, then de-shift and reconstruct.
    fn on_data(&mut self, sn: u64, f: &[Vec<u8>]) -> Handled {
        let k_r = self.access.k_r.clone().expect("key received");
        verify_mac(&mut self.suite, &k_r, &mac_input(None, sn, &[&f[0]]), &f[1]).map_err(|r| self.abort(r))?;
        let cts = self.cs.decode_batch(&f[0]).map_err(|e| self.abort(bad_payload(e)))?;
        let k_d = self.access.k_d.clone().expect("key received");
        let mut out = Vec::with_capacity(cts.len());
        for c in &cts {
            out.push(self.cs.decrypt(&k_d, c).map_err(|e| self.abort(bad_payload(e)))?);
        }
        self.recovered = out;
        self.access.c2 = f[0].clone();
        self.phase = ProgrammerPhase::ReadComplete;
        Ok(Vec::new())
    }

    /// (xv) → (xvi).
    fn on_write_ready(&mut self, sn: u64) -> Handled {
        let k_r = self.access.k_r.clone().expect("key received");
        let cmd = self.access.cmd.clone().expect("write started");
        let c3 = self.suite.sym_enc(&k_r, cmd.as_bytes());
        let tag = self.suite.mac(&k_r, &mac_input(Some(Heading::WriteReq), sn, &[&c3.0]));
        self.phase = ProgrammerPhase::AwaitWriteSucc;
        Ok(vec![wire(Role::Imd, Heading::WriteReq, sn, vec![c3.0, tag.bytes])])
    }
}

impl Party for Programmer {
    fn role(&self) -> Role {
        Role::Programmer
    }

    fn receive(&mut self, from: Role, bytes: &[u8], _now: u64) -> Handled {
        use ProgrammerPhase::*;
        let msg = accept(bytes, from, self.expected(), Some(self.access.sn))?;
        let sn = msg.session;
        match self.phase {
            AwaitAuthReply => self.on_auth_reply(fields(&msg, 2)?),
            AwaitKd => self.on_kd(sn, fields(&msg, 1)?),
            AwaitData => self.on_data(sn, fields(&msg, 2)?),
            AwaitWriteReady => {
                fields(&msg, 0)?;
                self.on_write_ready(sn)
            }
            AwaitWriteSucc => {
                fields(&msg, 0)?;
                self.phase = WriteComplete;
                Ok(Vec::new())
            }
            Loaded | AwaitRm | Authenticated | ReadComplete | WriteComplete => {
                unreachable!("accept rejects everything in phases without an expected heading")
            }
        }
    }

    fn expected_next(&self) -> Option<Heading> {
        self.expected().map(|(h, _)| h)
    }

    fn phase_name(&self) -> &'static str {
        use ProgrammerPhase::*;
        match self.phase {
            Loaded => "loaded",
            AwaitAuthReply => "await-auth-reply",
            AwaitRm => "await-rm",
            Authenticated => "authenticated",
            AwaitKd => "await-kd",
            AwaitData => "await-data",
            ReadComplete => "read-complete",
            AwaitWriteReady => "await-write-ready",
            AwaitWriteSucc => "await-write-succ",
            WriteComplete => "write-complete",
        }
    }

    fn counts(&self) -> OpCounts {
        self.suite.counts()
    }

    fn secrets(&self) -> SessionSecrets {
        let a = &self.access;
        let opt = |v: &Vec<u8>| (!v.is_empty()).then(|| v.clone());
        SessionSecrets {
            sn: (self.phase != ProgrammerPhase::Loaded).then_some(a.sn),
            k_p: a.k_p.clone(),
            k_r: a.k_r.clone(),
            k_d: a.k_d.clone(),
            rm: opt(&a.rm),
            nonce: opt(&a.nonce),
            cmd: a.cmd.clone(),
            ..SessionSecrets::default()
        }
    }

    fn timeout(&mut self) -> Option<AbortReason> {
        use ProgrammerPhase::*;
        match self.phase {
            Loaded | Authenticated | ReadComplete | WriteComplete => None,
            _ => {
                self.abort(AbortReason::Timeout);
                Some(AbortReason::Timeout)
            }
        }
    }
}
