use std::sync::Arc;

use esafe_core::codec::ShiftKey;
use esafe_core::BoundedSignal;
use log::warn;

use super::{accept, bad_payload, check_fresh, fields, mac_input, timestamp, verify_mac, wire, Handled, Party};
use crate::crypto::{CryptoSuite, OpCounts, SymmetricKey};
use crate::cs::CsContext;
use crate::error::{AbortReason, DropReason, Rejection};
use crate::session::{Command, ReplayCache, Role, SessionSecrets};
use crate::wire::{decode_exact, encode_fields, Heading};

#[derive(Debug, Clone)]
pub struct ImdConfig {
    pub id_i: Vec<u8>,
    /// Hard-coded master key `K`.
    pub master_key: Vec<u8>,
    pub freshness_window: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImdPhase {
    Unpaired,
    Paired,
    ReadArmed,
    ReadServed,
    WriteArmed,
    AwaitSetAllow,
}

#[derive(Clone, Default)]
struct Access {
    sn: u64,
    k_d: Option<ShiftKey>,
    k_r: Option<SymmetricKey>,
    c2: Vec<u8>,
    pending: Option<Command>,
}

/// The implant. Answers only the smartphone it paired with and only the
/// request it has been told to expect.
#[derive(Clone)]
pub struct Imd {
    config: ImdConfig,
    cs: Arc<CsContext>,
    suite: CryptoSuite,
    phase: ImdPhase,
    k_i: Option<SymmetricKey>,
    access: Access,
    seen: ReplayCache,
    data: Vec<BoundedSignal>,
    applied: Vec<Command>,
}

impl Imd {
    pub fn new(config: ImdConfig, cs: Arc<CsContext>, suite: CryptoSuite) -> Self {
        Self {
            config,
            cs,
            suite,
            phase: ImdPhase::Unpaired,
            k_i: None,
            access: Access::default(),
            seen: ReplayCache::default(),
            data: Vec::new(),
            applied: Vec::new(),
        }
    }

    pub fn phase(&self) -> ImdPhase {
        self.phase
    }

    /// Signals returned by the next read, one ciphertext each.
    pub fn set_data(&mut self, data: Vec<BoundedSignal>) {
        self.data = data;
    }

    pub fn data(&self) -> &[BoundedSignal] {
        &self.data
    }

    pub fn applied_commands(&self) -> &[Command] {
        &self.applied
    }

    pub fn config(&self) -> &ImdConfig {
        &self.config
    }

    fn expected(&self) -> Option<(Heading, Role)> {
        use ImdPhase::*;
        Some(match self.phase {
            Unpaired => (Heading::PairReq, Role::Smartphone),
            Paired => (Heading::ReadAllow, Role::Smartphone),
            ReadArmed => (Heading::ReadReq, Role::Programmer),
            ReadServed => (Heading::WriteAllow, Role::Smartphone),
            WriteArmed => (Heading::WriteReq, Role::Programmer),
            AwaitSetAllow => (Heading::SetAllow, Role::Smartphone),
        })
    }

    fn abort(&mut self, reason: AbortReason) -> Rejection {
        warn!("imd aborts session: {reason}");
        self.access = Access::default();
        if self.phase != ImdPhase::Unpaired {
            self.phase = ImdPhase::Paired;
        }
        Rejection::Aborted(reason)
    }

    fn k_i(&self) -> SymmetricKey {
        self.k_i.clone().expect("paired")
    }

    fn k_r(&self) -> SymmetricKey {
        self.access.k_r.clone().expect("read allowed")
    }

    /// (i) → (ii). Failures are silent.
    fn on_pair_req(&mut self, sn0: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let ts1 = timestamp(&f[1], 1)?;
        check_fresh(ts1, now, self.config.freshness_window)?;
        if self.seen.contains(sn0) {
            return Err(DropReason::Replayed.into());
        }
        let id_s = &f[0];
        let Ok(k_i) = self.suite.kdf(&[&self.config.master_key, id_s, &self.config.id_i]) else {
            return Err(DropReason::PairingRejected.into());
        };
        let input = mac_input(Some(Heading::PairReq), sn0, &[id_s, &f[1]]);
        if !self.suite.mac_verify(&k_i, &input, &f[2]) {
            return Err(DropReason::PairingRejected.into());
        }
        self.seen.insert(sn0);
        self.k_i = Some(k_i);
        self.phase = ImdPhase::Paired;
        Ok(vec![wire(Role::Smartphone, Heading::PairSucc, sn0, Vec::new())])
    }

    /// (vii) → (viii).
    fn on_read_allow(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let ts5 = timestamp(&f[2], 2)?;
        check_fresh(ts5, now, self.config.freshness_window)?;
        if self.seen.contains(sn) {
            return Err(DropReason::Replayed.into());
        }
        let k_i = self.k_i();
        let input = mac_input(Some(Heading::ReadAllow), sn, &[&f[0], &f[1], &f[2]]);
        verify_mac(&mut self.suite, &k_i, &input, &f[3]).map_err(|r| self.abort(r))?;
        let plain = match self.suite.sym_dec(&k_i, &f[1]) {
            Ok(p) => p,
            Err(_) => return Err(self.abort(AbortReason::DecryptFailed)),
        };
        let parts = decode_exact(&plain, 2).map_err(|e| self.abort(bad_payload(e)))?;
        let k_d = ShiftKey::from_bytes(parts[0], self.cs.profile().range()).map_err(|e| self.abort(bad_payload(e)))?;
        if k_d.len() != self.cs.profile().n {
            return Err(self.abort(bad_payload("shift key length does not match N")));
        }
        let k_r = SymmetricKey::from_slice(parts[1]).map_err(|e| self.abort(bad_payload(e)))?;
        self.seen.insert(sn);
        self.access = Access { sn, k_d: Some(k_d), k_r: Some(k_r), ..Access::default() };
        self.phase = ImdPhase::ReadArmed;
        Ok(vec![wire(Role::Smartphone, Heading::ReadReady, sn, Vec::new())])
    }

    /// (x) → (xi).
    fn on_read_req(&mut self, sn: u64) -> Handled {
        let k_d = self.access.k_d.clone().expect("read allowed");
        let mut cts = Vec::with_capacity(self.data.len());
        for x in &self.data {
            self.suite.record_cs_enc();
            match self.cs.encrypt(&k_d, x) {
                Ok(c) => cts.push(c),
                Err(e) => return Err(self.abort(bad_payload(e))),
            }
        }
        let c2 = CsContext::encode_batch(&cts).map_err(|e| self.abort(bad_payload(e)))?;
        let k_r = self.k_r();
        let tag = self.suite.mac(&k_r, &mac_input(None, sn, &[&c2]));
        self.access.c2 = c2.clone();
        self.phase = ImdPhase::ReadServed;
        Ok(vec![wire(Role::Programmer, Heading::ReadReq, sn, vec![c2, tag.bytes])])
    }

    /// (xiii) → (xiv).
    fn on_write_allow(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let ts7 = timestamp(&f[1], 1)?;
        check_fresh(ts7, now, self.config.freshness_window)?;
        let k_i = self.k_i();
        let input = mac_input(Some(Heading::WriteAllow), sn, &[&f[0], &f[1]]);
        verify_mac(&mut self.suite, &k_i, &input, &f[2]).map_err(|r| self.abort(r))?;
        self.phase = ImdPhase::WriteArmed;
        Ok(vec![wire(Role::Smartphone, Heading::WriteReady, sn, Vec::new())])
    }

    /// (xvi) → (xvii).
    fn on_write_req(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let k_r = self.k_r();
        let input = mac_input(Some(Heading::WriteReq), sn, &[&f[0]]);
        verify_mac(&mut self.suite, &k_r, &input, &f[1]).map_err(|r| self.abort(r))?;
        let plain = match self.suite.sym_dec(&k_r, &f[0]) {
            Ok(p) => p,
            Err(_) => return Err(self.abort(AbortReason::DecryptFailed)),
        };
        let cmd = Command::from_bytes(&plain).map_err(|e| self.abort(bad_payload(e)))?;
        let k_i = self.k_i();
        let report = self.suite.sym_enc(
            &k_i,
            &encode_fields(&[cmd.as_bytes(), &self.config.id_i, &now.to_be_bytes()]),
        );
        self.access.pending = Some(cmd);
        self.phase = ImdPhase::AwaitSetAllow;
        Ok(vec![wire(Role::Smartphone, Heading::WriteReq, sn, vec![self.access.c2.clone(), report.0])])
    }

    /// (xviii) → apply, (xix).
    fn on_set_allow(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let ts8 = timestamp(&f[0], 0)?;
        check_fresh(ts8, now, self.config.freshness_window)?;
        let k_i = self.k_i();
        let input = mac_input(Some(Heading::SetAllow), sn, &[&f[0]]);
        verify_mac(&mut self.suite, &k_i, &input, &f[1]).map_err(|r| self.abort(r))?;
        let cmd = self.access.pending.take().expect("command pending");
        self.applied.push(cmd);
        self.access = Access::default();
        self.phase = ImdPhase::Paired;
        Ok(vec![wire(Role::Programmer, Heading::WriteSucc, sn, Vec::new())])
    }
}

impl Party for Imd {
    fn role(&self) -> Role {
        Role::Imd
    }

    fn receive(&mut self, from: Role, bytes: &[u8], now: u64) -> Handled {
        use ImdPhase::*;
        let session = match self.phase {
            Unpaired | Paired => None,
            _ => Some(self.access.sn),
        };
        let msg = accept(bytes, from, self.expected(), session)?;
        let sn = msg.session;
        match self.phase {
            Unpaired => self.on_pair_req(sn, fields(&msg, 3)?, now),
            Paired => self.on_read_allow(sn, fields(&msg, 4)?, now),
            ReadArmed => {
                fields(&msg, 0)?;
                self.on_read_req(sn)
            }
            ReadServed => self.on_write_allow(sn, fields(&msg, 3)?, now),
            WriteArmed => self.on_write_req(sn, fields(&msg, 2)?, now),
            AwaitSetAllow => self.on_set_allow(sn, fields(&msg, 2)?, now),
        }
    }

    fn expected_next(&self) -> Option<Heading> {
        self.expected().map(|(h, _)| h)
    }

    fn phase_name(&self) -> &'static str {
        use ImdPhase::*;
        match self.phase {
            Unpaired => "unpaired",
            Paired => "paired",
            ReadArmed => "read-armed",
            ReadServed => "read-served",
            WriteArmed => "write-armed",
            AwaitSetAllow => "await-set-allow",
        }
    }

    fn counts(&self) -> OpCounts {
        self.suite.counts()
    }

    fn secrets(&self) -> SessionSecrets {
        SessionSecrets {
            sn: self.access.k_r.as_ref().map(|_| self.access.sn),
            k_i: self.k_i.clone(),
            k_r: self.access.k_r.clone(),
            k_d: self.access.k_d.clone(),
            cmd: self.access.pending.clone(),
            ..SessionSecrets::default()
        }
    }

    fn timeout(&mut self) -> Option<AbortReason> {
        match self.phase {
            ImdPhase::Unpaired | ImdPhase::Paired => None,
            _ => {
                self.abort(AbortReason::Timeout);
                Some(AbortReason::Timeout)
            }
        }
    }
}
