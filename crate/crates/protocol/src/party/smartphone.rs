use std::sync::Arc;

use esafe_core::codec::ShiftKey;
use log::warn;

use super::{accept, bad_payload, check_fresh, fields, mac_input, timestamp, verify_mac, wire, Handled, Party};
use crate::crypto::{Certificate, CryptoSuite, OpCounts, PublicKey, SymmetricKey};
use crate::cs::CsContext;
use crate::error::{AbortReason, DropReason, Rejection};
use crate::evidence::{signed_bytes, EvidenceLedger, EvidenceRecord};
use crate::session::{Command, Outbound, ReplayCache, Role, SessionSecrets, NONCE_LEN, RM_LEN};
use crate::wire::{decode_exact, Heading};

#[derive(Debug, Clone)]
pub struct SmartphoneConfig {
    pub id_s: Vec<u8>,
    pub id_i: Vec<u8>,
    /// Master key `K` as entered by the patient.
    pub master_key: Vec<u8>,
    pub ca_public: PublicKey,
    pub freshness_window: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmartphonePhase {
    Idle,
    AwaitPairSucc,
    /// Paired with the IMD; waiting for a programmer to authenticate.
    Paired,
    AwaitReadAuth,
    AwaitReadReady,
    ReadDelivered,
    AwaitWriteReady,
    AwaitWriteReport,
}

#[derive(Clone, Default)]
struct Access {
    sn: u64,
    id_d: Vec<u8>,
    pk: Option<PublicKey>,
    nonce: Vec<u8>,
    rm: Vec<u8>,
    k_p: Option<SymmetricKey>,
    k_d: Option<ShiftKey>,
    k_r: Option<SymmetricKey>,
    sig: Vec<u8>,
    ts6: u64,
}

/// The patient's phone: pairs with the IMD, authenticates doctors, hands
/// out per-session keys and keeps the evidence ledger.
#[derive(Clone)]
pub struct Smartphone {
    config: SmartphoneConfig,
    cs: Arc<CsContext>,
    suite: CryptoSuite,
    phase: SmartphonePhase,
    sn0: u64,
    k_i: Option<SymmetricKey>,
    access: Access,
    seen: ReplayCache,
    ledger: EvidenceLedger,
    incidents: Vec<String>,
}

impl Smartphone {
    pub fn new(config: SmartphoneConfig, cs: Arc<CsContext>, suite: CryptoSuite, ledger: EvidenceLedger) -> Self {
        Self {
            config,
            cs,
            suite,
            phase: SmartphonePhase::Idle,
            sn0: 0,
            k_i: None,
            access: Access::default(),
            seen: ReplayCache::default(),
            ledger,
            incidents: Vec::new(),
        }
    }

    pub fn phase(&self) -> SmartphonePhase {
        self.phase
    }

    pub fn ledger(&self) -> &EvidenceLedger {
        &self.ledger
    }

    pub fn set_ledger(&mut self, ledger: EvidenceLedger) {
        self.ledger = ledger;
    }

    pub fn incidents(&self) -> &[String] {
        &self.incidents
    }

    pub fn config(&self) -> &SmartphoneConfig {
        &self.config
    }

    /// Step (i): the patient has entered `K`; send the pairing request.
    pub fn start_pairing(&mut self, now: u64) -> Vec<Outbound> {
        let k_i = self
            .suite
            .kdf(&[&self.config.master_key, &self.config.id_s, &self.config.id_i])
            .expect("non-empty material");
        self.sn0 = self.suite.random_u64();
        let ts1 = now.to_be_bytes();
        let tag = self.suite.mac(&k_i, &mac_input(Some(Heading::PairReq), self.sn0, &[&self.config.id_s, &ts1]));
        self.k_i = Some(k_i);
        self.access = Access::default();
        self.phase = SmartphonePhase::AwaitPairSucc;
        vec![wire(
            Role::Imd,
            Heading::PairReq,
            self.sn0,
            vec![self.config.id_s.clone(), ts1.to_vec(), tag.bytes],
        )]
    }

    fn expected(&self) -> Option<(Heading, Role)> {
        use SmartphonePhase::*;
        match self.phase {
            Idle => None,
            AwaitPairSucc => Some((Heading::PairSucc, Role::Imd)),
            Paired => Some((Heading::AuthReq, Role::Programmer)),
            AwaitReadAuth => Some((Heading::ReadAuthReq, Role::Programmer)),
            AwaitReadReady => Some((Heading::ReadReady, Role::Imd)),
            ReadDelivered => Some((Heading::WriteAuthReq, Role::Programmer)),
            AwaitWriteReady => Some((Heading::WriteReady, Role::Imd)),
            AwaitWriteReport => Some((Heading::WriteReq, Role::Imd)),
        }
    }

    fn abort(&mut self, reason: AbortReason) -> Rejection {
        warn!("smartphone aborts session: {reason}");
        self.access = Access::default();
        self.phase = if self.k_i.is_some() && self.phase != SmartphonePhase::AwaitPairSucc {
            SmartphonePhase::Paired
        } else {
            SmartphonePhase::Idle
        };
        Rejection::Aborted(reason)
    }

    fn k_i(&self) -> &SymmetricKey {
        self.k_i.as_ref().expect("paired")
    }

    fn k_p(&self) -> &SymmetricKey {
        self.access.k_p.as_ref().expect("authenticated")
    }

    fn on_pair_succ(&mut self) -> Handled {
        self.seen.insert(self.sn0);
        self.phase = SmartphonePhase::Paired;
        Ok(Vec::new())
    }

    /// (iii) → (iv) + (v).
    fn on_auth_req(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let ts2 = timestamp(&f[1], 1)?;
        check_fresh(ts2, now, self.config.freshness_window)?;
        if self.seen.contains(sn) {
            return Err(DropReason::Replayed.into());
        }
        let (id_d, pk_der, cert_bytes) = (&f[0], &f[2], &f[3]);
        let cert = match Certificate::from_bytes(cert_bytes) {
            Ok(c) => c,
            Err(_) => return Err(self.abort(AbortReason::BadCertificate)),
        };
        let ca = self.config.ca_public.clone();
        if !self.suite.cert_verify(&ca, &cert) || &cert.subject_id != id_d || &cert.subject_key != pk_der {
            self.incidents.push(format!("certificate rejected for session {sn:016x}"));
            return Err(self.abort(AbortReason::BadCertificate));
        }
        let pk = match PublicKey::from_der(pk_der) {
            Ok(pk) => pk,
            Err(_) => return Err(self.abort(AbortReason::BadCertificate)),
        };
        self.seen.insert(sn);
        let nonce = self.suite.random_bytes(NONCE_LEN);
        let rm = self.suite.random_bytes(RM_LEN);
        let enc_nonce = self.suite.pk_enc(&pk, &nonce).map_err(|e| self.abort(bad_payload(e)))?;
        let k_p = self.suite.kdf(&[&rm, &sn.to_be_bytes(), &nonce]).expect("non-empty material");
        self.access = Access {
            sn,
            id_d: id_d.clone(),
            pk: Some(pk),
            nonce,
            rm: rm.clone(),
            k_p: Some(k_p),
            ..Access::default()
        };
        self.phase = SmartphonePhase::AwaitReadAuth;
        Ok(vec![
            wire(Role::Programmer, Heading::AuthReq, sn, vec![self.config.id_s.clone(), enc_nonce.0]),
            Outbound::OutOfBand { to: Role::DoctorPhone, payload: rm },
        ])
    }

    /// (vi) → (vii).
    fn on_read_auth(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let ts4 = timestamp(&f[0], 0)?;
        check_fresh(ts4, now, self.config.freshness_window)?;
        let input = mac_input(Some(Heading::ReadAuthReq), sn, &[&f[0]]);
        let k_p = self.k_p().clone();
        verify_mac(&mut self.suite, &k_p, &input, &f[1]).map_err(|r| self.abort(r))?;

        let key_seed = self.suite.random_bytes(32);
        let k_d = self.cs.gen_key(&key_seed).map_err(|e| self.abort(bad_payload(e)))?;
        let k_d_bytes = k_d.to_bytes();
        let k_r = self.suite.kdf(&[&k_d_bytes, &sn.to_be_bytes()]).expect("non-empty material");
        let k_i = self.k_i().clone();
        let c1 = self.suite.sym_enc(&k_i, &crate::wire::encode_fields(&[&k_d_bytes, k_r.as_bytes()]));
        let ts5 = now.to_be_bytes();
        let id_d = self.access.id_d.clone();
        let tag = self.suite.mac(&k_i, &mac_input(Some(Heading::ReadAllow), sn, &[&id_d, &c1.0, &ts5]));
        self.access.k_d = Some(k_d);
        self.access.k_r = Some(k_r);
        self.phase = SmartphonePhase::AwaitReadReady;
        Ok(vec![wire(Role::Imd, Heading::ReadAllow, sn, vec![id_d, c1.0, ts5.to_vec(), tag.bytes])])
    }

    /// (viii) → (ix).
    fn on_read_ready(&mut self, sn: u64) -> Handled {
        let k_p = self.k_p().clone();
        let k_d_bytes = self.access.k_d.as_ref().expect("read allowed").to_bytes();
        let blob = self.suite.sym_enc(&k_p, &k_d_bytes);
        self.phase = SmartphonePhase::ReadDelivered;
        Ok(vec![wire(Role::Programmer, Heading::ReadReady, sn, vec![blob.0])])
    }

    /// (xii) → (xiii).
    fn on_write_auth(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let ts6 = timestamp(&f[1], 1)?;
        check_fresh(ts6, now, self.config.freshness_window)?;
        let input = mac_input(Some(Heading::WriteAuthReq), sn, &[&f[0], &f[1]]);
        let k_p = self.k_p().clone();
        verify_mac(&mut self.suite, &k_p, &input, &f[2]).map_err(|r| self.abort(r))?;
        self.access.sig = f[0].clone();
        self.access.ts6 = ts6;
        let ts7 = now.to_be_bytes();
        let id_d = self.access.id_d.clone();
        let k_i = self.k_i().clone();
        let tag = self.suite.mac(&k_i, &mac_input(Some(Heading::WriteAllow), sn, &[&id_d, &ts7]));
        self.phase = SmartphonePhase::AwaitWriteReady;
        Ok(vec![wire(Role::Imd, Heading::WriteAllow, sn, vec![id_d, ts7.to_vec(), tag.bytes])])
    }

    /// (xiv) → (xv).
    fn on_write_ready(&mut self, sn: u64) -> Handled {
        self.phase = SmartphonePhase::AwaitWriteReport;
        Ok(vec![wire(Role::Programmer, Heading::WriteReady, sn, Vec::new())])
    }

    /// (xvii): verify the doctor's signature against what the IMD received,
    /// store the evidence, then (xviii).
    fn on_write_report(&mut self, sn: u64, f: &[Vec<u8>], now: u64) -> Handled {
        let c2 = &f[0];
        let k_i = self.k_i().clone();
        let plain = match self.suite.sym_dec(&k_i, &f[1]) {
            Ok(p) => p,
            Err(_) => return Err(self.abort(AbortReason::DecryptFailed)),
        };
        let parts = decode_exact(&plain, 3).map_err(|e| self.abort(bad_payload(e)))?;
        let cmd = Command::from_bytes(parts[0]).map_err(|e| self.abort(bad_payload(e)))?;
        if parts[1] != self.config.id_i.as_slice() {
            return Err(self.abort(bad_payload("report names a different IMD")));
        }
        let ts = timestamp(parts[2], 2).map_err(|_| self.abort(bad_payload("bad timestamp")))?;
        if !crate::session::freshness_check(ts, now, self.config.freshness_window) {
            return Err(self.abort(bad_payload("stale write report")));
        }
        let k_d_bytes = self.access.k_d.as_ref().expect("read completed").to_bytes();
        let signed = signed_bytes(
            &self.access.id_d,
            &self.config.id_s,
            &self.config.id_i,
            c2,
            &k_d_bytes,
            cmd.as_bytes(),
            self.access.ts6,
        );
        let pk = self.access.pk.clone().expect("authenticated");
        let sig = self.access.sig.clone();
        if !self.suite.verify(&pk, &signed, &sig) {
            self.incidents.push(format!(
                "write in session {sn:016x}: signature does not cover the command the IMD received"
            ));
            return Err(self.abort(AbortReason::BadSignature));
        }
        let record = EvidenceRecord {
            id_d: self.access.id_d.clone(),
            id_s: self.config.id_s.clone(),
            id_i: self.config.id_i.clone(),
            k_d: k_d_bytes,
            c2: c2.clone(),
            cmd: cmd.as_bytes().to_vec(),
            ts6: self.access.ts6,
            sig,
        };
        if let Err(e) = self.ledger.append(record) {
            self.incidents.push(format!("ledger write failed: {e}"));
            return Err(self.abort(bad_payload("evidence could not be stored")));
        }
        let ts8 = now.to_be_bytes();
        let tag = self.suite.mac(&k_i, &mac_input(Some(Heading::SetAllow), sn, &[&ts8]));
        self.access = Access::default();
        self.phase = SmartphonePhase::Paired;
        Ok(vec![wire(Role::Imd, Heading::SetAllow, sn, vec![ts8.to_vec(), tag.bytes])])
    }
}

impl Party for Smartphone {
    fn role(&self) -> Role {
        Role::Smartphone
    }

    fn receive(&mut self, from: Role, bytes: &[u8], now: u64) -> Handled {
        use SmartphonePhase::*;
        let session = match self.phase {
            Idle | Paired => None,
            AwaitPairSucc => Some(self.sn0),
            _ => Some(self.access.sn),
        };
        let msg = accept(bytes, from, self.expected(), session)?;
        let sn = msg.session;
        match self.phase {
            AwaitPairSucc => {
                fields(&msg, 0)?;
                self.on_pair_succ()
            }
            Paired => self.on_auth_req(sn, fields(&msg, 4)?, now),
            AwaitReadAuth => self.on_read_auth(sn, fields(&msg, 2)?, now),
            AwaitReadReady => {
                fields(&msg, 0)?;
                self.on_read_ready(sn)
            }
            ReadDelivered => self.on_write_auth(sn, fields(&msg, 3)?, now),
            AwaitWriteReady => {
                fields(&msg, 0)?;
                self.on_write_ready(sn)
            }
            AwaitWriteReport => self.on_write_report(sn, fields(&msg, 2)?, now),
            Idle => unreachable!("accept rejects everything while idle"),
        }
    }

    fn expected_next(&self) -> Option<Heading> {
        self.expected().map(|(h, _)| h)
    }

    fn phase_name(&self) -> &'static str {
        use SmartphonePhase::*;
        match self.phase {
            Idle => "idle",
            AwaitPairSucc => "await-pair-succ",
            Paired => "paired",
            AwaitReadAuth => "await-read-auth",
            AwaitReadReady => "await-read-ready",
            ReadDelivered => "read-delivered",
            AwaitWriteReady => "await-write-ready",
            AwaitWriteReport => "await-write-report",
        }
    }

    fn counts(&self) -> OpCounts {
        self.suite.counts()
    }

    fn secrets(&self) -> SessionSecrets {
        let a = &self.access;
        let opt = |v: &Vec<u8>| (!v.is_empty()).then(|| v.clone());
        SessionSecrets {
            sn: a.k_p.as_ref().map(|_| a.sn),
            k_i: self.k_i.clone(),
            k_p: a.k_p.clone(),
            k_r: a.k_r.clone(),
            k_d: a.k_d.clone(),
            rm: opt(&a.rm),
            nonce: opt(&a.nonce),
            cmd: None,
        }
    }

    fn timeout(&mut self) -> Option<AbortReason> {
        match self.phase {
            SmartphonePhase::Idle | SmartphonePhase::Paired => None,
            _ => {
                self.abort(AbortReason::Timeout);
                Some(AbortReason::Timeout)
            }
        }
    }
}
