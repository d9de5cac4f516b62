mod common;

use common::*;
use esafe_core::recovery::{classify_prd, prd, Quality};
use esafe_protocol::crypto::OpCounts;
use esafe_protocol::flow::{auth_flow, pair_flow, read_flow, write_flow, Delivery};
use esafe_protocol::party::{ImdPhase, Party, ProgrammerPhase, SmartphonePhase};
use esafe_protocol::{
    evidence_verify, AbortReason, Command, Credentials, Deployment, DeploymentConfig, DropReason, EvidenceLedger,
    Heading, Network, Rejection, Role, WireMessage,
};

fn imd_delta(dep: &Deployment, before: OpCounts) -> OpCounts {
    dep.imd.counts() - before
}

#[test]
fn honest_session_end_to_end() {
    let mut dep = deployment(1);
    let mut net = Recorder::default();
    let x = signal(1);

    let c0 = dep.imd.counts();
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert_eq!(imd_delta(&dep, c0), OpCounts { mac: 1, kdf: 1, ..OpCounts::default() });
    assert_eq!(dep.imd.phase(), ImdPhase::Paired);
    assert_eq!(dep.smartphone.secrets().k_i, dep.imd.secrets().k_i);

    let c1 = dep.imd.counts();
    assert!(auth_flow(&mut dep, &mut net).completed);
    assert_eq!(imd_delta(&dep, c1), OpCounts::default());
    let (s, p) = (dep.smartphone.secrets(), dep.programmer.secrets());
    assert!(s.k_p.is_some());
    assert_eq!(s.k_p, p.k_p);
    assert_eq!(s.nonce, p.nonce);
    assert_eq!(s.rm, p.rm);

    let c2 = dep.imd.counts();
    let log = read_flow(&mut dep, &mut net, vec![x.clone()]);
    assert!(log.completed, "{log:?}");
    assert_eq!(imd_delta(&dep, c2), OpCounts { sym_dec: 1, mac: 2, cs_enc: 1, ..OpCounts::default() });
    let (s, i, p) = (dep.smartphone.secrets(), dep.imd.secrets(), dep.programmer.secrets());
    assert!(s.k_r.is_some());
    assert_eq!(s.k_r, i.k_r);
    assert_eq!(s.k_r, p.k_r);
    assert_eq!(s.k_d.map(|k| k.to_bytes()), p.k_d.map(|k| k.to_bytes()));
    let quality = prd(x.values(), &dep.programmer.recovered()[0]).unwrap();
    assert_eq!(classify_prd(quality).unwrap(), Quality::VeryGood, "PRD {quality}");

    let c3 = dep.imd.counts();
    let cmd = Command::new(3, b"rate=72").unwrap();
    let log = write_flow(&mut dep, &mut net, cmd.clone());
    assert!(log.completed, "{log:?}");
    assert_eq!(imd_delta(&dep, c3), OpCounts { sym_enc: 1, sym_dec: 1, mac: 3, ..OpCounts::default() });
    assert_eq!(dep.imd.applied_commands(), &[cmd]);
    let ledger = dep.smartphone.ledger();
    assert_eq!(ledger.len(), 1);
    assert!(evidence_verify(&ledger.records()[0], &credentials().doctor.public));
    assert_eq!(dep.programmer.phase(), ProgrammerPhase::WriteComplete);
    assert_eq!(dep.smartphone.phase(), SmartphonePhase::Paired);

    let headings: Vec<u8> = net.transcript.iter().map(|d| d.bytes[0]).collect();
    assert_eq!(headings, [1, 2, 3, 3, 5, 6, 7, 7, 8, 8, 9, 10, 11, 11, 12, 12, 13, 14]);
}

#[test]
fn read_counts_scale_with_signal_count() {
    let mut dep = deployment(2);
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert!(auth_flow(&mut dep, &mut net).completed);
    let before = dep.imd.counts();
    let data: Vec<_> = (0..3).map(signal).collect();
    assert!(read_flow(&mut dep, &mut net, data.clone()).completed);
    assert_eq!(imd_delta(&dep, before), OpCounts { sym_dec: 1, mac: 2, cs_enc: 3, ..OpCounts::default() });
    for (x, r) in data.iter().zip(dep.programmer.recovered()) {
        assert!(prd(x.values(), r).unwrap() < 2.0);
    }
}

#[test]
fn wrong_master_key_gets_no_answer() {
    let config = DeploymentConfig { entered_key: Some(b"wrong key".to_vec()), ..config(3) };
    let mut dep = Deployment::with_context(&config, credentials(), context()).unwrap();
    let mut net = Recorder::default();
    let log = pair_flow(&mut dep, &mut net);
    assert!(!log.completed);
    assert_eq!(net.transcript.len(), 1, "IMD must stay silent");
    assert_eq!(log.rejections, vec![(Role::Imd, Rejection::Dropped(DropReason::PairingRejected))]);
    assert_eq!(dep.imd.phase(), ImdPhase::Unpaired);
}

#[test]
fn stale_pairing_replay_is_dropped() {
    let mut dep = deployment(4);
    let mut net = Recorder::default();
    let out = dep.smartphone.start_pairing(dep.clock);
    dep.dispatch(Role::Smartphone, out, &mut net);
    let recorded = net.transcript[0].clone();

    let mut fresh = deployment(4);
    fresh.clock += 31;
    let r = fresh.imd.receive(Role::Smartphone, &recorded.bytes, fresh.clock);
    assert_eq!(r, Err(Rejection::Dropped(DropReason::Stale)));
    fresh.clock -= 1;
    assert!(fresh.imd.receive(Role::Smartphone, &recorded.bytes, fresh.clock).is_ok(), "boundary is accepted");
}

#[test]
fn certificate_from_unknown_authority_aborts() {
    let rogue = Credentials::generate(b"rogue", &DeploymentConfig::default().id_d, RSA_BITS).unwrap();
    let mut dep = deployment(5);
    dep.programmer = Deployment::with_context(&config(5), &rogue, context()).unwrap().programmer;
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    let log = auth_flow(&mut dep, &mut net);
    assert!(!log.completed);
    assert!(log.rejections.contains(&(Role::Smartphone, Rejection::Aborted(AbortReason::BadCertificate))));
    assert!(dep.doctor_phone.is_empty(), "no RM for an uncertified doctor");
    assert_eq!(dep.smartphone.phase(), SmartphonePhase::Paired);
}

#[test]
fn missing_rm_times_out() {
    let mut dep = deployment(6);
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    let out = dep.programmer.start_auth(dep.clock);
    dep.dispatch(Role::Programmer, out, &mut net);
    let mut log = Default::default();
    dep.pump(&mut net, &mut log);
    assert_eq!(dep.programmer.phase(), ProgrammerPhase::AwaitRm);
    assert_eq!(dep.programmer.timeout(), Some(AbortReason::Timeout));
    assert_eq!(dep.programmer.phase(), ProgrammerPhase::Loaded);
    assert!(dep.programmer.secrets().k_p.is_none());
}

/// Network that flips one bit of the first message matching a heading.
struct Tamper {
    inner: Recorder,
    heading: Heading,
    from: Role,
    field: usize,
    done: bool,
}

impl Network for Tamper {
    fn submit(&mut self, mut d: Delivery, now: u64) {
        if !self.done && d.bytes[0] == self.heading.code() && d.from == self.from {
            let mut m = WireMessage::decode(&d.bytes).unwrap();
            m.fields[self.field][0] ^= 0x80;
            d.bytes = m.encode();
            self.done = true;
        }
        self.inner.submit(d, now)
    }

    fn poll(&mut self, now: u64) -> Option<Delivery> {
        self.inner.poll(now)
    }
}

#[test]
fn tampered_c2_is_rejected_before_reconstruction() {
    let mut dep = deployment(7);
    let mut net = Tamper { inner: Recorder::default(), heading: Heading::ReadReq, from: Role::Imd, field: 0, done: false };
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert!(auth_flow(&mut dep, &mut net).completed);
    let log = read_flow(&mut dep, &mut net, vec![signal(7)]);
    assert!(net.done);
    assert!(!log.completed);
    assert!(log.rejections.contains(&(Role::Programmer, Rejection::Aborted(AbortReason::BadMac))));
    assert!(dep.programmer.recovered().is_empty());
}

#[test]
fn signed_command_must_match_sent_command() {
    let mut dep = deployment(8);
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert!(auth_flow(&mut dep, &mut net).completed);
    assert!(read_flow(&mut dep, &mut net, vec![signal(8)]).completed);
    let signed = Command::new(1, b"rate=60").unwrap();
    for i in 0..signed.as_bytes().len() {
        let mut probe = dep.clone();
        let mut net = Recorder::default();
        let mut bytes = signed.as_bytes().to_vec();
        bytes[i] ^= 0x01;
        let sent = Command::from_bytes(&bytes).unwrap();
        let out = probe.programmer.start_write_mismatched(signed.clone(), sent, probe.clock).unwrap();
        probe.dispatch(Role::Programmer, out, &mut net);
        let mut log = Default::default();
        probe.pump(&mut net, &mut log);
        assert!(log.rejections.contains(&(Role::Smartphone, Rejection::Aborted(AbortReason::BadSignature))));
        assert!(!net.transcript.iter().any(|d| d.bytes[0] == Heading::SetAllow.code()), "R13 withheld");
        assert!(probe.imd.applied_commands().is_empty());
        assert!(probe.smartphone.ledger().is_empty());
        assert_eq!(probe.smartphone.incidents().len(), 1);
    }
}

#[test]
fn write_requires_a_read() {
    let mut dep = deployment(9);
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert!(auth_flow(&mut dep, &mut net).completed);
    let log = write_flow(&mut dep, &mut net, Command::new(1, b"x").unwrap());
    assert!(!log.completed);
    assert!(dep.imd.applied_commands().is_empty());
}

#[test]
fn replayed_write_request_applies_once() {
    let mut dep = deployment(10);
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert!(auth_flow(&mut dep, &mut net).completed);
    assert!(read_flow(&mut dep, &mut net, vec![signal(10)]).completed);
    assert!(write_flow(&mut dep, &mut net, Command::new(2, b"on").unwrap()).completed);
    let xvi = net.transcript.iter().find(|d| d.from == Role::Programmer && d.bytes[0] == 12).unwrap().clone();
    let r = dep.deliver(xvi, &mut net);
    assert!(matches!(r, Err(Rejection::Dropped(_))));
    assert_eq!(dep.imd.applied_commands().len(), 1);
}

#[test]
fn transcript_never_contains_secrets() {
    let mut dep = deployment(11);
    let mut net = Recorder::default();
    let x = signal(11);
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert!(auth_flow(&mut dep, &mut net).completed);
    assert!(read_flow(&mut dep, &mut net, vec![x.clone()]).completed);
    let before_write = (dep.smartphone.secrets(), dep.programmer.secrets());
    let cmd = Command::new(9, b"secret therapy setting").unwrap();
    assert!(write_flow(&mut dep, &mut net, cmd.clone()).completed);

    let (s, p) = before_write;
    let raw: Vec<u8> = x.values().iter().flat_map(|v| v.to_be_bytes()).collect();
    let mut secrets: Vec<(&str, Vec<u8>)> = vec![
        ("K", DeploymentConfig::default().master_key),
        ("K_i", s.k_i.unwrap().as_bytes().to_vec()),
        ("K_p", s.k_p.unwrap().as_bytes().to_vec()),
        ("K_r", s.k_r.unwrap().as_bytes().to_vec()),
        ("K_d", s.k_d.unwrap().to_bytes()),
        ("RM", s.rm.unwrap()),
        ("nonce", p.nonce.unwrap()),
        ("CMD", cmd.as_bytes().to_vec()),
        ("data", raw),
    ];
    for v in x.values() {
        secrets.push(("sample", v.to_be_bytes().to_vec()));
    }
    for d in &net.transcript {
        for (name, bytes) in &secrets {
            assert!(!contains(&d.bytes, bytes), "{name} leaked in heading {}", d.bytes[0]);
        }
    }
}

#[test]
fn out_of_order_headings_leave_state_alone() {
    use rand::{Rng, SeedableRng};
    let mut dep = deployment(12);
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    assert!(auth_flow(&mut dep, &mut net).completed);
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(12);
    for _ in 0..2000 {
        let role = [Role::Smartphone, Role::Imd, Role::Programmer][rng.gen_range(0..3)];
        let from = [Role::Smartphone, Role::Imd, Role::Programmer][rng.gen_range(0..3)];
        let heading = Heading::from_code(rng.gen_range(1..=14)).unwrap();
        let party: &dyn Party = match role {
            Role::Smartphone => &dep.smartphone,
            Role::Imd => &dep.imd,
            _ => &dep.programmer,
        };
        if party.expected_next() == Some(heading) {
            continue;
        }
        let before = (party.phase_name(), party.counts());
        let sn = party.secrets().sn.unwrap_or(0);
        let n = rng.gen_range(0..5);
        let msg = WireMessage::new(heading, sn, (0..n).map(|i| vec![i as u8; 8]).collect()).encode();
        let now = dep.clock;
        let party = dep.party_mut(role).unwrap();
        let r = party.receive(from, &msg, now);
        assert!(matches!(r, Err(Rejection::Dropped(DropReason::UnexpectedHeading { .. }))), "{r:?}");
        assert_eq!((party.phase_name(), party.counts()), before);
    }
    assert!(read_flow(&mut dep, &mut net, vec![signal(12)]).completed, "session still usable");
}

#[test]
fn evidence_ledger_persists_and_detects_mutation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("evidence.bin");
    let mut dep = deployment(13);
    dep.set_ledger(EvidenceLedger::open(&path).unwrap());
    let mut net = Recorder::default();
    assert!(pair_flow(&mut dep, &mut net).completed);
    for k in 0..2u16 {
        assert!(auth_flow(&mut dep, &mut net).completed);
        assert!(read_flow(&mut dep, &mut net, vec![signal(13)]).completed);
        assert!(write_flow(&mut dep, &mut net, Command::new(k, b"cmd").unwrap()).completed);
    }
    let stored = EvidenceLedger::load(&path).unwrap();
    assert_eq!(stored, dep.smartphone.ledger().records());
    assert_eq!(stored.len(), 2);
    let pk = &credentials().doctor.public;
    for r in &stored {
        assert!(evidence_verify(r, pk));
        let fields: [&dyn Fn(&mut esafe_protocol::EvidenceRecord); 8] = [
            &|r| r.id_d[0] ^= 1,
            &|r| r.id_s[0] ^= 1,
            &|r| r.id_i[0] ^= 1,
            &|r| r.k_d[3] ^= 1,
            &|r| r.c2[20] ^= 1,
            &|r| r.cmd[2] ^= 1,
            &|r| r.ts6 ^= 1,
            &|r| r.sig[5] ^= 1,
        ];
        for mutate in fields {
            let mut m = r.clone();
            mutate(&mut m);
            assert!(!evidence_verify(&m, pk));
        }
        let mut swapped = r.clone();
        std::mem::swap(&mut swapped.k_d, &mut swapped.c2);
        assert!(!evidence_verify(&swapped, pk), "K_d and C2 order matters");
    }
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(EvidenceLedger::load(&path).is_err());
}
