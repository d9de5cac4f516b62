//! Active attacks on the read path: the relaying man in the middle, HMAC3
//! forgery, and RM brute force.

use esafe_core::recovery::prd;
use esafe_core::seed::seeded_rng;
use esafe_core::{CsCiphertext, ShiftKey};
use esafe_protocol::crypto::{CryptoSuite, SuiteConfig, SymmetricKey};
use esafe_protocol::flow::{auth_flow, pair_flow, DirectNetwork};
use esafe_protocol::party::{mac_input, Party};
use esafe_protocol::session::RM_LEN;
use esafe_protocol::{AbortReason, Heading, Rejection, Role, WireMessage};
use rand::RngCore;

use crate::guess::{default_guess_grid, key_guess_reconstruct, uniform_guess_attack};
use crate::scenario::{run_session, AnyAttacker, AttackerKind, MitmRelay, Outcome, ScenarioConfig};
use crate::HarnessError;

/// What the attacker holds beyond the radio link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MitmOptions {
    /// RM leaks when the doctor's phone link is observable.
    pub oob_exposed: bool,
    /// The doctor's private key is in the attacker's hands.
    pub credentials_stolen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMethod {
    /// No key material: best constant-key guess, scored with the true signal.
    UniformGuess,
    /// `K_p` rebuilt from RM and the nonce, then `K_d` unwrapped.
    DerivedKey,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitmReport {
    pub seed: u64,
    pub options: MitmOptions,
    pub captured_c2: bool,
    pub method: RecoveryMethod,
    pub attacker_prd: f64,
    pub programmer_outcome: Outcome,
    /// The programmer's PRD in the same seed with nobody in the middle.
    pub honest_prd: f64,
}

fn single_ciphertext(cs: &esafe_protocol::cs::CsContext, c2: &[u8]) -> Result<CsCiphertext, HarnessError> {
    let mut cts = cs.decode_batch(c2)?;
    if cts.len() != 1 {
        return Err(HarnessError::Precondition(format!("expected one record in C2, got {}", cts.len())));
    }
    Ok(cts.remove(0))
}

fn unwrap_kd(relay: &MitmRelay, config: &ScenarioConfig, suite: &mut CryptoSuite) -> Result<Option<ShiftKey>, HarnessError> {
    let (Some(rm), Some(sn), Some(enc_nonce), Some(blob)) = (&relay.rm, relay.sn, &relay.encrypted_nonce, &relay.key_blob) else {
        return Ok(None);
    };
    let creds = crate::scenario::shared_credentials(config.rsa_bits)?;
    let nonce = suite.pk_dec(&creds.doctor.private, enc_nonce)?;
    let k_p = suite.kdf(&[rm, &sn.to_be_bytes(), &nonce])?;
    let kd = suite.sym_dec(&k_p, blob)?;
    Ok(Some(ShiftKey::from_bytes(&kd, config.profile()?.range())?))
}

/// Runs a read with the attacker relaying between the programmer and the
/// rest, swallowing the IMD's data reply.
pub fn mitm_read_attack(config: &ScenarioConfig, seed: u64, options: MitmOptions) -> Result<MitmReport, HarnessError> {
    let attacked = ScenarioConfig {
        scenario: crate::Scenario::Read,
        attacker: AttackerKind::Mitm,
        degraded_oob: options.oob_exposed,
        ..config.clone()
    };
    let run = run_session(&attacked, seed)?;
    let AnyAttacker::Mitm(relay) = &run.attacker else { unreachable!("configured a relay") };
    let truth = run.data[0].values().to_vec();
    let score = |x_hat: &[f64]| prd(&truth, x_hat).unwrap_or(f64::INFINITY);
    let cs = attacked.context()?;

    let c2 = relay.c2.as_ref().ok_or_else(|| HarnessError::Precondition("C2 never crossed the link".into()))?;
    let c = single_ciphertext(&cs, c2)?;

    let mut suite = CryptoSuite::new(SuiteConfig::default(), seeded_rng("esafe/mitm", &seed.to_be_bytes()));
    let derived = if options.credentials_stolen { unwrap_kd(relay, &attacked, &mut suite)? } else { None };
    let (method, attacker_prd) = match derived {
        Some(k_d) => (RecoveryMethod::DerivedKey, score(&key_guess_reconstruct(&c, &cs, &k_d)?)),
        None => {
            let grid = default_guess_grid(cs.profile().range());
            (RecoveryMethod::UniformGuess, uniform_guess_attack(&c, &cs, &grid, &score)?.best.prd)
        }
    };

    let honest = run_session(&ScenarioConfig { attacker: AttackerKind::None, degraded_oob: false, ..attacked.clone() }, seed)?;
    let recovered = honest
        .deployment
        .programmer
        .recovered()
        .first()
        .ok_or_else(|| HarnessError::Precondition("honest read did not complete".into()))?;
    Ok(MitmReport {
        seed,
        options,
        captured_c2: true,
        method,
        attacker_prd,
        programmer_outcome: run.outcome(Role::Programmer),
        honest_prd: prd(&truth, recovered)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgeryReport {
    pub attempts: usize,
    pub accepted: usize,
    /// Rejections other than an abort for a bad MAC.
    pub other_rejections: usize,
}

/// Sends `attempts` forged read requests to a smartphone that is waiting
/// for one. Half carry random tags, half are keyed with a guessed RM.
pub fn hmac3_forgery_fuzz(config: &ScenarioConfig, seed: u64, attempts: usize) -> Result<ForgeryReport, HarnessError> {
    let mut dep = config.deployment(seed)?;
    let mut net = DirectNetwork::default();
    if !pair_flow(&mut dep, &mut net).completed || !auth_flow(&mut dep, &mut net).completed {
        return Err(HarnessError::Precondition("honest pairing and authentication failed".into()));
    }
    let sn = dep.smartphone.secrets().sn.ok_or_else(|| HarnessError::Precondition("no session".into()))?;
    let nonce_guess_len = esafe_protocol::session::NONCE_LEN;
    let mut rng = seeded_rng("esafe/hmac3-forgery", &seed.to_be_bytes());
    let mut suite = CryptoSuite::new(SuiteConfig::default(), seeded_rng("esafe/hmac3-forgery/suite", &seed.to_be_bytes()));
    let now = dep.clock + 1;
    let ts = now.to_be_bytes();
    let mut report = ForgeryReport { attempts, accepted: 0, other_rejections: 0 };
    for i in 0..attempts {
        let tag = if i % 2 == 0 {
            let mut t = vec![0u8; suite.config().mac.tag_len()];
            rng.fill_bytes(&mut t);
            t
        } else {
            let mut rm = [0u8; RM_LEN];
            let mut nonce = vec![0u8; nonce_guess_len];
            rng.fill_bytes(&mut rm);
            rng.fill_bytes(&mut nonce);
            let k_p = suite.kdf(&[&rm, &sn.to_be_bytes(), &nonce])?;
            suite.mac(&k_p, &mac_input(Some(Heading::ReadAuthReq), sn, &[&ts])).bytes
        };
        let bytes = WireMessage { heading: Heading::ReadAuthReq, session: sn, fields: vec![ts.to_vec(), tag] }.encode();
        let mut phone = dep.smartphone.clone();
        match phone.receive(Role::Programmer, &bytes, now) {
            Ok(_) => report.accepted += 1,
            Err(Rejection::Aborted(AbortReason::BadMac)) => {}
            Err(_) => report.other_rejections += 1,
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceReport {
    pub guesses: usize,
    pub matches: usize,
    /// Sanity check: the true RM reproduces the observed HMAC3.
    pub true_rm_matches: bool,
}

/// Offline search for RM against an observed HMAC3. The attacker is
/// granted the nonce (stolen credentials), which only makes the search easier.
pub fn rm_brute_force(config: &ScenarioConfig, seed: u64, guesses: usize) -> Result<BruteForceReport, HarnessError> {
    let mut dep = config.deployment(seed)?;
    let mut net = DirectNetwork::default();
    if !pair_flow(&mut dep, &mut net).completed || !auth_flow(&mut dep, &mut net).completed {
        return Err(HarnessError::Precondition("honest pairing and authentication failed".into()));
    }
    let now = dep.clock;
    let outs = dep.programmer.start_read(now).map_err(|r| HarnessError::Precondition(format!("read refused: {r}")))?;
    let secrets = dep.programmer.secrets();
    let (Some(sn), Some(nonce), Some(true_rm)) = (secrets.sn, secrets.nonce, secrets.rm) else {
        return Err(HarnessError::Precondition("programmer holds no session".into()));
    };
    let observed = outs
        .iter()
        .find_map(|o| match o {
            esafe_protocol::session::Outbound::Wire { bytes, .. } => WireMessage::decode(bytes).ok(),
            _ => None,
        })
        .filter(|m| m.heading == Heading::ReadAuthReq && m.fields.len() == 2)
        .ok_or_else(|| HarnessError::Precondition("no HMAC3 observed".into()))?;
    let (ts4, hmac3) = (&observed.fields[0], &observed.fields[1]);

    let mut suite = CryptoSuite::new(SuiteConfig::default(), seeded_rng("esafe/rm-brute/suite", &seed.to_be_bytes()));
    let mut try_rm = |rm: &[u8]| -> Result<bool, HarnessError> {
        let k_p: SymmetricKey = suite.kdf(&[rm, &sn.to_be_bytes(), &nonce])?;
        let tag = suite.mac(&k_p, &mac_input(Some(Heading::ReadAuthReq), sn, &[ts4]));
        Ok(&tag.bytes == hmac3)
    };
    let true_rm_matches = try_rm(&true_rm)?;
    let mut rng = seeded_rng("esafe/rm-brute", &seed.to_be_bytes());
    let mut matches = 0;
    for _ in 0..guesses {
        let mut rm = [0u8; RM_LEN];
        rng.fill_bytes(&mut rm);
        if try_rm(&rm)? {
            matches += 1;
        }
    }
    Ok(BruteForceReport { guesses, matches, true_rm_matches })
}
