use std::collections::HashSet;

use esafe_core::seed::seeded_rng;
use esafe_protocol::crypto::{
    cert_issue, cert_verify, kdf_with, pk_decrypt, pk_encrypt, sign_message, sym_open, verify_signature, Authority,
    Certificate, CryptoSuite, KdfAlgorithm, PrivateKey, SuiteConfig, SymmetricKey,
};
use esafe_protocol::CryptoError;
use rand::{Rng, RngCore};

fn key(seed: &str) -> PrivateKey {
    PrivateKey::generate(&mut seeded_rng("test/rsa", seed.as_bytes()), 1024).unwrap()
}

#[test]
fn kdf_one_byte_changes_never_collide() {
    let mut rng = seeded_rng("test/kdf", b"pairs");
    let mut inputs = HashSet::new();
    let mut outputs = HashSet::new();
    for _ in 0..10_000 {
        let mut a = vec![0u8; rng.gen_range(1..48)];
        rng.fill_bytes(&mut a);
        let mut b = a.clone();
        let i = rng.gen_range(0..b.len());
        b[i] ^= rng.gen_range(1..=255u8);
        let ka = kdf_with(KdfAlgorithm::Pbkdf2Sha1, &a).unwrap();
        let kb = kdf_with(KdfAlgorithm::Pbkdf2Sha1, &b).unwrap();
        assert_ne!(ka, kb);
        outputs.insert(*ka.as_bytes());
        outputs.insert(*kb.as_bytes());
        inputs.insert(a);
        inputs.insert(b);
    }
    assert_eq!(outputs.len(), inputs.len());
}

#[test]
fn wrong_key_always_fails_explicitly() {
    let mut suite = CryptoSuite::new(SuiteConfig::default(), seeded_rng("test/sym", b"1"));
    let mut rng = seeded_rng("test/sym-keys", b"1");
    for i in 0..1000 {
        let k = SymmetricKey::random(&mut rng);
        let wrong = SymmetricKey::random(&mut rng);
        let pt = vec![i as u8; i % 64];
        let blob = suite.sym_enc(&k, &pt);
        assert_eq!(sym_open(&wrong, &blob.0), Err(CryptoError::Decrypt));
        assert_eq!(sym_open(&k, &blob.0).unwrap(), pt);
    }
}

#[test]
fn nonce_round_trips_through_rsa() {
    let sk = key("nonce");
    let other = key("other");
    let pk = sk.public_key();
    let mut rng = seeded_rng("test/nonce", b"");
    for _ in 0..1000 {
        let mut nonce = [0u8; 16];
        rng.fill_bytes(&mut nonce);
        let ct = pk_encrypt(&mut rng, &pk, &nonce).unwrap();
        assert_eq!(pk_decrypt(&sk, &ct.0).unwrap(), nonce);
    }
    let ct = pk_encrypt(&mut rng, &pk, b"x").unwrap();
    assert!(pk_decrypt(&other, &ct.0).is_err());
}

#[test]
fn signatures_do_not_transplant() {
    let sk = key("sign");
    let pk = sk.public_key();
    let msgs: Vec<Vec<u8>> = (0..100u32).map(|i| format!("message {i}").into_bytes()).collect();
    let sigs: Vec<_> = msgs.iter().map(|m| sign_message(&sk, m)).collect();
    for (i, m) in msgs.iter().enumerate() {
        for (j, s) in sigs.iter().enumerate() {
            assert_eq!(verify_signature(&pk, m, &s.0), i == j, "msg {i} sig {j}");
        }
    }
    let mut tampered = msgs[0].clone();
    tampered[0] ^= 1;
    assert!(!verify_signature(&pk, &tampered, &sigs[0].0));
    assert!(!verify_signature(&pk, &msgs[0], &[]));
    assert!(!verify_signature(&pk, &msgs[0], &[0xff; 300]));
}

#[test]
fn certificates_bind_identity_and_key() {
    let ca = Authority::new(key("ca"));
    let rogue = Authority::new(key("rogue"));
    let doctor = ca.issue(b"ID_D:dr-1", key("doctor"));
    assert!(doctor.is_consistent(&ca.public_key()));
    assert!(cert_verify(&ca.public_key(), &doctor.cert));
    assert!(!cert_verify(&rogue.public_key(), &doctor.cert));

    let forged = cert_issue(&key("rogue"), &doctor.public, b"ID_D:dr-1");
    assert!(!cert_verify(&ca.public_key(), &forged));

    let c = &doctor.cert;
    for field in 0..3 {
        let len = [c.subject_id.len(), c.subject_key.len(), c.signature.len()][field];
        for byte in (0..len).step_by(7) {
            let mut m: Certificate = c.clone();
            let target = match field {
                0 => &mut m.subject_id,
                1 => &mut m.subject_key,
                _ => &mut m.signature,
            };
            target[byte] ^= 0x01;
            assert!(!cert_verify(&ca.public_key(), &m), "field {field} byte {byte}");
        }
    }
    assert_eq!(Certificate::from_bytes(&c.to_bytes()).unwrap(), *c);
    assert!(Certificate::from_bytes(&c.to_bytes()[1..]).is_err());
}

#[test]
fn suite_counts_each_call() {
    let sk = key("count");
    let mut s = CryptoSuite::new(SuiteConfig::default(), seeded_rng("test/count", b""));
    let k = s.kdf(&[b"a"]).unwrap();
    let t = s.mac(&k, b"m");
    s.mac_verify(&k, b"m", &t.bytes);
    let c = s.sym_enc(&k, b"p");
    s.sym_dec(&k, &c.0).unwrap();
    let e = s.pk_enc(&sk.public_key(), b"n").unwrap();
    s.pk_dec(&sk, &e.0).unwrap();
    let sig = s.sign(&sk, b"m");
    assert!(s.verify(&sk.public_key(), b"m", &sig.0));
    let c = s.counts();
    assert_eq!((c.kdf, c.mac, c.sym_enc, c.sym_dec, c.pk_enc, c.pk_dec, c.sign, c.verify), (1, 2, 1, 1, 1, 1, 1, 1));
}
