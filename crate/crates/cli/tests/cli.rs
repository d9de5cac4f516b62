use std::process::Command;

use esafe_cli::attack::{AttackParams, ATTACK_HEADER};
use esafe_cli::ecg::{parse_ecg, synthetic_records, write_fixtures, Provenance, GLOBAL_BOUNDS, WINDOW};
use esafe_cli::sweep::{context_for, legit_round, SweepParams, SWEEP_HEADER};
use esafe_cli::{regenerate, session_config, Job, RecordSource, Report};
use esafe_core::codec::shift_bound;
use esafe_harness::{AttackerKind, Scenario};

fn small_sweep() -> Job {
    Job::Sweep {
        source: RecordSource::Synthetic { count: 2, sparsity: 8 },
        records: None,
        params: SweepParams { crs: vec![50.0, 70.0], qss: vec![0, 20], seeds: vec![1, 2] },
    }
}

#[test]
fn a_720_sample_record_becomes_one_window() {
    let text: String = (0..720).map(|i| format!("{}\n", 1000 + (i % 50))).collect();
    let r = parse_ecg("rec", &format!("# header\n{text}"), None).unwrap();
    assert_eq!(r.samples.len(), WINDOW);
    assert_eq!(r.provenance, Provenance::File);
}

#[test]
fn mit_bih_bounds_give_the_documented_key_range() {
    let mut text = String::from("591\n1486\n");
    text.push_str(&"1000\n".repeat(WINDOW - 2));
    let r = parse_ecg("rec", &text, None).unwrap();
    assert_eq!((r.lower, r.upper), (590, 1487));
    assert_eq!(r.range(), 897);
    assert_eq!(shift_bound(r.range()), 449);

    let wide = parse_ecg("rec", "600\n1400\n", Some(GLOBAL_BOUNDS)).unwrap();
    assert_eq!((wide.range(), shift_bound(wide.range())), (897, 449));
}

#[test]
fn constant_record_is_flagged_and_still_recovers() {
    let r = parse_ecg("flat", &"1024\n".repeat(700), None).unwrap();
    assert!(r.is_constant());
    for cr in [50.0, 70.0, 90.0] {
        let cs = context_for(WINDOW, cr, r.lower, r.upper, 0).unwrap();
        let (prd, _) = legit_round(&r, &cs, 1).unwrap();
        assert!(prd < 1e-6, "CR {cr}: {prd}");
    }
}

#[test]
fn fixtures_round_trip_through_the_loader() {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic_records(3, 8).unwrap();
    write_fixtures(dir.path(), &records).unwrap();
    let loaded = RecordSource::Dir(dir.path().into()).load(None).unwrap();
    assert_eq!(loaded, records);
    assert_eq!(RecordSource::Dir(dir.path().into()).load(Some(2)).unwrap().len(), 2);
}

#[test]
fn reports_regenerate_byte_for_byte() {
    let jobs = [
        small_sweep(),
        Job::Attack {
            source: RecordSource::Synthetic { count: 1, sparsity: 8 },
            records: Some(1),
            params: AttackParams { crs: vec![50.0], qss: vec![20], seeds: vec![3, 4], trials: 5 },
        },
        Job::Opcount { signals: 2, seed: 4, rsa_bits: 1024 },
        Job::Session { config: esafe_harness::ScenarioConfig { rsa_bits: 1024, ..session_config(Scenario::Write, AttackerKind::Replay, vec![1, 2], false) } },
    ];
    for job in jobs {
        let first = job.run().unwrap();
        assert!(first.passed(), "{:?}", first.checks);
        let bytes = first.report.to_bytes().unwrap();
        let parsed = Report::parse(&bytes).unwrap();
        assert_eq!(parsed, first.report);
        assert_eq!(Job::from_metadata(&parsed.metadata).unwrap(), job);
        let again = regenerate(&parsed).unwrap();
        assert_eq!(again.report.to_bytes().unwrap(), bytes, "{}", job.command());
    }
}

#[test]
fn headers_are_stable() {
    let out = small_sweep().run().unwrap();
    assert_eq!(out.report.header, SWEEP_HEADER.map(String::from).to_vec());
    assert_eq!(out.report.rows.len(), 2 * 2 * 2);
    let attack = Job::Attack {
        source: RecordSource::Synthetic { count: 1, sparsity: 8 },
        records: None,
        params: AttackParams { crs: vec![50.0], qss: vec![0], seeds: vec![1], trials: 2 },
    };
    assert_eq!(attack.run().unwrap().report.header, ATTACK_HEADER.map(String::from).to_vec());
}

fn esafe() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_esafe"));
    c.env_remove("ESAFE_FIXTURE_DIR");
    c
}

#[test]
fn exit_code_follows_the_checks() {
    let ok = esafe().args(["sweep", "--cr", "50,60", "--qs", "20", "--seeds", "1..2", "--records", "2"]).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("# command=sweep\n"));

    // White noise is not sparse, so CR 50 recovery is poor and the quality check fails.
    let dir = tempfile::tempdir().unwrap();
    let noise: String = (0..512u64).map(|i| if (i.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 61) & 1 == 0 { "10\n" } else { "4000\n" }).collect();
    std::fs::write(dir.path().join("noise.csv"), noise).unwrap();
    let bad = esafe().env("ESAFE_FIXTURE_DIR", dir.path()).args(["sweep", "--cr", "50", "--qs", "20", "--seeds", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1), "{}", String::from_utf8_lossy(&bad.stderr));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("[FAIL] cr50-qs20-quality"));

    std::fs::write(dir.path().join("noise.csv"), "1000\nnot a number\n").unwrap();
    let broken = esafe().env("ESAFE_FIXTURE_DIR", dir.path()).args(["sweep"]).output().unwrap();
    assert_eq!(broken.status.code(), Some(2));
}

#[test]
fn gen_fixtures_then_sweep_from_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let gen = esafe().args(["gen-fixtures", "--records", "2", "--out"]).arg(dir.path()).output().unwrap();
    assert!(gen.status.success());
    let out = dir.path().join("report.csv");
    let run = esafe()
        .env("ESAFE_FIXTURE_DIR", dir.path())
        .args(["sweep", "--cr", "50", "--qs", "0,20", "--seeds", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = Report::read(&out).unwrap();
    assert_eq!(report.metadata["source"], dir.path().display().to_string());
    assert!(report.values("provenance").unwrap().iter().all(|p| *p == "synthetic"));
}

#[test]
fn session_writes_transcripts_next_to_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("session.csv");
    let run = esafe()
        .args(["session", "--attacker", "passive", "--seeds", "3", "--rsa-bits", "1024", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let t = std::fs::read(dir.path().join("session.seed3.transcript")).unwrap();
    assert!(esafe_harness::Transcript::parse_dump(&t).is_some());
}
