//! Exit gate. One line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use esafe_cli::attack::attack_run;
use esafe_cli::ecg::synthetic_records;
use esafe_cli::opcount::{measure_imd_ops, opcount_checks};
use esafe_cli::sweep::{context_for, sweep_checks, sweep_prd, SweepCell, SweepParams};
use esafe_core::codec::{cs_deshift, cs_enc, cs_gen};
use esafe_core::recovery::{gen_sensing_matrix, prd, synth_sparse_signal};
use esafe_core::seed::seeded_rng;
use esafe_core::BoundedSignal;
use esafe_harness::fuzz::{mutation_fuzz, record_full_session, replay_sweep};
use esafe_harness::guess::UniformGuessReport;
use esafe_harness::ks::{indistinguishability_test, KeyDistribution};
use esafe_harness::scenario::{shared_credentials, AnyAttacker};
use esafe_harness::{run_session, AttackerKind, Scenario, ScenarioConfig};
use esafe_protocol::party::Party;
use esafe_protocol::{auth_flow, evidence_verify, pair_flow, read_flow, DirectNetwork, EvidenceRecord};
use rand::Rng;

const L1: i64 = 590;
const L2: i64 = 1487;
const N: usize = 512;

type Verdict = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(budget: Duration, start: Instant, detail: String) -> Verdict {
    let took = start.elapsed();
    ensure(took <= budget, format!("{detail}; {:.1}s of {}s", took.as_secs_f64(), budget.as_secs()))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

fn protocol_config() -> ScenarioConfig {
    ScenarioConfig { scenario: Scenario::Full, ..ScenarioConfig::default() }
}

fn codec_exactness() -> Verdict {
    let start = Instant::now();
    let phi = gen_sensing_matrix::<f64>(b"acceptance/codec", N / 2, N).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng("acceptance/codec", b"");
    let mut worst = 0.0f64;
    for trial in 0..1000u32 {
        let values = (0..N).map(|_| rng.gen_range(L1 as f64 + 0.5..L2 as f64 - 0.5)).collect();
        let x = BoundedSignal::new(values, L1, L2).map_err(|e| e.to_string())?;
        let key = cs_gen(&trial.to_be_bytes(), N, L1, L2).map_err(|e| e.to_string())?;
        let c = cs_enc(&key, &x, &phi).map_err(|e| e.to_string())?;
        let y = cs_deshift(&key, &c, &phi, L1, L2).map_err(|e| e.to_string())?;
        let reference = phi.matrix().mul_vec(x.values()).map_err(|e| e.to_string())?;
        for (a, b) in y.iter().zip(&reference) {
            worst = worst.max((a - b).abs());
        }
    }
    let detail = format!("1000 pairs, max |deshift - Phi x| = {worst:.2e}");
    ensure(worst < 1e-6, detail.clone()).and_then(|_| within(Duration::from_secs(30), start, detail))
}

fn unquantized_baseline() -> Verdict {
    let start = Instant::now();
    let cs = context_for(N, 50.0, L1, L2, 0).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for s in [5, 10, 20] {
        let mut prds = Vec::new();
        for seed in 1..=20u64 {
            let tag = format!("baseline/{s}/{seed}");
            let x = synth_sparse_signal::<f64>(tag.as_bytes(), N, s, L1, L2).map_err(|e| e.to_string())?.signal;
            let key = cs.gen_key(tag.as_bytes()).map_err(|e| e.to_string())?;
            let c = cs.encrypt(&key, &x).map_err(|e| e.to_string())?;
            let x_hat = cs.decrypt(&key, &c).map_err(|e| e.to_string())?;
            prds.push(prd(x.values(), &x_hat).map_err(|e| e.to_string())?);
        }
        let m = median(prds);
        ok &= m < 2.0;
        parts.push(format!("s={s} median {m:.3}"));
    }
    let detail = format!("CR 50 unquantized, 20 seeds: {}", parts.join(", "));
    ensure(ok, detail.clone()).and_then(|_| within(Duration::from_secs(120), start, detail))
}

fn full_grid_sweep() -> Result<(Verdict, Vec<SweepCell>), String> {
    let records = synthetic_records(10, 8).map_err(|e| e.to_string())?;
    let params = SweepParams::default();
    let cells = sweep_prd(&records, &params).map_err(|e| e.to_string())?;
    let checks = sweep_checks(&cells, &params);
    let keep = ["prd-trend", "cr50-qs20-quality"];
    let relevant: Vec<_> = checks.iter().filter(|c| keep.contains(&c.name.as_str())).collect();
    let ok = relevant.len() == keep.len() && relevant.iter().all(|c| c.passed);
    let detail = relevant.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ");
    Ok((ensure(ok, format!("10 records x 20 seeds; {detail}")), cells))
}

fn communication_saving(cells: &[SweepCell]) -> Verdict {
    let accepted: Vec<_> = cells.iter().filter(|c| c.accepted()).collect();
    let bad: Vec<_> = accepted.iter().filter(|c| !c.saves_half()).collect();
    let largest = accepted.iter().map(|c| c.payload_bytes).max().unwrap_or(0);
    ensure(
        !accepted.is_empty() && bad.is_empty(),
        format!("{} accepted cells, largest payload {largest} bytes against 1024 raw, {} over half", accepted.len(), bad.len()),
    )
}

fn attack_benchmark() -> Verdict {
    let start = Instant::now();
    let records = synthetic_records(20, 8).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let r = r.with_bounds(L1, L2).map_err(|e| e.to_string())?;
        runs.push(attack_run(&r, 50.0, 20, i as u64 + 1, 100).map_err(|e| e.to_string())?);
    }
    let uniform_min = runs.iter().map(|r| r.uniform.best.prd).fold(f64::INFINITY, f64::min);
    let random_min = runs.iter().map(|r| r.random_min()).fold(f64::INFINITY, f64::min);
    let legit_max = runs.iter().map(|r| r.legit_prd).fold(0.0, f64::max);
    let curves: Vec<UniformGuessReport> = runs.iter().map(|r| r.uniform.clone()).collect();
    let mean = UniformGuessReport::mean_curve(&curves).ok_or("guess grids differ")?;
    let ok = uniform_min >= 9.0 && random_min >= 9.0 && legit_max < 9.0 && mean.best.guess == 0;
    let detail = format!(
        "CR 50 qs 20, 20 runs: best uniform guess {uniform_min:.2}, best of 100 random keys {random_min:.2}, \
         worst legitimate {legit_max:.3}, mean-curve argmin {}",
        mean.best.guess
    );
    ensure(ok, detail.clone()).and_then(|_| within(Duration::from_secs(600), start, detail))
}

fn indistinguishability() -> Verdict {
    let c = ScenarioConfig::default();
    let signals = (1..=8)
        .map(|s| {
            let x = c.signal(s).map_err(|e| e.to_string())?;
            BoundedSignal::new(x.values().iter().map(|v| v.round()).collect(), x.lower(), x.upper()).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let shifted = indistinguishability_test(&signals, 100_000, b"accept", KeyDistribution::Uniform, 0.01);
    let control = indistinguishability_test(&signals, 100_000, b"accept", KeyDistribution::Zero, 0.01);
    ensure(
        shifted.passed && !control.passed,
        format!(
            "10^5 samples at alpha 0.01: shifted p = {:.3}, unshifted control p = {:.1e}",
            shifted.ks.p_value, control.ks.p_value
        ),
    )
}

fn protocol_security() -> Verdict {
    let start = Instant::now();
    let config = protocol_config();
    let s = |e: esafe_harness::HarnessError| e.to_string();
    let mut problems = Vec::new();

    for scenario in [Scenario::Pair, Scenario::Auth, Scenario::Read, Scenario::Write, Scenario::Full] {
        let run = run_session(&ScenarioConfig { scenario, ..config.clone() }, 1).map_err(s)?;
        if !run.completed() || run.any_aborted() {
            problems.push(format!("honest {scenario} did not complete"));
        }
    }

    let mut dep = config.deployment(2).map_err(s)?;
    let mut net = DirectNetwork::default();
    pair_flow(&mut dep, &mut net);
    auth_flow(&mut dep, &mut net);
    let (sp, pr) = (dep.smartphone.secrets(), dep.programmer.secrets());
    if sp.k_p.is_none() || sp.k_p != pr.k_p {
        problems.push("K_p differs between smartphone and programmer".into());
    }
    read_flow(&mut dep, &mut net, vec![config.signal(2).map_err(s)?]);
    let (sp, imd, pr) = (dep.smartphone.secrets(), dep.imd.secrets(), dep.programmer.secrets());
    if sp.k_r.is_none() || sp.k_r != imd.k_r || sp.k_r != pr.k_r {
        problems.push("K_r differs between parties".into());
    }

    let recorded = record_full_session(&config, 3).map_err(s)?.len();
    let replays = replay_sweep(&config, 3, 4).map_err(s)?;
    let replay_accepted = replays.iter().filter(|v| v.accepted || v.completed).count();
    if replay_accepted > 0 || replays.len() != recorded {
        problems.push(format!("{replay_accepted} of {} replays accepted", replays.len()));
    }

    let flips = mutation_fuzz(&config, 5, 10_000).map_err(s)?;
    let flip_accepted = flips.iter().filter(|v| v.accepted || v.completed).count();
    if flip_accepted > 0 || flips.len() != 10_000 {
        problems.push(format!("{flip_accepted} of {} bit flips accepted", flips.len()));
    }

    // A read session ends with every key still held, so there is something to look for.
    let run = run_session(&ScenarioConfig { scenario: Scenario::Read, attacker: AttackerKind::Passive, ..config.clone() }, 6).map_err(s)?;
    let AnyAttacker::Passive(eve) = &run.attacker else { return Err("passive attacker missing".into()) };
    let air: Vec<u8> = eve.seen.iter().flat_map(|d| d.bytes.iter().copied()).collect();
    let (sp, imd) = (run.deployment.smartphone.secrets(), run.deployment.imd.secrets());
    let mut secrets: Vec<(&str, Vec<u8>)> = Vec::new();
    secrets.extend(sp.k_i.map(|k| ("K_i", k.as_bytes().to_vec())));
    secrets.extend(sp.k_p.map(|k| ("K_p", k.as_bytes().to_vec())));
    secrets.extend(imd.k_r.map(|k| ("K_r", k.as_bytes().to_vec())));
    secrets.extend(imd.k_d.map(|k| ("K_d", k.to_bytes())));
    if secrets.len() != 4 {
        problems.push(format!("only {} session secrets to scan for", secrets.len()));
    }
    for x in &run.data {
        let f: Vec<u8> = x.values().iter().flat_map(|v| v.to_be_bytes()).collect();
        let i: Vec<u8> = x.values().iter().flat_map(|v| (v.round() as i16).to_be_bytes()).collect();
        secrets.push(("signal as f64", f[..64].to_vec()));
        secrets.push(("signal as i16", i[..16].to_vec()));
    }
    let leaked: Vec<&str> = secrets.iter().filter(|(_, b)| contains(&air, b)).map(|(n, _)| *n).collect();
    if !leaked.is_empty() {
        problems.push(format!("on the air: {}", leaked.join(", ")));
    }

    let detail = format!(
        "5 honest scenarios, K_p/K_r agree, {} replays and 10^4 bit flips refused, {} byte strings absent from {} bytes of air",
        replays.len(),
        secrets.len(),
        air.len()
    );
    if problems.is_empty() {
        within(Duration::from_secs(300), start, detail)
    } else {
        Err(problems.join("; "))
    }
}

fn evidence() -> Verdict {
    let config = protocol_config();
    let run = run_session(&config, 7).map_err(|e| e.to_string())?;
    let credentials = shared_credentials(config.rsa_bits).map_err(|e| e.to_string())?;
    let pk = &credentials.doctor.public;
    let ledger = run.deployment.smartphone.ledger().records();
    let applied = run.deployment.imd.applied_commands();
    let mut problems = Vec::new();
    if applied.len() != run.commands.len() {
        problems.push(format!("{} of {} commands applied", applied.len(), run.commands.len()));
    }
    for cmd in applied {
        let matching: Vec<&EvidenceRecord> = ledger.iter().filter(|r| r.cmd == cmd.as_bytes()).collect();
        let verifying = matching.iter().filter(|r| evidence_verify(r, pk)).count();
        if matching.len() != 1 || verifying != 1 {
            problems.push(format!("command {:?}: {} records, {verifying} verify", cmd.as_bytes(), matching.len()));
        }
    }
    let mut mutants = 0;
    for r in ledger {
        let fields: [&dyn Fn(&mut EvidenceRecord); 8] = [
            &|r| r.id_d[0] ^= 1,
            &|r| r.id_s[0] ^= 1,
            &|r| r.id_i[0] ^= 1,
            &|r| r.k_d[0] ^= 1,
            &|r| r.c2[0] ^= 1,
            &|r| r.cmd[0] ^= 1,
            &|r| r.ts6 ^= 1,
            &|r| r.sig[0] ^= 1,
        ];
        for mutate in fields {
            let mut m = r.clone();
            mutate(&mut m);
            mutants += 1;
            if evidence_verify(&m, pk) {
                problems.push("a mutated record still verifies".into());
            }
        }
    }
    if problems.is_empty() {
        Ok(format!("{} applied commands, one verifying record each; {mutants} single-field mutants rejected", applied.len()))
    } else {
        Err(problems.join("; "))
    }
}

fn op_counts() -> Verdict {
    let config = protocol_config();
    let mut rows = Vec::new();
    for n in [1, 4] {
        let measured = measure_imd_ops(&config, 8, n).map_err(|e| e.to_string())?;
        for c in opcount_checks(&measured, n) {
            rows.push((n, c));
        }
    }
    let failed: Vec<String> = rows.iter().filter(|(_, c)| !c.passed).map(|(n, c)| format!("n={n} {c}")).collect();
    ensure(failed.is_empty(), if failed.is_empty() { format!("pair, auth, read (n = 1, 4) and write match the table, {} rows", rows.len()) } else { failed.join("; ") })
}

fn main() -> ExitCode {
    let _ = env_logger::try_init();
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    results.push(("codec-exactness", codec_exactness()));
    results.push(("unquantized-baseline", unquantized_baseline()));
    match full_grid_sweep() {
        Ok((verdict, cells)) => {
            results.push(("prd-sweep", verdict));
            results.push(("communication-saving", communication_saving(&cells)));
        }
        Err(e) => {
            results.push(("prd-sweep", Err(e.clone())));
            results.push(("communication-saving", Err(e)));
        }
    }
    results.push(("attack-benchmark", attack_benchmark()));
    results.push(("indistinguishability", indistinguishability()));
    results.push(("protocol-security", protocol_security()));
    results.push(("evidence-ledger", evidence()));
    results.push(("imd-op-counts", op_counts()));

    let mut failed = 0;
    for (name, v) in &results {
        match v {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
