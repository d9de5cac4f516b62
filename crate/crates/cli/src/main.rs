use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use esafe_cli::attack::AttackParams;
use esafe_cli::ecg::{synthetic_records, write_fixtures};
use esafe_cli::sweep::{SweepParams, DEFAULT_CRS, DEFAULT_QSS};
use esafe_cli::{parse_list, session_config, CliError, Job, RecordSource, FIXTURE_DIR_ENV};
use esafe_harness::scenario::{parse_seeds, ScenarioConfig};
use esafe_harness::{AttackerKind, Scenario};

#[derive(Parser)]
#[command(name = "esafe", version, about = "Experiments for compressive-sensing encryption and implant access protocols")]
struct Cli {
    /// Directory of `*.csv` ECG records; synthetic fixtures are used when unset.
    #[arg(long, global = true, env = FIXTURE_DIR_ENV)]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Comma-separated seeds; `a..b` ranges are inclusive.
    #[arg(long)]
    seeds: Option<String>,
    /// Use only the first N records.
    #[arg(long)]
    records: Option<usize>,
    /// Report file (CSV with a metadata block).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// PRD over a CR x qs grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Compression rates in percent.
        #[arg(long)]
        cr: Option<String>,
        /// Quantization steps; 0 sends raw measurements.
        #[arg(long)]
        qs: Option<String>,
    },
    /// Uniform- and random-guess attacks with the legitimate baseline.
    Attack {
        #[command(flatten)]
        common: Common,
        /// Compression rates in percent [default: 50,75,90].
        #[arg(long)]
        cr: Option<String>,
        /// Quantization steps [default: 0,20].
        #[arg(long)]
        qs: Option<String>,
        /// Random-guess trials per ciphertext.
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Crypto operations the implant performs per protocol.
    Opcount {
        #[command(flatten)]
        common: Common,
        /// Signals transferred by the read.
        #[arg(long, default_value_t = 1)]
        signals: usize,
        /// RSA modulus size for the CA and doctor keys.
        #[arg(long, default_value_t = 2048)]
        rsa_bits: usize,
    },
    /// One scenario per seed, with transcript dumps next to the report.
    Session {
        #[command(flatten)]
        common: Common,
        /// Scenario file with `key = value` lines; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// pair, auth, read, write or full.
        #[arg(long)]
        scenario: Option<Scenario>,
        /// none, passive, replay or mitm.
        #[arg(long)]
        attacker: Option<AttackerKind>,
        /// Let the attacker read the out-of-band channel and hold the doctor's key.
        #[arg(long)]
        degraded_oob: bool,
        /// RSA modulus size for the CA and doctor keys.
        #[arg(long)]
        rsa_bits: Option<usize>,
    },
    /// Write synthetic ECG-like records in the loader's format.
    GenFixtures {
        #[command(flatten)]
        common: Common,
        /// Non-constant cosine atoms per record.
        #[arg(long, default_value_t = 8)]
        sparsity: usize,
    },
}

fn seeds_or(s: &Option<String>, default: Vec<u64>) -> Result<Vec<u64>, CliError> {
    s.as_deref().map_or(Ok(default), |s| Ok(parse_seeds(s)?))
}

fn source(cli_dir: &Option<PathBuf>, records: Option<usize>) -> RecordSource {
    match cli_dir {
        Some(d) => RecordSource::Dir(d.clone()),
        None => RecordSource::from_env(records),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (job, out) = match cli.verb {
        Verb::Sweep { common, cr, qs } => {
            let params = SweepParams {
                crs: cr.as_deref().map_or(Ok(DEFAULT_CRS.to_vec()), parse_list)?,
                qss: qs.as_deref().map_or(Ok(DEFAULT_QSS.to_vec()), parse_list)?,
                seeds: seeds_or(&common.seeds, SweepParams::default().seeds)?,
            };
            (Job::Sweep { source: source(&cli.fixtures, common.records), records: common.records, params }, common.out)
        }
        Verb::Attack { common, cr, qs, trials } => {
            let d = AttackParams::default();
            let params = AttackParams {
                crs: cr.as_deref().map_or(Ok(d.crs), parse_list)?,
                qss: qs.as_deref().map_or(Ok(d.qss), parse_list)?,
                seeds: seeds_or(&common.seeds, d.seeds)?,
                trials,
            };
            (Job::Attack { source: source(&cli.fixtures, common.records), records: common.records, params }, common.out)
        }
        Verb::Opcount { common, signals, rsa_bits } => {
            let seed = seeds_or(&common.seeds, vec![1])?[0];
            (Job::Opcount { signals, seed, rsa_bits }, common.out)
        }
        Verb::Session { common, config, scenario, attacker, degraded_oob, rsa_bits } => {
            let mut c = match &config {
                Some(p) => ScenarioConfig::parse(&std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?)?,
                None => session_config(Scenario::Read, AttackerKind::None, vec![1], false),
            };
            c.scenario = scenario.unwrap_or(c.scenario);
            c.attacker = attacker.unwrap_or(c.attacker);
            c.degraded_oob |= degraded_oob;
            c.rsa_bits = rsa_bits.unwrap_or(c.rsa_bits);
            c.seeds = seeds_or(&common.seeds, c.seeds)?;
            (Job::Session { config: c }, common.out)
        }
        Verb::GenFixtures { common, sparsity } => {
            let dir = common.out.or(cli.fixtures).ok_or_else(|| CliError::Input(format!("--out or {FIXTURE_DIR_ENV} required")))?;
            let records = synthetic_records(common.records.unwrap_or(10), sparsity)?;
            for p in write_fixtures(&dir, &records)? {
                println!("{}", p.display());
            }
            return Ok(true);
        }
    };

    let outcome = job.run()?;
    let bytes = outcome.report.to_bytes()?;
    match &out {
        Some(path) => {
            outcome.report.write(path)?;
            for (seed, t) in &outcome.transcripts {
                let p = path.with_extension(format!("seed{seed}.transcript"));
                std::fs::write(&p, t).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            }
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    for c in &outcome.checks {
        eprintln!("{c}");
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
