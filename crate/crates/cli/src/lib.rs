//! Experiment driver: PRD sweeps, attack reports, implant op counts and
//! single protocol sessions, each emitted as a CSV report.
//!
//! A [`Job`] fully describes one run. It is written into the report's
//! metadata block, so [`Job::from_metadata`] plus [`Job::run`] reproduces
//! a report exactly.

pub mod attack;
pub mod ecg;
pub mod opcount;
pub mod report;
pub mod session;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::PathBuf;

use esafe_harness::scenario::parse_seeds;
use esafe_harness::{AttackerKind, HarnessError, Scenario, ScenarioConfig};

pub use ecg::{load_ecg_csv, EcgRecord};
pub use report::Report;

/// Directory with `*.csv` records; synthetic fixtures are used when unset.
pub const FIXTURE_DIR_ENV: &str = "ESAFE_FIXTURE_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("bad input: {0}")]
    Input(String),
    #[error("report: {0}")]
    Report(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Codec(#[from] esafe_core::Error),
    #[error(transparent)]
    Setup(#[from] esafe_protocol::SetupError),
    #[error(transparent)]
    Wire(#[from] esafe_protocol::WireError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// One internal consistency check; the process fails if any fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_owned(), passed, detail }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordSource {
    Synthetic { count: usize, sparsity: usize },
    Dir(PathBuf),
}

impl RecordSource {
    pub const DEFAULT_SYNTHETIC: Self = Self::Synthetic { count: 10, sparsity: 8 };

    /// The fixture directory from the environment, else synthetic records.
    pub fn from_env(count: Option<usize>) -> Self {
        match std::env::var_os(FIXTURE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::Dir(dir.into()),
            _ => match (Self::DEFAULT_SYNTHETIC, count) {
                (Self::Synthetic { sparsity, .. }, Some(count)) => Self::Synthetic { count, sparsity },
                (s, _) => s,
            },
        }
    }

    pub fn load(&self, limit: Option<usize>) -> Result<Vec<EcgRecord>, CliError> {
        let mut records = match self {
            Self::Synthetic { count, sparsity } => ecg::synthetic_records(*count, *sparsity)?,
            Self::Dir(dir) => ecg::load_dir(dir, None)?,
        };
        if let Some(n) = limit {
            records.truncate(n);
        }
        if records.is_empty() {
            return Err(CliError::Input("no records".into()));
        }
        Ok(records)
    }

    fn write_meta(&self, m: &mut BTreeMap<String, String>) {
        match self {
            Self::Synthetic { count, sparsity } => {
                m.insert("source".into(), "synthetic".into());
                m.insert("synthetic_count".into(), count.to_string());
                m.insert("sparsity".into(), sparsity.to_string());
            }
            Self::Dir(d) => {
                m.insert("source".into(), d.display().to_string());
            }
        }
    }

    fn read_meta(m: &BTreeMap<String, String>) -> Result<Self, CliError> {
        match get(m, "source")? {
            "synthetic" => Ok(Self::Synthetic { count: parse(m, "synthetic_count")?, sparsity: parse(m, "sparsity")? }),
            dir => Ok(Self::Dir(dir.into())),
        }
    }
}

fn get<'a>(m: &'a BTreeMap<String, String>, k: &str) -> Result<&'a str, CliError> {
    m.get(k).map(String::as_str).ok_or_else(|| CliError::Report(format!("metadata lacks {k:?}")))
}

fn parse<T: std::str::FromStr>(m: &BTreeMap<String, String>, k: &str) -> Result<T, CliError> {
    get(m, k)?.parse().map_err(|_| CliError::Report(format!("metadata {k:?} is malformed")))
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| CliError::Input(format!("bad list entry {p:?}"))))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>, CliError> {
    Ok(parse_seeds(s)?)
}

/// Everything needed to produce one report.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Sweep { source: RecordSource, records: Option<usize>, params: sweep::SweepParams },
    Attack { source: RecordSource, records: Option<usize>, params: attack::AttackParams },
    Opcount { signals: usize, seed: u64, rsa_bits: usize },
    Session { config: ScenarioConfig },
}

/// A report, its checks, and any transcripts it produced.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub checks: Vec<Check>,
    pub transcripts: Vec<(u64, Vec<u8>)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl Job {
    pub fn command(&self) -> &'static str {
        match self {
            Self::Sweep { .. } => "sweep",
            Self::Attack { .. } => "attack",
            Self::Opcount { .. } => "opcount",
            Self::Session { .. } => "session",
        }
    }

    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("command".into(), self.command().into());
        let records = |m: &mut BTreeMap<String, String>, r: &Option<usize>| {
            m.insert("records".into(), r.map_or_else(|| "all".into(), |n| n.to_string()));
        };
        match self {
            Self::Sweep { source, records: r, params } => {
                source.write_meta(&mut m);
                records(&mut m, r);
                m.insert("cr".into(), join(&params.crs));
                m.insert("qs".into(), join(&params.qss));
                m.insert("seeds".into(), join(&params.seeds));
            }
            Self::Attack { source, records: r, params } => {
                source.write_meta(&mut m);
                records(&mut m, r);
                m.insert("cr".into(), join(&params.crs));
                m.insert("qs".into(), join(&params.qss));
                m.insert("seeds".into(), join(&params.seeds));
                m.insert("trials".into(), params.trials.to_string());
            }
            Self::Opcount { signals, seed, rsa_bits } => {
                m.insert("signals".into(), signals.to_string());
                m.insert("seeds".into(), seed.to_string());
                m.insert("rsa_bits".into(), rsa_bits.to_string());
            }
            Self::Session { config } => {
                for line in config.to_text().lines() {
                    if let Some((k, v)) = line.split_once(" = ") {
                        m.insert(k.to_owned(), v.to_owned());
                    }
                }
            }
        }
        m
    }

    pub fn from_metadata(m: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let records = || -> Result<Option<usize>, CliError> {
            match get(m, "records")? {
                "all" => Ok(None),
                n => n.parse().map(Some).map_err(|_| CliError::Report("metadata \"records\" is malformed".into())),
            }
        };
        Ok(match get(m, "command")? {
            "sweep" => Self::Sweep {
                source: RecordSource::read_meta(m)?,
                records: records()?,
                params: sweep::SweepParams { crs: parse_list(get(m, "cr")?)?, qss: parse_list(get(m, "qs")?)?, seeds: parse_seed_list(get(m, "seeds")?)? },
            },
            "attack" => Self::Attack {
                source: RecordSource::read_meta(m)?,
                records: records()?,
                params: attack::AttackParams {
                    crs: parse_list(get(m, "cr")?)?,
                    qss: parse_list(get(m, "qs")?)?,
                    seeds: parse_seed_list(get(m, "seeds")?)?,
                    trials: parse(m, "trials")?,
                },
            },
            "opcount" => Self::Opcount { signals: parse(m, "signals")?, seed: parse(m, "seeds")?, rsa_bits: parse(m, "rsa_bits")? },
            "session" => {
                let text: String = m.iter().filter(|(k, _)| *k != "command").map(|(k, v)| format!("{k} = {v}\n")).collect();
                Self::Session { config: ScenarioConfig::parse(&text)? }
            }
            other => return Err(CliError::Report(format!("unknown command {other:?}"))),
        })
    }

    pub fn run(&self) -> Result<Outcome, CliError> {
        let (mut report, checks, transcripts) = match self {
            Self::Sweep { source, records, params } => {
                let cells = sweep::sweep_prd(&source.load(*records)?, params)?;
                (sweep::sweep_report(&cells), sweep::sweep_checks(&cells, params), Vec::new())
            }
            Self::Attack { source, records, params } => {
                let cells = attack::attack_sweep(&source.load(*records)?, params)?;
                (attack::attack_report(&cells)?, attack::attack_checks(&cells)?, Vec::new())
            }
            Self::Opcount { signals, seed, rsa_bits } => {
                let config = ScenarioConfig { rsa_bits: *rsa_bits, ..ScenarioConfig::default() };
                let rows = opcount::measure_imd_ops(&config, *seed, *signals)?;
                (opcount::opcount_report(&rows), opcount::opcount_checks(&rows, *signals), Vec::new())
            }
            Self::Session { config } => session::run(config)?,
        };
        report.metadata = self.metadata();
        Ok(Outcome { report, checks, transcripts })
    }
}

/// Reruns the job recorded in a report's metadata.
pub fn regenerate(report: &Report) -> Result<Outcome, CliError> {
    Job::from_metadata(&report.metadata)?.run()
}

/// Session defaults used by the CLI.
pub fn session_config(scenario: Scenario, attacker: AttackerKind, seeds: Vec<u64>, degraded_oob: bool) -> ScenarioConfig {
    ScenarioConfig { scenario, attacker, seeds, degraded_oob, ..ScenarioConfig::default() }
}
