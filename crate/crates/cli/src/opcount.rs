//! Crypto operations the implant performs in each protocol.

use esafe_harness::ScenarioConfig;
use esafe_protocol::crypto::OpCounts;
use esafe_protocol::flow::{auth_flow, pair_flow, read_flow, write_flow, DirectNetwork, FlowLog};
use esafe_protocol::party::Party;
use esafe_protocol::{Command, Deployment};

use crate::report::Report;
use crate::{Check, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImdOps {
    pub sym_enc: u64,
    pub sym_dec: u64,
    pub mac: u64,
    pub kdf: u64,
    pub cs_enc: u64,
}

impl std::fmt::Display for ImdOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "enc {} dec {} mac {} kdf {} cs {}", self.sym_enc, self.sym_dec, self.mac, self.kdf, self.cs_enc)
    }
}

impl From<OpCounts> for ImdOps {
    fn from(c: OpCounts) -> Self {
        Self { sym_enc: c.sym_enc, sym_dec: c.sym_dec, mac: c.mac, kdf: c.kdf, cs_enc: c.cs_enc }
    }
}

/// What the implant is supposed to spend per process, for `n` signals read.
pub fn expected_ops(process: &str, n: u64) -> Option<ImdOps> {
    let ops = |sym_enc, sym_dec, mac, kdf, cs_enc| ImdOps { sym_enc, sym_dec, mac, kdf, cs_enc };
    Some(match process {
        "pair" => ops(0, 0, 1, 1, 0),
        "auth" => ops(0, 0, 0, 0, 0),
        "read" => ops(0, 1, 2, 0, n),
        "write" => ops(1, 1, 3, 0, 0),
        _ => return None,
    })
}

fn step(dep: &mut Deployment, name: &'static str, rows: &mut Vec<(&'static str, ImdOps)>, run: impl FnOnce(&mut Deployment) -> FlowLog) -> Result<(), CliError> {
    let before = dep.imd.counts();
    let log = run(dep);
    if !log.completed {
        return Err(CliError::Invariant(format!("{name} did not complete: {:?}", log.rejections)));
    }
    rows.push((name, (dep.imd.counts() - before).into()));
    Ok(())
}

/// Runs pair, auth, read (with `n` signals) and write once, diffing the IMD's counters around each.
pub fn measure_imd_ops(config: &ScenarioConfig, seed: u64, n: usize) -> Result<Vec<(&'static str, ImdOps)>, CliError> {
    let mut dep = config.deployment(seed)?;
    let mut net = DirectNetwork::default();
    let data = (0..n as u64).map(|i| config.signal(seed.wrapping_mul(1000).wrapping_add(i))).collect::<Result<Vec<_>, _>>()?;
    let cmd = Command::new(1, b"pacing-rate=70")?;
    let mut rows = Vec::new();
    step(&mut dep, "pair", &mut rows, |d| pair_flow(d, &mut net))?;
    step(&mut dep, "auth", &mut rows, |d| auth_flow(d, &mut net))?;
    step(&mut dep, "read", &mut rows, |d| read_flow(d, &mut net, data))?;
    step(&mut dep, "write", &mut rows, |d| write_flow(d, &mut net, cmd))?;
    Ok(rows)
}

pub const OPCOUNT_HEADER: [&str; 6] = ["process", "sym_enc", "sym_dec", "mac", "kdf", "cs_enc"];

pub fn opcount_report(rows: &[(&'static str, ImdOps)]) -> Report {
    let mut r = Report::new(&OPCOUNT_HEADER);
    for (p, o) in rows {
        r.push(vec![p.to_string(), o.sym_enc.to_string(), o.sym_dec.to_string(), o.mac.to_string(), o.kdf.to_string(), o.cs_enc.to_string()]);
    }
    r
}

pub fn opcount_checks(rows: &[(&'static str, ImdOps)], n: usize) -> Vec<Check> {
    rows.iter()
        .map(|(p, got)| {
            let want = expected_ops(p, n as u64);
            let detail = match want {
                Some(w) if w == *got => format!("{got}"),
                Some(w) => format!("got {got}, want {w}"),
                None => format!("got {got}, no expectation for this process"),
            };
            Check::new(&format!("opcount-{p}"), want == Some(*got), detail)
        })
        .collect()
}
