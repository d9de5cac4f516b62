//! PRD sweeps over compression rate and quantization step.

use std::sync::Arc;

use esafe_core::codec::encoded_len;
use esafe_core::recovery::{classify_prd, measurements_for_cr, prd};
use esafe_core::Quality;
use esafe_harness::scenario::shared_context;
use esafe_protocol::cs::{CsContext, CsProfile};
use rayon::prelude::*;

use crate::ecg::{EcgRecord, WINDOW};
use crate::report::{fmt_f64, Report};
use crate::{Check, CliError};

pub const DEFAULT_CRS: [f64; 5] = [50.0, 60.0, 70.0, 80.0, 90.0];
pub const DEFAULT_QSS: [u32; 6] = [10, 20, 30, 60, 100, 120];
/// 16-bit samples.
pub const RAW_BYTES: usize = WINDOW * 2;

/// `qs = 0` means unquantized.
pub fn quant_step(qs: u32) -> Option<u32> {
    (qs > 0).then_some(qs)
}

/// Matrices for `(n, cr)` are built once; bounds and step are per record and cell.
pub fn context_for(n: usize, cr: f64, lower: i64, upper: i64, qs: u32) -> Result<Arc<CsContext>, CliError> {
    let base = shared_context(CsProfile { n, m: measurements_for_cr(n, cr)?, quant_step: None, ..CsProfile::standard() })?;
    Ok(base.rebound(lower, upper, quant_step(qs))?)
}

pub fn key_seed(purpose: &str, record: &str, seed: u64) -> Vec<u8> {
    let mut s = format!("{purpose}/{record}/").into_bytes();
    s.extend_from_slice(&seed.to_be_bytes());
    s
}

/// One legitimate encrypt/decrypt round: PRD and ciphertext size.
pub fn legit_round(record: &EcgRecord, cs: &CsContext, seed: u64) -> Result<(f64, usize), CliError> {
    let x = record.signal()?;
    let key = cs.gen_key(&key_seed("sweep", &record.id, seed))?;
    let c = cs.encrypt(&key, &x)?;
    let x_hat = cs.decrypt(&key, &c)?;
    Ok((prd(x.values(), &x_hat)?, encoded_len(&c)?))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub crs: Vec<f64>,
    pub qss: Vec<u32>,
    pub seeds: Vec<u64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self { crs: DEFAULT_CRS.to_vec(), qss: DEFAULT_QSS.to_vec(), seeds: (1..=20).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub record: String,
    pub provenance: &'static str,
    pub cr: f64,
    pub qs: u32,
    pub m: usize,
    pub prds: Vec<f64>,
    pub median_prd: f64,
    pub class: Quality,
    /// Largest ciphertext over the seeds.
    pub payload_bytes: usize,
}

impl SweepCell {
    /// Quantized and of usable quality. Unquantized cells carry raw floats and only serve as a baseline.
    pub fn accepted(&self) -> bool {
        self.qs > 0 && self.class != Quality::NotGood
    }

    pub fn saves_half(&self) -> bool {
        2 * self.payload_bytes <= RAW_BYTES
    }
}

pub fn sweep_prd(records: &[EcgRecord], params: &SweepParams) -> Result<Vec<SweepCell>, CliError> {
    if params.seeds.is_empty() {
        return Err(CliError::Input("no seeds".into()));
    }
    let cells: Vec<(&EcgRecord, f64, u32)> = records
        .iter()
        .flat_map(|r| params.crs.iter().flat_map(move |&cr| params.qss.iter().map(move |&qs| (r, cr, qs))))
        .collect();
    cells
        .par_iter()
        .map(|&(r, cr, qs)| {
            let cs = context_for(r.samples.len(), cr, r.lower, r.upper, qs)?;
            let rounds = params.seeds.iter().map(|&s| legit_round(r, &cs, s)).collect::<Result<Vec<_>, _>>()?;
            let prds: Vec<f64> = rounds.iter().map(|&(p, _)| p).collect();
            let median_prd = median(&prds);
            Ok(SweepCell {
                record: r.id.clone(),
                provenance: r.provenance.label(),
                cr,
                qs,
                m: cs.profile().m,
                median_prd,
                class: classify_prd(median_prd)?,
                payload_bytes: rounds.iter().map(|&(_, b)| b).max().unwrap_or(0),
                prds,
            })
        })
        .collect()
}

/// Median PRD per `(cr, qs)` pooled over records and seeds, in grid order.
pub fn pooled_medians(cells: &[SweepCell], params: &SweepParams) -> Vec<(f64, u32, f64)> {
    params
        .crs
        .iter()
        .flat_map(|&cr| {
            params.qss.iter().map(move |&qs| {
                let pooled: Vec<f64> =
                    cells.iter().filter(|c| c.cr == cr && c.qs == qs).flat_map(|c| c.prds.iter().copied()).collect();
                (cr, qs, median(&pooled))
            })
        })
        .collect()
}

/// Places where a pooled median drops as CR or qs grows.
pub fn trend_violations(cells: &[SweepCell], params: &SweepParams) -> Vec<String> {
    let med = pooled_medians(cells, params);
    let at = |cr: f64, qs: u32| med.iter().find(|m| m.0 == cr && m.1 == qs).map(|m| m.2).unwrap_or(f64::NAN);
    let mut crs = params.crs.clone();
    crs.sort_by(f64::total_cmp);
    let mut qss = params.qss.clone();
    qss.sort_unstable();
    let mut out = Vec::new();
    for &qs in &qss {
        for w in crs.windows(2) {
            let (a, b) = (at(w[0], qs), at(w[1], qs));
            if b < a {
                out.push(format!("qs {qs}: CR {} -> {}: {a:.3} -> {b:.3}", w[0], w[1]));
            }
        }
    }
    for &cr in &crs {
        for w in qss.windows(2) {
            let (a, b) = (at(cr, w[0]), at(cr, w[1]));
            if b < a {
                out.push(format!("CR {cr}: qs {} -> {}: {a:.3} -> {b:.3}", w[0], w[1]));
            }
        }
    }
    out
}

pub const SWEEP_HEADER: [&str; 10] =
    ["record", "provenance", "cr", "qs", "m", "median_prd", "class", "payload_bytes", "raw_bytes", "saving_ok"];

pub fn sweep_report(cells: &[SweepCell]) -> Report {
    let mut r = Report::new(&SWEEP_HEADER);
    for c in cells {
        r.push(vec![
            c.record.clone(),
            c.provenance.to_owned(),
            c.cr.to_string(),
            c.qs.to_string(),
            c.m.to_string(),
            fmt_f64(c.median_prd),
            c.class.label().to_owned(),
            c.payload_bytes.to_string(),
            RAW_BYTES.to_string(),
            c.saves_half().to_string(),
        ]);
    }
    r
}

pub fn sweep_checks(cells: &[SweepCell], params: &SweepParams) -> Vec<Check> {
    let mut checks = Vec::new();
    let trend = trend_violations(cells, params);
    checks.push(Check::new("prd-trend", trend.is_empty(), if trend.is_empty() { "non-decreasing in CR and qs".into() } else { trend.join("; ") }));
    let bad: Vec<String> = cells
        .iter()
        .filter(|c| c.accepted() && !c.saves_half())
        .map(|c| format!("{} CR {} qs {}: {} bytes", c.record, c.cr, c.qs, c.payload_bytes))
        .collect();
    let accepted = cells.iter().filter(|c| c.accepted()).count();
    checks.push(Check::new(
        "communication-saving",
        bad.is_empty(),
        if bad.is_empty() { format!("{accepted} accepted cells all within {} bytes", RAW_BYTES / 2) } else { bad.join("; ") },
    ));
    if let Some(m) = pooled_medians(cells, params).iter().find(|m| m.0 == 50.0 && m.1 == 20) {
        checks.push(Check::new("cr50-qs20-quality", m.2 < 9.0, format!("pooled median PRD {:.3}", m.2)));
    }
    checks
}
