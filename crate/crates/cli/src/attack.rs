//! Ciphertext-only attack sweeps with the legitimate baseline alongside.

use esafe_core::recovery::{classify_prd, prd};
use esafe_core::Quality;
use esafe_harness::guess::{default_guess_grid, random_guess_attack, uniform_guess_attack, UniformGuessReport};
use rayon::prelude::*;

use crate::ecg::{EcgRecord, GLOBAL_BOUNDS};
use crate::report::{fmt_f64, Report};
use crate::sweep::{context_for, key_seed, median};
use crate::{Check, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackParams {
    pub crs: Vec<f64>,
    pub qss: Vec<u32>,
    pub seeds: Vec<u64>,
    pub trials: usize,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self { crs: vec![50.0, 75.0, 90.0], qss: vec![0, 20], seeds: (1..=4).collect(), trials: 100 }
    }
}

/// One encrypted window and everything thrown at it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRun {
    pub legit_prd: f64,
    pub uniform: UniformGuessReport,
    pub random: Vec<f64>,
}

impl AttackRun {
    pub fn random_min(&self) -> f64 {
        self.random.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn best_attack(&self) -> f64 {
        self.uniform.best.prd.min(self.random_min())
    }
}

/// Encrypts `record` under a fresh key and attacks the ciphertext. The
/// ground truth only reaches the attacks through the scoring callback.
pub fn attack_run(record: &EcgRecord, cr: f64, qs: u32, seed: u64, trials: usize) -> Result<AttackRun, CliError> {
    let cs = context_for(record.samples.len(), cr, record.lower, record.upper, qs)?;
    let x = record.signal()?;
    let key = cs.gen_key(&key_seed("attack", &record.id, seed))?;
    let c = cs.encrypt(&key, &x)?;
    let truth = x.values();
    let score = |x_hat: &[f64]| prd(truth, x_hat).unwrap_or(f64::INFINITY);
    let legit_prd = score(&cs.decrypt(&key, &c)?);
    let uniform = uniform_guess_attack(&c, &cs, &default_guess_grid(cs.profile().range()), &score)?;
    let random = random_guess_attack(&c, &cs, trials, &key_seed("guess", &record.id, seed), &score)?;
    Ok(AttackRun { legit_prd, uniform, random })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackCell {
    pub record: String,
    pub provenance: &'static str,
    pub cr: f64,
    pub qs: u32,
    pub runs: Vec<AttackRun>,
}

impl AttackCell {
    pub fn legit_median(&self) -> f64 {
        median(&self.runs.iter().map(|r| r.legit_prd).collect::<Vec<_>>())
    }

    /// The attacker's best outcome over every run in the cell.
    pub fn attack_min(&self) -> f64 {
        self.runs.iter().map(AttackRun::best_attack).fold(f64::INFINITY, f64::min)
    }

    pub fn uniform_curve(&self) -> UniformGuessReport {
        UniformGuessReport::mean_curve(&self.runs.iter().map(|r| r.uniform.clone()).collect::<Vec<_>>()).expect("same grid in every run")
    }
}

/// Records are re-bounded to the global ECG range so every cell shares one key space.
pub fn attack_sweep(records: &[EcgRecord], params: &AttackParams) -> Result<Vec<AttackCell>, CliError> {
    if params.seeds.is_empty() {
        return Err(CliError::Input("no seeds".into()));
    }
    let records = records.iter().map(|r| r.with_bounds(GLOBAL_BOUNDS.0, GLOBAL_BOUNDS.1)).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(&EcgRecord, f64, u32, u64)> = records
        .iter()
        .flat_map(|r| {
            params.crs.iter().flat_map(move |&cr| params.qss.iter().flat_map(move |&qs| params.seeds.iter().map(move |&s| (r, cr, qs, s))))
        })
        .collect();
    let runs = jobs.par_iter().map(|&(r, cr, qs, s)| attack_run(r, cr, qs, s, params.trials)).collect::<Result<Vec<_>, _>>()?;
    Ok(runs
        .chunks(params.seeds.len())
        .zip(jobs.chunks(params.seeds.len()))
        .map(|(runs, jobs)| {
            let (r, cr, qs, _) = jobs[0];
            AttackCell { record: r.id.clone(), provenance: r.provenance.label(), cr, qs, runs: runs.to_vec() }
        })
        .collect())
}

/// Uniform-guess curve averaged over every run at each `(cr, qs)`.
pub fn pooled_curves(cells: &[AttackCell]) -> Vec<(f64, u32, UniformGuessReport)> {
    let mut keys: Vec<(f64, u32)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.cr, c.qs)) {
            keys.push((c.cr, c.qs));
        }
    }
    keys.into_iter()
        .map(|(cr, qs)| {
            let reports: Vec<UniformGuessReport> = cells
                .iter()
                .filter(|c| c.cr == cr && c.qs == qs)
                .flat_map(|c| c.runs.iter().map(|r| r.uniform.clone()))
                .collect();
            (cr, qs, UniformGuessReport::mean_curve(&reports).expect("same grid in every run"))
        })
        .collect()
}

pub const ATTACK_HEADER: [&str; 12] = [
    "record",
    "provenance",
    "cr",
    "qs",
    "legit_median_prd",
    "legit_class",
    "uniform_argmin",
    "uniform_best_prd",
    "random_min_prd",
    "random_median_prd",
    "attack_min_prd",
    "attack_class",
];

fn class_label(prd: f64) -> Result<&'static str, CliError> {
    Ok(classify_prd(prd)?.label())
}

pub fn attack_report(cells: &[AttackCell]) -> Result<Report, CliError> {
    let mut r = Report::new(&ATTACK_HEADER);
    for c in cells {
        let uniform_best = c.runs.iter().map(|r| r.uniform.best.prd).fold(f64::INFINITY, f64::min);
        let random: Vec<f64> = c.runs.iter().flat_map(|r| r.random.iter().copied()).collect();
        let random_min = random.iter().copied().fold(f64::INFINITY, f64::min);
        r.push(vec![
            c.record.clone(),
            c.provenance.to_owned(),
            c.cr.to_string(),
            c.qs.to_string(),
            fmt_f64(c.legit_median()),
            class_label(c.legit_median())?.to_owned(),
            c.uniform_curve().best.guess.to_string(),
            fmt_f64(uniform_best),
            fmt_f64(random_min),
            fmt_f64(median(&random)),
            fmt_f64(c.attack_min()),
            class_label(c.attack_min())?.to_owned(),
        ]);
    }
    Ok(r)
}

pub fn attack_checks(cells: &[AttackCell]) -> Result<Vec<Check>, CliError> {
    let leaks: Vec<String> = cells
        .iter()
        .filter(|c| c.attack_min() < 9.0)
        .map(|c| format!("{} CR {} qs {}: {:.3}", c.record, c.cr, c.qs, c.attack_min()))
        .collect();
    let mut checks = vec![Check::new(
        "attacks-not-good",
        leaks.is_empty(),
        if leaks.is_empty() { format!("{} cells, every attack run PRD >= 9", cells.len()) } else { leaks.join("; ") },
    )];
    let off_zero: Vec<String> = pooled_curves(cells)
        .iter()
        .filter(|(_, _, curve)| curve.best.guess != 0)
        .map(|(cr, qs, curve)| format!("CR {cr} qs {qs}: argmin {}", curve.best.guess))
        .collect();
    checks.push(Check::new(
        "uniform-argmin-zero",
        off_zero.is_empty(),
        if off_zero.is_empty() { "pooled curves bottom out at 0".into() } else { off_zero.join("; ") },
    ));
    let baseline: Vec<String> = cells
        .iter()
        .filter(|c| c.cr == 50.0 && (c.qs == 0 || c.qs == 20))
        .filter(|c| classify_prd(c.legit_median()) != Ok(Quality::VeryGood))
        .map(|c| format!("{} qs {}: {:.3}", c.record, c.qs, c.legit_median()))
        .collect();
    checks.push(Check::new(
        "baseline-very-good",
        baseline.is_empty(),
        if baseline.is_empty() { "CR 50 baseline below 2".into() } else { baseline.join("; ") },
    ));
    Ok(checks)
}
