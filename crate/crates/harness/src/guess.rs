//! Ciphertext-only key-guessing attacks against the shift-and-sense codec.
//!
//! The attacker sees the ciphertext and the public matrices. Ground truth is
//! only reachable through the `score` callback, which returns a PRD.

use esafe_core::codec::{cs_gen, shift_bound, CarryVector, ShiftKey};
use esafe_core::recovery::omp_solve;
use esafe_core::seed::seeded_rng;
use esafe_core::{CsCiphertext, Error, RecoveryParams};
use esafe_protocol::cs::CsContext;
use rand::RngCore;

/// Grid step used by the default uniform-guess sweep.
pub const GUESS_STEP: i64 = 50;

/// Multiples of 50 inside `[−b, b]` plus both ends, where `b` is the key bound.
pub fn default_guess_grid(range: i64) -> Vec<i64> {
    let b = shift_bound(range);
    let mut grid: Vec<i64> = (-b / GUESS_STEP..=b / GUESS_STEP).map(|k| k * GUESS_STEP).collect();
    grid.push(-b);
    grid.push(b);
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Reconstruction, or all zeros when the solver gives up (the attacker gets nothing).
fn reconstruct(cs: &CsContext, y: &[f64], qs: Option<u32>) -> esafe_core::Result<Vec<f64>> {
    let params = RecoveryParams::for_measurements(cs.profile().m, y, qs);
    match omp_solve(y, cs.dictionary(), &params) {
        Ok(sol) => cs.psi().synthesize(&sol.coefficients),
        Err(Error::Singular { .. }) => Ok(vec![0.0; cs.profile().n]),
        Err(e) => Err(e),
    }
}

/// Attacker side of the uniform guess: every `d_i = d̄`, carries taken as zero.
pub fn uniform_guess_reconstruct(c: &CsCiphertext, cs: &CsContext, guess: i64) -> esafe_core::Result<Vec<f64>> {
    let p = cs.profile();
    let key = ShiftKey::constant(p.n, guess as i32, p.range())?;
    let blind = CsCiphertext::new(c.measurements().to_vec(), CarryVector::zeros(p.n), c.quant_step())?;
    let y = esafe_core::codec::cs_deshift(&key, &blind, cs.phi(), p.lower, p.upper)?;
    reconstruct(cs, &y, c.quant_step())
}

/// Attacker side of a full-key guess, using the carries sent with the ciphertext.
pub fn key_guess_reconstruct(c: &CsCiphertext, cs: &CsContext, key: &ShiftKey) -> esafe_core::Result<Vec<f64>> {
    let p = cs.profile();
    let y = esafe_core::codec::cs_deshift(key, c, cs.phi(), p.lower, p.upper)?;
    reconstruct(cs, &y, c.quant_step())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuessOutcome {
    pub guess: i64,
    pub prd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformGuessReport {
    pub per_guess: Vec<GuessOutcome>,
    pub best: GuessOutcome,
}

impl UniformGuessReport {
    /// Pointwise mean of several curves over the same grid, with its own argmin.
    pub fn mean_curve(reports: &[UniformGuessReport]) -> Option<UniformGuessReport> {
        let first = reports.first()?;
        let grid: Vec<i64> = first.per_guess.iter().map(|g| g.guess).collect();
        if reports.iter().any(|r| r.per_guess.iter().map(|g| g.guess).ne(grid.iter().copied())) {
            return None;
        }
        let per_guess: Vec<GuessOutcome> = grid
            .iter()
            .enumerate()
            .map(|(i, &guess)| GuessOutcome {
                guess,
                prd: reports.iter().map(|r| r.per_guess[i].prd).sum::<f64>() / reports.len() as f64,
            })
            .collect();
        let best = argmin(&per_guess);
        Some(UniformGuessReport { per_guess, best })
    }
}

fn argmin(per_guess: &[GuessOutcome]) -> GuessOutcome {
    *per_guess
        .iter()
        .min_by(|a, b| a.prd.total_cmp(&b.prd).then(a.guess.abs().cmp(&b.guess.abs())))
        .expect("non-empty grid")
}

pub fn uniform_guess_attack(
    c: &CsCiphertext,
    cs: &CsContext,
    grid: &[i64],
    score: &dyn Fn(&[f64]) -> f64,
) -> esafe_core::Result<UniformGuessReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty guess grid".into()));
    }
    let mut per_guess = Vec::with_capacity(grid.len());
    for &g in grid {
        let x_hat = uniform_guess_reconstruct(c, cs, g)?;
        per_guess.push(GuessOutcome { guess: g, prd: score(&x_hat) });
    }
    let best = argmin(&per_guess);
    Ok(UniformGuessReport { per_guess, best })
}

/// PRD of `trials` reconstructions under fresh keys drawn as the key generator would.
pub fn random_guess_attack(
    c: &CsCiphertext,
    cs: &CsContext,
    trials: usize,
    seed: &[u8],
    score: &dyn Fn(&[f64]) -> f64,
) -> esafe_core::Result<Vec<f64>> {
    let mut rng = seeded_rng("esafe/random-guess", seed);
    let p = cs.profile();
    (0..trials)
        .map(|_| {
            let mut key_seed = [0u8; 32];
            rng.fill_bytes(&mut key_seed);
            let key = cs_gen(&key_seed, p.n, p.lower, p.upper)?;
            Ok(score(&key_guess_reconstruct(c, cs, &key)?))
        })
        .collect()
}
