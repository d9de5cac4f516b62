use rand::seq::index::sample;
use rand::Rng;

use super::{build_basis, BasisKind, SparsityBasis};
use crate::codec::BoundedSignal;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::seeded_rng;

/// A planted sparse test signal together with its true support.
#[derive(Debug, Clone)]
pub struct SyntheticSignal<T> {
    pub signal: BoundedSignal<T>,
    /// Atom indices with non-zero coefficients, sorted; always includes the constant atom 0.
    pub support: Vec<usize>,
}

/// Cosine-basis version of [`synth_sparse_signal_in`].
pub fn synth_sparse_signal<T: Scalar>(
    seed: &[u8],
    n: usize,
    s: usize,
    lower: i64,
    upper: i64,
) -> Result<SyntheticSignal<T>> {
    let basis = build_basis(n, BasisKind::Cosine)?;
    synth_sparse_signal_in(&basis, seed, s, lower, upper)
}

/// Draws `s` non-constant atoms with coefficients of magnitude in `[0.5, 1]`
/// and random sign, then maps the waveform affinely into the bounds: it is
/// centred on `(lower + upper)/2` and scaled so its peak deviation stays one
/// twentieth of the range inside the nearer bound.
pub fn synth_sparse_signal_in<T: Scalar>(
    basis: &SparsityBasis<T>,
    seed: &[u8],
    s: usize,
    lower: i64,
    upper: i64,
) -> Result<SyntheticSignal<T>> {
    let n = basis.n();
    if s >= n {
        return Err(Error::InvalidParameter(format!("sparsity {s} must be below N = {n}")));
    }
    if upper - lower < 2 {
        return Err(Error::InvalidBounds { lower, upper });
    }
    let mut rng = seeded_rng("esafe/synthetic-signal", seed);
    let mut atoms: Vec<usize> = sample(&mut rng, n - 1, s).into_iter().map(|i| i + 1).collect();
    atoms.sort_unstable();

    let mut coefficients = vec![T::zero(); n];
    for &a in &atoms {
        let magnitude: f64 = rng.gen_range(0.5..=1.0);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        coefficients[a] = T::from_f64_lossy(sign * magnitude);
    }
    let wave = basis.synthesize(&coefficients)?;

    let range = (upper - lower) as f64;
    let center = (upper + lower) as f64 / 2.0;
    let half_span = range / 2.0 - range / 20.0;
    let peak = wave.iter().map(|v| v.to_f64_lossy().abs()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { half_span / peak } else { 0.0 };
    let values: Vec<T> =
        wave.iter().map(|&v| T::from_f64_lossy(center + scale * v.to_f64_lossy())).collect();

    let mut support = vec![0];
    support.extend(atoms);
    Ok(SyntheticSignal { signal: BoundedSignal::new(values, lower, upper)?, support })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_signal() {
        let basis = build_basis::<f64>(64, BasisKind::Cosine).unwrap();
        let s = synth_sparse_signal_in(&basis, b"x", 1, 590, 1487).unwrap();
        assert_eq!(s.support.len(), 2);
        let b = basis.analyze(s.signal.values()).unwrap();
        let nonzero: Vec<usize> = (0..64).filter(|&i| b[i].abs() > 1e-9).collect();
        assert_eq!(nonzero, s.support);
    }

    #[test]
    fn deterministic_and_in_range() {
        let a = synth_sparse_signal::<f64>(b"k", 512, 10, 590, 1487).unwrap();
        let b = synth_sparse_signal::<f64>(b"k", 512, 10, 590, 1487).unwrap();
        assert_eq!(a.signal, b.signal);
        assert_eq!(a.support, b.support);
        let margin = 897.0 / 20.0;
        assert!(a.signal.values().iter().all(|&v| v > 590.0 + margin - 1e-9 && v < 1487.0 - margin + 1e-9));
    }

    #[test]
    fn sparsity_must_fit() {
        assert!(synth_sparse_signal::<f64>(b"k", 8, 8, 590, 1487).is_err());
        let flat = synth_sparse_signal::<f64>(b"k", 8, 0, 590, 1487).unwrap();
        assert!(flat.signal.values().iter().all(|&v| v == 1038.5));
    }
}
