//! Two-sample Kolmogorov–Smirnov test and the shifted-sample
//! indistinguishability experiment built on it.

use esafe_core::codec::{shift_bound, wrap_shift};
use esafe_core::seed::seeded_rng;
use esafe_core::BoundedSignal;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    // The series converges slowly near zero, where the tail is 1 to double precision.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic two-sample test. NaNs are not allowed in either sample.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs non-empty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    KsResult { statistic: d, p_value: kolmogorov_sf(en * d), n, m }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyDistribution {
    /// Entries uniform over the full key interval, as generated.
    Uniform,
    /// Every entry zero (no encryption).
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndistinguishabilityReport {
    pub ks: KsResult,
    pub alpha: f64,
    pub passed: bool,
}

/// Compares entries of `x ⊳⊕ K_d` with entries of `O ⊳⊕ K_d`.
///
/// Signal entries are drawn uniformly from `signals`; every draw gets its own
/// key entry, independently for the two samples.
pub fn indistinguishability_test(
    signals: &[BoundedSignal],
    samples: usize,
    seed: &[u8],
    keys: KeyDistribution,
    alpha: f64,
) -> IndistinguishabilityReport {
    assert!(!signals.is_empty(), "need at least one signal");
    let (lower, upper) = (signals[0].lower(), signals[0].upper());
    let b = shift_bound(upper - lower);
    let mut rng = seeded_rng("esafe/indistinguishability", seed);
    let draw_key = |rng: &mut dyn rand::RngCore| match keys {
        KeyDistribution::Uniform => rng.gen_range(-b..=b) as f64,
        KeyDistribution::Zero => 0.0,
    };
    let mut shifted_x = Vec::with_capacity(samples);
    let mut shifted_o = Vec::with_capacity(samples);
    for _ in 0..samples {
        let s = &signals[rng.gen_range(0..signals.len())];
        let v = s.values()[rng.gen_range(0..s.len())];
        let d = draw_key(&mut rng);
        shifted_x.push(wrap_shift(v, d, s.lower(), s.upper()).0);
        let d = draw_key(&mut rng);
        shifted_o.push(wrap_shift(0.0, d, lower, upper).0);
    }
    let ks = ks_two_sample(&shifted_x, &shifted_o);
    IndistinguishabilityReport { ks, alpha, passed: ks.p_value > alpha }
}
