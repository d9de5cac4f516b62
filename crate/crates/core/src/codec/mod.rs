//! Shift-and-sense encryption: cyclic shifting addition under a per-session
//! integer key, followed by a public Gaussian projection.
//!
//! The receiver holding the key undoes the shift in the measurement domain:
//! `y = y' + Φ(range·(Λ .* sign(K_d)) − K_d)`, after which ordinary sparse
//! recovery applies.

mod wire;

pub use wire::{decode_ciphertext, encode_ciphertext, encoded_len};

use rand::Rng;

use crate::error::{Error, Result};
use crate::recovery::SensingMatrix;
use crate::scalar::Scalar;
use crate::seed::seeded_rng;

/// A physiological sample vector whose entries lie strictly inside `(lower, upper)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSignal<T> {
    values: Vec<T>,
    lower: i64,
    upper: i64,
}

impl<T: Scalar> BoundedSignal<T> {
    pub fn new(values: Vec<T>, lower: i64, upper: i64) -> Result<Self> {
        check_bounds(lower, upper)?;
        if values.is_empty() {
            return Err(Error::InvalidParameter("signal must have at least one sample".into()));
        }
        let (lo, hi) = (T::from_i64_exact(lower), T::from_i64_exact(upper));
        if let Some(&bad) = values.iter().find(|&&v| !(v > lo && v < hi)) {
            return Err(Error::OutOfBounds { value: bad.to_f64_lossy(), lower, upper });
        }
        Ok(Self { values, lower, upper })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    pub fn upper(&self) -> i64 {
        self.upper
    }

    pub fn range(&self) -> i64 {
        self.upper - self.lower
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// The per-session secret `K_d`: one integer shift per sample.
#[derive(Clone, PartialEq, Eq)]
pub struct ShiftKey {
    entries: Vec<i32>,
    seed: Vec<u8>,
    range: i64,
}

impl std::fmt::Debug for ShiftKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftKey")
            .field("len", &self.entries.len())
            .field("range", &self.range)
            .finish_non_exhaustive()
    }
}

impl ShiftKey {
    /// Builds a key from explicit entries, checking them against the shift bound of `range`.
    pub fn from_entries(entries: Vec<i32>, range: i64) -> Result<Self> {
        if range <= 0 {
            return Err(Error::InvalidParameter(format!("range must be positive, got {range}")));
        }
        let bound = shift_bound(range);
        if let Some(&d) = entries.iter().find(|&&d| (d as i64).abs() > bound) {
            return Err(Error::InvalidParameter(format!("shift {d} exceeds bound {bound}")));
        }
        Ok(Self { entries, seed: Vec::new(), range })
    }

    /// Every entry set to `value`; used for uniform-guess attacks and tests.
    pub fn constant(len: usize, value: i32, range: i64) -> Result<Self> {
        Self::from_entries(vec![value; len], range)
    }

    pub fn entries(&self) -> &[i32] {
        &self.entries
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    pub fn range(&self) -> i64 {
        self.range
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Big-endian `i32` per entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|d| d.to_be_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8], range: i64) -> Result<Self> {
        if !bytes.len().is_multiple_of(4) {
            return Err(Error::Decode(format!("key length {} is not a multiple of 4", bytes.len())));
        }
        let entries = bytes
            .chunks_exact(4)
            .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_entries(entries, range)
    }
}

/// Per-sample wrap indicators `Λ`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CarryVector {
    bits: Vec<bool>,
}

impl CarryVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Packs most-significant-bit first into `⌈len/8⌉` bytes.
    pub fn pack(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            out[i / 8] |= 0x80 >> (i % 8);
        }
        out
    }

    pub fn unpack(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Decode(format!(
                "carry block has {} bytes, expected {}",
                bytes.len(),
                len.div_ceil(8)
            )));
        }
        Ok(Self { bits: (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect() })
    }
}

/// Compressed-and-encrypted measurements `y'` (or quantized `y''`) with their carries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsCiphertext<T> {
    measurements: Vec<T>,
    carries: CarryVector,
    quant_step: Option<u32>,
}

impl<T: Scalar> CsCiphertext<T> {
    pub fn new(measurements: Vec<T>, carries: CarryVector, quant_step: Option<u32>) -> Result<Self> {
        if measurements.len() >= carries.len() {
            return Err(Error::Dimension(format!(
                "{} measurements for a {}-sample signal; need M < N",
                measurements.len(),
                carries.len()
            )));
        }
        if quant_step == Some(0) {
            return Err(Error::InvalidParameter("quantization step must be positive".into()));
        }
        Ok(Self { measurements, carries, quant_step })
    }

    pub fn measurements(&self) -> &[T] {
        &self.measurements
    }

    pub fn carries(&self) -> &CarryVector {
        &self.carries
    }

    pub fn quant_step(&self) -> Option<u32> {
        self.quant_step
    }

    pub fn is_quantized(&self) -> bool {
        self.quant_step.is_some()
    }

    /// Signal length `N`.
    pub fn signal_len(&self) -> usize {
        self.carries.len()
    }

    pub fn measurement_count(&self) -> usize {
        self.measurements.len()
    }
}

fn check_bounds(lower: i64, upper: i64) -> Result<()> {
    if lower >= upper {
        return Err(Error::InvalidBounds { lower, upper });
    }
    Ok(())
}

/// `⌈range/2⌉`, the largest admissible shift magnitude.
pub fn shift_bound(range: i64) -> i64 {
    (range + 1).div_euclid(2)
}

/// Cyclic shift without the input-bound check; total over all finite inputs.
///
/// Returns the wrapped value in `[lower, upper)` and whether `v + w` left that interval.
pub fn wrap_shift<T: Scalar>(v: T, w: T, lower: i64, upper: i64) -> (T, bool) {
    let lo = T::from_i64_exact(lower);
    let hi = T::from_i64_exact(upper);
    let range = hi - lo;
    let sum = v + w;
    let mut r = (sum - lo) % range;
    if r < T::zero() {
        r = r + range;
    }
    if r >= range {
        r = r - range;
    }
    if r < T::zero() {
        r = T::zero();
    }
    let wrapped = !(sum >= lo && sum < hi);
    (r + lo, wrapped)
}

/// Shifting addition of a bounded sample `v` and a shift `w`.
pub fn shifting_add<T: Scalar>(v: T, w: T, lower: i64, upper: i64) -> Result<(T, bool)> {
    check_bounds(lower, upper)?;
    if !(v > T::from_i64_exact(lower) && v < T::from_i64_exact(upper)) {
        return Err(Error::OutOfBounds { value: v.to_f64_lossy(), lower, upper });
    }
    Ok(wrap_shift(v, w, lower, upper))
}

/// Entry-wise shifting addition.
pub fn vec_shifting_add<T: Scalar>(
    v: &[T],
    w: &[T],
    lower: i64,
    upper: i64,
) -> Result<(Vec<T>, CarryVector)> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch { expected: v.len(), actual: w.len() });
    }
    let mut out = Vec::with_capacity(v.len());
    let mut bits = Vec::with_capacity(v.len());
    for (&a, &b) in v.iter().zip(w) {
        let (u, carry) = shifting_add(a, b, lower, upper)?;
        out.push(u);
        bits.push(carry);
    }
    Ok((out, CarryVector::new(bits)))
}

pub fn entrywise_product<T: Scalar>(v: &[T], w: &[T]) -> Result<Vec<T>> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch { expected: v.len(), actual: w.len() });
    }
    Ok(v.iter().zip(w).map(|(&a, &b)| a * b).collect())
}

/// Draws `k` shifts uniformly from `[−⌈range/2⌉, ⌈range/2⌉]` using a stream seeded by `seed`.
pub fn cs_gen(seed: &[u8], k: usize, lower: i64, upper: i64) -> Result<ShiftKey> {
    check_bounds(lower, upper)?;
    if k == 0 {
        return Err(Error::InvalidParameter("key length must be positive".into()));
    }
    let range = upper - lower;
    let bound = shift_bound(range);
    if bound > i32::MAX as i64 {
        return Err(Error::InvalidParameter(format!("range {range} too large for 32-bit shifts")));
    }
    let bound = bound as i32;
    let mut rng = seeded_rng("esafe/shift-key", seed);
    let entries = (0..k).map(|_| rng.gen_range(-bound..=bound)).collect();
    Ok(ShiftKey { entries, seed: seed.to_vec(), range })
}

/// Shifting direction per entry; zero shifts map to 0.
pub fn sign_vector(key: &ShiftKey) -> Vec<i8> {
    key.entries.iter().map(|&d| d.signum() as i8).collect()
}

fn check_key_dims<T: Scalar>(key: &ShiftKey, phi: &SensingMatrix<T>) -> Result<()> {
    if key.len() != phi.n() {
        return Err(Error::Dimension(format!(
            "key length {} does not match sensing matrix width {}",
            key.len(),
            phi.n()
        )));
    }
    Ok(())
}

/// Shift `x` by `K_d`, then project with `Φ`.
pub fn cs_enc<T: Scalar>(
    key: &ShiftKey,
    x: &BoundedSignal<T>,
    phi: &SensingMatrix<T>,
) -> Result<CsCiphertext<T>> {
    check_key_dims(key, phi)?;
    if x.len() != phi.n() {
        return Err(Error::Dimension(format!(
            "signal length {} does not match sensing matrix width {}",
            x.len(),
            phi.n()
        )));
    }
    if key.range != x.range() {
        return Err(Error::Dimension(format!(
            "key range {} does not match signal range {}",
            key.range,
            x.range()
        )));
    }
    let shifts: Vec<T> = key.entries.iter().map(|&d| T::from_i64_exact(d as i64)).collect();
    let (shifted, carries) = vec_shifting_add(x.values(), &shifts, x.lower, x.upper)?;
    let measurements = phi.matrix().mul_vec(&shifted)?;
    CsCiphertext::new(measurements, carries, None)
}

/// Rounds each measurement to the nearest multiple of `qs`, ties away from zero.
pub fn quantize<T: Scalar>(c: &CsCiphertext<T>, qs: u32) -> Result<CsCiphertext<T>> {
    if qs == 0 {
        return Err(Error::InvalidParameter("quantization step must be positive".into()));
    }
    if c.is_quantized() {
        return Err(Error::AlreadyQuantized);
    }
    let step = T::from_i64_exact(qs as i64);
    let measurements = c.measurements.iter().map(|&y| (y / step).round() * step).collect();
    Ok(CsCiphertext { measurements, carries: c.carries.clone(), quant_step: Some(qs) })
}

/// `range·λ·sign(d) − d`: what must be added back to a shifted sample to restore it.
fn shift_correction<T: Scalar>(d: i32, carry: bool, range: T) -> T {
    let wrap = if carry { range * T::from_i64_exact(d.signum() as i64) } else { T::zero() };
    wrap - T::from_i64_exact(d as i64)
}

/// Removes the key's contribution from the measurements, returning `y = Φx` (up to quantization).
///
/// `lower` and `upper` only contribute their difference; they are taken
/// explicitly so a receiver can check them against the device parameters.
pub fn cs_deshift<T: Scalar>(
    key: &ShiftKey,
    c: &CsCiphertext<T>,
    phi: &SensingMatrix<T>,
    lower: i64,
    upper: i64,
) -> Result<Vec<T>> {
    check_bounds(lower, upper)?;
    check_key_dims(key, phi)?;
    if c.signal_len() != phi.n() || c.measurement_count() != phi.m() {
        return Err(Error::Dimension(format!(
            "ciphertext is {}x{} but sensing matrix is {}x{}",
            c.measurement_count(),
            c.signal_len(),
            phi.m(),
            phi.n()
        )));
    }
    let range = T::from_i64_exact(upper - lower);
    let correction: Vec<T> = key
        .entries
        .iter()
        .zip(c.carries.bits())
        .map(|(&d, &carry)| shift_correction(d, carry, range))
        .collect();
    let offset = phi.matrix().mul_vec(&correction)?;
    Ok(c.measurements.iter().zip(offset).map(|(&y, o)| y + o).collect())
}
