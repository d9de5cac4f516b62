//! Byte layout of a [`CsCiphertext`].
//!
//! ```text
//! N: u32 | M: u32 | qs: u32 (0 = unquantized)
//! qs == 0: M × f64, big-endian IEEE-754
//! qs  > 0: width: u8 (1..=32), then M two's-complement qs-multiples of
//!          `width` bits each, MSB-first, zero-padded to a byte boundary
//! Λ: ⌈N/8⌉ bytes, MSB-first
//! ```
//! All integers are big-endian.

use super::{CarryVector, CsCiphertext};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const HEADER_LEN: usize = 12;

fn multiples<T: Scalar>(c: &CsCiphertext<T>, qs: u32) -> Result<Vec<i64>> {
    let step = qs as f64;
    c.measurements()
        .iter()
        .map(|&y| {
            let k = (y.to_f64_lossy() / step).round();
            if !k.is_finite() || k < i32::MIN as f64 || k > i32::MAX as f64 {
                return Err(Error::InvalidParameter(format!("quantized value {k} exceeds 32 bits")));
            }
            Ok(k as i64)
        })
        .collect()
}

/// Smallest two's-complement width holding every value.
fn width_for(values: &[i64]) -> u8 {
    let mut width = 1u8;
    for &v in values {
        let needed = if v >= 0 { 65 - v.leading_zeros() } else { 65 - (!v).leading_zeros() };
        width = width.max(needed as u8);
    }
    width
}

fn packed_len(m: usize, width: u8) -> usize {
    (m * width as usize).div_ceil(8)
}

pub fn encoded_len<T: Scalar>(c: &CsCiphertext<T>) -> Result<usize> {
    let body = match c.quant_step() {
        None => 8 * c.measurement_count(),
        Some(qs) => 1 + packed_len(c.measurement_count(), width_for(&multiples(c, qs)?)),
    };
    Ok(HEADER_LEN + body + c.signal_len().div_ceil(8))
}

pub fn encode_ciphertext<T: Scalar>(c: &CsCiphertext<T>) -> Result<Vec<u8>> {
    let n = u32::try_from(c.signal_len()).map_err(|_| Error::InvalidParameter("N exceeds u32".into()))?;
    let m = c.measurement_count() as u32;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m as usize);
    out.extend_from_slice(&n.to_be_bytes());
    out.extend_from_slice(&m.to_be_bytes());
    out.extend_from_slice(&c.quant_step().unwrap_or(0).to_be_bytes());
    match c.quant_step() {
        None => {
            for &y in c.measurements() {
                out.extend_from_slice(&y.to_f64_lossy().to_be_bytes());
            }
        }
        Some(qs) => {
            let ks = multiples(c, qs)?;
            let width = width_for(&ks);
            out.push(width);
            let mut acc: u128 = 0;
            let mut filled = 0u32;
            let mask = (1u128 << width) - 1;
            for k in ks {
                acc = (acc << width) | (k as u128 & mask);
                filled += width as u32;
                while filled >= 8 {
                    filled -= 8;
                    out.push((acc >> filled) as u8);
                }
                acc &= (1u128 << filled) - 1;
            }
            if filled > 0 {
                out.push((acc << (8 - filled)) as u8);
            }
        }
    }
    out.extend_from_slice(&c.carries().pack());
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, len: usize) -> Result<&'a [u8]> {
    let end = at.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| {
        Error::Decode(format!("truncated: need {len} bytes at offset {}", *at))
    })?;
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

fn read_u32(bytes: &[u8], at: &mut usize) -> Result<u32> {
    let s = take(bytes, at, 4)?;
    Ok(u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
}

/// Decodes one ciphertext from the front of `bytes`, returning it and the bytes consumed.
pub fn decode_ciphertext<T: Scalar>(bytes: &[u8]) -> Result<(CsCiphertext<T>, usize)> {
    let mut at = 0;
    let n = read_u32(bytes, &mut at)? as usize;
    let m = read_u32(bytes, &mut at)? as usize;
    let qs = read_u32(bytes, &mut at)?;
    if m >= n {
        return Err(Error::Decode(format!("M = {m} must be below N = {n}")));
    }
    let measurements: Vec<T> = if qs == 0 {
        take(bytes, &mut at, 8 * m)?
            .chunks_exact(8)
            .map(|c| {
                let v = f64::from_be_bytes(c.try_into().expect("8-byte chunk"));
                T::from_f64(v).ok_or_else(|| Error::Decode("measurement not representable".into()))
            })
            .collect::<Result<_>>()?
    } else {
        let width = take(bytes, &mut at, 1)?[0];
        if !(1..=32).contains(&width) {
            return Err(Error::Decode(format!("invalid packed width {width}")));
        }
        let packed = take(bytes, &mut at, packed_len(m, width))?;
        let mut values = Vec::with_capacity(m);
        let mut acc: u128 = 0;
        let mut filled = 0u32;
        let mut iter = packed.iter();
        for _ in 0..m {
            while filled < width as u32 {
                acc = (acc << 8) | *iter.next().expect("length checked") as u128;
                filled += 8;
            }
            filled -= width as u32;
            let raw = ((acc >> filled) & ((1u128 << width) - 1)) as u64;
            acc &= (1u128 << filled) - 1;
            let shift = 64 - width as u32;
            let k = ((raw << shift) as i64) >> shift;
            values.push(T::from_i64_exact(k * qs as i64));
        }
        if filled > 0 && acc != 0 {
            return Err(Error::Decode("nonzero padding bits".into()));
        }
        values
    };
    let carries = CarryVector::unpack(take(bytes, &mut at, n.div_ceil(8))?, n)?;
    if qs == 0 && measurements.iter().any(|v: &T| !v.is_finite()) {
        return Err(Error::Decode("non-finite measurement".into()));
    }
    let c = CsCiphertext::new(measurements, carries, (qs > 0).then_some(qs))?;
    Ok((c, at))
}
