use crate::error::{Error, Result};
use crate::scalar::{norm2, Scalar};

/// Percentage root-mean-square difference: `100·‖x − x̂‖₂ / ‖x‖₂`.
pub fn prd<T: Scalar>(x: &[T], x_hat: &[T]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::LengthMismatch { expected: x.len(), actual: x_hat.len() });
    }
    let reference = norm2(x).to_f64_lossy();
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff: f64 = x
        .iter()
        .zip(x_hat)
        .map(|(&a, &b)| {
            let d = (a - b).to_f64_lossy();
            d * d
        })
        .sum();
    Ok(100.0 * diff.sqrt() / reference)
}

/// Perceived recovery quality bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quality {
    VeryGood,
    VeryGoodOrGood,
    NotGood,
}

impl Quality {
    pub fn label(self) -> &'static str {
        match self {
            Self::VeryGood => "very-good",
            Self::VeryGoodOrGood => "very-good-or-good",
            Self::NotGood => "not-good",
        }
    }

    pub fn is_acceptable(self) -> bool {
        self != Self::NotGood
    }
}

impl std::fmt::Display for Quality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Quality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "very-good" => Ok(Self::VeryGood),
            "very-good-or-good" => Ok(Self::VeryGoodOrGood),
            "not-good" => Ok(Self::NotGood),
            other => Err(Error::InvalidParameter(format!("unknown quality label {other:?}"))),
        }
    }
}

/// `[0, 2)` very good, `[2, 9)` very good or good, `≥ 9` not good.
pub fn classify_prd(value: f64) -> Result<Quality> {
    if value.is_nan() || value < 0.0 {
        return Err(Error::InvalidParameter(format!("PRD must be non-negative, got {value}")));
    }
    Ok(if value < 2.0 {
        Quality::VeryGood
    } else if value < 9.0 {
        Quality::VeryGoodOrGood
    } else {
        Quality::NotGood
    })
}
