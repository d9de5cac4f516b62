use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BasisKind {
    /// Orthonormal DCT-II atoms.
    #[default]
    Cosine,
    /// Real Fourier atoms: DC, cosine/sine pairs, and the Nyquist atom for even `N`.
    RealFourier,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" | "dct" => Ok(Self::Cosine),
            "fourier" | "dft" | "real-fourier" => Ok(Self::RealFourier),
            other => Err(Error::InvalidParameter(format!("unknown basis kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cosine => "cosine",
            Self::RealFourier => "fourier",
        })
    }
}

/// Orthonormal `N×N` basis `Ψ`; column `k` is atom `k`, and atom 0 is the constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityBasis<T> {
    columns: DenseMatrix<T>,
    kind: BasisKind,
}

impl<T: Scalar> SparsityBasis<T> {
    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.columns
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.columns.rows()
    }

    /// `x = Ψb`
    pub fn synthesize(&self, coefficients: &[T]) -> Result<Vec<T>> {
        self.columns.mul_vec(coefficients)
    }

    /// `b = Ψᵀx`
    pub fn analyze(&self, x: &[T]) -> Result<Vec<T>> {
        self.columns.tr_mul_vec(x)
    }

    /// `‖ΨᵀΨ − I‖∞` (max entry).
    pub fn orthonormality_error(&self) -> T {
        let gram = self.columns.transpose().matmul(&self.columns).expect("square");
        gram.max_abs_diff(&DenseMatrix::identity(self.n()))
    }
}

fn cosine_atom(n: usize, k: usize, sample: usize) -> f64 {
    let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    scale * (PI * (sample as f64 + 0.5) * k as f64 / n as f64).cos()
}

fn fourier_atom(n: usize, k: usize, sample: usize) -> f64 {
    let nf = n as f64;
    if k == 0 {
        return (1.0 / nf).sqrt();
    }
    if n.is_multiple_of(2) && k == n - 1 {
        return if sample.is_multiple_of(2) { 1.0 } else { -1.0 } / nf.sqrt();
    }
    // atoms 1,2 -> frequency 1 (cos, sin); 3,4 -> frequency 2; ...
    let freq = k.div_ceil(2);
    let phase = 2.0 * PI * freq as f64 * sample as f64 / nf;
    let scale = (2.0 / nf).sqrt();
    if k % 2 == 1 {
        scale * phase.cos()
    } else {
        scale * phase.sin()
    }
}

pub fn build_basis<T: Scalar>(n: usize, kind: BasisKind) -> Result<SparsityBasis<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("basis size must be at least 2, got {n}")));
    }
    let atom = match kind {
        BasisKind::Cosine => cosine_atom,
        BasisKind::RealFourier => fourier_atom,
    };
    let columns = DenseMatrix::from_fn(n, n, |sample, k| T::from_f64_lossy(atom(n, k, sample)));
    Ok(SparsityBasis { columns, kind })
}
