use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::seed::seeded_rng;

/// Public `M×N` Gaussian measurement matrix `Φ`.
///
/// Entries are drawn row by row from one seeded stream, so the matrix for a
/// smaller `M` is exactly the leading rows of the one for a larger `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix<T> {
    matrix: DenseMatrix<T>,
    seed: Vec<u8>,
}

impl<T: Scalar> SensingMatrix<T> {
    /// Wraps an explicit matrix (tests and hand-built examples).
    pub fn from_matrix(matrix: DenseMatrix<T>) -> Result<Self> {
        if matrix.rows() == 0 || matrix.rows() >= matrix.cols() {
            return Err(Error::Dimension(format!(
                "sensing matrix must satisfy 0 < M < N, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { matrix, seed: Vec::new() })
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    /// `100·(N − M)/N`
    pub fn compression_rate(&self) -> f64 {
        100.0 * (self.n() - self.m()) as f64 / self.n() as f64
    }

    /// The leading `m` rows, as generated for the same seed with a smaller `M`.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Dimension("M must be positive".into()));
        }
        Ok(Self { matrix: self.matrix.top_rows(m)?, seed: self.seed.clone() })
    }
}

/// Draws `Φ` with i.i.d. `N(0, 1/N)` entries.
pub fn gen_sensing_matrix<T: Scalar>(seed: &[u8], m: usize, n: usize) -> Result<SensingMatrix<T>> {
    if m == 0 || m >= n {
        return Err(Error::Dimension(format!("sensing matrix must satisfy 0 < M < N, got M={m}, N={n}")));
    }
    let normal = Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("positive variance");
    let mut rng = seeded_rng("esafe/sensing-matrix", seed);
    let data = (0..m * n).map(|_| T::from_f64_lossy(normal.sample(&mut rng))).collect();
    Ok(SensingMatrix { matrix: DenseMatrix::from_row_major(m, n, data)?, seed: seed.to_vec() })
}

/// Number of measurements giving compression rate `cr` (percent) on `n` samples.
pub fn measurements_for_cr(n: usize, cr: f64) -> Result<usize> {
    if !(0.0..100.0).contains(&cr) || n < 2 {
        return Err(Error::InvalidParameter(format!("compression rate {cr} invalid for N={n}")));
    }
    let m = (n as f64 * (100.0 - cr) / 100.0).round() as usize;
    Ok(m.clamp(1, n - 1))
}
