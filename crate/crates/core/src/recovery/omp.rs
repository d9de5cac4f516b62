//! Orthogonal matching pursuit over the effective dictionary `Θ = ΦΨ`.
//!
//! The active-set least-squares problem is kept in factored form: each new
//! atom is orthogonalised against the current basis `Q` (two Gram-Schmidt
//! passes), so the coefficients come from a triangular solve `R·b = Qᵀy` and
//! the normal equations are never formed.

use super::{SensingMatrix, SparsityBasis};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{dot, norm2, Scalar};

/// Stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryParams<T> {
    /// Upper bound on selected atoms; at most `M`.
    pub max_atoms: usize,
    /// Stop once the residual norm drops to this value.
    pub residual_tol: T,
}

impl<T: Scalar> RecoveryParams<T> {
    /// `M/4` atoms and a residual target of `1e-6·‖y‖`.
    pub fn default_for(m: usize, y: &[T]) -> Self {
        Self {
            max_atoms: (m / 4).max(1),
            residual_tol: T::from_f64_lossy(1e-6) * norm2(y),
        }
    }

    /// Defaults, with the residual target raised to the expected norm of uniform
    /// quantization error (`qs·√(M/12)`) when the measurements were quantized.
    pub fn for_measurements(m: usize, y: &[T], quant_step: Option<u32>) -> Self {
        let mut p = Self::default_for(m, y);
        if let Some(qs) = quant_step {
            let floor = T::from_f64_lossy(qs as f64 * (m as f64 / 12.0).sqrt());
            p.residual_tol = p.residual_tol.max(floor);
        }
        p
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.max_atoms > m {
            return Err(Error::InvalidParameter(format!(
                "max_atoms {} exceeds measurement count {m}",
                self.max_atoms
            )));
        }
        if self.residual_tol.is_nan() || self.residual_tol < T::zero() {
            return Err(Error::InvalidParameter("residual_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Precomputed `Θ = ΦΨ` and its column norms.
#[derive(Debug, Clone)]
pub struct Dictionary<T> {
    theta: DenseMatrix<T>,
    column_norms: Vec<T>,
}

impl<T: Scalar> Dictionary<T> {
    pub fn new(phi: &SensingMatrix<T>, psi: &SparsityBasis<T>) -> Result<Self> {
        if phi.n() != psi.n() {
            return Err(Error::Dimension(format!(
                "sensing width {} does not match basis size {}",
                phi.n(),
                psi.n()
            )));
        }
        Ok(Self::from_theta(phi.matrix().matmul(psi.matrix())?))
    }

    pub fn from_theta(theta: DenseMatrix<T>) -> Self {
        let mut sq = vec![T::zero(); theta.cols()];
        for r in 0..theta.rows() {
            for (s, &v) in sq.iter_mut().zip(theta.row(r)) {
                *s = *s + v * v;
            }
        }
        Self { theta, column_norms: sq.into_iter().map(|s| s.sqrt()).collect() }
    }

    pub fn theta(&self) -> &DenseMatrix<T> {
        &self.theta
    }

    pub fn m(&self) -> usize {
        self.theta.rows()
    }

    pub fn n(&self) -> usize {
        self.theta.cols()
    }

    /// Dictionary for the leading `m` measurements (nested sensing matrices).
    pub fn truncate(&self, m: usize) -> Result<Self> {
        Ok(Self::from_theta(self.theta.top_rows(m)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpSolution<T> {
    /// Full-length coefficient vector `b̂`.
    pub coefficients: Vec<T>,
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    /// Residual norm before the first selection and after every step.
    pub residual_norms: Vec<T>,
}

impl<T: Scalar> OmpSolution<T> {
    pub fn final_residual(&self) -> T {
        *self.residual_norms.last().expect("at least the initial residual")
    }
}

/// Greedy sparse solve of `y = Θb`.
pub fn omp_solve<T: Scalar>(
    y: &[T],
    dict: &Dictionary<T>,
    params: &RecoveryParams<T>,
) -> Result<OmpSolution<T>> {
    let (m, n) = (dict.m(), dict.n());
    if y.len() != m {
        return Err(Error::LengthMismatch { expected: m, actual: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) || dict.theta.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    params.validate(m)?;

    let mut residual = y.to_vec();
    let mut rnorm = norm2(&residual);
    let mut solution = OmpSolution {
        coefficients: vec![T::zero(); n],
        support: Vec::new(),
        residual_norms: vec![rnorm],
    };
    if rnorm == T::zero() {
        return Ok(solution);
    }

    let mut q: Vec<Vec<T>> = Vec::new();
    // upper-triangular R stored by column
    let mut r_cols: Vec<Vec<T>> = Vec::new();
    let mut qty: Vec<T> = Vec::new();
    let mut active = vec![false; n];
    let breakdown = T::EPS.sqrt();

    while solution.support.len() < params.max_atoms && rnorm > params.residual_tol {
        let corr = dict.theta.tr_mul_vec(&residual)?;
        let mut best: Option<(usize, T)> = None;
        for (j, (&c, &norm)) in corr.iter().zip(&dict.column_norms).enumerate() {
            if active[j] || norm == T::zero() {
                continue;
            }
            let score = c.abs() / norm;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else { break };
        // residual already orthogonal to every remaining atom
        if score <= T::EPS * rnorm {
            break;
        }

        let mut v = dict.theta.column(j);
        let mut coeffs = vec![T::zero(); q.len()];
        for _ in 0..2 {
            for (qi, ci) in q.iter().zip(coeffs.iter_mut()) {
                let p = dot(qi, &v);
                *ci = *ci + p;
                for (vk, &qk) in v.iter_mut().zip(qi) {
                    *vk = *vk - p * qk;
                }
            }
        }
        let diag = norm2(&v);
        if diag <= breakdown * dict.column_norms[j] {
            return Err(Error::Singular { atom: j });
        }
        for vk in v.iter_mut() {
            *vk = *vk / diag;
        }
        coeffs.push(diag);

        let proj = dot(&v, &residual);
        for (rk, &qk) in residual.iter_mut().zip(&v) {
            *rk = *rk - proj * qk;
        }
        qty.push(dot(&v, y));
        q.push(v);
        r_cols.push(coeffs);
        active[j] = true;
        solution.support.push(j);
        rnorm = norm2(&residual);
        solution.residual_norms.push(rnorm);
    }

    // back-substitution R·b = Qᵀy
    let k = solution.support.len();
    let mut b = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut acc = qty[i];
        for (jj, bj) in b.iter().enumerate().skip(i + 1) {
            acc = acc - r_cols[jj][i] * *bj;
        }
        b[i] = acc / r_cols[i][i];
    }
    for (&atom, coef) in solution.support.iter().zip(b) {
        solution.coefficients[atom] = coef;
    }
    Ok(solution)
}

/// Recovers `(b̂, x̂ = Ψb̂)` from measurements `y = ΦΨb`.
pub fn omp_reconstruct<T: Scalar>(
    y: &[T],
    phi: &SensingMatrix<T>,
    psi: &SparsityBasis<T>,
    params: &RecoveryParams<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let dict = Dictionary::new(phi, psi)?;
    let sol = omp_solve(y, &dict, params)?;
    let x = psi.synthesize(&sol.coefficients)?;
    Ok((sol.coefficients, x))
}
