use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::IncidenceMatrix;
use crate::error::{GplsiError, Result};

/// Largest graph for which the dense pseudoinverse diagnostic is computed.
pub const PSEUDOINVERSE_NODE_LIMIT: usize = 2000;

/// Eigendecomposition `L = Q diag(σ) Qᵀ` of a graph Laplacian.
///
/// Factoring once lets every shifted system `(I + cL)x = r` be solved for
/// any `c ≥ 0` without refactoring.
#[derive(Debug, Clone)]
pub struct LaplacianEigen {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl LaplacianEigen {
    pub fn new(gamma: &IncidenceMatrix) -> Self {
        let eig = gamma.laplacian().symmetric_eigen();
        // Laplacians are PSD; clamp rounding noise.
        let values = eig.eigenvalues.map(|v| v.max(0.0));
        LaplacianEigen {
            values,
            vectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Solves `(I + cL)x = rhs` column-wise.
    pub fn solve_shifted(&self, c: f64, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coef = self.vectors.tr_mul(rhs);
        for (r, &s) in self.values.iter().enumerate() {
            let scale = 1.0 / (1.0 + c * s);
            coef.row_mut(r).scale_mut(scale);
        }
        &self.vectors * coef
    }

    /// `L†x`, treating eigenvalues below `1e-9·σ_max` as zero.
    pub fn pseudo_inverse_apply(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let cutoff = 1e-9 * self.max_eigenvalue().max(1.0);
        let mut coef = self.vectors.tr_mul(rhs);
        for (r, &s) in self.values.iter().enumerate() {
            let scale = if s > cutoff { 1.0 / s } else { 0.0 };
            coef.row_mut(r).scale_mut(scale);
        }
        &self.vectors * coef
    }
}

/// Inverse scaling factor: the largest column 2-norm of `Γ†`.
///
/// Uses `Γ† = L†Γᵀ` with a dense eigendecomposition, so it is only offered for
/// graphs up to [`PSEUDOINVERSE_NODE_LIMIT`] nodes.
pub fn inverse_scaling_factor(gamma: &IncidenceMatrix) -> Result<f64> {
    let n = gamma.n_cols();
    if n > PSEUDOINVERSE_NODE_LIMIT {
        return Err(GplsiError::TooLarge {
            n,
            limit: PSEUDOINVERSE_NODE_LIMIT,
        });
    }
    if gamma.n_rows() == 0 {
        return Err(GplsiError::InvalidParameter("graph has no edges".into()));
    }
    let eig = LaplacianEigen::new(gamma);
    let gt = gamma.to_dense().transpose();
    let pinv = eig.pseudo_inverse_apply(&gt);
    Ok(pinv
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max))
}

/// Penalty scale from the error bound, `4ρ(Γ)√(Kp/N)(1 + L)`, with the bound's
/// unknown constant set to 1. `l_prev` is the previous round's error term.
/// Diagnostic only: fitting selects ρ by cross-validation.
pub fn theoretical_rho(gamma: &IncidenceMatrix, k: usize, p: usize, doc_length: f64, l_prev: f64) -> Result<f64> {
    if !(doc_length > 0.0) || !(l_prev >= 0.0) {
        return Err(GplsiError::InvalidParameter(format!(
            "need N > 0 and L >= 0, got N={doc_length}, L={l_prev}"
        )));
    }
    let scale = inverse_scaling_factor(gamma)?;
    Ok(4.0 * scale * (k as f64 * p as f64 / doc_length).sqrt() * (1.0 + l_prev))
}

/// Largest singular value of `Γ`, i.e. `√λ_max(ΓᵀΓ)`, by power iteration.
pub fn lambda_max_gamma(gamma: &IncidenceMatrix) -> f64 {
    const REL_TOL: f64 = 1e-8;
    const MAX_ITER: usize = 100_000;
    let n = gamma.n_cols();
    if gamma.n_rows() == 0 || n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(&mut rng));
    x /= x.norm();
    let mut theta = 0.0;
    for _ in 0..MAX_ITER {
        let y = gamma.laplacian_apply(&x);
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let residual = (&y - &x * next).norm();
        x = y / norm;
        theta = next;
        if residual <= REL_TOL * next.abs() {
            break;
        }
    }
    theta.max(0.0).sqrt()
}
