//! Low-rank fitting engines.
//!
//! * [`fit_plsi`]: plain rank-`K` SVD of the frequency matrix.
//! * [`fit_onestep`]: a single graph-denoising pass over the full frequency
//!   matrix followed by a rank-`K` SVD.
//! * [`fit_gplsi`]: the two-way iterative graph-aligned SVD. Each round
//!   denoises `XV̂` along the graph, re-extracts `Û` and then `V̂ = U_K(XᵀÛ)`,
//!   picking the penalty by spanning-tree cross-validation.

mod cv;
mod gplsi;
mod onestep;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::FrequencyMatrix;
use crate::error::{GplsiError, Result};
use crate::tv::TvSettings;

pub use cv::{cross_validate_rho, CvContext, CvOutcome};
pub use gplsi::{fit_gplsi, FitTrace, IterationRecord};
pub use onestep::{fit_onestep, fit_onestep_with_rho, OneStepReport};

/// Rank-`K` factors `U diag(λ) Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `n × K`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// `p × K`, orthonormal columns.
    pub v: DMatrix<f64>,
    /// Nonincreasing, nonnegative.
    pub lambda: Vec<f64>,
}

impl SvdFactors {
    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    /// `max(‖UᵀU − I‖_max, ‖VᵀV − I‖_max)`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.u).max(orthonormality_error(&self.v))
    }
}

pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.tr_mul(q);
    let k = g.nrows();
    (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    /// Candidate penalties, ascending. `None` uses [`default_rho_grid`].
    pub rho_grid: Option<Vec<f64>>,
    /// Cross-validation fold count `b`.
    pub folds: usize,
    /// Stopping tolerance on the projection score; `None` means `1e-6·‖X‖_F`.
    pub eps: Option<f64>,
    /// Iteration cap; `None` means [`default_t_max`].
    pub t_max: Option<usize>,
    pub cv_seed: u64,
    /// Re-run cross-validation every round instead of only the first.
    pub cv_every_iteration: bool,
    /// Scale incidence rows by edge weights.
    pub weighted: bool,
    /// Solver settings for the denoising step that feeds the estimate.
    pub tv: TvSettingsConfig,
    /// Solver settings for the cross-validation solves.
    pub cv_tv: TvSettingsConfig,
}

/// Serializable mirror of [`TvSettings`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TvSettingsConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl From<TvSettingsConfig> for TvSettings {
    fn from(c: TvSettingsConfig) -> Self {
        TvSettings {
            tol: c.tol,
            max_iter: c.max_iter,
            compute_kkt: false,
            record_trace: false,
        }
    }
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        FitConfig {
            k,
            rho_grid: None,
            folds: 5,
            eps: None,
            t_max: None,
            cv_seed: 0,
            cv_every_iteration: true,
            weighted: false,
            tv: TvSettingsConfig {
                tol: 1e-6,
                max_iter: 5000,
            },
            cv_tv: TvSettingsConfig {
                tol: 1e-4,
                max_iter: 2000,
            },
        }
    }

    pub(crate) fn validate(&self, x: &FrequencyMatrix) -> Result<()> {
        let (n, p) = (x.n_docs(), x.n_words());
        if self.k == 0 || self.k > n.min(p) {
            return Err(GplsiError::InvalidParameter(format!(
                "K = {} must lie in 1..={}",
                self.k,
                n.min(p)
            )));
        }
        if self.folds < 2 {
            return Err(GplsiError::InvalidParameter(format!("need at least 2 folds, got {}", self.folds)));
        }
        if let Some(grid) = &self.rho_grid {
            if grid.is_empty() {
                return Err(GplsiError::InvalidParameter("rho grid is empty".into()));
            }
            if grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(GplsiError::InvalidParameter("rho grid values must be finite and >= 0".into()));
            }
            if grid.windows(2).any(|w| w[1] < w[0]) {
                return Err(GplsiError::InvalidParameter("rho grid must be sorted ascending".into()));
            }
        }
        if matches!(self.t_max, Some(0)) {
            return Err(GplsiError::InvalidParameter("t_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_rho_grid(&self, x: &FrequencyMatrix) -> Vec<f64> {
        self.rho_grid
            .clone()
            .unwrap_or_else(|| default_rho_grid(x.n_docs(), x.mean_doc_length(), self.k))
    }

    pub fn resolved_t_max(&self, x: &FrequencyMatrix) -> usize {
        self.t_max
            .unwrap_or_else(|| default_t_max(x.n_docs(), x.mean_doc_length(), self.k))
    }

    pub fn resolved_eps(&self, x: &FrequencyMatrix) -> f64 {
        self.eps.unwrap_or_else(|| 1e-6 * x.freqs().norm())
    }
}

/// `max(1, ⌈2 ln(nN/K²)⌉)`.
pub fn default_t_max(n: usize, doc_length: f64, k: usize) -> usize {
    let v = 2.0 * (n as f64 * doc_length / (k * k) as f64).ln();
    if v.is_finite() && v > 1.0 {
        v.ceil() as usize
    } else {
        1
    }
}

/// Twelve log-spaced penalties spanning `[1e-4, 10]·√(K ln n / N)`.
pub fn default_rho_grid(n: usize, doc_length: f64, k: usize) -> Vec<f64> {
    let scale = (k as f64 * (n.max(2) as f64).ln() / doc_length.max(1.0)).sqrt();
    let (lo, hi) = (1e-4f64.ln(), 10f64.ln());
    (0..12)
        .map(|i| scale * (lo + (hi - lo) * i as f64 / 11.0).exp())
        .collect()
}

/// Flips column signs so each column of `u` has a positive largest-magnitude entry.
///
/// The matching columns of `v` are flipped too, keeping `U diag(λ) Vᵀ` intact.
pub(crate) fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for c in 0..u.ncols() {
        let mut best = 0;
        for i in 0..u.nrows() {
            if u[(i, c)].abs() > u[(best, c)].abs() {
                best = i;
            }
        }
        if u[(best, c)] < 0.0 {
            u.column_mut(c).neg_mut();
            v.column_mut(c).neg_mut();
        }
    }
}

/// Leading `k` singular triplets of `m`, singular values descending.
pub(crate) fn truncated_svd(m: &DMatrix<f64>, k: usize) -> Result<SvdFactors> {
    let r = m.nrows().min(m.ncols());
    if k > r {
        return Err(GplsiError::InvalidParameter(format!(
            "rank {k} requested from a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = m.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(GplsiError::NumericalFailure("SVD did not return vectors".into())),
    };
    let s = svd.singular_values;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(GplsiError::NumericalFailure("SVD produced non-finite singular values".into()));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let order = &order[..k];
    let mut uk = DMatrix::zeros(m.nrows(), k);
    let mut vk = DMatrix::zeros(m.ncols(), k);
    for (c, &idx) in order.iter().enumerate() {
        uk.set_column(c, &u.column(idx));
        vk.set_column(c, &vt.row(idx).transpose());
    }
    let lambda = order.iter().map(|&i| s[i]).collect();
    fix_signs(&mut uk, &mut vk);
    Ok(SvdFactors { u: uk, v: vk, lambda })
}

/// Orthonormal basis for the leading left singular subspace of `m`.
pub(crate) fn left_singular_vectors(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    Ok(truncated_svd(m, k)?.u)
}

/// Plain rank-`K` SVD of the observed frequencies.
pub fn fit_plsi(x: &FrequencyMatrix, k: usize) -> Result<SvdFactors> {
    let f = truncated_svd(x.freqs(), k)?;
    if f.lambda.last().is_some_and(|&s| s < 1e-12) {
        log::warn!("frequency matrix is numerically rank deficient at K = {k}");
    }
    Ok(f)
}

/// Initial right subspace `U_K(XᵀX − (n/N) D̂₀)`.
///
/// `D̂₀` is the diagonal of column means of `X`; subtracting `(n/N) D̂₀`
/// removes the multinomial noise bias from the diagonal of `XᵀX`. Unequal
/// document lengths fall back to the mean length.
pub fn initialize_v(x: &FrequencyMatrix, k: usize) -> Result<DMatrix<f64>> {
    let (n, p) = (x.n_docs(), x.n_words());
    if k == 0 || k > n.min(p) {
        return Err(GplsiError::InvalidParameter(format!("K = {k} must lie in 1..={}", n.min(p))));
    }
    let xf = x.freqs();
    let mut gram = xf.tr_mul(xf);
    let shift = n as f64 / x.mean_doc_length();
    for j in 0..p {
        gram[(j, j)] -= shift * xf.column(j).mean();
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let found = order[..k].iter().filter(|&&i| eig.eigenvalues[i] > 1e-12).count();
    if found < k {
        log::warn!("{}", GplsiError::RankDeficient { found, wanted: k });
    }
    let mut v = DMatrix::zeros(p, k);
    for (c, &idx) in order[..k].iter().enumerate() {
        v.set_column(c, &eig.eigenvectors.column(idx));
    }
    let mut dummy = DMatrix::zeros(0, k);
    fix_signs(&mut v, &mut dummy);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freq(m: DMatrix<f64>, len: u64) -> FrequencyMatrix {
        let n = m.nrows();
        FrequencyMatrix::from_probabilities(m, vec![len; n]).unwrap()
    }

    #[test]
    fn t_max_formula() {
        // 2 ln(500·30/9) = 14.83…
        assert_eq!(default_t_max(500, 30.0, 3), 15);
        assert_eq!(default_t_max(2, 1.0, 2), 1);
    }

    #[test]
    fn rho_grid_brackets_scale() {
        let g = default_rho_grid(500, 30.0, 3);
        let scale = (3.0 * 500f64.ln() / 30.0).sqrt();
        assert_eq!(g.len(), 12);
        assert!((g[0] / scale - 1e-4).abs() < 1e-15);
        assert!((g[11] / scale - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn plsi_identity_gives_canonical_basis() {
        let x = freq(DMatrix::identity(3, 3), 10);
        let f = fit_plsi(&x, 3).unwrap();
        for c in 0..3 {
            let col = f.u.column(c);
            assert!((col.amax() - 1.0).abs() < 1e-12);
            assert!((col.sum() - 1.0).abs() < 1e-12);
        }
        assert!(f.orthonormality_error() < 1e-12);
    }

    #[test]
    fn svd_rank_one_recovers_factors() {
        let u = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let v = DMatrix::from_column_slice(1, 3, &[0.2, 0.3, 0.5]);
        let f = truncated_svd(&(&u * &v), 1).unwrap();
        let un = &u / u.norm();
        let vn = v.transpose() / v.norm();
        assert!((f.u.column(0) - un.column(0)).norm() < 1e-12);
        assert!((f.v.column(0) - vn.column(0)).norm() < 1e-12);
        assert!((f.lambda[0] - u.norm() * v.norm()).abs() < 1e-12);
    }

    #[test]
    fn initialize_identical_rows() {
        let row = [0.2, 0.3, 0.5];
        let m = DMatrix::from_fn(5, 3, |_, j| row[j]);
        let v = initialize_v(&freq(m, 100), 1).unwrap();
        assert!((v.column(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initialize_is_row_permutation_invariant() {
        let m = DMatrix::from_row_slice(
            4,
            3,
            &[0.5, 0.25, 0.25, 0.1, 0.6, 0.3, 0.3, 0.3, 0.4, 0.7, 0.1, 0.2],
        );
        let mut perm = m.clone();
        perm.swap_rows(0, 3);
        perm.swap_rows(1, 2);
        let a = initialize_v(&freq(m, 50), 2).unwrap();
        let b = initialize_v(&freq(perm, 50), 2).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn config_validation() {
        let x = freq(DMatrix::identity(3, 3), 10);
        assert!(FitConfig::new(4).validate(&x).is_err());
        let mut c = FitConfig::new(2);
        c.rho_grid = Some(vec![1.0, 0.5]);
        assert!(c.validate(&x).is_err());
        c.rho_grid = Some(vec![]);
        assert!(c.validate(&x).is_err());
        c.rho_grid = Some(vec![0.0, 1.0]);
        assert!(c.validate(&x).is_ok());
        c.folds = 1;
        assert!(c.validate(&x).is_err());
    }
}
