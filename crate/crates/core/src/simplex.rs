//! Topic recovery from an estimated left singular subspace.
//!
//! Vertex hunting by the successive projection algorithm picks `K` anchor
//! documents, mixtures follow from `Ŵ = ÛĤ⁻¹`, and topics from
//! simplex-constrained least squares of `X` on `Ŵ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GplsiError, Result};

/// Norms within this distance of the running maximum count as ties.
const SPA_TIE: f64 = 1e-12;
const SPA_MIN_NORM: f64 = 1e-12;
const MIN_SINGULAR_VALUE: f64 = 1e-10;
const EMPTY_ROW: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSet {
    /// Anchor document indices in selection order.
    pub indices: Vec<usize>,
    /// Rows of `Û` at the anchors, `K × K`.
    #[serde(skip)]
    pub h_hat: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEstimate {
    pub w: DMatrix<f64>,
    pub raw_w: DMatrix<f64>,
    /// Total negative mass removed by clipping.
    pub repair_mass: f64,
    /// Rows that had no positive mass left and were set to uniform.
    pub uniform_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicEstimate {
    pub a: DMatrix<f64>,
    /// `‖X − ŴÂ‖_F`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Successive projection algorithm on the rows of `u`.
pub fn spa(u: &DMatrix<f64>, k: usize) -> Result<VertexSet> {
    let (n, d) = u.shape();
    if k == 0 || k > n {
        return Err(GplsiError::InvalidParameter(format!("cannot pick {k} vertices from {n} rows")));
    }
    let mut residual = u.clone();
    let mut indices = Vec::with_capacity(k);
    for picked in 0..k {
        let norms: Vec<f64> = residual.row_iter().map(|r| r.norm()).collect();
        let mut best = 0;
        for (i, &v) in norms.iter().enumerate() {
            if v > norms[best] + SPA_TIE {
                best = i;
            }
        }
        if norms[best] < SPA_MIN_NORM {
            return Err(GplsiError::DegenerateGeometry { picked, wanted: k });
        }
        indices.push(best);
        let dir = residual.row(best).transpose() / norms[best];
        // project every row onto the orthogonal complement of `dir`
        let coef = &residual * &dir;
        residual -= coef * dir.transpose();
        if d == 0 {
            break;
        }
    }
    let mut h_hat = DMatrix::zeros(k, d);
    for (r, &i) in indices.iter().enumerate() {
        h_hat.set_row(r, &u.row(i));
    }
    Ok(VertexSet { indices, h_hat })
}

/// `Ŵ = ÛĤ⁻¹`, then negatives clipped and rows renormalized.
pub fn recover_w(u: &DMatrix<f64>, vertices: &VertexSet) -> Result<MixtureEstimate> {
    let h = &vertices.h_hat;
    if !h.is_square() || h.nrows() != u.ncols() {
        return Err(GplsiError::DimensionMismatch(format!(
            "vertex matrix is {}x{} but U has {} columns",
            h.nrows(),
            h.ncols(),
            u.ncols()
        )));
    }
    let sv = h.clone().singular_values();
    let min_sv = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_sv > MIN_SINGULAR_VALUE) {
        return Err(GplsiError::SingularH { min_sv });
    }
    let h_inv = h
        .clone()
        .try_inverse()
        .ok_or(GplsiError::SingularH { min_sv })?;
    let raw_w = u * h_inv;
    let k = raw_w.ncols();
    let mut w = raw_w.clone();
    let mut repair_mass = 0.0;
    let mut uniform_rows = Vec::new();
    for (i, mut row) in w.row_iter_mut().enumerate() {
        for v in row.iter_mut() {
            if *v < 0.0 {
                repair_mass -= *v;
                *v = 0.0;
            }
        }
        let s = row.sum();
        if s <= EMPTY_ROW {
            log::warn!("mixture row {i} has no positive mass; using the uniform mixture");
            uniform_rows.push(i);
            row.fill(1.0 / k as f64);
        } else {
            row /= s;
        }
    }
    // anchors are exact unit vectors before repair; keep them bit-exact
    for (r, &i) in vertices.indices.iter().enumerate() {
        for c in 0..k {
            w[(i, c)] = if c == r { 1.0 } else { 0.0 };
        }
    }
    Ok(MixtureEstimate {
        w,
        raw_w,
        repair_mass,
        uniform_rows,
    })
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn project_rows(a: &mut DMatrix<f64>) {
    for r in 0..a.nrows() {
        let row: Vec<f64> = a.row(r).iter().copied().collect();
        for (c, v) in project_to_simplex(&row).into_iter().enumerate() {
            a[(r, c)] = v;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TopicSolverSettings {
    /// Stop when the relative objective change falls below this.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for TopicSolverSettings {
    fn default() -> Self {
        TopicSolverSettings {
            rel_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// `min_A ‖X − ŴA‖_F²` with every row of `A` on the simplex.
///
/// Accelerated projected gradient with step `1/(2λ_max(ŴᵀŴ))`, restarted
/// whenever the objective increases, from the projected least-squares point.
pub fn recover_a(x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<TopicEstimate> {
    recover_a_with(x, w, &TopicSolverSettings::default())
}

pub fn recover_a_with(x: &DMatrix<f64>, w: &DMatrix<f64>, settings: &TopicSolverSettings) -> Result<TopicEstimate> {
    if x.nrows() != w.nrows() {
        return Err(GplsiError::DimensionMismatch(format!(
            "X has {} rows but W has {}",
            x.nrows(),
            w.nrows()
        )));
    }
    let gram = w.tr_mul(w);
    let wx = w.tr_mul(x);
    let lmax = gram.clone().symmetric_eigen().eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(GplsiError::InvalidParameter("mixture matrix is zero".into()));
    }
    let step = 1.0 / (2.0 * lmax);
    let objective = |a: &DMatrix<f64>| (x - w * a).norm_squared();
    // residuals below this are round-off; relative changes there are noise
    let floor = (1e-12 * x.norm()).powi(2).max(f64::MIN_POSITIVE);

    let mut a = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&wx),
        None => DMatrix::from_element(w.ncols(), x.ncols(), 1.0 / x.ncols() as f64),
    };
    project_rows(&mut a);
    let mut obj = objective(&a);
    let mut y = a.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=settings.max_iter {
        iterations = it;
        let grad = (&gram * &y - &wx) * 2.0;
        let mut next = &y - grad * step;
        project_rows(&mut next);
        let next_obj = objective(&next);
        if next_obj > obj {
            // restart momentum from the last accepted point
            y.copy_from(&a);
            t = 1.0;
            if (next_obj - obj) <= settings.rel_tol * obj.max(floor) {
                converged = true;
                break;
            }
            continue;
        }
        let change = (obj - next_obj) / obj.max(floor);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &a) * ((t - 1.0) / t_next);
        t = t_next;
        a = next;
        obj = next_obj;
        if change < settings.rel_tol || obj == 0.0 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("topic regression stopped after {iterations} iterations");
    }
    Ok(TopicEstimate {
        residual: obj.sqrt(),
        a,
        iterations,
        converged,
    })
}

/// Alternative topic estimate `ĤΛV̂ᵀ` with rows projected onto the simplex.
pub fn klopp_topics(h_hat: &DMatrix<f64>, lambda: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = h_hat * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambda)) * v.transpose();
    project_rows(&mut a);
    a
}
