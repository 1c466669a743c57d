//! Accuracy and smoothness metrics for fitted models.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GplsiError, Result};
use crate::graph::DocumentGraph;

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Optimal assignment for a square cost matrix (Hungarian algorithm,
/// shortest augmenting paths with potentials). Returns `perm` with row `r`
/// assigned to column `perm[r]`, and the total cost.
pub fn hungarian(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based arrays; column 0 is a virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut match_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        match_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[match_col[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum();
    (perm, total)
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GplsiError::DimensionMismatch(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn column_cost(a: &DMatrix<f64>, b: &DMatrix<f64>, metric: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let k = a.ncols();
    DMatrix::from_fn(k, k, |r, c| {
        a.column(r)
            .iter()
            .zip(b.column(c).iter())
            .map(|(x, y)| metric(x - y))
            .sum()
    })
}

/// Permutation matching each column `k` of `w_hat` to column `perm[k]` of
/// `w_true`, minimizing the summed column ℓ₁ distance.
pub fn align_columns(w_hat: &DMatrix<f64>, w_true: &DMatrix<f64>) -> Result<(Vec<usize>, f64)> {
    check_same_shape(w_hat, w_true)?;
    Ok(hungarian(&column_cost(w_hat, w_true, f64::abs)))
}

/// `(min_P ‖Ŵ − WP‖_F / n, min_P ‖Ŵ − WP‖₁₁ / n)`, each minimized separately.
pub fn mixture_errors(w_hat: &DMatrix<f64>, w_true: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_same_shape(w_hat, w_true)?;
    let n = w_hat.nrows().max(1) as f64;
    let (_, sq) = hungarian(&column_cost(w_hat, w_true, |d| d * d));
    let (_, l1) = hungarian(&column_cost(w_hat, w_true, f64::abs));
    Ok((sq.max(0.0).sqrt() / n, l1 / n))
}

/// `(min_P ‖Â − PA‖_F / p, min_P ‖Â − PA‖₁₁ / p)`.
pub fn topic_errors(a_hat: &DMatrix<f64>, a_true: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_same_shape(a_hat, a_true)?;
    let p = a_hat.ncols().max(1) as f64;
    let (at, tt) = (a_hat.transpose(), a_true.transpose());
    let (_, sq) = hungarian(&column_cost(&at, &tt, |d| d * d));
    let (_, l1) = hungarian(&column_cost(&at, &tt, f64::abs));
    Ok((sq.max(0.0).sqrt() / p, l1 / p))
}

/// `‖sin Θ(Û, U)‖_F = √(K − ‖ÛᵀU‖_F²)`, computed as `‖Û − U(UᵀÛ)‖_F`,
/// which keeps full precision for nearly equal subspaces.
pub fn sin_theta(u_hat: &DMatrix<f64>, u_true: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(u_hat, u_true)?;
    for q in [u_hat, u_true] {
        let deviation = crate::decomposition::orthonormality_error(q);
        if deviation > ORTHONORMAL_TOL {
            return Err(GplsiError::NotOrthonormal { deviation });
        }
    }
    Ok((u_hat - u_true * u_true.tr_mul(u_hat)).norm())
}

/// Orthonormal basis of the leading `k`-dimensional column space of `m`.
pub fn column_space(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| GplsiError::NumericalFailure("SVD did not return vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if k > order.len() {
        return Err(GplsiError::InvalidParameter(format!("rank {k} exceeds matrix rank bound")));
    }
    let mut out = DMatrix::zeros(m.nrows(), k);
    for (c, &i) in order[..k].iter().enumerate() {
        out.set_column(c, &u.column(i));
    }
    Ok(out)
}

/// Moran's I with raw edge weights, or row-standardized weights when asked.
pub fn morans_i(values: &[f64], g: &DocumentGraph, row_standardize: bool) -> Result<f64> {
    let n = g.n_nodes();
    if values.len() != n {
        return Err(GplsiError::DimensionMismatch(format!(
            "{} values for a graph on {n} nodes",
            values.len()
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if !(denom > 1e-300) {
        return Err(GplsiError::ZeroVariance);
    }
    let degree: Vec<f64> = {
        let mut d = vec![0.0; n];
        for e in g.edges() {
            d[e.i] += e.weight;
            d[e.j] += e.weight;
        }
        d
    };
    let (mut s0, mut cross) = (0.0, 0.0);
    for e in g.edges() {
        // each undirected edge contributes w_ij and w_ji
        let (wij, wji) = if row_standardize {
            (e.weight / degree[e.i], e.weight / degree[e.j])
        } else {
            (e.weight, e.weight)
        };
        s0 += wij + wji;
        cross += (wij + wji) * dev[e.i] * dev[e.j];
    }
    if s0 == 0.0 {
        return Err(GplsiError::InvalidParameter("graph has no edges".into()));
    }
    Ok(n as f64 / s0 * cross / denom)
}

/// Index of the largest entry in each row, ties to the lowest index.
pub fn argmax_rows(w: &DMatrix<f64>) -> Vec<usize> {
    w.row_iter()
        .map(|r| {
            let mut best = 0;
            for (c, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Share of non-isolated nodes whose fraction of disagreeing neighbors
/// exceeds `threshold`.
pub fn pas(topic_of: &[usize], g: &DocumentGraph, threshold: f64) -> Result<f64> {
    let n = g.n_nodes();
    if topic_of.len() != n {
        return Err(GplsiError::DimensionMismatch(format!(
            "{} labels for a graph on {n} nodes",
            topic_of.len()
        )));
    }
    let mut total = vec![0usize; n];
    let mut differ = vec![0usize; n];
    for e in g.edges() {
        total[e.i] += 1;
        total[e.j] += 1;
        if topic_of[e.i] != topic_of[e.j] {
            differ[e.i] += 1;
            differ[e.j] += 1;
        }
    }
    let counted: Vec<usize> = (0..n).filter(|&i| total[i] > 0).collect();
    if counted.is_empty() {
        return Ok(0.0);
    }
    let abnormal = counted
        .iter()
        .filter(|&&i| differ[i] as f64 / total[i] as f64 > threshold)
        .count();
    Ok(abnormal as f64 / counted.len() as f64)
}

pub const PAS_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Column `k` of the estimate matches column `perm[k]` of the truth.
    pub perm: Vec<usize>,
    pub w_l2: f64,
    pub w_l1: f64,
    pub a_l2: Option<f64>,
    pub a_l1: Option<f64>,
    #[serde(rename = "sintheta_U")]
    pub sintheta_u: Option<f64>,
    #[serde(rename = "sintheta_V")]
    pub sintheta_v: Option<f64>,
    /// Mean over topics of Moran's I of the estimated mixture columns;
    /// constant columns are skipped.
    #[serde(rename = "morans_I")]
    pub morans_i: Option<f64>,
    pub pas: Option<f64>,
    pub runtime_ms: Option<f64>,
}

/// Everything a report can be computed from.
#[derive(Debug, Clone, Copy)]
pub struct EvalInputs<'a> {
    pub w_hat: &'a DMatrix<f64>,
    pub w_true: &'a DMatrix<f64>,
    pub a_hat: Option<&'a DMatrix<f64>>,
    pub a_true: Option<&'a DMatrix<f64>>,
    /// Estimated left and right singular bases.
    pub u_hat: Option<&'a DMatrix<f64>>,
    pub v_hat: Option<&'a DMatrix<f64>>,
    pub graph: Option<&'a DocumentGraph>,
}

pub fn evaluate(inputs: EvalInputs<'_>) -> Result<EvalReport> {
    let (perm, _) = align_columns(inputs.w_hat, inputs.w_true)?;
    let (w_l2, w_l1) = mixture_errors(inputs.w_hat, inputs.w_true)?;
    let k = inputs.w_true.ncols();
    let (a_l2, a_l1) = match (inputs.a_hat, inputs.a_true) {
        (Some(ah), Some(at)) => {
            let (l2, l1) = topic_errors(ah, at)?;
            (Some(l2), Some(l1))
        }
        _ => (None, None),
    };
    let truth_m = inputs.a_true.map(|a| inputs.w_true * a);
    let sintheta_u = match (inputs.u_hat, &truth_m) {
        (Some(u), Some(m)) => Some(sin_theta(u, &column_space(m, k)?)?),
        _ => None,
    };
    let sintheta_v = match (inputs.v_hat, &truth_m) {
        (Some(v), Some(m)) => Some(sin_theta(v, &column_space(&m.transpose(), k)?)?),
        _ => None,
    };
    let (morans, pas_score) = match inputs.graph {
        Some(g) => {
            let values: Vec<f64> = (0..k)
                .filter_map(|c| {
                    let col: Vec<f64> = inputs.w_hat.column(c).iter().copied().collect();
                    morans_i(&col, g, false).ok()
                })
                .collect();
            let m = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
            (m, Some(pas(&argmax_rows(inputs.w_hat), g, PAS_THRESHOLD)?))
        }
        None => (None, None),
    };
    Ok(EvalReport {
        perm,
        w_l2,
        w_l1,
        a_l2,
        a_l1,
        sintheta_u,
        sintheta_v,
        morans_i: morans,
        pas: pas_score,
        runtime_ms: None,
    })
}
