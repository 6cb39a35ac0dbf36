use nalgebra::DMatrix;

use super::{DistanceMatrix, GramMatrix, ReducedGram};
use crate::error::{EdmError, Result};

/// Choice of the vector `s` in `-1/2 (I - 1 s^T) D (I - s 1^T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramCentering {
    /// `s = e_1`: the first point is placed at the origin.
    FirstPoint,
    /// `s = 1/n`: the centroid is placed at the origin, `G = -1/2 J D J`.
    Centroid,
}

/// `J = I - (1/n) 1 1^T`.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    let inv = 1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

fn basis_params(n: usize) -> (f64, f64) {
    let sn = (n as f64).sqrt();
    let p = -1.0 / (n as f64 + sn);
    let q = -1.0 / sn;
    (p, q)
}

/// Orthonormal basis of the complement of `1`, arranged as the `n x (n-1)`
/// matrix with first row `q = -1/sqrt(n)` and body `I + p 1 1^T`,
/// `p = -1/(n + sqrt(n))`. Satisfies `V^T 1 = 0`, `V^T V = I`, `V V^T = J`.
pub fn v_basis(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(EdmError::TooSmall {
            what: "matrix size n",
            min: 2,
            value: n,
        });
    }
    let (p, q) = basis_params(n);
    Ok(DMatrix::from_fn(n, n - 1, |i, j| {
        if i == 0 {
            q
        } else if i - 1 == j {
            1.0 + p
        } else {
            p
        }
    }))
}

/// `V M` for an `(n-1) x k` matrix, in `O(nk)` using the structure of `V`.
fn v_left(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() + 1;
    let (p, q) = basis_params(n);
    let sums = m.row_sum();
    let mut out = DMatrix::zeros(n, m.ncols());
    for c in 0..m.ncols() {
        out[(0, c)] = q * sums[c];
        for r in 1..n {
            out[(r, c)] = m[(r - 1, c)] + p * sums[c];
        }
    }
    out
}

/// `V^T M` for an `n x k` matrix.
fn vt_left(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let (p, q) = basis_params(n);
    let mut out = DMatrix::zeros(n - 1, m.ncols());
    for c in 0..m.ncols() {
        let tail: f64 = (1..n).map(|r| m[(r, c)]).sum();
        let shift = q * m[(0, c)] + p * tail;
        for a in 0..n - 1 {
            out[(a, c)] = m[(a + 1, c)] + shift;
        }
    }
    out
}

/// `V H V^T` for symmetric `H`.
pub(crate) fn expand_reduced(h: &DMatrix<f64>) -> DMatrix<f64> {
    let vh = v_left(h);
    v_left(&vh.transpose()).transpose()
}

/// `V^T M V` for symmetric `M`.
pub(crate) fn compress_to_reduced(m: &DMatrix<f64>) -> DMatrix<f64> {
    let vtm = vt_left(m);
    vt_left(&vtm.transpose()).transpose()
}

/// Gram matrix from an EDM. With [`GramCentering::Centroid`] this is
/// `-1/2 J D J`; with [`GramCentering::FirstPoint`] it is
/// `-1/2 (D - 1 d_1^T - d_1 1^T)` where `d_1` is the first column of `D`.
pub fn gram_from_edm(d: &DistanceMatrix, centering: GramCentering) -> GramMatrix {
    let m = d.as_matrix();
    let n = d.size();
    let entries = match centering {
        GramCentering::FirstPoint => {
            DMatrix::from_fn(n, n, |i, j| -0.5 * (m[(i, j)] - m[(i, 0)] - m[(0, j)]))
        }
        GramCentering::Centroid => {
            let row_mean: Vec<f64> = (0..n).map(|i| m.row(i).mean()).collect();
            let col_mean: Vec<f64> = (0..n).map(|j| m.column(j).mean()).collect();
            let all = m.mean();
            DMatrix::from_fn(n, n, |i, j| {
                -0.5 * (m[(i, j)] - row_mean[i] - col_mean[j] + all)
            })
        }
    };
    GramMatrix {
        entries: super::symmetrize(&entries),
    }
}

/// `K(G) = diag(G) 1^T - 2G + 1 diag(G)^T`.
///
/// Entries that come out negative (only possible when `G` is not PSD, or from
/// rounding) are clamped to zero.
pub fn edm_from_gram(g: &GramMatrix) -> DistanceMatrix {
    kappa(g.as_matrix())
}

pub(crate) fn kappa(g: &DMatrix<f64>) -> DistanceMatrix {
    let n = g.nrows();
    let mut entries = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0);
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    DistanceMatrix { entries }
}

/// `H = -1/2 V^T D V`.
pub fn reduced_gram(d: &DistanceMatrix) -> Result<ReducedGram> {
    if d.size() < 2 {
        return Err(EdmError::TooSmall {
            what: "matrix size n",
            min: 2,
            value: d.size(),
        });
    }
    let h = compress_to_reduced(d.as_matrix()) * -0.5;
    ReducedGram::new(h)
}

/// `K(V H V^T)`, the inverse of [`reduced_gram`].
pub fn edm_from_reduced(h: &ReducedGram) -> DistanceMatrix {
    if h.as_matrix().nrows() == 0 {
        return DistanceMatrix::zeros(1);
    }
    kappa(&expand_reduced(h.as_matrix()))
}
