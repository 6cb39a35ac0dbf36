//! Core Euclidean distance matrix types and the operators that move between
//! points, Gram matrices and distance matrices.
//!
//! Distance matrices always hold **squared** distances: `d_ij = |x_i - x_j|^2`.
//! Anything that wants plain distances has to take square roots at the boundary.

mod checks;
pub(crate) mod gram;

pub use checks::{is_edm, numerical_rank, sym_eigen_by_magnitude, EdmCheck, DEFAULT_PSD_TOL};
pub use gram::{
    centering_matrix, edm_from_gram, edm_from_reduced, gram_from_edm, reduced_gram, v_basis,
    GramCentering,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{EdmError, Result};

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(EdmError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(EdmError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// `(M + M^T) / 2`
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// A `d x n` configuration; column `i` is point `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: DMatrix<f64>,
}

impl PointSet {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() == 0 {
            return Err(EdmError::TooSmall {
                what: "dimension d",
                min: 1,
                value: 0,
            });
        }
        if coords.ncols() == 0 {
            return Err(EdmError::TooSmall {
                what: "point count n",
                min: 1,
                value: 0,
            });
        }
        check_finite(&coords)?;
        Ok(PointSet { coords })
    }

    /// Builds a point set from a list of points, each of length `d`.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let d = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(EdmError::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        Self::new(DMatrix::from_fn(d, n, |k, i| points[i][k]))
    }

    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    pub fn len(&self) -> usize {
        self.coords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DMatrix<f64> {
        self.coords
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.coords.column(i).into_owned()
    }

    /// Mean of the columns.
    pub fn centroid(&self) -> DVector<f64> {
        self.coords.column_mean()
    }

    /// Keeps the columns listed in `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PointSet> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(EdmError::OutOfRange {
                what: "point index",
                value: bad,
                lo: 0,
                hi: self.len() - 1,
            });
        }
        PointSet::new(self.coords.select_columns(indices.iter()))
    }

    /// Horizontal concatenation `[self other]`.
    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim() != other.dim() {
            return Err(EdmError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let (n, m) = (self.len(), other.len());
        let coords = DMatrix::from_fn(self.dim(), n + m, |k, i| {
            if i < n {
                self.coords[(k, i)]
            } else {
                other.coords[(k, i - n)]
            }
        });
        PointSet::new(coords)
    }
}

/// Symmetric, hollow, nonnegative matrix of squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entries: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Symmetrizes as `(M + M^T)/2`, zeroes the diagonal, then rejects
    /// negative entries.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m)?;
        let mut entries = symmetrize(&m);
        entries.fill_diagonal(0.0);
        for j in 0..entries.ncols() {
            for i in 0..j {
                let v = entries[(i, j)];
                if v < 0.0 {
                    return Err(EdmError::NegativeDistance {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(DistanceMatrix { entries })
    }

    /// Like [`DistanceMatrix::new`] but clamps negative entries to zero.
    /// Returns the matrix and the number of clamped unordered pairs.
    pub fn new_clamped(m: DMatrix<f64>) -> Result<(Self, usize)> {
        check_square(&m)?;
        check_finite(&m)?;
        let mut entries = symmetrize(&m);
        entries.fill_diagonal(0.0);
        let mut clamped = 0;
        let n = entries.nrows();
        for j in 0..n {
            for i in 0..j {
                if entries[(i, j)] < 0.0 {
                    entries[(i, j)] = 0.0;
                    entries[(j, i)] = 0.0;
                    clamped += 1;
                }
            }
        }
        Ok((DistanceMatrix { entries }, clamped))
    }

    /// Builds a distance matrix from plain (unsquared) distances.
    pub fn from_distances(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|v| v * v))
    }

    pub fn zeros(n: usize) -> Self {
        DistanceMatrix {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// `|self - truth|_F / |truth|_F`, the error measure used throughout the
    /// Monte Carlo comparisons. Returns the absolute error when `truth` is zero.
    pub fn relative_error(&self, truth: &DistanceMatrix) -> f64 {
        let diff = (&self.entries - &truth.entries).norm();
        let scale = truth.frobenius_norm();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// Element-wise square roots, i.e. plain distances.
    pub fn sqrt_entries(&self) -> DMatrix<f64> {
        self.entries.map(f64::sqrt)
    }
}

/// A symmetric Gram matrix `G = X^T X`. Positive semidefiniteness is checked
/// lazily via [`GramMatrix::min_eigenvalue`].
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m)?;
        Ok(GramMatrix {
            entries: symmetrize(&m),
        })
    }

    pub fn from_points(points: &PointSet) -> Self {
        let x = points.coords();
        GramMatrix {
            entries: x.transpose() * x,
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.size() == 0 {
            return 0.0;
        }
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// PSD up to `lambda_min >= -tol * max|lambda|`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let ev = self.entries.clone().symmetric_eigenvalues();
        let max_abs = ev.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        ev.is_empty() || min >= -tol * max_abs
    }
}

/// Binary symmetric mask of observed entries. The diagonal is known to be
/// zero and is never counted as an observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    n: usize,
    observed: Vec<bool>,
}

impl ObservationMask {
    /// Validates a 0/1 matrix. The diagonal is ignored and the result is
    /// symmetric: an entry is observed if either `(i, j)` or `(j, i)` is 1.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        let n = m.nrows();
        let mut mask = ObservationMask::empty(n);
        for j in 0..n {
            for i in 0..n {
                let v = m[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(EdmError::InvalidMask {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                if i != j && v == 1.0 {
                    mask.set(i, j, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn empty(n: usize) -> Self {
        ObservationMask {
            n,
            observed: vec![false; n * n],
        }
    }

    /// Every off-diagonal entry observed.
    pub fn full(n: usize) -> Self {
        let mut mask = Self::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    mask.observed[i * n + j] = true;
                }
            }
        }
        mask
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut mask = Self::empty(n);
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(EdmError::OutOfRange {
                    what: "mask index",
                    value: i.max(j),
                    lo: 0,
                    hi: n.saturating_sub(1),
                });
            }
            if i != j {
                mask.set(i, j, true);
            }
        }
        Ok(mask)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`; diagonal requests are ignored.
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        if i == j {
            return;
        }
        self.observed[i * self.n + j] = value;
        self.observed[j * self.n + i] = value;
    }

    /// Observed unordered pairs `(i, j)` with `i < j`, row-major order.
    pub fn observed_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.is_observed(i, j) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    pub fn observed_pair_count(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count() / 2
    }

    /// Unordered off-diagonal pairs that are not observed.
    pub fn missing_pair_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2 - self.observed_pair_count()
    }

    /// Number of observed neighbours of point `i`.
    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.is_observed(i, j)).count()
    }

    /// The mask as a 0/1 matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if self.is_observed(i, j) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// The `(n-1) x (n-1)` reduced Gram matrix `H = -1/2 V^T D V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGram {
    n: usize,
    entries: DMatrix<f64>,
}

impl ReducedGram {
    /// `entries` must be `(n-1) x (n-1)`; it is symmetrized.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_square(&entries)?;
        check_finite(&entries)?;
        Ok(ReducedGram {
            n: entries.nrows() + 1,
            entries: symmetrize(&entries),
        })
    }

    /// Size of the distance matrix this reduced Gram matrix encodes.
    pub fn edm_size(&self) -> usize {
        self.n
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

/// `edm(X)`: squared distances between the columns of `X`, each pair computed once.
pub fn assemble_edm(points: &PointSet) -> DistanceMatrix {
    let x = points.coords();
    let n = points.len();
    let mut entries = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let d = (x.column(i) - x.column(j)).norm_squared();
            entries[(i, j)] = d;
            entries[(j, i)] = d;
        }
    }
    DistanceMatrix { entries }
}

/// `edm(R, S)`: the `m x k` matrix of squared distances `|r_i - s_j|^2`.
pub fn cross_edm(points_a: &PointSet, points_b: &PointSet) -> Result<DMatrix<f64>> {
    if points_a.dim() != points_b.dim() {
        return Err(EdmError::DimensionMismatch {
            expected: points_a.dim(),
            found: points_b.dim(),
        });
    }
    let (r, s) = (points_a.coords(), points_b.coords());
    Ok(DMatrix::from_fn(points_a.len(), points_b.len(), |i, j| {
        (r.column(i) - s.column(j)).norm_squared()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_edm_is_zero() {
        let x = PointSet::new(DMatrix::from_element(1, 1, 0.0)).unwrap();
        assert_eq!(assemble_edm(&x).as_matrix(), &DMatrix::zeros(1, 1));
    }

    #[test]
    fn three_four_five() {
        let x = PointSet::new(DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 4.0])).unwrap();
        let d = assemble_edm(&x);
        assert_eq!(d.as_matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 25.0, 25.0, 0.0]));
    }

    #[test]
    fn cross_edm_basic() {
        let r = PointSet::new(DMatrix::from_element(1, 1, 0.0)).unwrap();
        let s = PointSet::new(DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(cross_edm(&r, &s).unwrap()[(0, 0)], 4.0);
    }

    #[test]
    fn cross_edm_self_matches_edm() {
        let r = PointSet::from_points(&[vec![0.1, 0.7], vec![1.3, -0.2], vec![0.5, 0.5]]).unwrap();
        assert_eq!(&cross_edm(&r, &r).unwrap(), assemble_edm(&r).as_matrix());
    }

    #[test]
    fn cross_edm_dimension_mismatch() {
        let r = PointSet::new(DMatrix::zeros(2, 3)).unwrap();
        let s = PointSet::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(
            cross_edm(&r, &s),
            Err(EdmError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cross_edm_is_off_diagonal_block() {
        let r = PointSet::from_points(&[vec![0.2, 0.9], vec![-1.0, 0.4], vec![0.3, 0.3]]).unwrap();
        let s = PointSet::from_points(&[
            vec![1.5, 0.1],
            vec![0.0, -0.7],
            vec![2.2, 2.0],
            vec![-0.4, 1.1],
        ])
        .unwrap();
        let full = assemble_edm(&r.concat(&s).unwrap());
        let block = full.as_matrix().view((0, 3), (3, 4)).into_owned();
        assert!((cross_edm(&r, &s).unwrap() - block).norm() < 1e-14);
    }

    #[test]
    fn distance_matrix_constructor_symmetrizes() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 3.0, 7.0]);
        let d = DistanceMatrix::new(m).unwrap();
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(d.get(1, 0), 2.0);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(1, 1), 0.0);
    }

    #[test]
    fn distance_matrix_rejects_negative_and_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(matches!(
            DistanceMatrix::new(m.clone()),
            Err(EdmError::NegativeDistance { .. })
        ));
        let (d, clamped) = DistanceMatrix::new_clamped(m).unwrap();
        assert_eq!(clamped, 1);
        assert_eq!(d.get(0, 1), 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, 1.0, 0.0]);
        assert!(matches!(DistanceMatrix::new(m), Err(EdmError::NonFinite { .. })));
        assert!(matches!(
            DistanceMatrix::new(DMatrix::zeros(2, 3)),
            Err(EdmError::NotSquare { .. })
        ));
    }

    #[test]
    fn mask_ignores_diagonal_and_symmetrizes() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let mask = ObservationMask::from_matrix(&m).unwrap();
        assert!(mask.is_observed(0, 1) && mask.is_observed(1, 0));
        assert!(mask.is_observed(1, 2) && mask.is_observed(2, 1));
        assert!(!mask.is_observed(0, 0));
        assert_eq!(mask.observed_pairs(), vec![(0, 1), (1, 2)]);
        assert_eq!(mask.missing_pair_count(), 1);
        let bad = DMatrix::from_element(2, 2, 0.5);
        assert!(matches!(
            ObservationMask::from_matrix(&bad),
            Err(EdmError::InvalidMask { .. })
        ));
    }

    #[test]
    fn point_set_rejects_empty_and_nan() {
        assert!(PointSet::new(DMatrix::zeros(0, 3)).is_err());
        assert!(PointSet::new(DMatrix::zeros(2, 0)).is_err());
        assert!(PointSet::new(DMatrix::from_element(1, 1, f64::INFINITY)).is_err());
    }
}
