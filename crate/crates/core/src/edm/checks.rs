use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{gram_from_edm, DistanceMatrix, GramCentering};

/// Relative PSD tolerance: `lambda_min >= -tol * max|lambda|`.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

/// Outcome of [`is_edm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdmCheck {
    pub is_edm: bool,
    /// Smallest eigenvalue of `-1/2 J D J`, unscaled.
    pub min_eigenvalue: f64,
}

/// Eigendecomposition of a symmetric matrix with eigenpairs sorted by
/// decreasing magnitude `|l_1| >= |l_2| >= ...`. Ties keep the larger value first.
pub fn sym_eigen_by_magnitude(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        lb.abs()
            .partial_cmp(&la.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(lb.partial_cmp(&la).unwrap_or(std::cmp::Ordering::Equal))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

/// Tests `D` against the Gower characterization with `s = 1/n`: `D` is an EDM
/// iff `-1/2 J D J` is PSD. Accepts when `lambda_min >= -tol * max|lambda|`.
pub fn is_edm(d: &DistanceMatrix, tol: f64) -> EdmCheck {
    let g = gram_from_edm(d, GramCentering::Centroid);
    let ev = g.into_matrix().symmetric_eigenvalues();
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let max_abs = ev.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let min = if ev.is_empty() { 0.0 } else { min };
    EdmCheck {
        is_edm: min >= -tol * max_abs,
        min_eigenvalue: min,
    }
}

/// Number of eigenvalues with `|l_i| > rel_tol * max_j |l_j|`. Zero for the
/// zero matrix. `m` must be symmetric.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let ev = m.clone().symmetric_eigenvalues();
    let max_abs = ev.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if max_abs == 0.0 {
        return 0;
    }
    ev.iter().filter(|v| v.abs() > rel_tol * max_abs).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edm::{assemble_edm, PointSet};
    use rand::{Rng, SeedableRng};

    #[test]
    fn rank_basics() {
        assert_eq!(numerical_rank(&DMatrix::identity(5, 5), 1e-9), 5);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(numerical_rank(&(&v * v.transpose()), 1e-9), 1);
        assert_eq!(numerical_rank(&DMatrix::zeros(4, 4), 1e-9), 0);
    }

    #[test]
    fn planar_points_in_3d_have_rank_four() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        // points on the plane z = 0.3 x - 0.2 y + 1
        let x = DMatrix::from_fn(3, 10, |_, _| rng.random::<f64>());
        let mut x = x;
        for i in 0..10 {
            x[(2, i)] = 0.3 * x[(0, i)] - 0.2 * x[(1, i)] + 1.0;
        }
        let d = assemble_edm(&PointSet::new(x).unwrap());
        assert_eq!(numerical_rank(d.as_matrix(), 1e-9), 4);
    }

    #[test]
    fn random_points_are_edm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = PointSet::new(DMatrix::from_fn(3, 10, |_, _| rng.random::<f64>())).unwrap();
        let d = assemble_edm(&x);
        assert!(is_edm(&d, DEFAULT_PSD_TOL).is_edm);
        assert!(numerical_rank(d.as_matrix(), 1e-9) <= 5);
    }

    #[test]
    fn zero_matrix_is_edm() {
        let c = is_edm(&DistanceMatrix::zeros(4), DEFAULT_PSD_TOL);
        assert!(c.is_edm);
        assert_eq!(c.min_eigenvalue, 0.0);
    }

    #[test]
    fn collinear_triangle_is_edm() {
        // points 0, 1, 2 on a line
        let d = DistanceMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0],
        ))
        .unwrap();
        assert!(is_edm(&d, DEFAULT_PSD_TOL).is_edm);
    }

    #[test]
    fn triangle_violation_is_not_edm() {
        // side lengths 1, 1, 3
        let d = DistanceMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 9.0, 1.0, 0.0, 1.0, 9.0, 1.0, 0.0],
        ))
        .unwrap();
        let c = is_edm(&d, DEFAULT_PSD_TOL);
        assert!(!c.is_edm);
        // oracle: direct eigendecomposition of -1/2 J D J
        let j = crate::edm::centering_matrix(3);
        let ev = (&j * d.as_matrix() * &j * -0.5).symmetric_eigenvalues();
        assert!((c.min_eigenvalue - ev.min()).abs() < 1e-12);
        assert!(c.min_eigenvalue < 0.0);
    }

    #[test]
    fn eigen_sorted_by_magnitude() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -5.0, 3.0, 0.0]));
        let (vals, vecs) = sym_eigen_by_magnitude(&m);
        assert_eq!(vals.as_slice(), &[-5.0, 3.0, 1.0, 0.0]);
        assert!((vecs.column(0).abs()[1] - 1.0).abs() < 1e-12);
    }
}
