//! Point recovery from distances (classical MDS) and rigid alignment to
//! anchors (orthogonal Procrustes).

use nalgebra::{DMatrix, DVector, SVD};

use crate::edm::{gram_from_edm, sym_eigen_by_magnitude, DistanceMatrix, GramCentering, PointSet};
use crate::error::{EdmError, Result};

/// Classical MDS output with spectral diagnostics.
#[derive(Debug, Clone)]
pub struct MdsEmbedding {
    pub points: PointSet,
    /// All eigenvalues of `-1/2 J D J`, sorted by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    /// How many of the top `d` eigenvalues were negative and clamped to zero.
    pub clamped: usize,
}

/// Classical MDS: eigendecompose `G = -1/2 J D J` and return
/// `[diag(sqrt(l_1..l_d)), 0] U^T`. The result is centred at the origin.
pub fn classical_mds(d: &DistanceMatrix, dim: usize) -> Result<PointSet> {
    classical_mds_with_diagnostics(d, dim).map(|e| e.points)
}

/// [`classical_mds`] that also reports the spectrum and the number of
/// negative top-`d` eigenvalues that were clamped.
pub fn classical_mds_with_diagnostics(d: &DistanceMatrix, dim: usize) -> Result<MdsEmbedding> {
    let n = d.size();
    if n < 2 || dim == 0 || dim > n - 1 {
        return Err(EdmError::OutOfRange {
            what: "embedding dimension d",
            value: dim,
            lo: 1,
            hi: n.saturating_sub(1),
        });
    }
    let g = gram_from_edm(d, GramCentering::Centroid);
    let (values, vectors) = sym_eigen_by_magnitude(g.as_matrix());
    let mut clamped = 0;
    let mut coords = DMatrix::zeros(dim, n);
    for k in 0..dim {
        let lambda = values[k];
        if lambda < 0.0 {
            clamped += 1;
            continue;
        }
        let s = lambda.sqrt();
        for i in 0..n {
            coords[(k, i)] = s * vectors[(i, k)];
        }
    }
    Ok(MdsEmbedding {
        points: PointSet::new(coords)?,
        eigenvalues: values.iter().copied().collect(),
        clamped,
    })
}

/// Known positions for a subset of columns of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    indices: Vec<usize>,
    coords: DMatrix<f64>,
}

impl AnchorSet {
    pub fn new(indices: Vec<usize>, coords: DMatrix<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(EdmError::TooSmall {
                what: "anchor count",
                min: 1,
                value: 0,
            });
        }
        if coords.ncols() != indices.len() {
            return Err(EdmError::DimensionMismatch {
                expected: indices.len(),
                found: coords.ncols(),
            });
        }
        let mut seen = indices.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != indices.len() {
            return Err(EdmError::InvalidArgument("anchor indices must be distinct".into()));
        }
        Ok(AnchorSet { indices, coords })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// With fewer than `d + 1` anchors the optimal transform is not unique;
    /// [`procrustes`] then returns one member of the family.
    pub fn determines_transform(&self) -> bool {
        self.len() > self.coords.nrows()
    }
}

/// `x -> R x + t`. `R` is orthogonal and may contain a reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl RigidTransform {
    pub fn identity(d: usize) -> Self {
        RigidTransform {
            rotation: DMatrix::identity(d, d),
            translation: DVector::zeros(d),
        }
    }

    /// Applies the transform to every column of `x`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.rotation * x;
        for mut col in out.column_iter_mut() {
            col += &self.translation;
        }
        out
    }

    pub fn apply_point(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.rotation * x + &self.translation
    }
}

fn centered(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let c = x.column_mean();
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= &c;
    }
    (out, c)
}

/// Orthogonal Procrustes: the rigid transform minimizing
/// `|R (X - x_c 1^T) + y_c 1^T - Y|_F` over orthogonal `R`.
///
/// With `Xbar Ybar^T = U S V^T`, `R = V U^T`; the translation maps the source
/// centroid onto the target centroid.
pub fn procrustes(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<RigidTransform> {
    if source.shape() != target.shape() {
        return Err(EdmError::InvalidArgument(format!(
            "procrustes shape mismatch: {:?} vs {:?}",
            source.shape(),
            target.shape()
        )));
    }
    if source.ncols() == 0 || source.nrows() == 0 {
        return Err(EdmError::TooSmall {
            what: "anchor count",
            min: 1,
            value: 0,
        });
    }
    let (xs, xc) = centered(source);
    let (ys, yc) = centered(target);
    let cross = &xs * ys.transpose();
    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let rotation = v_t.transpose() * u.transpose();
    let translation = &yc - &rotation * &xc;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Fits [`procrustes`] on the anchor columns and applies it to all points.
pub fn align(points: &PointSet, anchors: &AnchorSet) -> Result<PointSet> {
    if anchors.coords().nrows() != points.dim() {
        return Err(EdmError::DimensionMismatch {
            expected: points.dim(),
            found: anchors.coords().nrows(),
        });
    }
    let selected = points.select(anchors.indices())?;
    let transform = procrustes(selected.coords(), anchors.coords())?;
    PointSet::new(transform.apply(points.coords()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edm::assemble_edm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        g.qr().q()
    }

    #[test]
    fn mds_two_points() {
        let d = DistanceMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 9.0, 9.0, 0.0])).unwrap();
        let x = classical_mds(&d, 1).unwrap();
        assert!((x.coords()[(0, 0)] - x.coords()[(0, 1)]).abs() - 3.0 < 1e-12);
        assert!((assemble_edm(&x).as_matrix() - d.as_matrix()).norm() < 1e-10);
    }

    #[test]
    fn mds_round_trip_planar() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = PointSet::new(DMatrix::from_fn(2, 20, |_, _| rng.random::<f64>())).unwrap();
        let d = assemble_edm(&x);
        let y = classical_mds(&d, 2).unwrap();
        assert!(assemble_edm(&y).relative_error(&d) < 1e-9);
        assert!(y.centroid().norm() < 1e-10);
    }

    #[test]
    fn mds_dimension_out_of_range() {
        let d = DistanceMatrix::zeros(3);
        assert!(classical_mds(&d, 0).is_err());
        assert!(classical_mds(&d, 3).is_err());
        assert!(classical_mds(&DistanceMatrix::zeros(1), 1).is_err());
    }

    #[test]
    fn mds_clamps_negative_eigenvalues() {
        // side lengths 1, 1, 3 is not Euclidean: one negative eigenvalue
        let d = DistanceMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 9.0, 1.0, 0.0, 1.0, 9.0, 1.0, 0.0],
        ))
        .unwrap();
        let e = classical_mds_with_diagnostics(&d, 2).unwrap();
        assert_eq!(e.clamped, 1);
        assert!(e.points.coords().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn procrustes_identity() {
        let x = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.3, 0.0, 0.2, 1.0]);
        let t = procrustes(&x, &x).unwrap();
        assert!((t.rotation.clone() - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn procrustes_quarter_turn_and_shift() {
        let x = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 1.0, 0.2, 0.0, 0.0, 2.0, 1.5]);
        let q = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![3.0, 1.0]);
        let y = RigidTransform {
            rotation: q,
            translation: b,
        }
        .apply(&x);
        let t = procrustes(&x, &y).unwrap();
        assert!((t.apply(&x) - &y).norm() <= 1e-10);
    }

    #[test]
    fn procrustes_random_3d_with_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = DMatrix::from_fn(3, 7, |_, _| rng.random::<f64>());
            let q = random_orthogonal(3, &mut rng);
            let b = DVector::from_fn(3, |_, _| rng.random::<f64>() * 5.0);
            let y = RigidTransform {
                rotation: q,
                translation: b,
            }
            .apply(&x);
            let t = procrustes(&x, &y).unwrap();
            assert!((t.apply(&x) - &y).norm() <= 1e-10);
            let rtr = t.rotation.transpose() * &t.rotation;
            assert!((rtr - DMatrix::identity(3, 3)).norm() <= 1e-10);
        }
    }

    #[test]
    fn procrustes_shape_mismatch() {
        let a = DMatrix::zeros(2, 3);
        let b = DMatrix::zeros(2, 4);
        assert!(procrustes(&a, &b).is_err());
    }

    #[test]
    fn align_uses_anchors_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = PointSet::new(DMatrix::from_fn(2, 12, |_, _| rng.random::<f64>())).unwrap();
        let est = classical_mds(&assemble_edm(&truth), 2).unwrap();
        let idx = vec![0, 3, 7];
        let anchors = AnchorSet::new(idx.clone(), truth.select(&idx).unwrap().into_coords()).unwrap();
        assert!(anchors.determines_transform());
        let aligned = align(&est, &anchors).unwrap();
        let anchor_residual =
            (aligned.select(&idx).unwrap().coords() - anchors.coords()).norm();
        assert!(anchor_residual < 1e-10);
        assert!((aligned.coords() - truth.coords()).norm() < 1e-9);
    }

    #[test]
    fn anchor_validation() {
        assert!(AnchorSet::new(vec![], DMatrix::zeros(2, 0)).is_err());
        assert!(AnchorSet::new(vec![1, 1], DMatrix::zeros(2, 2)).is_err());
        assert!(AnchorSet::new(vec![0, 1], DMatrix::zeros(2, 3)).is_err());
        let a = AnchorSet::new(vec![0, 1], DMatrix::zeros(2, 2)).unwrap();
        assert!(!a.determines_transform());
        let p = PointSet::new(DMatrix::zeros(2, 1)).unwrap();
        assert!(align(&p, &a).is_err());
    }
}
