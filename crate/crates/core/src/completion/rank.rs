use nalgebra::DMatrix;

use super::{CompletionResult, NoisyObservation};
use crate::edm::{sym_eigen_by_magnitude, DistanceMatrix};
use crate::embedding::classical_mds;
use crate::error::{EdmError, Result};

#[derive(Debug, Clone)]
pub struct RankOptions {
    pub max_iter: usize,
    /// Stop once `||D_k - D_{k-1}||_F < tol * ||D_k||_F`.
    pub tol: f64,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            max_iter: 1000,
            tol: 1e-8,
        }
    }
}

/// Best rank-`r` approximation of a symmetric matrix in Frobenius norm: keeps
/// the `r` eigenvalues of largest magnitude and zeroes the rest.
pub fn ev_threshold(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let r = r.min(n);
    let (vals, vecs) = sym_eigen_by_magnitude(m);
    let mut out = DMatrix::zeros(n, n);
    for k in 0..r {
        let u = vecs.column(k);
        out.ger(vals[k], &u, &u, 1.0);
    }
    out
}

/// Projection onto `{D : D_ij = d~_ij on observed pairs, diag(D) = 0, D >= 0}`.
fn reimpose(d: &mut DMatrix<f64>, obs: &NoisyObservation) {
    let n = d.nrows();
    for j in 0..n {
        for i in 0..n {
            if i == j {
                d[(i, j)] = 0.0;
            } else if obs.mask().is_observed(i, j) {
                d[(i, j)] = obs.value(i, j);
            } else if d[(i, j)] < 0.0 {
                d[(i, j)] = 0.0;
            }
        }
    }
}

/// Alternates between the rank-`(dim + 2)` matrices and the matrices that
/// agree with the observations. Unobserved entries start at the mean observed
/// value.
///
/// Both steps are exact projections, so the recorded objective
/// `||EVThreshold(D_k) - D_k||_F` never increases.
pub fn rank_complete_edm(
    obs: &NoisyObservation,
    dim: usize,
    opts: &RankOptions,
) -> Result<CompletionResult> {
    let n = obs.size();
    if n < 2 {
        return Err(EdmError::TooSmall {
            what: "matrix size n",
            min: 2,
            value: n,
        });
    }
    if dim == 0 || dim >= n {
        return Err(EdmError::OutOfRange {
            what: "embedding dimension d",
            value: dim,
            lo: 1,
            hi: n - 1,
        });
    }
    let mu = obs.mean_observed();
    let mut d = DMatrix::from_element(n, n, mu);
    reimpose(&mut d, obs);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let low = ev_threshold(&d, dim + 2);
        trace.push((&low - &d).norm());
        let mut next = low;
        reimpose(&mut next, obs);
        let change = (&next - &d).norm();
        d = next;
        if change <= opts.tol * d.norm() {
            converged = true;
            break;
        }
    }

    let edm = DistanceMatrix::new(d)?;
    let points = classical_mds(&edm, dim)?;
    Ok(CompletionResult {
        edm,
        points: Some(points),
        iterations,
        objective_trace: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edm::{assemble_edm, numerical_rank, ObservationMask, PointSet};
    use rand::{Rng, SeedableRng};

    #[test]
    fn ev_threshold_keeps_largest_magnitudes() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -4.0, 2.0]));
        let t = ev_threshold(&m, 2);
        assert!((t - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, -4.0, 2.0])))
            .norm()
            < 1e-12);
    }

    #[test]
    fn ev_threshold_rank_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(8, 8, |_, _| rng.random::<f64>() - 0.5);
        let a = &a + a.transpose();
        for r in 0..=8 {
            assert!(numerical_rank(&ev_threshold(&a, r), 1e-10) <= r);
        }
        assert!((ev_threshold(&a, 8) - &a).norm() < 1e-12);
    }

    #[test]
    fn full_observation_is_a_fixed_point() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = PointSet::new(DMatrix::from_fn(2, 8, |_, _| rng.random::<f64>())).unwrap();
        let d = assemble_edm(&x);
        let r = rank_complete_edm(&NoisyObservation::complete(&d), 2, &RankOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.edm.relative_error(&d) < 1e-12);
    }

    #[test]
    fn recovers_a_few_missing_entries() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let x = PointSet::new(DMatrix::from_fn(2, 15, |_, _| rng.random::<f64>())).unwrap();
        let d = assemble_edm(&x);
        let mut mask = ObservationMask::full(15);
        for (i, j) in [(0, 3), (2, 9), (5, 11), (7, 14), (1, 12)] {
            mask.set(i, j, false);
        }
        let obs = NoisyObservation::new(d.as_matrix().clone(), mask).unwrap();
        let r = rank_complete_edm(&obs, 2, &RankOptions::default()).unwrap();
        assert!(r.edm.relative_error(&d) < 1e-6, "{}", r.edm.relative_error(&d));
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14);
        }
    }
}
