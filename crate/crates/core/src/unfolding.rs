//! Multidimensional unfolding: recover two point sets (microphones and
//! sources) from the distances between them only, treated as EDM completion
//! with a block mask.

use nalgebra::DMatrix;

use crate::completion::{complete_edm, Method, NoisyObservation, SolverOptions};
use crate::edm::{DistanceMatrix, ObservationMask, PointSet};
use crate::embedding::classical_mds;
use crate::error::{EdmError, Result};

/// `m` microphones, `k` sources and the `m x k` squared cross-distances.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldingInstance {
    cross: DMatrix<f64>,
}

impl UnfoldingInstance {
    pub fn new(cross: DMatrix<f64>) -> Result<Self> {
        if cross.nrows() == 0 || cross.ncols() == 0 {
            return Err(EdmError::TooSmall {
                what: "microphone and source count",
                min: 1,
                value: 0,
            });
        }
        for j in 0..cross.ncols() {
            for i in 0..cross.nrows() {
                let v = cross[(i, j)];
                if !v.is_finite() {
                    return Err(EdmError::NonFinite { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(EdmError::NegativeDistance { row: i, col: j, value: v });
                }
            }
        }
        Ok(UnfoldingInstance { cross })
    }

    pub fn microphones(&self) -> usize {
        self.cross.nrows()
    }

    pub fn sources(&self) -> usize {
        self.cross.ncols()
    }

    pub fn cross_distances(&self) -> &DMatrix<f64> {
        &self.cross
    }
}

/// `(m + k) x (m + k)` mask that observes exactly the two off-diagonal blocks.
pub fn mdu_mask(m: usize, k: usize) -> Result<ObservationMask> {
    if m == 0 || k == 0 {
        return Err(EdmError::TooSmall {
            what: "microphone and source count",
            min: 1,
            value: 0,
        });
    }
    let mut mask = ObservationMask::empty(m + k);
    for i in 0..m {
        for j in m..m + k {
            mask.set(i, j, true);
        }
    }
    Ok(mask)
}

/// Places the cross-distances in the off-diagonal blocks, microphones first.
pub fn embed_unfolding(inst: &UnfoldingInstance) -> NoisyObservation {
    let (m, k) = (inst.microphones(), inst.sources());
    let mut full = DMatrix::zeros(m + k, m + k);
    for i in 0..m {
        for j in 0..k {
            full[(i, m + j)] = inst.cross[(i, j)];
            full[(m + j, i)] = inst.cross[(i, j)];
        }
    }
    let mask = mdu_mask(m, k).expect("instance sizes are positive");
    NoisyObservation::new(full, mask).expect("entries validated by the instance")
}

#[derive(Debug, Clone)]
pub struct MduSolution {
    pub microphones: PointSet,
    pub sources: PointSet,
    pub edm: DistanceMatrix,
    pub converged: bool,
}

/// Completes the unfolding EDM and splits the embedding into microphones
/// (first `m` points) and sources (last `k`).
pub fn solve_mdu(
    inst: &UnfoldingInstance,
    dim: usize,
    method: Method,
    opts: &SolverOptions,
) -> Result<MduSolution> {
    let m = inst.microphones();
    let n = m + inst.sources();
    if dim == 0 || dim >= n {
        return Err(EdmError::OutOfRange {
            what: "embedding dimension d",
            value: dim,
            lo: 1,
            hi: n - 1,
        });
    }
    let res = complete_edm(&embed_unfolding(inst), dim, method, opts)?;
    let points = classical_mds(&res.edm, dim)?;
    let mics: Vec<usize> = (0..m).collect();
    let srcs: Vec<usize> = (m..n).collect();
    Ok(MduSolution {
        microphones: points.select(&mics)?,
        sources: points.select(&srcs)?,
        edm: res.edm,
        converged: res.converged,
    })
}

/// Share of unobserved entries of the unfolding mask, `(m^2 + k^2) / (m + k)^2`.
pub fn missing_fraction(m: usize, k: usize) -> f64 {
    let (m, k) = (m as f64, k as f64);
    (m * m + k * k) / ((m + k) * (m + k))
}
