//! EDM completion and denoising from a partially observed, noisy matrix.
//!
//! Four solvers share the [`NoisyObservation`] input and the
//! [`CompletionResult`] output:
//!
//! * [`rank_complete_edm`]: alternating projection between rank `d + 2`
//!   matrices and the set of matrices that agree with the observations.
//! * [`optspace_complete_edm`]: low-rank matrix completion on the Grassmann
//!   manifold with spectral initialization.
//! * [`alternating_descent`]: exact coordinate minimization of s-stress, one
//!   quartic at a time.
//! * [`sdr_complete_edm`]: trace-maximizing semidefinite relaxation over the
//!   reduced Gram matrix.

mod optspace;
mod rank;
mod sdr;
mod sstress;

pub use optspace::{optspace, optspace_complete_edm, OptSpaceFactors, OptSpaceOptions};
pub use rank::{ev_threshold, rank_complete_edm, RankOptions};
pub use sdr::{default_lambda, sdr_complete_edm, SdrOptions};
pub use sstress::{
    alternating_descent, minimize_quartic, quartic_coeffs, SStressInit, SStressOptions,
    QuarticCoeffs,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::edm::{assemble_edm, DistanceMatrix, ObservationMask, PointSet};
use crate::error::{EdmError, Result};

/// Observed noisy squared distances `d~_ij = d_ij + e_ij` on the entries
/// selected by a mask. Unobserved entries of `observed` are meaningless and
/// are stored as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyObservation {
    observed: DMatrix<f64>,
    mask: ObservationMask,
    clamped: usize,
}

impl NoisyObservation {
    /// Symmetrizes the observed entries, zeroes unobserved ones, and clamps
    /// negative observations to zero (counted in [`NoisyObservation::clamped`]).
    pub fn new(observed: DMatrix<f64>, mask: ObservationMask) -> Result<Self> {
        let n = mask.size();
        if observed.nrows() != n || observed.ncols() != n {
            return Err(EdmError::DimensionMismatch {
                expected: n,
                found: observed.nrows(),
            });
        }
        let mut clean = DMatrix::zeros(n, n);
        let mut clamped = 0;
        for (i, j) in mask.observed_pairs() {
            let v = 0.5 * (observed[(i, j)] + observed[(j, i)]);
            if !v.is_finite() {
                return Err(EdmError::NonFinite { row: i, col: j });
            }
            let v = if v < 0.0 {
                clamped += 1;
                0.0
            } else {
                v
            };
            clean[(i, j)] = v;
            clean[(j, i)] = v;
        }
        Ok(NoisyObservation {
            observed: clean,
            mask,
            clamped,
        })
    }

    /// Every off-diagonal entry observed, no noise.
    pub fn complete(d: &DistanceMatrix) -> Self {
        let n = d.size();
        NoisyObservation {
            observed: d.as_matrix().clone(),
            mask: ObservationMask::full(n),
            clamped: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.mask.size()
    }

    pub fn observed(&self) -> &DMatrix<f64> {
        &self.observed
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    /// Number of observed pairs that were negative and clamped to zero.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.observed[(i, j)]
    }

    /// Mean of the observed squared distances (0 when nothing is observed).
    pub fn mean_observed(&self) -> f64 {
        let pairs = self.mask.observed_pairs();
        if pairs.is_empty() {
            return 0.0;
        }
        pairs.iter().map(|&(i, j)| self.observed[(i, j)]).sum::<f64>() / pairs.len() as f64
    }

    pub fn max_observed(&self) -> f64 {
        self.mask
            .observed_pairs()
            .iter()
            .map(|&(i, j)| self.observed[(i, j)])
            .fold(0.0, f64::max)
    }
}

/// Output of every completion solver.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub edm: DistanceMatrix,
    /// Present when the method produces a configuration.
    pub points: Option<PointSet>,
    pub iterations: usize,
    /// One objective value per iteration; method specific.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Completion method selector, shared by the CLI and the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rank,
    OptSpace,
    SStress,
    Sdr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rank, Method::OptSpace, Method::SStress, Method::Sdr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rank => "rank",
            Method::OptSpace => "optspace",
            Method::SStress => "sstress",
            Method::Sdr => "sdr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = EdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rank" => Ok(Method::Rank),
            "optspace" => Ok(Method::OptSpace),
            "sstress" | "s-stress" => Ok(Method::SStress),
            "sdr" => Ok(Method::Sdr),
            other => Err(EdmError::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Per-method settings used by [`complete_edm`].
#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    pub rank: RankOptions,
    pub optspace: OptSpaceOptions,
    pub sstress: SStressOptions,
    pub sdr: SdrOptions,
}

/// Dispatches to the selected solver.
pub fn complete_edm(
    obs: &NoisyObservation,
    dim: usize,
    method: Method,
    opts: &SolverOptions,
) -> Result<CompletionResult> {
    match method {
        Method::Rank => rank_complete_edm(obs, dim, &opts.rank),
        Method::OptSpace => optspace_complete_edm(obs, dim, &opts.optspace),
        Method::SStress => alternating_descent(obs, dim, &opts.sstress),
        Method::Sdr => sdr_complete_edm(obs, dim, &opts.sdr),
    }
}

fn check_points(x: &PointSet, obs: &NoisyObservation) -> Result<()> {
    if x.len() != obs.size() {
        return Err(EdmError::DimensionMismatch {
            expected: obs.size(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Raw stress `sum over observed unordered pairs (sqrt(edm(X)_ij) - sqrt(d~_ij))^2`.
pub fn stress_raw(x: &PointSet, obs: &NoisyObservation) -> Result<f64> {
    check_points(x, obs)?;
    let d = assemble_edm(x);
    Ok(obs
        .mask()
        .observed_pairs()
        .iter()
        .map(|&(i, j)| {
            let r = d.get(i, j).sqrt() - obs.value(i, j).sqrt();
            r * r
        })
        .sum())
}

/// s-stress `sum over observed unordered pairs (edm(X)_ij - d~_ij)^2`.
pub fn stress_s(x: &PointSet, obs: &NoisyObservation) -> Result<f64> {
    check_points(x, obs)?;
    let d = assemble_edm(x);
    Ok(obs
        .mask()
        .observed_pairs()
        .iter()
        .map(|&(i, j)| {
            let r = d.get(i, j) - obs.value(i, j);
            r * r
        })
        .sum())
}
