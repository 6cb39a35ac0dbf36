use nalgebra::{DMatrix, SymmetricEigen};

use super::{CompletionResult, NoisyObservation};
use crate::edm::gram::{compress_to_reduced, expand_reduced, kappa};
use crate::edm::ObservationMask;
use crate::embedding::classical_mds;
use crate::error::{EdmError, Result};

#[derive(Debug, Clone)]
pub struct SdrOptions {
    /// Weight of the data term; `None` uses [`default_lambda`].
    pub lambda: Option<f64>,
    /// The trace of `H` is capped at `trace_cap * n * max(d~)`.
    pub trace_cap: f64,
    pub max_iter: usize,
    /// Relative primal and dual residual tolerance.
    pub tol: f64,
}

impl Default for SdrOptions {
    fn default() -> Self {
        SdrOptions {
            lambda: None,
            trace_cap: 1.0,
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

/// `sqrt(#missing unordered pairs)`, floored at 1 so that a full mask still
/// gets a positive weight.
pub fn default_lambda(mask: &ObservationMask) -> f64 {
    (mask.missing_pair_count().max(1) as f64).sqrt()
}

/// Measurement operator over the observed pairs: `A(H)_e = G_ii + G_jj - 2 G_ij`
/// with `G = V H V^T`.
struct Measure {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl Measure {
    fn apply(&self, h: &DMatrix<f64>) -> Vec<f64> {
        let g = expand_reduced(h);
        self.pairs
            .iter()
            .map(|&(i, j)| g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)])
            .collect()
    }

    /// `V^T L(y) V` where `L(y)` is the Laplacian with edge weights `y`.
    fn adjoint(&self, y: &[f64]) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &w) in self.pairs.iter().zip(y) {
            l[(i, i)] += w;
            l[(j, j)] += w;
            l[(i, j)] -= w;
            l[(j, i)] -= w;
        }
        compress_to_reduced(&l)
    }

    /// `(I + A A^T) y`; `A A^T` acts as `y_e -> 2 y_e + S_i + S_j`.
    fn gram_shift(&self, y: &[f64], out: &mut [f64], node: &mut [f64]) {
        node.iter_mut().for_each(|v| *v = 0.0);
        for (&(i, j), &w) in self.pairs.iter().zip(y) {
            node[i] += w;
            node[j] += w;
        }
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            out[e] = 3.0 * y[e] + node[i] + node[j];
        }
    }

    /// Conjugate gradients on `(I + A A^T) y = rhs`, warm started from `y`.
    fn solve_shifted(&self, rhs: &[f64], y: &mut [f64]) {
        let m = rhs.len();
        let mut node = vec![0.0; self.n];
        let mut ay = vec![0.0; m];
        self.gram_shift(y, &mut ay, &mut node);
        let mut r: Vec<f64> = rhs.iter().zip(&ay).map(|(b, a)| b - a).collect();
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let stop = 1e-28 * rhs.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        for _ in 0..(4 * m + 10) {
            if rr <= stop {
                break;
            }
            self.gram_shift(&p, &mut ay, &mut node);
            let pap: f64 = p.iter().zip(&ay).map(|(a, b)| a * b).sum();
            let alpha = rr / pap;
            for e in 0..m {
                y[e] += alpha * p[e];
                r[e] -= alpha * ay[e];
            }
            let next: f64 = r.iter().map(|v| v * v).sum();
            let beta = next / rr;
            rr = next;
            for e in 0..m {
                p[e] = r[e] + beta * p[e];
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projection onto `{Z >= 0, trace(Z) <= cap}`.
fn project_capped_psd(m: &DMatrix<f64>, cap: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = vals.iter().sum();
    if sum > cap {
        // shift theta so that sum(max(l - theta, 0)) = cap
        let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().filter(|&v| v > 0.0).collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let mut acc = 0.0;
        let mut theta = 0.0;
        for (k, &v) in sorted.iter().enumerate() {
            acc += v;
            let t = (acc - cap) / (k + 1) as f64;
            if k + 1 == sorted.len() || sorted[k + 1] <= t {
                theta = t;
                break;
            }
        }
        vals = eig.eigenvalues.iter().map(|&v| (v - theta).max(0.0)).collect();
    }
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let u = eig.eigenvectors.column(k);
            out.ger(v, &u, &u, 1.0);
        }
    }
    out
}

/// Semidefinite relaxation of EDM completion:
/// maximize `trace(H) - lambda ||W o (D~ - K(V H V^T))||_F` over `H >= 0`.
///
/// Solved by ADMM with the splitting `H = Z` (Z carries the PSD cone and the
/// trace cap) and `A(H) - r = d~` (r carries the norm, handled by block soft
/// thresholding). The `H` step is a Woodbury solve whose inner system is a
/// sparse graph operator, handled by conjugate gradients. The penalty `rho` is
/// adapted by residual balancing.
pub fn sdr_complete_edm(
    obs: &NoisyObservation,
    dim: usize,
    opts: &SdrOptions,
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
    let lambda = opts.lambda.unwrap_or_else(|| default_lambda(obs.mask()));
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(EdmError::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let pairs = obs.mask().observed_pairs();
    if pairs.is_empty() {
        return Err(EdmError::EmptyMask);
    }

    // work in units of the mean observation
    let scale = match obs.mean_observed() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let b: Vec<f64> = pairs.iter().map(|&(i, j)| obs.value(i, j) / scale).collect();
    let b_max = b.iter().copied().fold(0.0, f64::max);
    let cap = opts.trace_cap * n as f64 * b_max.max(1.0);
    let weight = lambda * std::f64::consts::SQRT_2;
    let op = Measure { n, pairs };
    let m = op.pairs.len();
    let k = n - 1;
    let eye = DMatrix::<f64>::identity(k, k);

    let mut z = DMatrix::<f64>::zeros(k, k);
    let mut big_u = DMatrix::<f64>::zeros(k, k);
    let mut r = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut rho = 1.0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let b_norm = norm(&b);

    for it in 0..opts.max_iter {
        iterations = it + 1;
        // H step: (I + A^T A) H = Z - U + A^T(r + b - u) + I / rho
        let c: Vec<f64> = (0..m).map(|e| r[e] + b[e] - u[e]).collect();
        let rhs = &z - &big_u + op.adjoint(&c) + &eye * (1.0 / rho);
        let a_rhs = op.apply(&rhs);
        op.solve_shifted(&a_rhs, &mut y);
        let h = &rhs - op.adjoint(&y);
        let ah = op.apply(&h);

        // Z step
        let z_old = std::mem::replace(&mut z, project_capped_psd(&(&h + &big_u), cap));

        // r step: block soft threshold
        let v: Vec<f64> = (0..m).map(|e| ah[e] - b[e] + u[e]).collect();
        let v_norm = norm(&v);
        let shrink = if v_norm > 0.0 {
            (1.0 - weight / (rho * v_norm)).max(0.0)
        } else {
            0.0
        };
        let r_old = std::mem::replace(&mut r, v.iter().map(|x| shrink * x).collect());

        // scaled dual updates
        big_u += &h - &z;
        let mut prim2 = (&h - &z).norm_squared();
        for e in 0..m {
            let g = ah[e] - r[e] - b[e];
            u[e] += g;
            prim2 += g * g;
        }
        let dr: Vec<f64> = (0..m).map(|e| r[e] - r_old[e]).collect();
        let dual = rho * ((&z - &z_old) + op.adjoint(&dr)).norm();
        let prim = prim2.sqrt();

        let az = op.apply(&z);
        let fit: f64 = norm(&(0..m).map(|e| az[e] - b[e]).collect::<Vec<_>>());
        trace.push(scale * (-z.trace() + weight * fit));

        let prim_tol = opts.tol * (1.0 + h.norm().max(z.norm()).max(b_norm).max(norm(&ah)));
        let dual_tol = opts.tol * (1.0 + rho * (big_u.norm() + op.adjoint(&u).norm()));
        if prim <= prim_tol && dual <= dual_tol {
            converged = true;
            break;
        }
        if it % 10 == 9 {
            if prim > 10.0 * dual {
                rho *= 2.0;
                big_u /= 2.0;
                u.iter_mut().for_each(|x| *x /= 2.0);
            } else if dual > 10.0 * prim {
                rho /= 2.0;
                big_u *= 2.0;
                u.iter_mut().for_each(|x| *x *= 2.0);
            }
        }
    }

    let g = expand_reduced(&z) * scale;
    let edm = kappa(&g);
    let points = classical_mds(&edm, dim)?;
    Ok(CompletionResult {
        edm,
        points: Some(points),
        iterations,
        objective_trace: trace,
        converged,
    })
}
