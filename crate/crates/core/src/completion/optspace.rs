use nalgebra::{DMatrix, DVector};

use super::{CompletionResult, NoisyObservation};
use crate::edm::DistanceMatrix;
use crate::embedding::classical_mds;
use crate::error::{EdmError, Result};

#[derive(Debug, Clone)]
pub struct OptSpaceOptions {
    /// Target rank; `None` means `dim + 2` for EDM completion.
    pub rank: Option<usize>,
    pub max_iter: usize,
    /// Stop when an iteration lowers the residual by less than `tol` relative.
    pub tol: f64,
    /// Fixed weight of the incoherence penalty. `None` uses the smallest data
    /// residual seen so far, so the penalty fades on exact data and stays
    /// active at the noise level. `Some(0.0)` disables it.
    pub rho: Option<f64>,
}

impl Default for OptSpaceOptions {
    fn default() -> Self {
        OptSpaceOptions {
            rank: None,
            max_iter: 500,
            tol: 1e-8,
            rho: None,
        }
    }
}

/// Low-rank estimate `X S Y^T` with orthonormal `X` (`m x r`) and `Y` (`n x r`).
#[derive(Debug, Clone)]
pub struct OptSpaceFactors {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub iterations: usize,
    /// Residual `1/2 sum_E (M_ij - (X S Y^T)_ij)^2` plus the weighted
    /// incoherence penalty, per iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl OptSpaceFactors {
    pub fn estimate(&self) -> DMatrix<f64> {
        &self.x * &self.s * self.y.transpose()
    }
}

struct Entry {
    i: usize,
    j: usize,
    v: f64,
}

/// Least-squares `S` for fixed `X`, `Y`, through the `r^2 x r^2` normal equations.
fn solve_s(x: &DMatrix<f64>, y: &DMatrix<f64>, entries: &[Entry]) -> DMatrix<f64> {
    let r = x.ncols();
    let rr = r * r;
    let mut q = DMatrix::<f64>::zeros(rr, rr);
    let mut rhs = DVector::<f64>::zeros(rr);
    let mut z = vec![0.0; rr];
    for e in entries {
        // vec(S) is column major: S_ab sits at a + b r, coefficient x_ia y_jb
        for b in 0..r {
            let yb = y[(e.j, b)];
            for a in 0..r {
                z[a + b * r] = x[(e.i, a)] * yb;
            }
        }
        for c in 0..rr {
            rhs[c] += e.v * z[c];
            for k in c..rr {
                q[(c, k)] += z[c] * z[k];
            }
        }
    }
    for c in 0..rr {
        for k in 0..c {
            q[(c, k)] = q[(k, c)];
        }
    }
    let sol = match q.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => q
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(rr)),
    };
    DMatrix::from_column_slice(r, r, sol.as_slice())
}

/// Residuals `(X S Y^T)_ij - M_ij` on the observed entries and half their squared sum.
fn residuals(x: &DMatrix<f64>, s: &DMatrix<f64>, y: &DMatrix<f64>, entries: &[Entry]) -> (Vec<f64>, f64) {
    let xs = x * s;
    let mut res = Vec::with_capacity(entries.len());
    let mut f = 0.0;
    for e in entries {
        let pred = xs.row(e.i).dot(&y.row(e.j));
        let r = pred - e.v;
        f += 0.5 * r * r;
        res.push(r);
    }
    (res, f)
}

/// Row incoherence penalty `sum_i G1(|x_i|^2 / bound)` with
/// `G1(z) = exp((z - 1)^2) - 1` for `z > 1` and zero otherwise, and its gradient.
fn incoherence(x: &DMatrix<f64>, bound: f64) -> (f64, DMatrix<f64>) {
    let mut g = 0.0;
    let mut grad = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let z = x.row(i).norm_squared() / bound;
        if z > 1.0 {
            let e = ((z - 1.0) * (z - 1.0)).exp();
            g += e - 1.0;
            let w = 2.0 * (z - 1.0) * e * 2.0 / bound;
            grad.row_mut(i).copy_from(&(x.row(i) * w));
        }
    }
    (g, grad)
}

/// Penalty bound `3 r / m` on squared row norms of an orthonormal `m x r`
/// basis, raised to the largest row norm of the starting basis if that is
/// already more coherent.
fn coherence_bound(x: &DMatrix<f64>) -> f64 {
    let top = (0..x.nrows()).map(|i| x.row(i).norm_squared()).fold(0.0, f64::max);
    (3.0 * x.ncols() as f64 / x.nrows() as f64).max(top)
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let r = m.ncols();
    let mut q = m.qr().q();
    q.resize_horizontally_mut(r, 0.0);
    q
}

/// Top-`r` singular vectors of the trimmed, rescaled observation matrix.
fn spectral_init(rows: usize, cols: usize, entries: &[Entry], r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut row_deg = vec![0usize; rows];
    let mut col_deg = vec![0usize; cols];
    for e in entries {
        row_deg[e.i] += 1;
        col_deg[e.j] += 1;
    }
    let total = entries.len() as f64;
    let row_cap = 2.0 * total / rows as f64;
    let col_cap = 2.0 * total / cols as f64;
    let alpha = total / (rows * cols) as f64;
    let mut m = DMatrix::zeros(rows, cols);
    for e in entries {
        if row_deg[e.i] as f64 > row_cap || col_deg[e.j] as f64 > col_cap {
            continue;
        }
        m[(e.i, e.j)] = e.v / alpha;
    }
    let svd = m.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let x = u.select_columns(order[..r].iter());
    let y = vt.transpose().select_columns(order[..r].iter());
    (x, y)
}

/// Rank-`r` completion of a rectangular matrix observed on `mask`.
///
/// Spectral initialization on the trimmed matrix, then gradient descent over
/// the pair of column spaces with `S` re-solved by least squares at every trial
/// point. Steps are retracted with a QR factorization and chosen by Armijo
/// backtracking. Rows of `X` and `Y` whose squared norm outgrows the
/// incoherence bound are penalized, which keeps noisy fits from collapsing onto single rows and
/// extrapolating wildly into the unobserved entries.
pub fn optspace(
    observed: &DMatrix<f64>,
    mask: &DMatrix<bool>,
    rank: usize,
    opts: &OptSpaceOptions,
) -> Result<OptSpaceFactors> {
    let (rows, cols) = observed.shape();
    if mask.shape() != (rows, cols) {
        return Err(EdmError::DimensionMismatch {
            expected: rows,
            found: mask.nrows(),
        });
    }
    if rank == 0 || rank > rows.min(cols) {
        return Err(EdmError::OutOfRange {
            what: "rank",
            value: rank,
            lo: 1,
            hi: rows.min(cols),
        });
    }
    let mut entries = Vec::new();
    for j in 0..cols {
        for i in 0..rows {
            if mask[(i, j)] {
                let v = observed[(i, j)];
                if !v.is_finite() {
                    return Err(EdmError::NonFinite { row: i, col: j });
                }
                entries.push(Entry { i, j, v });
            }
        }
    }
    if entries.is_empty() {
        return Err(EdmError::EmptyMask);
    }

    let (mut x, mut y) = spectral_init(rows, cols, &entries, rank);
    let mut s = solve_s(&x, &y, &entries);
    let (mut res, resid) = residuals(&x, &s, &y, &entries);
    let scale: f64 = entries.iter().map(|e| 0.5 * e.v * e.v).sum();
    let floor = 1e-28 * scale.max(f64::MIN_POSITIVE);
    let mut rho = opts.rho.unwrap_or(resid).max(0.0);
    let (bx, by) = (coherence_bound(&x), coherence_bound(&y));
    let penalty = |x: &DMatrix<f64>, y: &DMatrix<f64>, rho: f64| {
        if rho == 0.0 {
            return (0.0, None);
        }
        let (gx, dx) = incoherence(x, bx);
        let (gy, dy) = incoherence(y, by);
        (rho * (gx + gy), Some((dx * rho, dy * rho)))
    };
    let (mut pen, mut pen_grad) = penalty(&x, &y, rho);
    let mut f = resid + pen;
    let mut trace = vec![f];
    let mut eta = {
        let top = s.norm();
        if top > 0.0 {
            1.0 / (top * top)
        } else {
            1.0
        }
    };
    let mut converged = f <= floor;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        // Euclidean gradients R Y S^T and R^T X S, with R sparse on E
        let ys = &y * s.transpose();
        let xs = &x * &s;
        let mut gx = DMatrix::zeros(rows, rank);
        let mut gy = DMatrix::zeros(cols, rank);
        for (e, &r) in entries.iter().zip(&res) {
            for a in 0..rank {
                gx[(e.i, a)] += r * ys[(e.j, a)];
                gy[(e.j, a)] += r * xs[(e.i, a)];
            }
        }
        if let Some((dx, dy)) = &pen_grad {
            gx += dx;
            gy += dy;
        }
        // project onto the tangent spaces
        gx -= &x * (x.transpose() * &gx);
        gy -= &y * (y.transpose() * &gy);
        let g2 = gx.norm_squared() + gy.norm_squared();
        if g2 <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }

        let mut accepted = None;
        for _ in 0..60 {
            let xt = orthonormalize(&x - &gx * eta);
            let yt = orthonormalize(&y - &gy * eta);
            let st = solve_s(&xt, &yt, &entries);
            let (rt, resid_t) = residuals(&xt, &st, &yt, &entries);
            let (pt, pgt) = penalty(&xt, &yt, rho);
            let ft = resid_t + pt;
            if ft <= f - 1e-4 * eta * g2 {
                accepted = Some((xt, yt, st, rt, ft, pt, pgt));
                break;
            }
            eta *= 0.5;
        }
        let Some((xt, yt, st, rt, ft, pt, pgt)) = accepted else {
            // no descent step found: stationary up to rounding
            converged = true;
            break;
        };
        let drop = f - ft;
        x = xt;
        y = yt;
        s = st;
        res = rt;
        f = ft;
        pen = pt;
        pen_grad = pgt;
        let resid = f - pen;
        if opts.rho.is_none() && resid < rho {
            // a smaller weight can only lower the objective
            rho = resid;
            (pen, pen_grad) = penalty(&x, &y, rho);
            f = resid + pen;
        }
        trace.push(f);
        eta *= 2.0;
        if f - pen <= floor || drop <= opts.tol * (f + drop) {
            converged = true;
        }
    }

    Ok(OptSpaceFactors {
        x,
        s,
        y,
        iterations,
        objective_trace: trace,
        converged,
    })
}

/// EDM completion with OptSpace at rank `dim + 2` (unless overridden). The
/// zero diagonal counts as observed.
pub fn optspace_complete_edm(
    obs: &NoisyObservation,
    dim: usize,
    opts: &OptSpaceOptions,
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
    let rank = opts.rank.unwrap_or(dim + 2).min(n);
    let mask = DMatrix::from_fn(n, n, |i, j| i == j || obs.mask().is_observed(i, j));
    let fit = optspace(obs.observed(), &mask, rank, opts)?;
    let est = fit.estimate();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (0.5 * (est[(i, j)] + est[(j, i)])).max(0.0)
        }
    });
    let edm = DistanceMatrix::new(sym)?;
    let points = classical_mds(&edm, dim)?;
    Ok(CompletionResult {
        edm,
        points: Some(points),
        iterations: fit.iterations,
        objective_trace: fit.objective_trace,
        converged: fit.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn normal_equations_recover_s() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let x = orthonormalize(DMatrix::from_fn(10, 3, |_, _| rng.random::<f64>() - 0.5));
        let y = orthonormalize(DMatrix::from_fn(8, 3, |_, _| rng.random::<f64>() - 0.5));
        let s = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>());
        let m = &x * &s * y.transpose();
        let entries: Vec<Entry> = (0..10)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .filter(|&(i, j)| (i + 2 * j) % 3 != 0)
            .map(|(i, j)| Entry { i, j, v: m[(i, j)] })
            .collect();
        let est = solve_s(&x, &y, &entries);
        assert!((est - s).norm() < 1e-10);
    }

    #[test]
    fn completes_a_low_rank_matrix() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let (rows, cols, r) = (40, 30, 2);
        let a = DMatrix::from_fn(rows, r, |_, _| rng.random::<f64>() - 0.5);
        let b = DMatrix::from_fn(cols, r, |_, _| rng.random::<f64>() - 0.5);
        let m = &a * b.transpose();
        let mask = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() < 0.5);
        let fit = optspace(&m, &mask, r, &OptSpaceOptions::default()).unwrap();
        let err = (fit.estimate() - &m).norm() / m.norm();
        assert!(err < 1e-6, "{err}");
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn rejects_bad_rank_and_empty_mask() {
        let m = DMatrix::zeros(3, 3);
        let none = DMatrix::from_element(3, 3, false);
        let all = DMatrix::from_element(3, 3, true);
        assert!(optspace(&m, &all, 4, &OptSpaceOptions::default()).is_err());
        assert!(matches!(
            optspace(&m, &none, 1, &OptSpaceOptions::default()),
            Err(EdmError::EmptyMask)
        ));
    }
}
