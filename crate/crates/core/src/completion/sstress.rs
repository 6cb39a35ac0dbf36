use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CompletionResult, NoisyObservation};
use crate::edm::{assemble_edm, PointSet};
use crate::error::{EdmError, Result};

/// `f(x) = a4 x^4 + a3 x^3 + a2 x^2 + a1 x + a0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuarticCoeffs {
    pub a4: f64,
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl QuarticCoeffs {
    pub fn eval(&self, x: f64) -> f64 {
        (((self.a4 * x + self.a3) * x + self.a2) * x + self.a1) * x + self.a0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        ((4.0 * self.a4 * x + 3.0 * self.a3) * x + 2.0 * self.a2) * x + self.a1
    }

    fn second_derivative(&self, x: f64) -> f64 {
        (12.0 * self.a4 * x + 6.0 * self.a3) * x + 2.0 * self.a2
    }
}

/// Coefficients of the s-stress as a function of coordinate `k` of point `i`
/// with every other coordinate held fixed. `f(x_ik)` equals [`super::stress_s`]
/// exactly, including the pairs that do not involve `i`.
pub fn quartic_coeffs(
    x: &PointSet,
    obs: &NoisyObservation,
    i: usize,
    k: usize,
) -> Result<QuarticCoeffs> {
    let n = obs.size();
    if x.len() != n {
        return Err(EdmError::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if i >= n || k >= x.dim() {
        return Err(EdmError::InvalidArgument(format!(
            "coordinate ({i}, {k}) outside a {}x{n} configuration",
            x.dim()
        )));
    }
    let d = assemble_edm(x);
    let mut rest = 0.0;
    for (a, b) in obs.mask().observed_pairs() {
        if a != i && b != i {
            let r = d.get(a, b) - obs.value(a, b);
            rest += r * r;
        }
    }
    let c = x.coords();
    let mut q = coeffs_for(c, &d, obs, i, k);
    q.a0 += rest;
    Ok(q)
}

/// Terms of the pairs `(i, j)` only; `d` holds the current squared distances.
fn coeffs_for(
    c: &DMatrix<f64>,
    d: &crate::edm::DistanceMatrix,
    obs: &NoisyObservation,
    i: usize,
    k: usize,
) -> QuarticCoeffs {
    let mut q = QuarticCoeffs::default();
    let xi = c[(k, i)];
    for j in 0..obs.size() {
        if j == i || !obs.mask().is_observed(i, j) {
            continue;
        }
        let p = c[(k, j)];
        let t = xi - p;
        // squared distance over the other coordinates
        let other = (d.get(i, j) - t * t).max(0.0);
        let beta = other - obs.value(i, j);
        let p2 = p * p;
        q.a4 += 1.0;
        q.a3 -= 4.0 * p;
        q.a2 += 6.0 * p2 + 2.0 * beta;
        q.a1 -= 4.0 * p2 * p + 4.0 * beta * p;
        q.a0 += p2 * p2 + 2.0 * beta * p2 + beta * beta;
    }
    q
}

/// Real roots of `x^3 + b x^2 + c x + d`.
fn monic_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    let mut roots = Vec::with_capacity(3);
    if disc > 0.0 {
        let s = disc.sqrt();
        roots.push((-0.5 * q + s).cbrt() + (-0.5 * q - s).cbrt() - shift);
    } else if p == 0.0 {
        roots.push(-shift);
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for r in 0..3 {
            let angle = theta - 2.0 * std::f64::consts::PI * r as f64 / 3.0;
            roots.push(m * angle.cos() - shift);
        }
    }
    roots
}

/// Global minimizer of a quartic with `a4 > 0`. Candidates are the real
/// stationary points from the closed-form cubic, polished by Newton steps.
/// When two candidates give values within `1e-12` relative of each other the
/// smaller `x` wins. Returns `None` when `a4 <= 0` (no global minimum).
pub fn minimize_quartic(q: &QuarticCoeffs) -> Option<f64> {
    if !(q.a4 > 0.0) || !q.a4.is_finite() {
        return None;
    }
    let s = 4.0 * q.a4;
    let mut cands = monic_cubic_roots(3.0 * q.a3 / s, 2.0 * q.a2 / s, q.a1 / s);
    for x in cands.iter_mut() {
        for _ in 0..8 {
            let g = q.derivative(*x);
            let h = q.second_derivative(*x);
            if h <= 0.0 || g == 0.0 {
                break;
            }
            let next = *x - g / h;
            if !next.is_finite() || q.eval(next) > q.eval(*x) {
                break;
            }
            *x = next;
        }
    }
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = cands[0];
    let mut best_val = q.eval(best);
    for &x in &cands[1..] {
        let v = q.eval(x);
        let tie = 1e-12 * best_val.abs().max(v.abs()).max(f64::MIN_POSITIVE);
        if v < best_val - tie {
            best = x;
            best_val = v;
        }
    }
    Some(best)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SStressInit {
    /// All coordinates start at zero.
    Zero,
    /// Gaussian coordinates scaled to the observed distances.
    Random { seed: u64 },
    /// Start from a given `d x n` configuration.
    Given(PointSet),
}

#[derive(Debug, Clone)]
pub struct SStressOptions {
    pub init: SStressInit,
    pub max_sweeps: usize,
    /// Stop when one sweep lowers the objective by less than `tol` relative.
    pub tol: f64,
    /// Record the objective after every coordinate update instead of once per sweep.
    pub record_steps: bool,
}

impl Default for SStressOptions {
    fn default() -> Self {
        SStressOptions {
            init: SStressInit::Zero,
            max_sweeps: 200,
            tol: 1e-8,
            record_steps: false,
        }
    }
}

fn initial_points(obs: &NoisyObservation, dim: usize, init: &SStressInit) -> Result<DMatrix<f64>> {
    let n = obs.size();
    match init {
        SStressInit::Zero => Ok(DMatrix::zeros(dim, n)),
        SStressInit::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            // E|x_i - x_j|^2 = 2 dim sigma^2 matches the mean observation
            let sigma = (obs.mean_observed() / (2.0 * dim as f64)).sqrt().max(1e-3);
            Ok(DMatrix::from_fn(dim, n, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            }))
        }
        SStressInit::Given(p) => {
            if p.len() != n || p.dim() != dim {
                return Err(EdmError::DimensionMismatch {
                    expected: n,
                    found: p.len(),
                });
            }
            Ok(p.coords().clone())
        }
    }
}

/// Minimizes s-stress by cycling over points and coordinates, solving each
/// one-dimensional quartic exactly. The objective never increases.
pub fn alternating_descent(
    obs: &NoisyObservation,
    dim: usize,
    opts: &SStressOptions,
) -> Result<CompletionResult> {
    let n = obs.size();
    if n < 2 {
        return Err(EdmError::TooSmall {
            what: "matrix size n",
            min: 2,
            value: n,
        });
    }
    if dim == 0 {
        return Err(EdmError::TooSmall {
            what: "embedding dimension",
            min: 1,
            value: 0,
        });
    }
    let mut x = initial_points(obs, dim, &opts.init)?;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && obs.mask().is_observed(i, j)).collect())
        .collect();
    let scale: f64 = obs
        .mask()
        .observed_pairs()
        .iter()
        .map(|&(i, j)| obs.value(i, j).powi(2))
        .sum();
    let floor = scale * 1e-30;

    let mut dist = assemble_edm(&PointSet::new(x.clone())?).into_matrix();
    let total = |dist: &DMatrix<f64>| -> f64 {
        obs.mask()
            .observed_pairs()
            .iter()
            .map(|&(i, j)| (dist[(i, j)] - obs.value(i, j)).powi(2))
            .sum()
    };
    let mut current = total(&dist);
    let mut trace = vec![current];
    let mut converged = current <= floor;
    let mut sweeps = 0;

    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        let start = current;
        for i in 0..n {
            if neighbors[i].is_empty() {
                continue;
            }
            for k in 0..dim {
                let xi = x[(k, i)];
                let mut q = QuarticCoeffs::default();
                let mut own = 0.0;
                for &j in &neighbors[i] {
                    let p = x[(k, j)];
                    let t = xi - p;
                    let dij = dist[(i, j)];
                    own += (dij - obs.value(i, j)).powi(2);
                    let beta = (dij - t * t).max(0.0) - obs.value(i, j);
                    let p2 = p * p;
                    q.a4 += 1.0;
                    q.a3 -= 4.0 * p;
                    q.a2 += 6.0 * p2 + 2.0 * beta;
                    q.a1 -= 4.0 * p2 * p + 4.0 * beta * p;
                    q.a0 += p2 * p2 + 2.0 * beta * p2 + beta * beta;
                }
                q.a0 += (current - own).max(0.0);
                let Some(new) = minimize_quartic(&q) else {
                    continue;
                };
                // only move when the quartic agrees the step helps
                if q.eval(new) > q.eval(xi) {
                    continue;
                }
                x[(k, i)] = new;
                let mut new_own = 0.0;
                for &j in &neighbors[i] {
                    let t_old = xi - x[(k, j)];
                    let t_new = new - x[(k, j)];
                    let v = (dist[(i, j)] - t_old * t_old + t_new * t_new).max(0.0);
                    dist[(i, j)] = v;
                    dist[(j, i)] = v;
                    new_own += (v - obs.value(i, j)).powi(2);
                }
                current = (current - own + new_own).max(0.0);
                if opts.record_steps {
                    trace.push(current);
                }
            }
        }
        // refresh to keep the running sums from drifting
        dist = assemble_edm(&PointSet::new(x.clone())?).into_matrix();
        current = total(&dist);
        if !opts.record_steps {
            trace.push(current);
        }
        if current <= floor || start - current <= opts.tol * start {
            converged = true;
        }
    }

    let points = PointSet::new(x)?;
    let edm = assemble_edm(&points);
    Ok(CompletionResult {
        edm,
        points: Some(points),
        iterations: sweeps,
        objective_trace: trace,
        converged,
    })
}
