//! Localization from unlabeled distances.
//!
//! * Echo sorting: decide which echo arrival times at different microphones
//!   come from the same image source by testing whether the candidate
//!   distances extend the array's EDM to a (nearly) Euclidean one.
//! * A shoebox image-source simulator that produces test data.
//! * 1D turnpike recovery: points on a line from their unlabeled distances.

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::completion::{alternating_descent, NoisyObservation, SStressInit, SStressOptions};
use crate::edm::{assemble_edm, is_edm, numerical_rank, DistanceMatrix, PointSet};
use crate::embedding::{classical_mds, procrustes};
use crate::error::{EdmError, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;

/// Per-microphone echo arrival times (seconds) and the propagation speed.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoSet {
    arrival_times: Vec<Vec<f64>>,
    speed: f64,
}

impl EchoSet {
    pub fn new(arrival_times: Vec<Vec<f64>>, speed: f64) -> Result<Self> {
        if arrival_times.is_empty() {
            return Err(EdmError::TooSmall {
                what: "microphone count",
                min: 1,
                value: 0,
            });
        }
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(EdmError::InvalidArgument(format!("speed must be positive, got {speed}")));
        }
        for (i, times) in arrival_times.iter().enumerate() {
            if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(EdmError::InvalidArgument(format!(
                    "microphone {i}: arrival times must be finite and nonnegative"
                )));
            }
            if times.windows(2).any(|w| w[1] < w[0]) {
                return Err(EdmError::InvalidArgument(format!(
                    "microphone {i}: arrival times must be sorted ascending"
                )));
            }
        }
        Ok(EchoSet { arrival_times, speed })
    }

    pub fn microphones(&self) -> usize {
        self.arrival_times.len()
    }

    pub fn times(&self, mic: usize) -> &[f64] {
        &self.arrival_times[mic]
    }

    pub fn arrival_times(&self) -> &[Vec<f64>] {
        &self.arrival_times
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }
}

/// A plane through `point` with unit `normal` (pointing out of the room).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallPlane {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl WallPlane {
    /// Signed offset `<n, p>` of the plane along its normal.
    pub fn offset(&self) -> f64 {
        self.normal.dot(&self.point)
    }

    pub fn distance_to(&self, x: &Vector3<f64>) -> f64 {
        (self.normal.dot(&(x - self.point))).abs()
    }
}

/// Axis-aligned box `[0, L_x] x [0, L_y] x [0, L_z]` with one source and a
/// microphone array strictly inside.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    extents: [f64; 3],
    source: Vector3<f64>,
    microphones: PointSet,
}

impl RoomSpec {
    pub fn new(extents: [f64; 3], source: Vector3<f64>, microphones: PointSet) -> Result<Self> {
        if extents.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(EdmError::InvalidArgument("room extents must be positive".into()));
        }
        if microphones.dim() != 3 {
            return Err(EdmError::DimensionMismatch {
                expected: 3,
                found: microphones.dim(),
            });
        }
        let inside = |p: &[f64]| p.iter().zip(&extents).all(|(&x, &l)| x > 0.0 && x < l);
        if !inside(source.as_slice()) {
            return Err(EdmError::InvalidArgument("source must lie strictly inside the room".into()));
        }
        for i in 0..microphones.len() {
            if !inside(microphones.point(i).as_slice()) {
                return Err(EdmError::InvalidArgument(format!(
                    "microphone {i} must lie strictly inside the room"
                )));
            }
        }
        Ok(RoomSpec {
            extents,
            source,
            microphones,
        })
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn source(&self) -> Vector3<f64> {
        self.source
    }

    pub fn microphones(&self) -> &PointSet {
        &self.microphones
    }

    /// The six walls in the order `x = 0, x = L_x, y = 0, y = L_y, z = 0, z = L_z`.
    pub fn walls(&self) -> [WallPlane; 6] {
        let mut walls = [WallPlane {
            point: Vector3::zeros(),
            normal: Vector3::zeros(),
        }; 6];
        for axis in 0..3 {
            let mut n = Vector3::zeros();
            n[axis] = -1.0;
            walls[2 * axis] = WallPlane {
                point: Vector3::zeros(),
                normal: n,
            };
            let mut p = Vector3::zeros();
            p[axis] = self.extents[axis];
            walls[2 * axis + 1] = WallPlane {
                point: p,
                normal: -n,
            };
        }
        walls
    }
}

/// Mirror image of `source` across the plane through `wall_point` with unit
/// normal `wall_normal`: `s + 2 <p - s, n> n`.
pub fn image_source(
    source: &Vector3<f64>,
    wall_point: &Vector3<f64>,
    wall_normal: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let norm = wall_normal.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(EdmError::NonUnitNormal(norm));
    }
    Ok(source + wall_normal * (2.0 * (wall_point - source).dot(wall_normal)))
}

/// An image source together with the walls it was reflected across, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    pub position: Vector3<f64>,
    pub walls: Vec<usize>,
}

/// Image sources up to `order` (1 or 2). Second-order images compose two
/// reflections across distinct walls; positions that coincide within 1e-9 m
/// are kept once.
pub fn image_sources(room: &RoomSpec, order: usize) -> Result<Vec<ImageSource>> {
    if !(1..=2).contains(&order) {
        return Err(EdmError::OutOfRange {
            what: "reflection order",
            value: order,
            lo: 1,
            hi: 2,
        });
    }
    let walls = room.walls();
    let mut out: Vec<ImageSource> = Vec::new();
    for (w, wall) in walls.iter().enumerate() {
        out.push(ImageSource {
            position: image_source(&room.source, &wall.point, &wall.normal)?,
            walls: vec![w],
        });
    }
    if order == 2 {
        for a in 0..6 {
            for b in 0..6 {
                if a == b {
                    continue;
                }
                let p = image_source(&out[a].position, &walls[b].point, &walls[b].normal)?;
                if out.iter().all(|img| (img.position - p).norm() > 1e-9) {
                    out.push(ImageSource {
                        position: p,
                        walls: vec![a, b],
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Simulated echoes plus the hidden ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedEchoes {
    pub echoes: EchoSet,
    pub images: Vec<ImageSource>,
    /// `labels[mic][t]` is the image index that produced echo `t`, or `None`
    /// for a decoy.
    pub labels: Vec<Vec<Option<usize>>>,
}

impl SimulatedEchoes {
    /// Index of the echo from `image` at `mic`.
    pub fn echo_index(&self, mic: usize, image: usize) -> Option<usize> {
        self.labels[mic].iter().position(|&l| l == Some(image))
    }
}

/// Arrival times `|s~ - r_i| / c` of every image source at every microphone
/// (the direct path is not included), with uniform jitter in `[-jitter, jitter]`
/// seconds and `decoys` spurious times per microphone drawn uniformly over the
/// span of that microphone's true echoes.
pub fn simulate_echoes(
    room: &RoomSpec,
    order: usize,
    jitter: f64,
    decoys: usize,
    speed: f64,
    seed: u64,
) -> Result<SimulatedEchoes> {
    if !(jitter >= 0.0) {
        return Err(EdmError::InvalidArgument(format!("jitter must be nonnegative, got {jitter}")));
    }
    let images = image_sources(room, order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all_times = Vec::new();
    let mut labels = Vec::new();
    for i in 0..room.microphones.len() {
        let r = room.microphones.point(i);
        let r = Vector3::new(r[0], r[1], r[2]);
        let mut entries: Vec<(f64, Option<usize>)> = images
            .iter()
            .enumerate()
            .map(|(k, img)| {
                let t = (img.position - r).norm() / speed;
                let e = if jitter > 0.0 {
                    rng.random_range(-jitter..=jitter)
                } else {
                    0.0
                };
                ((t + e).max(0.0), Some(k))
            })
            .collect();
        let lo = entries.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let hi = entries.iter().map(|e| e.0).fold(0.0, f64::max);
        for _ in 0..decoys {
            entries.push((rng.random_range(lo..=hi), None));
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        all_times.push(entries.iter().map(|e| e.0).collect());
        labels.push(entries.iter().map(|e| e.1).collect());
    }
    Ok(SimulatedEchoes {
        echoes: EchoSet::new(all_times, speed)?,
        images,
        labels,
    })
}

/// Appends a point with squared distances `d_vec` to `d`.
pub fn augment(d: &DistanceMatrix, d_vec: &[f64]) -> Result<DMatrix<f64>> {
    let n = d.size();
    if d_vec.len() != n {
        return Err(EdmError::DimensionMismatch {
            expected: n,
            found: d_vec.len(),
        });
    }
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(d.as_matrix());
    for (i, &v) in d_vec.iter().enumerate() {
        aug[(i, n)] = v;
        aug[(n, i)] = v;
    }
    Ok(aug)
}

/// Frobenius distance from `[D d; d^T 0]` to the nearest EDM of points in
/// `dim` dimensions, found by s-stress descent (50 sweeps) warm started from
/// classical MDS. Zero for an empty `D`.
pub fn sstress_augmented(d: &DistanceMatrix, d_vec: &[f64], dim: usize) -> Result<f64> {
    if d.size() == 0 || (d.size() == 1 && d.get(0, 0) == 0.0 && d_vec.is_empty()) {
        return Ok(0.0);
    }
    let aug = augment(d, d_vec)?;
    let (aug_edm, _) = DistanceMatrix::new_clamped(aug)?;
    let n = aug_edm.size();
    let dim = dim.clamp(1, n - 1);
    let start = classical_mds(&aug_edm, dim)?;
    let obs = NoisyObservation::complete(&aug_edm);
    let opts = SStressOptions {
        init: SStressInit::Given(start),
        max_sweeps: 50,
        tol: 1e-6,
        record_steps: false,
    };
    let fit = alternating_descent(&obs, dim, &opts)?;
    let stress = fit.objective_trace.last().copied().unwrap_or(0.0);
    // each unordered pair appears twice in the Frobenius norm
    Ok((2.0 * stress).sqrt())
}

/// Largest distance between two microphones.
pub fn array_diameter(mics: &PointSet) -> f64 {
    let d = assemble_edm(mics);
    d.as_matrix().iter().copied().fold(0.0, f64::max).sqrt()
}

/// Window `diameter / c`, widened by `2 * jitter` for noisy times.
pub fn auto_window(mics: &PointSet, speed: f64, jitter: f64) -> f64 {
    array_diameter(mics) / speed + 2.0 * jitter
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoSortResult {
    /// Chosen arrival time per microphone, the anchor first.
    pub times: Vec<f64>,
    /// Index of the chosen time in each candidate list (microphones 2..m).
    pub indices: Vec<usize>,
    /// Squared distances `(c t)^2`.
    pub squared_distances: Vec<f64>,
    pub score: f64,
    /// Number of combinations scored.
    pub evaluated: usize,
}

/// Scores every combination of one candidate per microphone within `window`
/// seconds of the anchor time `t1` and returns the one whose augmented matrix
/// is closest to an EDM. Ties go to the lexicographically first combination.
pub fn echo_sort(
    mics: &PointSet,
    t1: f64,
    candidate_times: &[Vec<f64>],
    speed: f64,
    window: f64,
) -> Result<EchoSortResult> {
    let m = mics.len();
    if candidate_times.len() + 1 != m {
        return Err(EdmError::DimensionMismatch {
            expected: m - 1,
            found: candidate_times.len(),
        });
    }
    let d = assemble_edm(mics);
    let pools: Vec<Vec<usize>> = candidate_times
        .iter()
        .map(|ts| (0..ts.len()).filter(|&k| (ts[k] - t1).abs() <= window).collect())
        .collect();
    if let Some(i) = pools.iter().position(|p| p.is_empty()) {
        return Err(EdmError::NoCandidates(i + 1));
    }

    let mut choice = vec![0usize; pools.len()];
    let mut best: Option<EchoSortResult> = None;
    let mut evaluated = 0;
    loop {
        let mut times = vec![t1];
        times.extend(choice.iter().enumerate().map(|(i, &c)| candidate_times[i][pools[i][c]]));
        let sq: Vec<f64> = times.iter().map(|t| (speed * t).powi(2)).collect();
        let score = sstress_augmented(&d, &sq, mics.dim())?;
        evaluated += 1;
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(EchoSortResult {
                times,
                indices: choice.iter().enumerate().map(|(i, &c)| pools[i][c]).collect(),
                squared_distances: sq,
                score,
                evaluated: 0,
            });
        }
        // odometer over the pools, last microphone fastest
        let mut pos = pools.len();
        loop {
            if pos == 0 {
                let mut out = best.expect("at least one combination");
                out.evaluated = evaluated;
                return Ok(out);
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < pools[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Multilateration by classical MDS of the augmented matrix, aligned to the
/// array with Procrustes on the microphones.
pub fn locate_image_source(mics: &PointSet, d_vec: &[f64]) -> Result<Vector3<f64>> {
    if mics.dim() != 3 {
        return Err(EdmError::DimensionMismatch {
            expected: 3,
            found: mics.dim(),
        });
    }
    let m = mics.len();
    let aug = augment(&assemble_edm(mics), d_vec)?;
    let (aug, _) = DistanceMatrix::new_clamped(aug)?;
    let x = classical_mds(&aug, 3.min(m))?;
    let x = if x.dim() < 3 {
        let mut padded = DMatrix::zeros(3, m + 1);
        padded.view_mut((0, 0), (x.dim(), m + 1)).copy_from(x.coords());
        padded
    } else {
        x.into_coords()
    };
    let t = procrustes(&x.columns(0, m).into_owned(), mics.coords())?;
    let p = t.apply_point(&x.column(m).into_owned());
    Ok(Vector3::new(p[0], p[1], p[2]))
}

/// Walls from first-order image sources: the plane bisecting loudspeaker and image.
pub fn reconstruct_walls(
    image_sources: &[Vector3<f64>],
    loudspeaker: &Vector3<f64>,
) -> Result<Vec<WallPlane>> {
    image_sources
        .iter()
        .map(|img| {
            let gap = img - loudspeaker;
            let len = gap.norm();
            if len <= 1e-12 * (1.0 + loudspeaker.norm()) {
                return Err(EdmError::DegenerateImageSource);
            }
            Ok(WallPlane {
                point: (img + loudspeaker) * 0.5,
                normal: gap / len,
            })
        })
        .collect()
}

/// An image source found by [`reconstruct_room`].
#[derive(Debug, Clone, PartialEq)]
pub struct FoundImage {
    pub position: Vector3<f64>,
    /// Echo index used at each microphone.
    pub echo_indices: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct RoomOptions {
    /// Window in seconds; `None` uses [`auto_window`] with `expected_jitter`.
    pub window: Option<f64>,
    pub expected_jitter: f64,
    /// Accept a combination when `score < tau * ||D_aug||_F`.
    pub tau: f64,
    /// Stop after this many image sources.
    pub max_images: usize,
}

impl Default for RoomOptions {
    fn default() -> Self {
        RoomOptions {
            window: None,
            expected_jitter: 0.0,
            tau: 1e-3,
            max_images: usize::MAX,
        }
    }
}

/// Greedy image-source extraction. Every unused echo at the first microphone
/// is an anchor; each round sorts echoes for all anchors, accepts the best
/// scoring combination below the threshold, and removes its echoes from
/// further testing. Stops when no anchor passes.
pub fn reconstruct_room(mics: &PointSet, echoes: &EchoSet, opts: &RoomOptions) -> Result<Vec<FoundImage>> {
    let m = mics.len();
    if echoes.microphones() != m {
        return Err(EdmError::DimensionMismatch {
            expected: m,
            found: echoes.microphones(),
        });
    }
    if m < 2 {
        return Err(EdmError::TooSmall {
            what: "microphone count",
            min: 2,
            value: m,
        });
    }
    let window = opts
        .window
        .unwrap_or_else(|| auto_window(mics, echoes.speed(), opts.expected_jitter));
    let d = assemble_edm(mics);
    let mut used: Vec<Vec<bool>> = (0..m).map(|i| vec![false; echoes.times(i).len()]).collect();
    let mut found = Vec::new();

    // Best combination per anchor, in original echo indices. Removing echoes
    // can only worsen an anchor's best, so a cached result stays exact until
    // one of its echoes is taken. `None` means the anchor is out of play.
    let sort_anchor = |a: usize, used: &[Vec<bool>]| -> Result<Option<(Vec<usize>, EchoSortResult, f64)>> {
        let mut maps = Vec::with_capacity(m - 1);
        let mut lists = Vec::with_capacity(m - 1);
        for i in 1..m {
            let idx: Vec<usize> = (0..echoes.times(i).len()).filter(|&k| !used[i][k]).collect();
            lists.push(idx.iter().map(|&k| echoes.times(i)[k]).collect::<Vec<f64>>());
            maps.push(idx);
        }
        match echo_sort(mics, echoes.times(0)[a], &lists, echoes.speed(), window) {
            Ok(res) => {
                let mut idx = vec![a];
                idx.extend(res.indices.iter().enumerate().map(|(i, &k)| maps[i][k]));
                let aug_norm = augment(&d, &res.squared_distances)?.norm();
                Ok(Some((idx, res, aug_norm)))
            }
            Err(EdmError::NoCandidates(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut cache = (0..echoes.times(0).len())
        .map(|a| sort_anchor(a, &used))
        .collect::<Result<Vec<_>>>()?;

    while found.len() < opts.max_images {
        let best = cache
            .iter()
            .enumerate()
            .filter_map(|(a, c)| c.as_ref().map(|c| (a, c)))
            .filter(|(_, (_, res, norm))| res.score < opts.tau * norm)
            .min_by(|x, y| x.1 .1.score.total_cmp(&y.1 .1.score).then(x.0.cmp(&y.0)))
            .map(|(a, _)| a);
        let Some(a) = best else {
            break;
        };
        let (echo_indices, res, _) = cache[a].take().expect("selected anchor is cached");
        for (mic, &e) in echo_indices.iter().enumerate() {
            used[mic][e] = true;
        }
        found.push(FoundImage {
            position: locate_image_source(mics, &res.squared_distances)?,
            echo_indices,
            score: res.score,
        });
        for b in 0..cache.len() {
            let stale = cache[b]
                .as_ref()
                .is_some_and(|(idx, _, _)| idx.iter().enumerate().any(|(mic, &e)| used[mic][e]));
            if stale {
                cache[b] = sort_anchor(b, &used)?;
            }
        }
    }
    Ok(found)
}

/// Unlabeled multiset of `n (n - 1) / 2` nonnegative plain distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMultiset {
    values: Vec<f64>,
    points: usize,
}

impl DistanceMultiset {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(EdmError::InvalidArgument("distances must be finite and nonnegative".into()));
        }
        let len = values.len();
        let n = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
        if n * (n - 1) / 2 != len {
            return Err(EdmError::InvalidArgument(format!(
                "{len} distances is not n(n-1)/2 for any integer n"
            )));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(DistanceMultiset { values, points: n })
    }

    /// All pairwise distances of a 1D point set.
    pub fn from_points(xs: &[f64]) -> Result<Self> {
        let mut v = Vec::new();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                v.push((xs[i] - xs[j]).abs());
            }
        }
        DistanceMultiset::new(v)
    }

    /// Sorted ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point_count(&self) -> usize {
        self.points
    }
}

pub const TURNPIKE_MAX_POINTS: usize = 12;

/// Sorted, shifted to start at 0, and reflected when the mirror image is
/// lexicographically smaller.
pub fn canonicalize_line(points: &[f64]) -> Vec<f64> {
    let mut xs = points.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let Some(&lo) = xs.first() else {
        return xs;
    };
    let xs: Vec<f64> = xs.iter().map(|x| x - lo).collect();
    let len = *xs.last().expect("nonempty");
    let mut mirror: Vec<f64> = xs.iter().rev().map(|x| len - x).collect();
    mirror[0] = 0.0;
    for (a, b) in xs.iter().zip(&mirror) {
        if (a - b).abs() > 1e-12 * len.max(1.0) {
            return if b < a { mirror } else { xs };
        }
    }
    xs
}

struct Turnpike {
    tol: f64,
    solutions: Vec<Vec<f64>>,
}

impl Turnpike {
    fn take(remaining: &mut Vec<f64>, value: f64, tol: f64) -> bool {
        // remaining is sorted ascending; find any entry within tol
        let k = remaining.partition_point(|&v| v < value - tol);
        if k < remaining.len() && (remaining[k] - value).abs() <= tol {
            remaining.remove(k);
            true
        } else {
            false
        }
    }

    fn admissible(placed: &[f64]) -> bool {
        let n = placed.len();
        let d = DMatrix::from_fn(n, n, |i, j| (placed[i] - placed[j]).powi(2));
        let d = DistanceMatrix::new(d).expect("squared distances are valid");
        is_edm(&d, 1e-8).is_edm && numerical_rank(d.as_matrix(), 1e-9) <= 3
    }

    fn search(&mut self, placed: &mut Vec<f64>, remaining: &mut Vec<f64>, len: f64) {
        let Some(&delta) = remaining.last() else {
            let c = canonicalize_line(placed);
            if !self
                .solutions
                .iter()
                .any(|s| s.iter().zip(&c).all(|(a, b)| (a - b).abs() <= self.tol))
            {
                self.solutions.push(c);
            }
            return;
        };
        let mut tried: Vec<f64> = Vec::new();
        for y in [delta, len - delta] {
            if tried.iter().any(|t| (t - y).abs() <= self.tol) {
                continue;
            }
            tried.push(y);
            let mut rest = remaining.clone();
            let ok = placed.iter().all(|&p| Self::take(&mut rest, (y - p).abs(), self.tol));
            if !ok {
                continue;
            }
            placed.push(y);
            if Self::admissible(placed) {
                self.search(placed, &mut rest, len);
            }
            placed.pop();
        }
    }
}

/// All 1D configurations (canonical form) whose pairwise distances equal the
/// multiset. Backtracking places the largest unexplained distance next, at
/// either end; partial labelings must stay Euclidean with EDM rank at most 3.
/// An inconsistent multiset gives an empty list.
pub fn turnpike_recover(distances: &DistanceMultiset) -> Result<Vec<Vec<f64>>> {
    let n = distances.point_count();
    if n > TURNPIKE_MAX_POINTS {
        return Err(EdmError::OutOfRange {
            what: "turnpike point count",
            value: n,
            lo: 1,
            hi: TURNPIKE_MAX_POINTS,
        });
    }
    let mut remaining = distances.values().to_vec();
    let Some(len) = remaining.pop() else {
        return Ok(vec![vec![0.0]]);
    };
    let mut tp = Turnpike {
        tol: 1e-9 * len.max(1e-300),
        solutions: Vec::new(),
    };
    let mut placed = vec![0.0, len];
    if len <= 0.0 {
        // all distances zero: coincident points are not a valid configuration
        return Ok(Vec::new());
    }
    tp.search(&mut placed, &mut remaining, len);
    tp.solutions
        .sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(tp.solutions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube_room() -> RoomSpec {
        let mic = PointSet::from_points(&[vec![0.5, 0.5, 0.5]]).unwrap();
        RoomSpec::new([1.0; 3], Vector3::new(0.5, 0.5, 0.5), mic).unwrap()
    }

    #[test]
    fn mirror_examples() {
        let s = Vector3::new(1.0, 1.0, 1.0);
        let img = image_source(&s, &Vector3::zeros(), &Vector3::new(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!(img, Vector3::new(-1.0, 1.0, 1.0));
        let on = Vector3::new(0.0, 2.0, 3.0);
        assert_eq!(image_source(&on, &Vector3::zeros(), &Vector3::x()).unwrap(), on);
        assert!(matches!(
            image_source(&s, &Vector3::zeros(), &Vector3::new(2.0, 0.0, 0.0)),
            Err(EdmError::NonUnitNormal(_))
        ));
        let p = Vector3::new(0.3, -1.0, 2.0);
        let n = Vector3::new(1.0, 2.0, -2.0) / 3.0;
        let twice = image_source(&image_source(&s, &p, &n).unwrap(), &p, &n).unwrap();
        assert!((twice - s).norm() < 1e-12);
    }

    #[test]
    fn unit_cube_first_order_times() {
        let sim = simulate_echoes(&unit_cube_room(), 1, 0.0, 0, SPEED_OF_SOUND, 0).unwrap();
        let t = sim.echoes.times(0);
        assert_eq!(t.len(), 6);
        for &v in t {
            assert!((v - 1.0 / SPEED_OF_SOUND).abs() < 1e-15);
        }
    }

    #[test]
    fn second_order_counts() {
        let mic = PointSet::from_points(&[vec![1.0, 1.2, 0.7]]).unwrap();
        let room = RoomSpec::new([3.0, 4.0, 2.5], Vector3::new(1.1, 2.0, 1.3), mic).unwrap();
        assert_eq!(image_sources(&room, 1).unwrap().len(), 6);
        // 30 ordered compositions; perpendicular pairs commute, leaving 12 + 6
        assert_eq!(image_sources(&room, 2).unwrap().len(), 6 + 18);
        assert!(image_sources(&room, 3).is_err());
    }

    #[test]
    fn walls_round_trip() {
        let s = Vector3::new(0.4, 1.7, 0.9);
        let walls = [
            (Vector3::new(0.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0)),
            (Vector3::new(2.0, 1.0, 0.5), Vector3::new(0.6, 0.0, 0.8)),
        ];
        let imgs: Vec<_> = walls.iter().map(|(p, n)| image_source(&s, p, n).unwrap()).collect();
        let rec = reconstruct_walls(&imgs, &s).unwrap();
        for ((p, n), w) in walls.iter().zip(&rec) {
            assert!((w.normal - n).norm() < 1e-10);
            assert!((w.offset() - n.dot(p)).abs() < 1e-10);
        }
        assert!(matches!(reconstruct_walls(&[s], &s), Err(EdmError::DegenerateImageSource)));
    }

    #[test]
    fn augmented_score_edge_cases() {
        assert_eq!(sstress_augmented(&DistanceMatrix::zeros(0), &[], 3).unwrap(), 0.0);
        let d = DistanceMatrix::zeros(2);
        assert!(sstress_augmented(&d, &[1.0], 3).is_err());
    }

    #[test]
    fn single_candidate_is_returned() {
        let mics = PointSet::from_points(&[
            vec![0.0, 0.0, 0.0],
            vec![0.3, 0.0, 0.0],
            vec![0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.3],
        ])
        .unwrap();
        let cands = vec![vec![0.010], vec![0.011], vec![0.0105]];
        let r = echo_sort(&mics, 0.0101, &cands, SPEED_OF_SOUND, 0.01).unwrap();
        assert_eq!(r.indices, vec![0, 0, 0]);
        assert_eq!(r.evaluated, 1);
        let far = vec![vec![1.0], vec![0.011], vec![0.0105]];
        assert!(matches!(
            echo_sort(&mics, 0.0101, &far, SPEED_OF_SOUND, 0.01),
            Err(EdmError::NoCandidates(1))
        ));
    }

    #[test]
    fn turnpike_examples() {
        let ms = DistanceMultiset::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(turnpike_recover(&ms).unwrap(), vec![vec![0.0, 1.0, 3.0]]);
        let ms = DistanceMultiset::new(vec![1.0, 4.0, 6.0, 3.0, 5.0, 2.0]).unwrap();
        assert_eq!(turnpike_recover(&ms).unwrap(), vec![vec![0.0, 1.0, 4.0, 6.0]]);
        let ms = DistanceMultiset::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(turnpike_recover(&ms).unwrap().is_empty());
        assert!(DistanceMultiset::new(vec![1.0, 2.0]).is_err());
        assert_eq!(turnpike_recover(&DistanceMultiset::new(vec![]).unwrap()).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn canonical_form() {
        assert_eq!(canonicalize_line(&[5.0, 3.0, 0.0]), vec![0.0, 2.0, 5.0]);
        assert_eq!(canonicalize_line(&[7.0, 2.0, 6.0]), vec![0.0, 1.0, 5.0]);
    }

    #[test]
    fn echo_set_validation() {
        assert!(EchoSet::new(vec![vec![0.2, 0.1]], 343.0).is_err());
        assert!(EchoSet::new(vec![], 343.0).is_err());
        assert!(EchoSet::new(vec![vec![0.1]], 0.0).is_err());
        assert!(EchoSet::new(vec![vec![0.1, 0.2]], 343.0).is_ok());
    }
}
