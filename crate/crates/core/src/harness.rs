//! Seeded Monte Carlo comparisons of the completion methods, the Swiss trains
//! demo, and long-format CSV output.
//!
//! Every trial draws its geometry from its own ChaCha stream keyed by
//! `(seed, trial)`, so adding methods, settings or jitter levels never changes
//! the sampled points. Within a trial all settings share the geometry: the
//! deletion sets are nested prefixes of one random pair ordering, MDU source
//! sets are nested prefixes of one source draw, and every jitter level scales
//! the same unit noise matrix.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completion::{complete_edm, Method, NoisyObservation, SolverOptions};
use crate::edm::{assemble_edm, sym_eigen_by_magnitude, DistanceMatrix, ObservationMask, PointSet};
use crate::edm::{gram_from_edm, GramCentering};
use crate::embedding::classical_mds;
use crate::error::{EdmError, Result};
use crate::unfolding::mdu_mask;
use crate::unlabeled::{reconstruct_room, reconstruct_walls, simulate_echoes, RoomOptions, RoomSpec, SPEED_OF_SOUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[serde(alias = "random-deletion")]
    RandomDeletion,
    Mdu,
}

/// Where the jitter is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterOn {
    /// `d~ = d + e` on squared distances.
    #[default]
    Squared,
    /// `d~ = (sqrt(d) + e)^2`.
    Sqrt,
}

fn default_threshold() -> f64 {
    0.01
}

fn default_jitter() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Point count for random deletion.
    #[serde(default)]
    pub n: Option<usize>,
    /// Microphone count for MDU.
    #[serde(default)]
    pub m: Option<usize>,
    pub d: usize,
    pub trials: usize,
    #[serde(default)]
    pub deletion_counts: Vec<usize>,
    #[serde(default)]
    pub k_values: Vec<usize>,
    #[serde(default = "default_jitter")]
    pub jitter_levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    #[serde(default)]
    pub jitter_on: JitterOn,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EdmError::InvalidArgument(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.success_threshold > 0.0) {
            return bad(format!("success_threshold must be positive, got {}", self.success_threshold));
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if self.jitter_levels.is_empty() || self.jitter_levels.iter().any(|j| !(*j >= 0.0) || !j.is_finite()) {
            return bad("jitter_levels must be a nonempty list of finite nonnegative values".into());
        }
        match self.scenario {
            Scenario::RandomDeletion => {
                let Some(n) = self.n else {
                    return bad("random_deletion needs n".into());
                };
                if n <= self.d {
                    return bad(format!("n = {n} must exceed d = {}", self.d));
                }
                if self.deletion_counts.is_empty() {
                    return bad("deletion_counts is empty".into());
                }
                let pairs = n * (n - 1) / 2;
                if let Some(&c) = self.deletion_counts.iter().find(|&&c| c > pairs) {
                    return bad(format!("cannot delete {c} of {pairs} pairs"));
                }
            }
            Scenario::Mdu => {
                let Some(m) = self.m else {
                    return bad("mdu needs m".into());
                };
                if m == 0 || self.k_values.is_empty() || self.k_values.contains(&0) {
                    return bad("mdu needs m >= 1 and nonempty positive k_values".into());
                }
                if let Some(&k) = self.k_values.iter().find(|&&k| m + k <= self.d) {
                    return bad(format!("m + k = {} must exceed d = {}", m + k, self.d));
                }
            }
        }
        Ok(())
    }

    /// Deletion counts or source counts, depending on the scenario.
    pub fn settings(&self) -> &[usize] {
        match self.scenario {
            Scenario::RandomDeletion => &self.deletion_counts,
            Scenario::Mdu => &self.k_values,
        }
    }
}

/// Aggregate for one `(method, setting, jitter)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub setting: usize,
    pub jitter: f64,
    pub success_rate: f64,
    pub mean_rel_error: f64,
    pub trials: usize,
    /// Total solver wall time over all trials, seconds. Not written to CSV.
    pub wall_time: f64,
    /// Relative errors in trial order.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn row(&self, method: Method, setting: usize, jitter: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.setting == setting && r.jitter == jitter)
    }
}

/// Independent stream `purpose` of trial `trial`.
fn trial_rng(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 8) | purpose);
    rng
}

fn uniform_points(rng: &mut ChaCha8Rng, d: usize, n: usize) -> PointSet {
    PointSet::new(DMatrix::from_fn(d, n, |_, _| rng.random::<f64>())).expect("finite")
}

/// Symmetric matrix of independent `U[-1, 1]` draws, zero diagonal.
fn unit_noise(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = rng.random_range(-1.0..=1.0);
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    e
}

fn add_jitter(truth: &DistanceMatrix, noise: &DMatrix<f64>, level: f64, on: JitterOn) -> DMatrix<f64> {
    let n = truth.size();
    DMatrix::from_fn(n, n, |i, j| {
        let d = truth.get(i, j);
        match on {
            JitterOn::Squared => d + level * noise[(i, j)],
            JitterOn::Sqrt => (d.sqrt() + level * noise[(i, j)]).max(0.0).powi(2),
        }
    })
}

/// Per-trial outcome: `(relative error, seconds)` per cell, in the order
/// settings x jitter levels x methods.
type TrialCells = Vec<(f64, f64)>;

fn run_methods(
    obs: &NoisyObservation,
    truth: &DistanceMatrix,
    d: usize,
    methods: &[Method],
    opts: &SolverOptions,
    out: &mut TrialCells,
) {
    for &method in methods {
        let start = Instant::now();
        let err = match complete_edm(obs, d, method, opts) {
            Ok(res) => res.edm.relative_error(truth),
            Err(_) => f64::INFINITY,
        };
        out.push((err, start.elapsed().as_secs_f64()));
    }
}

fn random_deletion_trial(spec: &ExperimentSpec, trial: usize, opts: &SolverOptions) -> TrialCells {
    let n = spec.n.expect("validated");
    let mut geo = trial_rng(spec.seed, trial, 0);
    let points = uniform_points(&mut geo, spec.d, n);
    let truth = assemble_edm(&points);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    pairs.shuffle(&mut geo);
    let noise = unit_noise(&mut trial_rng(spec.seed, trial, 1), n);

    let mut out = Vec::new();
    for &count in &spec.deletion_counts {
        let mut mask = ObservationMask::full(n);
        for &(i, j) in &pairs[..count] {
            mask.set(i, j, false);
        }
        for &level in &spec.jitter_levels {
            let noisy = add_jitter(&truth, &noise, level, spec.jitter_on);
            let obs = NoisyObservation::new(noisy, mask.clone()).expect("sizes match");
            run_methods(&obs, &truth, spec.d, &spec.methods, opts, &mut out);
        }
    }
    out
}

fn mdu_trial(spec: &ExperimentSpec, trial: usize, opts: &SolverOptions) -> TrialCells {
    let m = spec.m.expect("validated");
    let k_max = *spec.k_values.iter().max().expect("validated");
    let mut geo = trial_rng(spec.seed, trial, 0);
    let mics = uniform_points(&mut geo, spec.d, m);
    let sources = uniform_points(&mut geo, spec.d, k_max);
    let noise_all = unit_noise(&mut trial_rng(spec.seed, trial, 1), m + k_max);

    let mut out = Vec::new();
    for &k in &spec.k_values {
        let idx: Vec<usize> = (0..k).collect();
        let all = mics.concat(&sources.select(&idx).expect("k <= k_max")).expect("same dim");
        let truth = assemble_edm(&all);
        let keep: Vec<usize> = (0..m + k).collect();
        let noise = noise_all.select_rows(&keep).select_columns(&keep);
        let mask = mdu_mask(m, k).expect("validated");
        for &level in &spec.jitter_levels {
            let noisy = add_jitter(&truth, &noise, level, spec.jitter_on);
            let obs = NoisyObservation::new(noisy, mask.clone()).expect("sizes match");
            run_methods(&obs, &truth, spec.d, &spec.methods, opts, &mut out);
        }
    }
    out
}

fn aggregate(spec: &ExperimentSpec, trials: Vec<TrialCells>) -> ExperimentResult {
    let mut rows = Vec::new();
    let mut cell = 0;
    for &setting in spec.settings() {
        for &jitter in &spec.jitter_levels {
            for &method in &spec.methods {
                let errors: Vec<f64> = trials.iter().map(|t| t[cell].0).collect();
                let wall_time = trials.iter().map(|t| t[cell].1).sum();
                let successes = errors.iter().filter(|&&e| e < spec.success_threshold).count();
                let mut sum = 0.0;
                for e in &errors {
                    sum += e;
                }
                rows.push(ResultRow {
                    method,
                    setting,
                    jitter,
                    success_rate: successes as f64 / spec.trials as f64,
                    mean_rel_error: sum / spec.trials as f64,
                    trials: spec.trials,
                    wall_time,
                    errors,
                });
                cell += 1;
            }
        }
    }
    ExperimentResult { seed: spec.seed, rows }
}

fn run(spec: &ExperimentSpec, opts: &SolverOptions, scenario: Scenario) -> Result<ExperimentResult> {
    spec.validate()?;
    if spec.scenario != scenario {
        return Err(EdmError::InvalidArgument(format!(
            "spec scenario is {:?}, expected {scenario:?}",
            spec.scenario
        )));
    }
    // collected in trial order, so the reduction below is schedule independent
    let trials: Vec<TrialCells> = (0..spec.trials)
        .into_par_iter()
        .map(|t| match scenario {
            Scenario::RandomDeletion => random_deletion_trial(spec, t, opts),
            Scenario::Mdu => mdu_trial(spec, t, opts),
        })
        .collect();
    Ok(aggregate(spec, trials))
}

/// Points uniform in the unit hypercube, a random set of deleted pairs,
/// optional jitter; relative Frobenius error of each method's completion.
pub fn run_random_deletion(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(spec, &SolverOptions::default(), Scenario::RandomDeletion)
}

pub fn run_random_deletion_with(spec: &ExperimentSpec, opts: &SolverOptions) -> Result<ExperimentResult> {
    run(spec, opts, Scenario::RandomDeletion)
}

/// Microphones and sources uniform in the unit hypercube, only the
/// cross-distances observed; error measured on the full EDM.
pub fn run_mdu(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(spec, &SolverOptions::default(), Scenario::Mdu)
}

pub fn run_mdu_with(spec: &ExperimentSpec, opts: &SolverOptions) -> Result<ExperimentResult> {
    run(spec, opts, Scenario::Mdu)
}

pub const CSV_HEADER: &str = "method,setting,jitter,success_rate,mean_rel_error,trials,seed";

/// Long-format CSV, one row per `(method, setting, jitter)`.
pub fn write_csv<W: Write>(result: &ExperimentResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER.split(','))?;
    for r in &result.rows {
        w.write_record([
            r.method.name().to_string(),
            r.setting.to_string(),
            format!("{}", r.jitter),
            format!("{}", r.success_rate),
            format!("{}", r.mean_rel_error),
            r.trials.to_string(),
            result.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    write_csv(result, std::fs::File::create(path)?)
}

/// Travel times in minutes between five Swiss cities, in the order Lausanne,
/// Geneva, Zurich, Neuchatel, Bern.
pub const SWISS_CITIES: [&str; 5] = ["Lausanne", "Geneva", "Zurich", "Neuchatel", "Bern"];

pub fn swiss_times() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        5,
        &[
            0.0, 33.0, 128.0, 40.0, 66.0, //
            33.0, 0.0, 158.0, 64.0, 101.0, //
            128.0, 158.0, 0.0, 88.0, 56.0, //
            40.0, 64.0, 88.0, 0.0, 34.0, //
            66.0, 101.0, 56.0, 34.0, 0.0,
        ],
    )
}

#[derive(Debug, Clone)]
pub struct SwissReport {
    pub points: PointSet,
    /// Eigenvalues of `-1/2 J D J`, sorted by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    /// `(l_1^2 + l_2^2) / sum_i l_i^2`.
    pub energy_fraction: f64,
}

/// Embeds the squared travel times in the plane with classical MDS.
pub fn swiss_demo() -> Result<SwissReport> {
    let d = DistanceMatrix::from_distances(swiss_times())?;
    let points = classical_mds(&d, 2)?;
    let g = gram_from_edm(&d, GramCentering::Centroid);
    let (vals, _) = sym_eigen_by_magnitude(g.as_matrix());
    let total: f64 = vals.iter().map(|v| v * v).sum();
    let top: f64 = vals.iter().take(2).map(|v| v * v).sum();
    Ok(SwissReport {
        points,
        eigenvalues: vals.iter().copied().collect(),
        energy_fraction: top / total,
    })
}

/// Monte Carlo over random shoebox rooms: simulate first-order echoes with
/// decoys, sort them greedily, and compare the reconstructed walls with the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoRoomSpec {
    pub rooms: usize,
    pub microphones: usize,
    pub decoys: usize,
    /// Uniform arrival-time jitter half-width in seconds, one row per level.
    pub jitter_levels: Vec<f64>,
    /// Acceptance threshold relative to `||D_aug||_F`.
    pub tau: f64,
    pub seed: u64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Room extents are drawn uniformly from this range (metres).
    #[serde(default = "default_extent_range")]
    pub extent_range: (f64, f64),
    /// Side of the cube the microphones and loudspeaker are drawn from (metres).
    #[serde(default = "default_array_size")]
    pub array_size: f64,
    /// A wall counts as located when its distance to the loudspeaker is off by
    /// less than this (metres).
    #[serde(default = "default_wall_tolerance")]
    pub wall_tolerance: f64,
}

fn default_speed() -> f64 {
    SPEED_OF_SOUND
}

fn default_extent_range() -> (f64, f64) {
    (3.0, 8.0)
}

fn default_array_size() -> f64 {
    0.5
}

fn default_wall_tolerance() -> f64 {
    0.02
}

impl EchoRoomSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: EchoRoomSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(EdmError::InvalidArgument(msg.into()));
        if self.rooms == 0 {
            return bad("rooms must be positive");
        }
        if self.microphones < 4 {
            return bad("need at least 4 microphones to localize in 3D");
        }
        if self.jitter_levels.is_empty() || self.jitter_levels.iter().any(|j| !(*j >= 0.0)) {
            return bad("jitter_levels must be nonempty and nonnegative");
        }
        if !(self.tau > 0.0) || !(self.speed > 0.0) || !(self.wall_tolerance > 0.0) {
            return bad("tau, speed and wall_tolerance must be positive");
        }
        let (lo, hi) = self.extent_range;
        if !(lo > self.array_size + 1.0) || hi < lo {
            return bad("extent_range must exceed the array size plus a metre of margin");
        }
        if !(self.array_size > 0.0) {
            return bad("array_size must be positive");
        }
        Ok(())
    }
}

/// Outcome of one room at one jitter level.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomOutcome {
    /// Every wall was found with exactly its own echoes.
    pub identified: bool,
    /// Largest offset or normal-angle error over identified walls.
    pub max_plane_error: f64,
    /// Largest error in wall-to-loudspeaker distance; infinite when a wall is missed.
    pub max_distance_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoRoomRow {
    pub jitter: f64,
    pub rooms: usize,
    pub identified_rate: f64,
    pub located_rate: f64,
    pub max_plane_error: f64,
    pub outcomes: Vec<RoomOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoRoomResult {
    pub seed: u64,
    pub rows: Vec<EchoRoomRow>,
}

/// A room with extents drawn from `extent_range`. The microphones and the
/// loudspeaker form a compact device: all are uniform in one cube of side
/// `array_size` placed at least half a metre from every wall.
pub fn random_room(rng: &mut ChaCha8Rng, spec: &EchoRoomSpec) -> RoomSpec {
    let (lo, hi) = spec.extent_range;
    let ext = [0; 3].map(|_| rng.random_range(lo..=hi));
    let half = spec.array_size / 2.0;
    let center: Vec<f64> = ext.iter().map(|&l| rng.random_range(half + 0.5..=l - half - 0.5)).collect();
    let mics = DMatrix::from_fn(3, spec.microphones, |a, _| center[a] + rng.random_range(-half..=half));
    let src = Vector3::from_fn(|a, _| center[a] + rng.random_range(-half..=half));
    RoomSpec::new(ext, src, PointSet::new(mics).expect("finite")).expect("interior by construction")
}

fn room_trial(spec: &EchoRoomSpec, trial: usize, jitter: f64) -> Result<RoomOutcome> {
    let mut rng = trial_rng(spec.seed, trial, 2);
    let room = random_room(&mut rng, spec);
    let sim_seed = rng.random::<u64>();
    let sim = simulate_echoes(&room, 1, jitter, spec.decoys, spec.speed, sim_seed)?;
    let opts = RoomOptions {
        expected_jitter: jitter,
        tau: spec.tau,
        ..RoomOptions::default()
    };
    let found = reconstruct_room(room.microphones(), &sim.echoes, &opts)?;
    let truth = room.walls();
    let src = room.source();
    let mut identified = 0;
    let mut max_plane: f64 = 0.0;
    let mut max_dist: f64 = 0.0;
    for (w, wall) in truth.iter().enumerate() {
        let hit = found.iter().find(|f| {
            f.echo_indices
                .iter()
                .enumerate()
                .all(|(mic, &e)| sim.labels[mic][e] == Some(w))
        });
        let Some(f) = hit else {
            max_dist = f64::INFINITY;
            continue;
        };
        identified += 1;
        let est = reconstruct_walls(&[f.position], &src)?[0];
        let angle = est.normal.angle(&wall.normal);
        max_plane = max_plane.max((est.offset() - wall.offset()).abs()).max(angle);
        let d_est = (f.position - src).norm() / 2.0;
        max_dist = max_dist.max((d_est - wall.distance_to(&src)).abs());
    }
    Ok(RoomOutcome {
        identified: identified == truth.len(),
        max_plane_error: max_plane,
        max_distance_error: max_dist,
    })
}

pub fn run_echo_rooms(spec: &EchoRoomSpec) -> Result<EchoRoomResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &jitter in &spec.jitter_levels {
        let outcomes = (0..spec.rooms)
            .into_par_iter()
            .map(|t| room_trial(spec, t, jitter))
            .collect::<Result<Vec<_>>>()?;
        let rate = |f: &dyn Fn(&RoomOutcome) -> bool| {
            outcomes.iter().filter(|o| f(o)).count() as f64 / spec.rooms as f64
        };
        rows.push(EchoRoomRow {
            jitter,
            rooms: spec.rooms,
            identified_rate: rate(&|o| o.identified),
            located_rate: rate(&|o| o.max_distance_error < spec.wall_tolerance),
            max_plane_error: outcomes.iter().map(|o| o.max_plane_error).fold(0.0, f64::max),
            outcomes,
        });
    }
    Ok(EchoRoomResult { seed: spec.seed, rows })
}

pub const ECHO_CSV_HEADER: &str = "jitter,rooms,identified_rate,located_rate,max_plane_error,seed";

pub fn write_echo_csv<W: Write>(result: &EchoRoomResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ECHO_CSV_HEADER.split(','))?;
    for r in &result.rows {
        w.write_record([
            format!("{}", r.jitter),
            r.rooms.to_string(),
            format!("{}", r.identified_rate),
            format!("{}", r.located_rate),
            format!("{}", r.max_plane_error),
            result.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
