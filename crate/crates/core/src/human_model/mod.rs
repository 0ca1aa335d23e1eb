//! Human throw modeling: from observed ball trajectories to a 16-number
//! uniform throw distribution, and back to synthetic throws.
//!
//! The pipeline is: per-trajectory initial-state estimation (free-flight
//! segment, downhill-simplex fit of position+velocity against the drag
//! model), outlier removal with DBSCAN in a z-scored 8-dimensional space
//! (init position, init velocity, simulated robot-side landing), then
//! per-dimension min/max over the largest cluster.

pub mod dbscan;
pub mod simplex;

use crate::math::{Vec2, Vec3};
use crate::physics::{
    simulate_flight, step_ball, BallState, PhysicsConstants, TableGeometry, Trajectory,
};
use crate::rng::rng_from;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub use dbscan::{dbscan, Label};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};

/// Sample rate used when rendering or re-simulating observed trajectories.
pub const PERCEPTION_RATE_HZ: f64 = 125.0;
/// Flight horizon used when re-simulating a fitted throw, seconds.
pub const LANDING_HORIZON_S: f64 = 3.0;
/// A bounce is only accepted as such below this height, m.
const BOUNCE_DETECT_Z: f64 = 0.12;

/// The 16-number uniform throw model: per-axis bounds on initial position,
/// initial velocity, and the robot-side landing point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "DistributionRecord", into = "DistributionRecord")]
pub struct BallDistribution {
    pub pos_min: Vec3,
    pub pos_max: Vec3,
    pub vel_min: Vec3,
    pub vel_max: Vec3,
    pub land_min: Vec2,
    pub land_max: Vec2,
}

/// Flat 16-field serialization of [`BallDistribution`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub pos_min_x: f64,
    pub pos_min_y: f64,
    pub pos_min_z: f64,
    pub pos_max_x: f64,
    pub pos_max_y: f64,
    pub pos_max_z: f64,
    pub vel_min_x: f64,
    pub vel_min_y: f64,
    pub vel_min_z: f64,
    pub vel_max_x: f64,
    pub vel_max_y: f64,
    pub vel_max_z: f64,
    pub land_min_x: f64,
    pub land_min_y: f64,
    pub land_max_x: f64,
    pub land_max_y: f64,
}

impl From<DistributionRecord> for BallDistribution {
    fn from(r: DistributionRecord) -> Self {
        Self {
            pos_min: Vec3::new(r.pos_min_x, r.pos_min_y, r.pos_min_z),
            pos_max: Vec3::new(r.pos_max_x, r.pos_max_y, r.pos_max_z),
            vel_min: Vec3::new(r.vel_min_x, r.vel_min_y, r.vel_min_z),
            vel_max: Vec3::new(r.vel_max_x, r.vel_max_y, r.vel_max_z),
            land_min: Vec2::new(r.land_min_x, r.land_min_y),
            land_max: Vec2::new(r.land_max_x, r.land_max_y),
        }
    }
}

impl From<BallDistribution> for DistributionRecord {
    fn from(d: BallDistribution) -> Self {
        Self {
            pos_min_x: d.pos_min.x,
            pos_min_y: d.pos_min.y,
            pos_min_z: d.pos_min.z,
            pos_max_x: d.pos_max.x,
            pos_max_y: d.pos_max.y,
            pos_max_z: d.pos_max.z,
            vel_min_x: d.vel_min.x,
            vel_min_y: d.vel_min.y,
            vel_min_z: d.vel_min.z,
            vel_max_x: d.vel_max.x,
            vel_max_y: d.vel_max.y,
            vel_max_z: d.vel_max.z,
            land_min_x: d.land_min.x,
            land_min_y: d.land_min.y,
            land_max_x: d.land_max.x,
            land_max_y: d.land_max.y,
        }
    }
}

/// Dimension order used by [`distribution_delta`] and the 8-vector feature
/// space (positions, velocities, landings).
pub const DIMENSION_NAMES: [&str; 16] = [
    "pos_min_x",
    "pos_min_y",
    "pos_min_z",
    "pos_max_x",
    "pos_max_y",
    "pos_max_z",
    "vel_min_x",
    "vel_min_y",
    "vel_min_z",
    "vel_max_x",
    "vel_max_y",
    "vel_max_z",
    "land_min_x",
    "land_min_y",
    "land_max_x",
    "land_max_y",
];

impl BallDistribution {
    pub fn as_flat(&self) -> [f64; 16] {
        [
            self.pos_min.x,
            self.pos_min.y,
            self.pos_min.z,
            self.pos_max.x,
            self.pos_max.y,
            self.pos_max.z,
            self.vel_min.x,
            self.vel_min.y,
            self.vel_min.z,
            self.vel_max.x,
            self.vel_max.y,
            self.vel_max.z,
            self.land_min.x,
            self.land_min.y,
            self.land_max.x,
            self.land_max.y,
        ]
    }

    /// Per-component ranges (max - min): 3 position, 3 velocity, 2 landing.
    pub fn ranges(&self) -> [f64; 8] {
        [
            self.pos_max.x - self.pos_min.x,
            self.pos_max.y - self.pos_min.y,
            self.pos_max.z - self.pos_min.z,
            self.vel_max.x - self.vel_min.x,
            self.vel_max.y - self.vel_min.y,
            self.vel_max.z - self.vel_min.z,
            self.land_max.x - self.land_min.x,
            self.land_max.y - self.land_min.y,
        ]
    }

    pub fn contains_init(&self, pos: Vec3, vel: Vec3) -> bool {
        let e = 1e-9;
        pos.x >= self.pos_min.x - e
            && pos.x <= self.pos_max.x + e
            && pos.y >= self.pos_min.y - e
            && pos.y <= self.pos_max.y + e
            && pos.z >= self.pos_min.z - e
            && pos.z <= self.pos_max.z + e
            && vel.x >= self.vel_min.x - e
            && vel.x <= self.vel_max.x + e
            && vel.y >= self.vel_min.y - e
            && vel.y <= self.vel_max.y + e
            && vel.z >= self.vel_min.z - e
            && vel.z <= self.vel_max.z + e
    }

    pub fn contains_landing(&self, landing: Vec2) -> bool {
        let e = 1e-9;
        landing.x >= self.land_min.x - e
            && landing.x <= self.land_max.x + e
            && landing.y >= self.land_min.y - e
            && landing.y <= self.land_max.y + e
    }

    pub fn validate(&self, table: &TableGeometry) -> Result<()> {
        let flat = self.as_flat();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "ball distribution bounds",
            });
        }
        for (mins, maxs, what) in [
            (self.pos_min.to_array(), self.pos_max.to_array(), "position"),
            (self.vel_min.to_array(), self.vel_max.to_array(), "velocity"),
        ] {
            for a in 0..3 {
                if mins[a] > maxs[a] {
                    return Err(Error::Validation(format!(
                        "{what} min > max on axis {a}: {} > {}",
                        mins[a], maxs[a]
                    )));
                }
            }
        }
        if self.land_min.x > self.land_max.x || self.land_min.y > self.land_max.y {
            return Err(Error::Validation("landing min > max".into()));
        }
        let corners_ok = self.land_min.y >= -table.half_length - 1e-9
            && self.land_max.y <= 1e-9
            && self.land_min.x >= -table.half_width - 1e-9
            && self.land_max.x <= table.half_width + 1e-9;
        if !corners_ok {
            return Err(Error::Validation(
                "landing box must lie on the robot half of the table".into(),
            ));
        }
        Ok(())
    }
}

/// One synthetic throw: the sampled initial state plus where it lands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrowSample {
    pub init: BallState,
    /// First robot-side table touch (x, y), m.
    pub landing: Vec2,
}

/// Result of fitting one trajectory's initial state.
#[derive(Debug, Clone, Copy)]
pub struct FitResult {
    pub init_estimate: BallState,
    /// Mean Euclidean distance between fit and observation, m.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Where a recorded trajectory came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThrowOrigin {
    Bootstrap,
    FineTune,
    Eval,
}

/// A trajectory with provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedTrajectory {
    pub player_id: String,
    pub iteration: u32,
    pub source: ThrowOrigin,
    pub trajectory: Trajectory,
}

/// An accumulating dataset of observed trajectories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub trajectories: Vec<TaggedTrajectory>,
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn extend_from(&mut self, other: &TrajectoryDataset) {
        self.trajectories.extend(other.trajectories.iter().cloned());
    }

    /// One JSON object per line: metadata + flat (t, x, y, z) samples.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.trajectories {
            let line = serde_json::to_string(&JsonlTrajectory::from(t))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut trajectories = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: JsonlTrajectory = serde_json::from_str(&line).map_err(|e| {
                Error::Validation(format!("dataset line {}: {e}", lineno + 1))
            })?;
            trajectories.push(parsed.try_into()?);
        }
        Ok(Self { trajectories })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

/// Line format for dataset persistence.
#[derive(Debug, Serialize, Deserialize)]
struct JsonlTrajectory {
    player_id: String,
    iteration: u32,
    source: ThrowOrigin,
    sample_period: f64,
    /// Flat [t, x, y, z] per sample.
    samples: Vec<[f64; 4]>,
}

impl From<&TaggedTrajectory> for JsonlTrajectory {
    fn from(t: &TaggedTrajectory) -> Self {
        Self {
            player_id: t.player_id.clone(),
            iteration: t.iteration,
            source: t.source,
            sample_period: t.trajectory.sample_period,
            samples: t
                .trajectory
                .samples
                .iter()
                .map(|s| [s.time, s.position.x, s.position.y, s.position.z])
                .collect(),
        }
    }
}

impl TryFrom<JsonlTrajectory> for TaggedTrajectory {
    type Error = Error;

    fn try_from(j: JsonlTrajectory) -> Result<Self> {
        // Velocities are not persisted; finite-difference them back in so the
        // in-memory type stays uniform. Fitting only consumes positions.
        let n = j.samples.len();
        if n < 2 {
            return Err(Error::Validation("trajectory line with < 2 samples".into()));
        }
        let mut samples = Vec::with_capacity(n);
        for (i, s) in j.samples.iter().enumerate() {
            let (next, prev) = (j.samples[(i + 1).min(n - 1)], j.samples[i.saturating_sub(1)]);
            let dt = next[0] - prev[0];
            let vel = if dt > 0.0 {
                Vec3::new(
                    (next[1] - prev[1]) / dt,
                    (next[2] - prev[2]) / dt,
                    (next[3] - prev[3]) / dt,
                )
            } else {
                Vec3::ZERO
            };
            samples.push(BallState {
                position: Vec3::new(s[1], s[2], s[3]),
                velocity: vel,
                time: s[0],
            });
        }
        let trajectory = Trajectory {
            samples,
            sample_period: j.sample_period,
        };
        trajectory.validate()?;
        Ok(Self {
            player_id: j.player_id,
            iteration: j.iteration,
            source: j.source,
            trajectory,
        })
    }
}

/// Index of the first bounce sample, if the trajectory contains one: the
/// earliest local z-minimum near the table plane.
fn bounce_index(samples: &[BallState]) -> Option<usize> {
    for k in 1..samples.len().saturating_sub(1) {
        let z = samples[k].position.z;
        if z < BOUNCE_DETECT_Z
            && z <= samples[k - 1].position.z
            && z <= samples[k + 1].position.z
        {
            return Some(k);
        }
    }
    None
}

/// Simulate the drag model through the observed timestamps and return the
/// mean Euclidean distance to the observed positions.
fn flight_residual(
    candidate: &[f64],
    observed: &[BallState],
    constants: &PhysicsConstants,
) -> f64 {
    let mut state = BallState {
        position: Vec3::new(candidate[0], candidate[1], candidate[2]),
        velocity: Vec3::new(candidate[3], candidate[4], candidate[5]),
        time: observed[0].time,
    };
    let mut total = (state.position - observed[0].position).norm();
    for w in observed.windows(2) {
        let dt = w[1].time - w[0].time;
        state = match step_ball(&state, constants, dt) {
            Ok(s) => s,
            Err(_) => return f64::INFINITY,
        };
        total += (state.position - w[1].position).norm();
    }
    total / observed.len() as f64
}

/// Estimate a trajectory's initial position and velocity.
///
/// Uses the free-flight samples before the first bounce; the initial guess
/// is the first observed position with a finite-difference velocity. One
/// restart from a perturbed guess runs if the residual stays above 5 cm.
pub fn fit_initial_state(
    observed: &Trajectory,
    constants: &PhysicsConstants,
    _table: &TableGeometry,
) -> Result<FitResult> {
    observed.validate()?;
    let pre_bounce: &[BallState] = match bounce_index(&observed.samples) {
        Some(k) => &observed.samples[..k],
        None => &observed.samples,
    };
    if pre_bounce.len() < 4 {
        return Err(Error::TrajectoryRejected(format!(
            "only {} pre-bounce samples (need 4)",
            pre_bounce.len()
        )));
    }

    let p0 = pre_bounce[0].position;
    let p1 = pre_bounce[1].position;
    let dt = pre_bounce[1].time - pre_bounce[0].time;
    let v0 = (p1 - p0) / dt;
    let x0 = [p0.x, p0.y, p0.z, v0.x, v0.y, v0.z];

    let options = SimplexOptions {
        tol: 1e-12,
        max_iter: 2500,
        ..SimplexOptions::default()
    };
    let run = |start: &[f64]| {
        simplex::nelder_mead(
            |x| flight_residual(x, pre_bounce, constants),
            start,
            &options,
        )
    };

    let mut best = run(&x0);
    let mut iterations = best.iterations;
    if best.f > 0.05 {
        // Fixed deterministic perturbation of the initial guess.
        let jittered = [
            x0[0] + 0.02,
            x0[1] - 0.02,
            x0[2] + 0.03,
            x0[3] * 1.1 + 0.05,
            x0[4] * 1.1 - 0.05,
            x0[5] * 1.1 + 0.10,
        ];
        let retry = run(&jittered);
        iterations += retry.iterations;
        if retry.f < best.f {
            best = retry;
        }
    }

    Ok(FitResult {
        init_estimate: BallState {
            position: Vec3::new(best.x[0], best.x[1], best.x[2]),
            velocity: Vec3::new(best.x[3], best.x[4], best.x[5]),
            time: pre_bounce[0].time,
        },
        residual: best.f,
        iterations,
        converged: best.converged,
    })
}

/// Clustering options for [`estimate_distribution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    /// Neighborhood radius in the z-scored 8-dimensional feature space.
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        // In 8 z-scored dimensions nearest-neighbor distances for a few
        // hundred inlier points sit around 1.3-1.6, so eps = 2.0 keeps the
        // support connected while isolated outliers still drop out.
        Self {
            eps: 2.0,
            min_pts: 4,
        }
    }
}

/// Diagnostics from a distribution estimate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n_input: usize,
    pub n_fit_rejected: usize,
    pub n_no_landing: usize,
    pub n_noise: usize,
    pub cluster_sizes: Vec<usize>,
    pub kept_cluster: usize,
    pub mean_residual: f64,
    /// Indices of rejected trajectories with the rejection reason.
    pub rejected: Vec<(usize, String)>,
}

/// Fit every trajectory, cluster the 8-vectors, and take per-dimension
/// min/max over the largest cluster.
///
/// Fitting fans out across trajectories; results are position-independent
/// so the output matches serial execution exactly.
pub fn estimate_distribution(
    dataset: &TrajectoryDataset,
    constants: &PhysicsConstants,
    table: &TableGeometry,
    cluster_opts: &ClusterOptions,
) -> Result<(BallDistribution, EstimateReport)> {
    if dataset.is_empty() {
        return Err(Error::Validation("dataset is empty".into()));
    }
    let mut report = EstimateReport {
        n_input: dataset.len(),
        ..EstimateReport::default()
    };

    let fits: Vec<(usize, std::result::Result<(FitResult, Option<Vec2>), String>)> = dataset
        .trajectories
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let out = fit_initial_state(&t.trajectory, constants, table)
                .map_err(|e| e.to_string())
                .map(|fit| {
                    let landing = simulate_flight(
                        &fit.init_estimate,
                        constants,
                        1.0 / PERCEPTION_RATE_HZ,
                        LANDING_HORIZON_S,
                        table,
                    )
                    .ok()
                    .and_then(|f| f.robot_side_landing());
                    (fit, landing)
                });
            (i, out)
        })
        .collect();

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut kept_fits: Vec<(FitResult, Vec2)> = Vec::new();
    for (i, outcome) in fits {
        match outcome {
            Err(reason) => {
                report.n_fit_rejected += 1;
                report.rejected.push((i, reason));
            }
            Ok((_, None)) => {
                report.n_no_landing += 1;
                report
                    .rejected
                    .push((i, "fitted flight never lands on the robot side".into()));
            }
            Ok((fit, Some(landing))) => {
                let s = fit.init_estimate;
                features.push(vec![
                    s.position.x,
                    s.position.y,
                    s.position.z,
                    s.velocity.x,
                    s.velocity.y,
                    s.velocity.z,
                    landing.x,
                    landing.y,
                ]);
                kept_fits.push((fit, landing));
            }
        }
    }

    if features.len() < cluster_opts.min_pts {
        return Err(Error::Validation(format!(
            "only {} fitted trajectories survive (need >= {})",
            features.len(),
            cluster_opts.min_pts
        )));
    }
    report.mean_residual =
        kept_fits.iter().map(|(f, _)| f.residual).sum::<f64>() / kept_fits.len() as f64;

    // z-score each dimension; constant dimensions map to 0.
    let n = features.len();
    let dims = 8;
    let mut mean = vec![0.0; dims];
    for f in &features {
        for d in 0..dims {
            mean[d] += f[d] / n as f64;
        }
    }
    let mut std = vec![0.0; dims];
    for f in &features {
        for d in 0..dims {
            std[d] += (f[d] - mean[d]).powi(2) / n as f64;
        }
    }
    for s in std.iter_mut() {
        *s = s.sqrt().max(1e-9);
    }
    let scaled: Vec<Vec<f64>> = features
        .iter()
        .map(|f| (0..dims).map(|d| (f[d] - mean[d]) / std[d]).collect())
        .collect();

    let labels = dbscan::dbscan(&scaled, cluster_opts.eps, cluster_opts.min_pts);
    report.cluster_sizes = dbscan::cluster_sizes(&labels);
    report.n_noise = labels.iter().filter(|l| **l == Label::Noise).count();
    let keep = dbscan::largest_cluster(&labels).ok_or(Error::DistributionCollapse)?;
    report.kept_cluster = keep;

    let mut lo = [f64::INFINITY; 8];
    let mut hi = [f64::NEG_INFINITY; 8];
    for (f, l) in features.iter().zip(labels.iter()) {
        if *l == Label::Cluster(keep) {
            for d in 0..dims {
                lo[d] = lo[d].min(f[d]);
                hi[d] = hi[d].max(f[d]);
            }
        }
    }

    let dist = BallDistribution {
        pos_min: Vec3::new(lo[0], lo[1], lo[2]),
        pos_max: Vec3::new(hi[0], hi[1], hi[2]),
        vel_min: Vec3::new(lo[3], lo[4], lo[5]),
        vel_max: Vec3::new(hi[3], hi[4], hi[5]),
        land_min: Vec2::new(lo[6].max(-table.half_width), lo[7].max(-table.half_length)),
        land_max: Vec2::new(hi[6].min(table.half_width), hi[7].min(0.0)),
    };
    dist.validate(table)?;
    Ok((dist, report))
}

/// Rejection-sample one throw: uniform init inside the 12 bounds until the
/// simulated flight's first robot-side touch lands inside the 4 landing
/// bounds. Reproducible from the seed.
pub fn sample_throw(
    dist: &BallDistribution,
    seed: u64,
    constants: &PhysicsConstants,
    table: &TableGeometry,
    max_rejects: usize,
) -> Result<(ThrowSample, usize)> {
    dist.validate(table)?;
    let mut rng = rng_from(&[seed, crate::rng::tag("throw-sample")]);
    let mut uniform = |lo: f64, hi: f64| -> f64 {
        use rand::Rng;
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    };
    for attempt in 1..=max_rejects {
        let pos = Vec3::new(
            uniform(dist.pos_min.x, dist.pos_max.x),
            uniform(dist.pos_min.y, dist.pos_max.y),
            uniform(dist.pos_min.z, dist.pos_max.z),
        );
        let vel = Vec3::new(
            uniform(dist.vel_min.x, dist.vel_max.x),
            uniform(dist.vel_min.y, dist.vel_max.y),
            uniform(dist.vel_min.z, dist.vel_max.z),
        );
        let init = BallState {
            position: pos,
            velocity: vel,
            time: 0.0,
        };
        let flight = simulate_flight(
            &init,
            constants,
            1.0 / PERCEPTION_RATE_HZ,
            LANDING_HORIZON_S,
            table,
        )?;
        if let Some(landing) = flight.robot_side_landing() {
            if dist.contains_landing(landing) {
                return Ok((ThrowSample { init, landing }, attempt));
            }
        }
    }
    Err(Error::InfeasibleDistribution {
        attempts: max_rejects,
    })
}

/// Per-dimension absolute differences plus a range-normalized scalar summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionDelta {
    /// |a - b| per dimension, ordered as [`DIMENSION_NAMES`].
    pub per_dimension: [f64; 16],
    /// Mean of per-dimension |delta| / range_b, range floored at 1e-6.
    pub summary: f64,
}

/// Compare two distributions dimension by dimension.
pub fn distribution_delta(a: &BallDistribution, b: &BallDistribution) -> DistributionDelta {
    let fa = a.as_flat();
    let fb = b.as_flat();
    let ranges = b.ranges();
    // Flat index -> which of b's 8 component ranges normalizes it.
    const RANGE_OF: [usize; 16] = [0, 1, 2, 0, 1, 2, 3, 4, 5, 3, 4, 5, 6, 7, 6, 7];

    let mut per_dimension = [0.0; 16];
    let mut summary = 0.0;
    for d in 0..16 {
        per_dimension[d] = (fa[d] - fb[d]).abs();
        summary += per_dimension[d] / ranges[RANGE_OF[d]].max(1e-6);
    }
    DistributionDelta {
        per_dimension,
        summary: summary / 16.0,
    }
}
