//! Experiment orchestration: throw sources, training phases, the iterative
//! train/fine-tune loop, baselines, seed selection, and rally evaluation.
//!
//! Phases are sequential; rollouts inside a simulation phase fan out on the
//! rayon pool while fine-tuning runs episodes in order against the stateful
//! surrogate. Every seed derives from the master seed through labeled
//! chains, so a whole experiment is bit-reproducible and resumable at phase
//! granularity.

use crate::config::{ExperimentConfig, ExperimentMode};
use crate::env::{run_episode, Env, EnvConfig, EpisodeRecord};
use crate::es::{
    train_step, EsConfig, ParallelBackend, RolloutOutcome, SequentialBackend, UpdateReport,
};
use crate::human_model::{
    estimate_distribution, sample_throw, BallDistribution, TaggedTrajectory, ThrowOrigin,
    ThrowSample, TrajectoryDataset,
};
use crate::metrics::MetricsWriter;
use crate::policy::{Checkpoint, Normalizer, PARAM_COUNT};
use crate::rng::{rng_from, seed_chain, tag};
use crate::surrogate::{render_observed_trajectory, ReturnInfo, SurrogateHuman, ThrowSource};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Default rejection budget for stationary throw sampling.
const THROW_MAX_REJECTS: usize = 100_000;

/// Stationary throw source: episodes draw independently from one
/// distribution, either fresh per seed or from a pre-sampled pool.
///
/// A pooled source turns the training objective into a fixed sample
/// average, which removes throw-draw noise from antithetic differences;
/// evaluation always uses a fresh (unpooled) source.
#[derive(Debug, Clone)]
pub struct BoxThrows {
    pub distribution: BallDistribution,
    pool: Option<Vec<ThrowSample>>,
}

impl BoxThrows {
    pub fn new(distribution: BallDistribution) -> Self {
        Self {
            distribution,
            pool: None,
        }
    }

    /// Pre-sample `size` throws; `sample` then picks pool entries by seed.
    pub fn pooled(
        distribution: BallDistribution,
        env: &EnvConfig,
        size: usize,
        pool_seed: u64,
    ) -> Result<Self> {
        let mut pool = Vec::with_capacity(size);
        for i in 0..size {
            let (throw, _) = sample_throw(
                &distribution,
                seed_chain(&[pool_seed, tag("throw-pool"), i as u64]),
                &env.physics,
                &env.table,
                THROW_MAX_REJECTS,
            )?;
            pool.push(throw);
        }
        Ok(Self {
            distribution,
            pool: Some(pool),
        })
    }

    pub fn sample(&self, env: &EnvConfig, seed: u64) -> Result<ThrowSample> {
        if let Some(pool) = &self.pool {
            return Ok(pool[(seed_chain(&[seed, tag("pool-pick")]) as usize) % pool.len()]);
        }
        let (throw, _) = sample_throw(
            &self.distribution,
            seed,
            &env.physics,
            &env.table,
            THROW_MAX_REJECTS,
        )?;
        Ok(throw)
    }
}

/// One training rollout against a throw from a stationary distribution.
///
/// Environment failures do not crash the update; they contribute the fault
/// reward instead.
pub fn sim_rollout(
    env_config: &EnvConfig,
    throws: &BoxThrows,
    params: &[f64],
    norm: &Normalizer,
    seed: u64,
) -> RolloutOutcome {
    let run = || -> Result<(EpisodeRecord, Normalizer)> {
        let throw = throws.sample(env_config, seed_chain(&[seed, tag("throw")]))?;
        let mut env = Env::new(env_config.clone());
        run_episode(
            &mut env,
            params,
            norm,
            &throw,
            seed_chain(&[seed, tag("latency")]),
            seed_chain(&[seed, tag("noise")]),
        )
    };
    match run() {
        Ok((record, delta)) => RolloutOutcome {
            reward: record.total_return,
            normalizer_delta: delta,
        },
        Err(_) => RolloutOutcome {
            reward: -2.0,
            normalizer_delta: Normalizer::new(),
        },
    }
}

/// Train against a stationary throw distribution for `updates` steps.
/// Rollouts run on the rayon pool; the result is bit-deterministic.
pub fn train_sim_phase(
    params: &[f64],
    norm: &Normalizer,
    env_config: &EnvConfig,
    distribution: &BallDistribution,
    es: &EsConfig,
    updates: usize,
    throw_pool: usize,
    phase_seed: u64,
    mut on_update: impl FnMut(usize, &UpdateReport),
) -> Result<(Vec<f64>, Normalizer)> {
    let throws = if throw_pool > 0 {
        BoxThrows::pooled(
            *distribution,
            env_config,
            throw_pool,
            seed_chain(&[phase_seed, tag("pool")]),
        )?
    } else {
        BoxThrows::new(*distribution)
    };
    let mut theta = params.to_vec();
    let mut normalizer = norm.clone();
    for u in 0..updates {
        let update_seed = seed_chain(&[phase_seed, tag("sim-update"), u as u64]);
        let mut backend = ParallelBackend(|p: &[f64], n: &Normalizer, s: u64| {
            sim_rollout(env_config, &throws, p, n, s)
        });
        let (next, next_norm, report) =
            train_step(&theta, &normalizer, &mut backend, es, update_seed)?;
        theta = next;
        normalizer = next_norm;
        on_update(u, &report);
    }
    Ok((theta, normalizer))
}

/// Evaluate a fixed policy for `episodes` single throws from a distribution.
/// The normalizer is frozen. Returns per-episode records.
pub fn eval_policy_on_box(
    params: &[f64],
    norm: &Normalizer,
    env_config: &EnvConfig,
    distribution: &BallDistribution,
    episodes: usize,
    eval_seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    use rayon::prelude::*;
    let throws = BoxThrows::new(*distribution);
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let seed = seed_chain(&[eval_seed, tag("eval-episode"), i as u64]);
            let throw = throws.sample(env_config, seed_chain(&[seed, tag("throw")]))?;
            let mut env = Env::new(env_config.clone());
            let (record, _) = run_episode(
                &mut env,
                params,
                norm,
                &throw,
                seed_chain(&[seed, tag("latency")]),
                seed_chain(&[seed, tag("noise")]),
            )?;
            Ok(record)
        })
        .collect()
}

/// Mean sparse evaluation score over a record set.
pub fn mean_sparse_score(records: &[EpisodeRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records
        .iter()
        .map(|r| crate::env::sparse_eval_score(r) as f64)
        .sum::<f64>()
        / records.len() as f64
}

/// Fresh policy parameters: zeros, so the untrained robot holds its home
/// pose and the first perturbations explore around it.
pub fn initial_params() -> Vec<f64> {
    vec![0.0; PARAM_COUNT]
}

/// Random-feature initialization: hidden layers get small random weights,
/// the output layer starts at zero. The robot still begins motionless, but
/// the network immediately exposes a rich basis over the observation
/// window, so search concentrates on the output readout instead of having
/// to break the all-zeros symmetry first.
pub fn initial_params_random(seed: u64) -> Vec<f64> {
    use crate::policy::param_layout;
    use rand_distr::StandardNormal;
    let mut rng = rng_from(&[seed, tag("policy-init")]);
    let mut params = vec![0.0; PARAM_COUNT];
    for slice in param_layout() {
        // Hidden conv weights only: biases stay zero (gates half-open),
        // layer-3 readout stays zero (first action is exactly zero).
        let scale = match slice.name {
            "layer1_value_weight" | "layer1_gate_weight" => 0.25,
            "layer2_value_weight" | "layer2_gate_weight" => 0.30,
            _ => 0.0,
        };
        if scale > 0.0 {
            for i in slice.start..slice.start + slice.len {
                let g: f64 = rand::Rng::sample(&mut rng, StandardNormal);
                params[i] = scale * g;
            }
        }
    }
    params
}

// ---------------------------------------------------------------------------
// Surrogate-facing phases
// ---------------------------------------------------------------------------

/// Collect the bootstrap dataset: unconditioned throws rendered to observed
/// trajectories (no robot present).
pub fn bootstrap_dataset(
    source: &mut dyn ThrowSource,
    config: &ExperimentConfig,
    n_throws: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    if n_throws < config.dataset.cluster.min_pts {
        return Err(Error::Validation(format!(
            "bootstrap needs at least {} throws, got {n_throws}",
            config.dataset.cluster.min_pts
        )));
    }
    let mut render_rng = rng_from(&[seed, tag("bootstrap-render")]);
    let mut trajectories = Vec::with_capacity(n_throws);
    for _ in 0..n_throws {
        let throw = source.opening_throw()?;
        let trajectory = render_observed_trajectory(
            &throw.init,
            &config.physics,
            &config.table,
            config.dataset.render_noise,
            &mut render_rng,
        )?;
        trajectories.push(TaggedTrajectory {
            player_id: "surrogate".into(),
            iteration: 0,
            source: ThrowOrigin::Bootstrap,
            trajectory,
        });
    }
    Ok(TrajectoryDataset { trajectories })
}

fn next_throw(
    source: &mut dyn ThrowSource,
    pending: &mut Option<ReturnInfo>,
) -> Result<ThrowSample> {
    match pending.take() {
        Some(info) => match source.attempt_return(&info)? {
            Some(t) => Ok(t),
            None => source.opening_throw(),
        },
        None => source.opening_throw(),
    }
}

fn return_info(record: &EpisodeRecord) -> Option<ReturnInfo> {
    match (record.return_landing, record.return_speed) {
        (Some(landing), Some(speed)) => Some(ReturnInfo { landing, speed }),
        _ => None,
    }
}

/// Observed-throw sink for phases that must archive what the opponent hit.
pub struct ThrowArchive<'a> {
    sink: &'a mut Vec<TaggedTrajectory>,
    config: &'a ExperimentConfig,
    iteration: u32,
    origin: ThrowOrigin,
    render_rng: rand_chacha::ChaCha8Rng,
}

impl<'a> ThrowArchive<'a> {
    pub fn new(
        sink: &'a mut Vec<TaggedTrajectory>,
        config: &'a ExperimentConfig,
        iteration: u32,
        origin: ThrowOrigin,
        seed: u64,
    ) -> Self {
        Self {
            sink,
            config,
            iteration,
            origin,
            render_rng: rng_from(&[seed, tag("throw-archive")]),
        }
    }

    fn record(&mut self, throw: &ThrowSample) -> Result<()> {
        let trajectory = render_observed_trajectory(
            &throw.init,
            &self.config.physics,
            &self.config.table,
            self.config.dataset.render_noise,
            &mut self.render_rng,
        )?;
        self.sink.push(TaggedTrajectory {
            player_id: "surrogate".into(),
            iteration: self.iteration,
            source: self.origin,
            trajectory,
        });
        Ok(())
    }
}

/// Evaluate a policy for `episodes` single throws served by the (stateful)
/// source, in order. Served throws are archived when a sink is given.
pub fn eval_policy_on_source(
    params: &[f64],
    norm: &Normalizer,
    env_config: &EnvConfig,
    source: &mut dyn ThrowSource,
    episodes: usize,
    eval_seed: u64,
    mut archive: Option<&mut ThrowArchive<'_>>,
) -> Result<Vec<EpisodeRecord>> {
    let mut records = Vec::with_capacity(episodes);
    let mut pending: Option<ReturnInfo> = None;
    for i in 0..episodes {
        let throw = next_throw(source, &mut pending)?;
        if let Some(a) = archive.as_deref_mut() {
            a.record(&throw)?;
        }
        let seed = seed_chain(&[eval_seed, tag("source-eval"), i as u64]);
        let mut env = Env::new(env_config.clone());
        let (record, _) = run_episode(
            &mut env,
            params,
            norm,
            &throw,
            seed_chain(&[seed, tag("latency")]),
            seed_chain(&[seed, tag("noise")]),
        )?;
        pending = return_info(&record);
        records.push(record);
    }
    Ok(records)
}

/// Pick the best of several trained candidates by mean sparse score over
/// `episodes` surrogate throws each; ties break toward the lowest index.
pub fn select_seed_model(
    candidates: &[(Vec<f64>, Normalizer)],
    env_config: &EnvConfig,
    source: &mut dyn ThrowSource,
    episodes: usize,
    eval_seed: u64,
    mut archive: Option<&mut ThrowArchive<'_>>,
) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "no candidates to select from".into(),
        ));
    }
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    let mut scores = Vec::with_capacity(candidates.len());
    for (idx, (params, norm)) in candidates.iter().enumerate() {
        let records = eval_policy_on_source(
            params,
            norm,
            env_config,
            source,
            episodes,
            seed_chain(&[eval_seed, idx as u64]),
            archive.as_deref_mut(),
        )?;
        let score = mean_sparse_score(&records);
        scores.push(score);
        if score > best_score {
            best_score = score;
            best = idx;
        }
    }
    Ok((best, scores))
}

/// One fine-tune phase: sequential episodes against the stateful source;
/// every served throw is archived into `collected`.
#[allow(clippy::too_many_arguments)]
pub fn finetune_phase(
    params: &[f64],
    norm: &Normalizer,
    env_config: &EnvConfig,
    es: &EsConfig,
    updates: usize,
    source: &mut dyn ThrowSource,
    collected: &mut Vec<TaggedTrajectory>,
    config: &ExperimentConfig,
    iteration: u32,
    phase_seed: u64,
    mut on_update: impl FnMut(usize, &UpdateReport),
) -> Result<(Vec<f64>, Normalizer)> {
    let mut theta = params.to_vec();
    let mut normalizer = norm.clone();
    let mut pending: Option<ReturnInfo> = None;
    let mut archive = ThrowArchive::new(
        collected,
        config,
        iteration,
        ThrowOrigin::FineTune,
        phase_seed,
    );

    for u in 0..updates {
        let update_seed = seed_chain(&[phase_seed, tag("ft-update"), u as u64]);
        let (next, next_norm, report) = {
            let pending = &mut pending;
            let archive = &mut archive;
            let source = &mut *source;
            let mut backend = SequentialBackend(move |p: &[f64], n: &Normalizer, seed: u64| {
                let mut attempt = || -> Result<RolloutOutcome> {
                    let throw = next_throw(source, pending)?;
                    archive.record(&throw)?;
                    let mut env = Env::new(env_config.clone());
                    let (record, delta) = run_episode(
                        &mut env,
                        p,
                        n,
                        &throw,
                        seed_chain(&[seed, tag("latency")]),
                        seed_chain(&[seed, tag("noise")]),
                    )?;
                    *pending = return_info(&record);
                    Ok(RolloutOutcome {
                        reward: record.total_return,
                        normalizer_delta: delta,
                    })
                };
                attempt().unwrap_or(RolloutOutcome {
                    reward: -2.0,
                    normalizer_delta: Normalizer::new(),
                })
            });
            train_step(&theta, &normalizer, &mut backend, es, update_seed)?
        };
        theta = next;
        normalizer = next_norm;
        on_update(u, &report);
    }
    Ok((theta, normalizer))
}

// ---------------------------------------------------------------------------
// Rally evaluation
// ---------------------------------------------------------------------------

/// Results of a rally evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RallyReport {
    /// Paddle touches by both sides per rally.
    pub lengths: Vec<usize>,
    /// True where the rally was stopped by the exchange cap.
    pub censored: Vec<bool>,
    /// z-scored lengths over the reference pool.
    pub normalized: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// z-score lengths against a reference (mean, std); degenerate std gives
/// zeros. With no reference the pool itself is the reference.
pub fn normalize_rally_lengths(lengths: &[usize], reference: Option<(f64, f64)>) -> Vec<f64> {
    let (mean, std) = reference.unwrap_or_else(|| {
        let n = lengths.len().max(1) as f64;
        let m = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
        let v = lengths.iter().map(|&l| (l as f64 - m).powi(2)).sum::<f64>() / n;
        (m, v.sqrt())
    });
    lengths
        .iter()
        .map(|&l| {
            if std > 1e-12 {
                (l as f64 - mean) / std
            } else {
                0.0
            }
        })
        .collect()
}

/// Play `n_rallies` multi-shot exchanges: the source opens, the robot
/// returns, the source answers, until either side fails or the cap hits.
/// Rally length counts both sides' paddle touches.
pub fn rally_eval(
    params: &[f64],
    norm: &Normalizer,
    env_config: &EnvConfig,
    source: &mut dyn ThrowSource,
    n_rallies: usize,
    cap: usize,
    eval_seed: u64,
) -> Result<RallyReport> {
    let mut lengths = Vec::with_capacity(n_rallies);
    let mut censored = Vec::with_capacity(n_rallies);
    for rally in 0..n_rallies {
        let mut touches = 0usize;
        let mut throw = source.opening_throw()?;
        touches += 1; // the opening hit
        let mut exchange = 0usize;
        let was_censored = loop {
            let seed = seed_chain(&[eval_seed, tag("rally"), rally as u64, exchange as u64]);
            let mut env = Env::new(env_config.clone());
            let (record, _) = run_episode(
                &mut env,
                params,
                norm,
                &throw,
                seed_chain(&[seed, tag("latency")]),
                seed_chain(&[seed, tag("noise")]),
            )?;
            if record.hit {
                touches += 1;
            }
            let Some(info) = return_info(&record) else {
                break false; // robot failed to return
            };
            if touches >= cap {
                break true;
            }
            match source.attempt_return(&info)? {
                Some(next) => {
                    touches += 1;
                    throw = next;
                    exchange += 1;
                }
                None => break false, // opponent failed to return
            }
        };
        lengths.push(touches);
        censored.push(was_censored);
    }
    let normalized = normalize_rally_lengths(&lengths, None);
    let n = lengths.len().max(1) as f64;
    let mean = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
    let std = (lengths
        .iter()
        .map(|&l| (l as f64 - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RallyReport {
        lengths,
        censored,
        normalized,
        mean,
        std,
    })
}

// ---------------------------------------------------------------------------
// Whole-experiment runner
// ---------------------------------------------------------------------------

/// Accumulated experiment artifacts.
#[derive(Debug, Clone)]
pub struct ExperimentState {
    pub dataset: TrajectoryDataset,
    pub models: Vec<BallDistribution>,
    pub theta: Vec<f64>,
    pub normalizer: Normalizer,
    /// (label, checkpoint) in creation order; labels like "theta_0s".
    pub checkpoints: Vec<(String, Checkpoint)>,
    /// Labeled mean sparse scores from seed-selection evaluations.
    pub eval_scores: Vec<(String, f64)>,
}

impl ExperimentState {
    pub fn fresh() -> Self {
        Self {
            dataset: TrajectoryDataset::default(),
            models: Vec::new(),
            theta: initial_params(),
            normalizer: Normalizer::new(),
            checkpoints: Vec::new(),
            eval_scores: Vec::new(),
        }
    }

    pub fn find_checkpoint(&self, label: &str) -> Option<&Checkpoint> {
        self.checkpoints
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, c)| c)
    }

    fn push_checkpoint(&mut self, label: &str, iteration: u32) {
        self.checkpoints.push((
            label.to_string(),
            Checkpoint::new(
                self.theta.clone(),
                self.normalizer.clone(),
                iteration,
                label,
            ),
        ));
    }
}

/// On-disk experiment layout with phase-granular resume.
pub struct ExperimentDir {
    pub root: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    completed: Vec<String>,
}

impl ExperimentDir {
    pub fn create(root: &Path, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        for sub in ["datasets", "models", "checkpoints", "metrics", "reports"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        let config_path = root.join("config.toml");
        if !config_path.exists() {
            std::fs::write(&config_path, config.to_toml()?)?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    fn manifest(&self) -> Manifest {
        std::fs::read_to_string(self.manifest_path())
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    fn is_complete(&self, phase: &str) -> bool {
        self.manifest().completed.iter().any(|p| p == phase)
    }

    fn mark_complete(&self, phase: &str) -> Result<()> {
        let mut manifest = self.manifest();
        if !manifest.completed.iter().any(|p| p == phase) {
            manifest.completed.push(phase.to_string());
        }
        std::fs::write(
            self.manifest_path(),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    fn save_phase(&self, phase: &str, state: &ExperimentState) -> Result<()> {
        // Snapshot everything needed to resume after this phase.
        let ckpt = Checkpoint::new(state.theta.clone(), state.normalizer.clone(), 0, phase);
        ckpt.save(&self.root.join("checkpoints").join(format!("{phase}.ckpt")))?;
        state
            .dataset
            .save(&self.root.join("datasets").join(format!("{phase}.jsonl")))?;
        let models = serde_json::to_string_pretty(&state.models)?;
        std::fs::write(
            self.root.join("models").join(format!("{phase}.json")),
            models,
        )?;
        self.mark_complete(phase)?;
        Ok(())
    }

    fn load_phase(&self, phase: &str, state: &mut ExperimentState) -> Result<()> {
        let ckpt = Checkpoint::load(&self.root.join("checkpoints").join(format!("{phase}.ckpt")))?;
        state.theta = ckpt.params;
        state.normalizer = ckpt.normalizer;
        state.dataset =
            TrajectoryDataset::load(&self.root.join("datasets").join(format!("{phase}.jsonl")))?;
        let models =
            std::fs::read_to_string(self.root.join("models").join(format!("{phase}.json")))?;
        state.models = serde_json::from_str(&models)?;
        Ok(())
    }

    fn metrics_writer(&self, phase: &str) -> Result<MetricsWriter> {
        MetricsWriter::create(&self.metrics_path(phase))
    }

    pub fn metrics_path(&self, phase: &str) -> PathBuf {
        self.root.join("metrics").join(format!("{phase}.csv"))
    }

    pub fn completed_phases(&self) -> Vec<String> {
        self.manifest().completed
    }

    pub fn load_models_file(&self, phase: &str) -> Result<Vec<BallDistribution>> {
        let text =
            std::fs::read_to_string(self.root.join("models").join(format!("{phase}.json")))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn load_checkpoint_file(&self, phase: &str) -> Result<Checkpoint> {
        Checkpoint::load(&self.root.join("checkpoints").join(format!("{phase}.ckpt")))
    }
}

/// Build the configured surrogate opponent for a given seed.
pub fn surrogate_from_config(config: &ExperimentConfig, seed: u64) -> Result<SurrogateHuman> {
    let (hidden, lob) = config.surrogate.preset_names()?;
    SurrogateHuman::new(
        crate::presets::distribution(&hidden)?,
        crate::presets::distribution(&lob)?,
        config.surrogate.params,
        config.physics,
        config.table,
        seed,
    )
}

/// Run one labeled phase unless it is already complete on disk.
fn with_phase<F>(
    dir: Option<&ExperimentDir>,
    phase: &str,
    master_seed: u64,
    source: &mut dyn ThrowSource,
    state: &mut ExperimentState,
    body: F,
) -> Result<()>
where
    F: FnOnce(&mut ExperimentState, &mut dyn ThrowSource, Option<&mut MetricsWriter>) -> Result<()>,
{
    // Phase-scoped opponent stream: resumed and uninterrupted runs agree.
    source.reset_stream(seed_chain(&[master_seed, tag("phase-stream"), tag(phase)]));
    if let Some(d) = dir {
        if d.is_complete(phase) {
            d.load_phase(phase, state)?;
            return Ok(());
        }
        let mut writer = d.metrics_writer(phase)?;
        body(state, source, Some(&mut writer))?;
        d.save_phase(phase, state)?;
        Ok(())
    } else {
        body(state, source, None)
    }
}

fn refit_model(state: &mut ExperimentState, config: &ExperimentConfig) -> Result<()> {
    let (model, _report) = estimate_distribution(
        &state.dataset,
        &config.physics,
        &config.table,
        &config.dataset.cluster,
    )?;
    state.models.push(model);
    Ok(())
}

/// Train `seeds_per_sim_phase` candidates in simulation against `model`,
/// select the best by surrogate evaluation (archiving the served throws),
/// and leave the winner in the state.
#[allow(clippy::too_many_arguments)]
fn sim_phase_with_selection(
    state: &mut ExperimentState,
    config: &ExperimentConfig,
    source: &mut dyn ThrowSource,
    model: BallDistribution,
    updates: usize,
    iteration: u32,
    phase_seed: u64,
    mut writer: Option<&mut MetricsWriter>,
) -> Result<()> {
    let schedule = &config.schedule;
    let env_sim = config.env_sim();
    let mut candidates = Vec::with_capacity(schedule.seeds_per_sim_phase);
    for seed_idx in 0..schedule.seeds_per_sim_phase {
        let train_seed = seed_chain(&[phase_seed, tag("train-seed"), seed_idx as u64]);
        let (theta, norm) = train_sim_phase(
            &state.theta,
            &state.normalizer,
            &env_sim,
            &model,
            &schedule.es_sim,
            updates,
            schedule.throw_pool,
            train_seed,
            |u, report| {
                if seed_idx == 0 {
                    if let Some(w) = writer.as_deref_mut() {
                        let _ = w.append(u, report);
                    }
                }
            },
        )?;
        candidates.push((theta, norm));
    }

    // Transfer test: evaluate candidates against the surrogate; the served
    // throws are opponent hits and belong in the dataset.
    let mut eval_throws = Vec::new();
    let mut archive = ThrowArchive::new(
        &mut eval_throws,
        config,
        iteration,
        ThrowOrigin::Eval,
        seed_chain(&[phase_seed, tag("eval-archive")]),
    );
    let env_real = config.env_real();
    let (best, scores) = select_seed_model(
        &candidates,
        &env_real,
        source,
        schedule.eval_episodes,
        seed_chain(&[phase_seed, tag("seed-select")]),
        Some(&mut archive),
    )?;
    state.dataset.trajectories.extend(eval_throws);
    let (theta, norm) = candidates.swap_remove(best);
    state.theta = theta;
    state.normalizer = norm;
    for (idx, score) in scores.iter().enumerate() {
        state
            .eval_scores
            .push((format!("sim{iteration}_seed{idx}"), *score));
    }
    Ok(())
}

/// The iterative experiment: bootstrap -> [sim -> fine-tune -> refit] x N.
pub fn run_iterative(
    config: &ExperimentConfig,
    source: &mut dyn ThrowSource,
    dir: Option<&ExperimentDir>,
) -> Result<ExperimentState> {
    config.validate()?;
    let schedule = &config.schedule;
    let master = config.master_seed;
    let mut state = ExperimentState::fresh();

    with_phase(dir, "bootstrap", master, source, &mut state, |state, source, _| {
        state.dataset = bootstrap_dataset(
            source,
            config,
            config.dataset.bootstrap_throws,
            seed_chain(&[master, tag("bootstrap")]),
        )?;
        refit_model(state, config)
    })?;

    for i in 0..schedule.iterations {
        let updates = if i == 0 {
            schedule.sim_updates_first
        } else {
            schedule.sim_updates_later
        };
        let sim_phase = format!("sim_{i}");
        with_phase(dir, &sim_phase, master, source, &mut state, |state, source, writer| {
            let model = *state.models.last().expect("model exists after bootstrap");
            sim_phase_with_selection(
                state,
                config,
                source,
                model,
                updates,
                i as u32,
                seed_chain(&[master, tag("sim-phase"), i as u64]),
                writer,
            )?;
            state.push_checkpoint(&format!("theta_{i}s"), i as u32);
            Ok(())
        })?;

        let ft_phase = format!("ft_{i}");
        with_phase(dir, &ft_phase, master, source, &mut state, |state, source, mut writer| {
            let mut collected = Vec::new();
            let (theta, norm) = finetune_phase(
                &state.theta,
                &state.normalizer,
                &config.env_real(),
                &schedule.es_real,
                schedule.finetune_updates[i],
                source,
                &mut collected,
                config,
                i as u32,
                seed_chain(&[master, tag("ft-phase"), i as u64]),
                |u, report| {
                    if let Some(w) = writer.as_deref_mut() {
                        let _ = w.append(u, report);
                    }
                },
            )?;
            state.theta = theta;
            state.normalizer = norm;
            state.dataset.trajectories.extend(collected);
            state.push_checkpoint(&format!("theta_{i}r"), i as u32);
            refit_model(state, config)
        })?;
    }

    Ok(state)
}

/// Baseline: one simulation phase on the bootstrap model with the full
/// simulation budget, then the whole fine-tune budget in one uninterrupted
/// block. Budgets match the iterative run exactly.
pub fn run_s2r_ft(
    config: &ExperimentConfig,
    source: &mut dyn ThrowSource,
    dir: Option<&ExperimentDir>,
) -> Result<ExperimentState> {
    config.validate()?;
    let schedule = &config.schedule;
    let master = config.master_seed;
    let mut state = ExperimentState::fresh();

    with_phase(dir, "bootstrap", master, source, &mut state, |state, source, _| {
        state.dataset = bootstrap_dataset(
            source,
            config,
            config.dataset.bootstrap_throws,
            seed_chain(&[master, tag("bootstrap")]),
        )?;
        refit_model(state, config)
    })?;

    with_phase(dir, "sim_0", master, source, &mut state, |state, source, writer| {
        let model = *state.models.last().expect("bootstrap model");
        sim_phase_with_selection(
            state,
            config,
            source,
            model,
            schedule.total_sim_updates(),
            0,
            seed_chain(&[master, tag("sim-phase"), 0]),
            writer,
        )?;
        state.push_checkpoint("theta_0s", 0);
        Ok(())
    })?;

    with_phase(dir, "ft_0", master, source, &mut state, |state, source, mut writer| {
        let mut collected = Vec::new();
        let (theta, norm) = finetune_phase(
            &state.theta,
            &state.normalizer,
            &config.env_real(),
            &schedule.es_real,
            schedule.total_finetune_updates(),
            source,
            &mut collected,
            config,
            0,
            seed_chain(&[master, tag("ft-phase"), 0]),
            |u, report| {
                if let Some(w) = writer.as_deref_mut() {
                    let _ = w.append(u, report);
                }
            },
        )?;
        state.theta = theta;
        state.normalizer = norm;
        state.dataset.trajectories.extend(collected);
        state.push_checkpoint("theta_0r", 0);
        refit_model(state, config)
    })?;

    Ok(state)
}

/// Baseline: simulation training on a supplied (penultimate) behavior model,
/// then one short fine-tune round (the last cycle's budget).
pub fn run_oracle(
    config: &ExperimentConfig,
    penultimate: &BallDistribution,
    source: &mut dyn ThrowSource,
    dir: Option<&ExperimentDir>,
) -> Result<ExperimentState> {
    config.validate()?;
    let schedule = &config.schedule;
    let master = config.master_seed;
    let mut state = ExperimentState::fresh();
    state.models.push(*penultimate);

    with_phase(dir, "sim_0", master, source, &mut state, |state, source, writer| {
        sim_phase_with_selection(
            state,
            config,
            source,
            *penultimate,
            schedule.sim_updates_first,
            0,
            seed_chain(&[master, tag("sim-phase"), 0]),
            writer,
        )?;
        state.push_checkpoint("theta_0s", 0);
        Ok(())
    })?;

    let last_budget = *schedule
        .finetune_updates
        .last()
        .ok_or_else(|| Error::MissingPrerequisite("schedule has no fine-tune cycles".into()))?;
    with_phase(dir, "ft_0", master, source, &mut state, |state, source, mut writer| {
        let mut collected = Vec::new();
        let (theta, norm) = finetune_phase(
            &state.theta,
            &state.normalizer,
            &config.env_real(),
            &schedule.es_real,
            last_budget,
            source,
            &mut collected,
            config,
            0,
            seed_chain(&[master, tag("ft-phase"), 0]),
            |u, report| {
                if let Some(w) = writer.as_deref_mut() {
                    let _ = w.append(u, report);
                }
            },
        )?;
        state.theta = theta;
        state.normalizer = norm;
        state.dataset.trajectories.extend(collected);
        state.push_checkpoint("theta_0r", 0);
        Ok(())
    })?;

    Ok(state)
}

/// Entry point for the train command: dispatch on the configured mode with
/// the configured surrogate as the opponent.
pub fn run_experiment(
    config: &ExperimentConfig,
    dir: Option<&ExperimentDir>,
) -> Result<ExperimentState> {
    let mut source =
        surrogate_from_config(config, seed_chain(&[config.master_seed, tag("opponent")]))?;
    match config.mode {
        ExperimentMode::Is2r => run_iterative(config, &mut source, dir),
        ExperimentMode::S2rFt => run_s2r_ft(config, &mut source, dir),
        ExperimentMode::Oracle => {
            let name = &config.oracle_distribution;
            if name.is_empty() {
                return Err(Error::MissingPrerequisite(
                    "oracle mode needs oracle_distribution (the penultimate model)".into(),
                ));
            }
            let penultimate = crate::presets::distribution(name)?;
            run_oracle(config, &penultimate, &mut source, dir)
        }
    }
}
