//! Experiment configuration: a versioned, human-editable TOML schema that
//! aggregates every tunable in the crate and resolves named presets.
//!
//! Distribution presets are referenced by name, never duplicated inline.
//! `validate` runs before any compute; every error names the offending key.

use crate::env::{EnvConfig, LatencyModel, RewardConfig, RobotConfig};
use crate::es::EsConfig;
use crate::human_model::ClusterOptions;
use crate::physics::{PhysicsConstants, TableGeometry};
use crate::policy::VelocityLimits;
use crate::surrogate::SurrogateParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

/// Which experiment the train command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Iterative train/fine-tune with behavior-model refresh.
    Is2r,
    /// One simulation phase, then the whole fine-tune budget at once.
    S2rFt,
    /// Simulation on a supplied (penultimate) model, then one short
    /// fine-tune round.
    Oracle,
}

/// Phase lengths and per-phase search configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseSchedule {
    /// Updates for the first simulation phase (training from scratch).
    pub sim_updates_first: usize,
    /// Updates for each later simulation phase (adaptation).
    pub sim_updates_later: usize,
    /// Fine-tune updates per cycle; length = iterations.
    pub finetune_updates: Vec<usize>,
    pub iterations: usize,
    /// Independent seeds trained per simulation phase (best one kept).
    pub seeds_per_sim_phase: usize,
    /// Episodes per seed-selection evaluation.
    pub eval_episodes: usize,
    /// Simulation phases train against a fixed pool of this many
    /// pre-sampled throws (0 = a fresh throw per rollout).
    pub throw_pool: usize,
    pub es_sim: EsConfig,
    pub es_real: EsConfig,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self::desk()
    }
}

impl PhaseSchedule {
    /// Workstation-scale schedule: a full three-iteration experiment in
    /// minutes. Fine-tune budget matches the full-scale split.
    pub fn desk() -> Self {
        Self {
            sim_updates_first: 2000,
            sim_updates_later: 400,
            finetune_updates: vec![60, 70, 70],
            iterations: 3,
            seeds_per_sim_phase: 1,
            eval_episodes: 50,
            throw_pool: 128,
            es_sim: EsConfig::desk_sim_default(),
            es_real: EsConfig::desk_real_default(),
        }
    }

    /// Full-scale schedule as published: 30k scratch updates, 5k adaptation
    /// updates, 60+70+70 fine-tune updates, 3 models per simulation phase.
    pub fn paper() -> Self {
        Self {
            sim_updates_first: 30_000,
            sim_updates_later: 5_000,
            finetune_updates: vec![60, 70, 70],
            iterations: 3,
            seeds_per_sim_phase: 3,
            eval_episodes: 50,
            throw_pool: 0,
            es_sim: EsConfig::sim_default(),
            es_real: EsConfig::real_default(),
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule preset '{other}' (desk|paper)"
            ))),
        }
    }

    pub fn total_finetune_updates(&self) -> usize {
        self.finetune_updates.iter().sum()
    }

    pub fn total_sim_updates(&self) -> usize {
        self.sim_updates_first + self.sim_updates_later * self.iterations.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Validation("schedule.iterations must be >= 1".into()));
        }
        if self.finetune_updates.len() != self.iterations {
            return Err(Error::Validation(format!(
                "schedule.finetune_updates has {} entries for {} iterations",
                self.finetune_updates.len(),
                self.iterations
            )));
        }
        if self.sim_updates_first == 0 {
            return Err(Error::Validation(
                "schedule.sim_updates_first must be >= 1".into(),
            ));
        }
        if self.seeds_per_sim_phase == 0 {
            return Err(Error::Validation(
                "schedule.seeds_per_sim_phase must be >= 1".into(),
            ));
        }
        self.es_sim.validate()?;
        self.es_real.validate()?;
        Ok(())
    }
}

/// Surrogate selection: either a skill tier or explicit preset names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    /// "beginner" | "intermediate" | "advanced", or empty when presets are
    /// given explicitly.
    pub skill: String,
    /// Hidden behavior preset name (overrides skill when non-empty).
    pub hidden_preset: String,
    /// Lob behavior preset name (overrides skill when non-empty).
    pub lob_preset: String,
    pub params: SurrogateParams,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            skill: "beginner".into(),
            hidden_preset: String::new(),
            lob_preset: String::new(),
            params: SurrogateParams::default(),
        }
    }
}

impl SurrogateConfig {
    /// Resolve to (hidden, lob) preset names.
    pub fn preset_names(&self) -> Result<(String, String)> {
        if !self.hidden_preset.is_empty() || !self.lob_preset.is_empty() {
            if self.hidden_preset.is_empty() || self.lob_preset.is_empty() {
                return Err(Error::Validation(
                    "surrogate.hidden_preset and surrogate.lob_preset must be set together".into(),
                ));
            }
            return Ok((self.hidden_preset.clone(), self.lob_preset.clone()));
        }
        let player = crate::presets::skill_player(&self.skill)?;
        Ok((format!("{player}_m2"), format!("{player}_m0")))
    }
}

/// Dataset generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Throws collected before any robot exists.
    pub bootstrap_throws: usize,
    /// Half-width of the uniform per-axis noise on rendered observations, m.
    pub render_noise: f64,
    pub cluster: ClusterOptions,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            bootstrap_throws: 100,
            render_noise: 0.010,
            cluster: ClusterOptions::default(),
        }
    }
}

/// The complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub master_seed: u64,
    /// Output directory; relative paths resolve under `RALLYLAB_OUT` when
    /// that variable is set.
    pub out_dir: PathBuf,
    pub mode: ExperimentMode,
    /// Distribution preset for plain box-training runs and ablations.
    pub train_distribution: String,
    /// Penultimate-model preset for oracle mode (empty = taken from a
    /// completed iterative run).
    pub oracle_distribution: String,
    pub physics: PhysicsConstants,
    pub table: TableGeometry,
    pub robot: RobotConfig,
    pub latency: LatencyModel,
    pub reward_sim: RewardConfig,
    pub reward_real: RewardConfig,
    pub limits: VelocityLimits,
    /// Ball observation noise half-width, m.
    pub ball_noise: f64,
    pub max_steps: usize,
    pub control_rate_hz: f64,
    pub schedule: PhaseSchedule,
    pub surrogate: SurrogateConfig,
    pub dataset: DatasetConfig,
    /// Rally evaluation settings.
    pub rally_count: usize,
    pub rally_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            master_seed: 17,
            out_dir: PathBuf::from("runs/experiment"),
            mode: ExperimentMode::Is2r,
            train_distribution: "narrow".into(),
            oracle_distribution: String::new(),
            physics: PhysicsConstants::default(),
            table: TableGeometry::default(),
            robot: RobotConfig::default(),
            latency: LatencyModel::default(),
            reward_sim: RewardConfig::sim(),
            reward_real: RewardConfig::real(),
            limits: VelocityLimits::default(),
            ball_noise: 0.040,
            max_steps: 200,
            control_rate_hz: 75.0,
            schedule: PhaseSchedule::desk(),
            surrogate: SurrogateConfig::default(),
            dataset: DatasetConfig::default(),
            rally_count: 50,
            rally_cap: 200,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Environment configuration for simulation-phase training.
    pub fn env_sim(&self) -> EnvConfig {
        EnvConfig {
            physics: self.physics,
            table: self.table,
            robot: self.robot.clone(),
            latency: self.latency,
            reward: self.reward_sim,
            limits: self.limits,
            ball_noise: self.ball_noise,
            max_steps: self.max_steps,
            control_rate_hz: self.control_rate_hz,
        }
    }

    /// Environment configuration for fine-tuning against the surrogate.
    pub fn env_real(&self) -> EnvConfig {
        EnvConfig {
            reward: self.reward_real,
            ..self.env_sim()
        }
    }

    /// Resolve `out_dir` under the `RALLYLAB_OUT` root if set.
    pub fn resolved_out_dir(&self) -> PathBuf {
        if self.out_dir.is_absolute() {
            return self.out_dir.clone();
        }
        match std::env::var_os("RALLYLAB_OUT") {
            Some(root) => PathBuf::from(root).join(&self.out_dir),
            None => self.out_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Validation(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.physics.validate()?;
        self.table.validate()?;
        self.schedule.validate()?;
        crate::presets::distribution(&self.train_distribution)
            .map_err(|e| Error::Validation(format!("train_distribution: {e}")))?;
        if !self.oracle_distribution.is_empty() {
            crate::presets::distribution(&self.oracle_distribution)
                .map_err(|e| Error::Validation(format!("oracle_distribution: {e}")))?;
        }
        let (hidden, lob) = self.surrogate.preset_names()?;
        crate::presets::distribution(&hidden)
            .map_err(|e| Error::Validation(format!("surrogate hidden preset: {e}")))?;
        crate::presets::distribution(&lob)
            .map_err(|e| Error::Validation(format!("surrogate lob preset: {e}")))?;
        if self.ball_noise < 0.0 {
            return Err(Error::Validation("ball_noise must be >= 0".into()));
        }
        if self.max_steps == 0 || self.max_steps > 10_000 {
            return Err(Error::Validation("max_steps must be in 1..=10000".into()));
        }
        if !(self.control_rate_hz > 0.0) {
            return Err(Error::Validation("control_rate_hz must be > 0".into()));
        }
        if self.rally_count == 0 || self.rally_cap == 0 {
            return Err(Error::Validation(
                "rally_count and rally_cap must be >= 1".into(),
            ));
        }
        if self.dataset.bootstrap_throws < self.dataset.cluster.min_pts {
            return Err(Error::Validation(
                "dataset.bootstrap_throws must be >= dataset.cluster.min_pts".into(),
            ));
        }
        Ok(())
    }
}
