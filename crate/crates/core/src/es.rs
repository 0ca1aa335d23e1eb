//! Blackbox evolutionary search over flat parameter vectors.
//!
//! One update samples N Gaussian directions (orthogonalized in blocks),
//! rolls out `theta +/- sigma * delta` m times each, ranks directions, and
//! applies
//!
//! ```text
//! theta' = theta + alpha / sigma_R * sum_{i in elites} (meanR+_i - meanR-_i) * delta_i
//! ```
//!
//! where `sigma_R` is the standard deviation of the per-direction mean
//! rewards (elite-only by default, switchable to all 2N). Two elite rules
//! are provided: ranking by the antithetic reward *difference* (the default,
//! "BGS") and ranking by the *max* of either direction's reward ("ARS").
//!
//! Rollouts are independent; the backend decides whether they run in
//! parallel. Results are always reduced in job order, so a run is
//! bit-deterministic regardless of worker count.

use crate::policy::Normalizer;
use crate::rng::{rng_from, seed_chain};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Elite ranking rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EliteRule {
    /// Rank by `mean(R+) - mean(R-)` per direction, descending.
    Bgs,
    /// Rank by `max(mean(R+), mean(R-))` per direction, descending.
    Ars,
}

/// Which reward population the `sigma_R` divisor is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaScope {
    /// Std over the 2k elite per-direction mean rewards (default).
    EliteMeans,
    /// Std over all 2N per-direction mean rewards.
    AllMeans,
}

/// Search hyperparameters. Field names in serialized form follow the
/// experiment-config schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsConfig {
    pub step_size: f64,
    pub perturbation_standard_deviation: f64,
    pub number_of_perturbations: usize,
    pub number_of_rollouts_per_perturbation: usize,
    /// Fraction of directions kept as elites, in (0, 1].
    pub percentage_to_keep: f64,
    pub maximum_environment_steps_per_rollout: usize,
    pub use_orthogonal_perturbations: bool,
    pub use_observation_normalization: bool,
    pub elite_rule: EliteRule,
    pub sigma_r_scope: SigmaScope,
    /// Evaluate both signs of a direction on the same episode seeds (common
    /// random numbers). Keeps the antithetic difference a measurement of the
    /// perturbation instead of the throw draw; essential at small N and m.
    pub antithetic_shared_episodes: bool,
    /// Lower bound on the sigma_R divisor. Zero reproduces the bare update
    /// rule; a positive floor caps the step blow-up that otherwise occurs
    /// when a converging policy makes elite rewards nearly equal.
    pub sigma_r_floor: f64,
    /// Multiplicative parameter shrink per update, applied before the elite
    /// step. Zero disables. Keeps tanh preactivations out of saturation
    /// over long runs.
    pub weight_decay: f64,
    /// Evaluate every direction on the same episode batch within an update,
    /// so elite ranking compares perturbations under identical conditions.
    pub common_episode_batch: bool,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self::sim_default()
    }
}

impl EsConfig {
    /// Hyperparameters used for training in simulation.
    pub fn sim_default() -> Self {
        Self {
            step_size: 0.00375,
            perturbation_standard_deviation: 0.025,
            number_of_perturbations: 200,
            number_of_rollouts_per_perturbation: 15,
            percentage_to_keep: 0.30,
            maximum_environment_steps_per_rollout: 200,
            use_orthogonal_perturbations: true,
            use_observation_normalization: true,
            elite_rule: EliteRule::Bgs,
            sigma_r_scope: SigmaScope::EliteMeans,
            antithetic_shared_episodes: true,
            sigma_r_floor: 0.0,
            weight_decay: 0.0,
            common_episode_batch: false,
        }
    }

    /// Hyperparameters used for fine-tuning phases.
    pub fn real_default() -> Self {
        Self {
            number_of_perturbations: 5,
            number_of_rollouts_per_perturbation: 3,
            percentage_to_keep: 0.60,
            ..Self::sim_default()
        }
    }

    /// Workstation-scale simulation preset: fewer directions and repeats so
    /// a full run finishes in minutes, with a sigma_R floor for stability at
    /// this batch size.
    pub fn desk_sim_default() -> Self {
        Self {
            number_of_perturbations: 32,
            number_of_rollouts_per_perturbation: 2,
            sigma_r_floor: 0.5,
            weight_decay: 3e-4,
            common_episode_batch: true,
            ..Self::sim_default()
        }
    }

    /// Fine-tuning preset paired with [`Self::desk_sim_default`].
    pub fn desk_real_default() -> Self {
        Self {
            sigma_r_floor: 0.5,
            weight_decay: 3e-4,
            ..Self::real_default()
        }
    }

    /// Elite count: `ceil(fraction * N)`.
    pub fn elite_count(&self) -> usize {
        ((self.percentage_to_keep * self.number_of_perturbations as f64).ceil() as usize)
            .clamp(1, self.number_of_perturbations)
    }

    /// Rollouts per update: N * 2 * m.
    pub fn rollouts_per_update(&self) -> usize {
        self.number_of_perturbations * 2 * self.number_of_rollouts_per_perturbation
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.percentage_to_keep > 0.0 && self.percentage_to_keep <= 1.0) {
            return Err(Error::Validation(
                "percentage_to_keep must be in (0, 1]".into(),
            ));
        }
        if self.number_of_perturbations == 0 || self.number_of_rollouts_per_perturbation == 0 {
            return Err(Error::Validation(
                "perturbation and rollout counts must be >= 1".into(),
            ));
        }
        if !(self.perturbation_standard_deviation > 0.0) {
            return Err(Error::Validation(
                "perturbation_standard_deviation must be > 0".into(),
            ));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Validation("step_size must be > 0".into()));
        }
        Ok(())
    }
}

/// Gaussian directions with their antithetic rollout rewards.
#[derive(Debug, Clone)]
pub struct PerturbationBatch {
    pub directions: Vec<Vec<f64>>,
    /// `rewards_plus[i][j]` = j-th repeat of direction i, positive sign.
    pub rewards_plus: Vec<Vec<f64>>,
    pub rewards_minus: Vec<Vec<f64>>,
    pub rng_seed: u64,
}

impl PerturbationBatch {
    pub fn mean_plus(&self, i: usize) -> f64 {
        mean(&self.rewards_plus[i])
    }

    pub fn mean_minus(&self, i: usize) -> f64 {
        mean(&self.rewards_minus[i])
    }

    pub fn mean_diff(&self, i: usize) -> f64 {
        self.mean_plus(i) - self.mean_minus(i)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Sample `n` Gaussian directions of dimension `dim`, orthogonalized in
/// blocks of size `min(dim, remaining)`.
///
/// Each block is a Gaussian matrix with orthonormalized columns, and every
/// column is rescaled to the norm of an independent Gaussian `dim`-vector,
/// so marginals match plain Gaussian sampling while directions within a
/// block are exactly orthogonal.
pub fn sample_orthogonal_directions(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(&[seed, crate::rng::tag("orthogonal-directions")]);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut remaining = n;
    while remaining > 0 {
        let block = remaining.min(dim);
        let mut cols: Vec<Vec<f64>> = (0..block)
            .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        orthonormalize(&mut cols, &mut rng);
        for col in cols.iter_mut() {
            let target: f64 = (0..dim)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    g * g
                })
                .sum::<f64>()
                .sqrt();
            for v in col.iter_mut() {
                *v *= target;
            }
        }
        out.append(&mut cols);
        remaining -= block;
    }
    out
}

/// Plain i.i.d. Gaussian directions (used when orthogonalization is off).
pub fn sample_iid_directions(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(&[seed, crate::rng::tag("iid-directions")]);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Modified Gram-Schmidt with a second pass; degenerate columns are redrawn.
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut rand_chacha::ChaCha8Rng) {
    for i in 0..cols.len() {
        loop {
            for _pass in 0..2 {
                for j in 0..i {
                    let proj: f64 = dot(&cols[i], &cols[j]);
                    let (left, right) = cols.split_at_mut(i);
                    let cj = &left[j];
                    for (v, w) in right[0].iter_mut().zip(cj.iter()) {
                        *v -= proj * w;
                    }
                }
            }
            let norm = dot(&cols[i], &cols[i]).sqrt();
            if norm > 1e-10 {
                for v in cols[i].iter_mut() {
                    *v /= norm;
                }
                break;
            }
            // Practically unreachable: redraw a fresh Gaussian column.
            for v in cols[i].iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Order directions by the configured elite rule, best first, ties broken by
/// direction index, and return the first `k`.
pub fn rank_elites(batch: &PerturbationBatch, rule: EliteRule, k: usize) -> Vec<usize> {
    let n = batch.len();
    let mut keyed: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let key = match rule {
                EliteRule::Bgs => batch.mean_diff(i),
                EliteRule::Ars => batch.mean_plus(i).max(batch.mean_minus(i)),
            };
            (i, key)
        })
        .collect();
    // Stable sort: equal keys keep ascending index order.
    keyed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    keyed.truncate(k.min(n));
    keyed.into_iter().map(|(i, _)| i).collect()
}

/// Result of one parameter update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateReport {
    pub elites: Vec<usize>,
    /// `mean(R+) - mean(R-)` for every direction (not just elites).
    pub mean_diffs: Vec<f64>,
    pub sigma_r: f64,
    pub mean_reward: f64,
    pub max_reward: f64,
    /// True when `sigma_r` was zero and the update was skipped.
    pub skipped: bool,
    pub rollouts: usize,
}

/// Apply the elite-weighted update to `params`.
///
/// Directions enter unscaled (sigma is applied at rollout time only). When
/// the sigma_R divisor is zero the update is skipped and flagged.
pub fn apply_update(
    params: &[f64],
    batch: &PerturbationBatch,
    elites: &[usize],
    config: &EsConfig,
) -> Result<(Vec<f64>, UpdateReport)> {
    if elites.is_empty() {
        return Err(Error::InvalidArgument("elite set is empty".into()));
    }
    let n = batch.len();
    let mean_diffs: Vec<f64> = (0..n).map(|i| batch.mean_diff(i)).collect();

    let sigma_r = match config.sigma_r_scope {
        SigmaScope::EliteMeans => {
            let mut pool = Vec::with_capacity(elites.len() * 2);
            for &i in elites {
                pool.push(batch.mean_plus(i));
                pool.push(batch.mean_minus(i));
            }
            population_std(&pool)
        }
        SigmaScope::AllMeans => {
            let mut pool = Vec::with_capacity(n * 2);
            for i in 0..n {
                pool.push(batch.mean_plus(i));
                pool.push(batch.mean_minus(i));
            }
            population_std(&pool)
        }
    };

    let all_means: Vec<f64> = (0..n)
        .flat_map(|i| [batch.mean_plus(i), batch.mean_minus(i)])
        .collect();
    let mean_reward = mean(&all_means);
    let max_reward = all_means.iter().cloned().fold(f64::MIN, f64::max);

    let mut report = UpdateReport {
        elites: elites.to_vec(),
        mean_diffs,
        sigma_r,
        mean_reward,
        max_reward,
        skipped: false,
        rollouts: 0,
    };

    if sigma_r < 1e-12 && config.sigma_r_floor <= 0.0 {
        report.skipped = true;
        return Ok((params.to_vec(), report));
    }

    let scale = config.step_size / sigma_r.max(config.sigma_r_floor);
    let mut next = params.to_vec();
    if config.weight_decay > 0.0 {
        let keep = 1.0 - config.weight_decay;
        for p in next.iter_mut() {
            *p *= keep;
        }
    }
    for &i in elites {
        let w = scale * report.mean_diffs[i];
        for (p, d) in next.iter_mut().zip(batch.directions[i].iter()) {
            *p += w * d;
        }
    }
    Ok((next, report))
}

/// Antithetic sign of a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn index(self) -> u64 {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

/// One rollout assignment handed to the backend.
#[derive(Debug, Clone, Copy)]
pub struct RolloutJob {
    pub direction: usize,
    pub sign: Sign,
    pub repeat: usize,
    /// Index into the perturbed parameter table.
    pub param_index: usize,
    pub seed: u64,
}

/// What a rollout reports back.
#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    pub reward: f64,
    /// Observation statistics gathered during the rollout (empty if none).
    pub normalizer_delta: Normalizer,
}

/// Executes a batch of rollouts. Implementations must return outcomes in job
/// order.
pub trait RolloutBackend {
    fn run_all(
        &mut self,
        param_sets: &[Vec<f64>],
        norm: &Normalizer,
        jobs: &[RolloutJob],
    ) -> Vec<RolloutOutcome>;
}

/// Runs rollouts on the rayon pool. The closure must be pure per job.
pub struct ParallelBackend<F>(pub F);

impl<F> RolloutBackend for ParallelBackend<F>
where
    F: Fn(&[f64], &Normalizer, u64) -> RolloutOutcome + Sync,
{
    fn run_all(
        &mut self,
        param_sets: &[Vec<f64>],
        norm: &Normalizer,
        jobs: &[RolloutJob],
    ) -> Vec<RolloutOutcome> {
        jobs.par_iter()
            .map(|job| (self.0)(&param_sets[job.param_index], norm, job.seed))
            .collect()
    }
}

/// Runs rollouts one at a time in job order; the closure may carry state
/// across rollouts (e.g. an opponent that reacts to previous episodes).
pub struct SequentialBackend<F>(pub F);

impl<F> RolloutBackend for SequentialBackend<F>
where
    F: FnMut(&[f64], &Normalizer, u64) -> RolloutOutcome,
{
    fn run_all(
        &mut self,
        param_sets: &[Vec<f64>],
        norm: &Normalizer,
        jobs: &[RolloutJob],
    ) -> Vec<RolloutOutcome> {
        jobs.iter()
            .map(|job| (self.0)(&param_sets[job.param_index], norm, job.seed))
            .collect()
    }
}

/// One full optimizer update: sample directions, roll out `theta +/- sigma
/// delta` m times each, rank, update, and fold observation statistics.
///
/// Exactly `N * 2 * m` rollouts run, in the fixed nesting
/// (direction, sign, repeat); rollout seeds are
/// `chain(update_seed, direction, sign, repeat)`.
pub fn train_step<B: RolloutBackend>(
    params: &[f64],
    norm: &Normalizer,
    backend: &mut B,
    config: &EsConfig,
    update_seed: u64,
) -> Result<(Vec<f64>, Normalizer, UpdateReport)> {
    config.validate()?;
    let dim = params.len();
    let n = config.number_of_perturbations;
    let m = config.number_of_rollouts_per_perturbation;
    let sigma = config.perturbation_standard_deviation;

    let directions = if config.use_orthogonal_perturbations {
        sample_orthogonal_directions(dim, n, update_seed)
    } else {
        sample_iid_directions(dim, n, update_seed)
    };

    // Perturbed parameter table: [i*2] = plus, [i*2+1] = minus.
    let mut param_sets = Vec::with_capacity(2 * n);
    for direction in &directions {
        let plus: Vec<f64> = params
            .iter()
            .zip(direction.iter())
            .map(|(p, d)| p + sigma * d)
            .collect();
        let minus: Vec<f64> = params
            .iter()
            .zip(direction.iter())
            .map(|(p, d)| p - sigma * d)
            .collect();
        param_sets.push(plus);
        param_sets.push(minus);
    }

    let mut jobs = Vec::with_capacity(n * 2 * m);
    for i in 0..n {
        for sign in [Sign::Plus, Sign::Minus] {
            for j in 0..m {
                let sign_part = if config.antithetic_shared_episodes {
                    0
                } else {
                    sign.index()
                };
                let dir_part = if config.common_episode_batch {
                    0
                } else {
                    i as u64
                };
                jobs.push(RolloutJob {
                    direction: i,
                    sign,
                    repeat: j,
                    param_index: i * 2 + sign.index() as usize,
                    seed: seed_chain(&[update_seed, dir_part, sign_part, j as u64]),
                });
            }
        }
    }

    let effective_norm = if config.use_observation_normalization {
        norm.clone()
    } else {
        Normalizer::new()
    };
    let outcomes = backend.run_all(&param_sets, &effective_norm, &jobs);
    debug_assert_eq!(outcomes.len(), jobs.len());

    let mut rewards_plus = vec![vec![0.0; m]; n];
    let mut rewards_minus = vec![vec![0.0; m]; n];
    for (job, outcome) in jobs.iter().zip(outcomes.iter()) {
        let r = if outcome.reward.is_finite() {
            outcome.reward
        } else {
            f64::MIN / 1e6 // non-finite rollout reward: rank it last
        };
        match job.sign {
            Sign::Plus => rewards_plus[job.direction][job.repeat] = r,
            Sign::Minus => rewards_minus[job.direction][job.repeat] = r,
        }
    }

    let batch = PerturbationBatch {
        directions,
        rewards_plus,
        rewards_minus,
        rng_seed: update_seed,
    };

    let elites = rank_elites(&batch, config.elite_rule, config.elite_count());
    let (next_params, mut report) = apply_update(params, &batch, &elites, config)?;
    report.rollouts = jobs.len();

    let mut next_norm = norm.clone();
    if config.use_observation_normalization {
        for outcome in &outcomes {
            next_norm.merge(&outcome.normalizer_delta);
        }
    }

    Ok((next_params, next_norm, report))
}

/// Convenience wrapper for pure-objective optimization (no environment, no
/// observation statistics): maximizes `f` starting from `params`.
pub fn optimize_objective<F>(
    params: &[f64],
    f: F,
    config: &EsConfig,
    master_seed: u64,
    updates: usize,
) -> Result<(Vec<f64>, Vec<UpdateReport>)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut theta = params.to_vec();
    let norm = Normalizer::new();
    let mut reports = Vec::with_capacity(updates);
    let mut backend = ParallelBackend(|p: &[f64], _n: &Normalizer, _s: u64| RolloutOutcome {
        reward: f(p),
        normalizer_delta: Normalizer::new(),
    });
    for u in 0..updates {
        let seed = seed_chain(&[master_seed, crate::rng::tag("objective-update"), u as u64]);
        let (next, _, report) = train_step(&theta, &norm, &mut backend, config, seed)?;
        theta = next;
        reports.push(report);
    }
    Ok((theta, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config(n: usize, m: usize, keep: f64) -> EsConfig {
        EsConfig {
            number_of_perturbations: n,
            number_of_rollouts_per_perturbation: m,
            percentage_to_keep: keep,
            ..EsConfig::sim_default()
        }
    }

    #[test]
    fn orthogonality_within_single_block() {
        let dirs = sample_orthogonal_directions(10, 10, 7);
        for i in 0..10 {
            for j in (i + 1)..10 {
                let d = dot(&dirs[i], &dirs[j]);
                assert!(d.abs() < 1e-9, "dot({i},{j}) = {d}");
            }
        }
    }

    #[test]
    fn block_structure_when_n_exceeds_dim() {
        let dirs = sample_orthogonal_directions(5, 12, 9);
        assert_eq!(dirs.len(), 12);
        // Blocks are [0..5), [5..10), [10..12): orthogonal within each.
        for block in [&dirs[0..5], &dirs[5..10], &dirs[10..12]] {
            for i in 0..block.len() {
                for j in (i + 1)..block.len() {
                    assert!(dot(&block[i], &block[j]).abs() < 1e-9);
                }
            }
        }
        // Across blocks orthogonality is not expected; verify sizes only.
        for d in &dirs {
            assert_eq!(d.len(), 5);
        }
    }

    #[test]
    fn marginals_match_standard_gaussian() {
        // Aggregate over many sampled directions: mean ~ 0, var ~ 1.
        let dim = 24;
        let n_total = 10_000;
        let mut sum = vec![0.0; dim];
        let mut sumsq = vec![0.0; dim];
        let mut count = 0usize;
        for seed in 0..(n_total / dim) {
            let dirs = sample_orthogonal_directions(dim, dim, seed as u64);
            for d in dirs {
                for (c, v) in d.iter().enumerate() {
                    sum[c] += v;
                    sumsq[c] += v * v;
                }
                count += 1;
            }
        }
        for c in 0..dim {
            let mean = sum[c] / count as f64;
            let var = sumsq[c] / count as f64 - mean * mean;
            assert!(mean.abs() < 0.05, "coordinate {c} mean {mean}");
            assert!((var - 1.0).abs() < 0.1, "coordinate {c} var {var}");
        }
    }

    #[test]
    fn elite_rules_diverge_on_constructed_pairs() {
        let batch = PerturbationBatch {
            directions: vec![vec![1.0], vec![1.0]],
            rewards_plus: vec![vec![10.0], vec![12.0]],
            rewards_minus: vec![vec![1.0], vec![11.0]],
            rng_seed: 0,
        };
        assert_eq!(rank_elites(&batch, EliteRule::Bgs, 2), vec![0, 1]);
        assert_eq!(rank_elites(&batch, EliteRule::Ars, 2), vec![1, 0]);
    }

    #[test]
    fn equal_rewards_keep_input_order() {
        let batch = PerturbationBatch {
            directions: vec![vec![0.0]; 4],
            rewards_plus: vec![vec![1.0]; 4],
            rewards_minus: vec![vec![1.0]; 4],
            rng_seed: 0,
        };
        assert_eq!(rank_elites(&batch, EliteRule::Bgs, 4), vec![0, 1, 2, 3]);
        assert_eq!(rank_elites(&batch, EliteRule::Ars, 4), vec![0, 1, 2, 3]);
    }

    #[test]
    fn ranking_uses_repeat_means() {
        // Means: d0 diff = 5-2 = 3, d1 diff = 4-0 = 4 -> d1 first under BGS.
        let batch = PerturbationBatch {
            directions: vec![vec![0.0]; 2],
            rewards_plus: vec![vec![4.0, 6.0, 5.0], vec![3.0, 5.0, 4.0]],
            rewards_minus: vec![vec![2.0, 2.0, 2.0], vec![-1.0, 1.0, 0.0]],
            rng_seed: 0,
        };
        assert_eq!(rank_elites(&batch, EliteRule::Bgs, 2), vec![1, 0]);
        // Brute-force oracle recomputation.
        let mut diffs: Vec<(usize, f64)> = (0..2)
            .map(|i| {
                let mp = batch.rewards_plus[i].iter().sum::<f64>() / 3.0;
                let mm = batch.rewards_minus[i].iter().sum::<f64>() / 3.0;
                (i, mp - mm)
            })
            .collect();
        diffs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        assert_eq!(
            rank_elites(&batch, EliteRule::Bgs, 2),
            diffs.iter().map(|(i, _)| *i).collect::<Vec<_>>()
        );
    }

    #[test]
    fn update_hand_example() {
        // k=1, delta=e1, meanR+=2, meanR-=0, sigma configured so sigma_R=1.
        let dim = 4;
        let batch = PerturbationBatch {
            directions: vec![{
                let mut e1 = vec![0.0; dim];
                e1[0] = 1.0;
                e1
            }],
            rewards_plus: vec![vec![2.0]],
            rewards_minus: vec![vec![0.0]],
            rng_seed: 0,
        };
        // Elite means are {2, 0}: population std = 1.
        let config = EsConfig {
            step_size: 0.1,
            ..toy_config(1, 1, 1.0)
        };
        let params = vec![0.0; dim];
        let (next, report) = apply_update(&params, &batch, &[0], &config).unwrap();
        assert!((report.sigma_r - 1.0).abs() < 1e-12);
        assert!((next[0] - 0.2).abs() < 1e-12);
        assert!(next[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_diffs_leave_params_unchanged() {
        let batch = PerturbationBatch {
            directions: vec![vec![1.0, 2.0], vec![-1.0, 0.5]],
            rewards_plus: vec![vec![3.0], vec![5.0]],
            rewards_minus: vec![vec![3.0], vec![5.0]],
            rng_seed: 0,
        };
        let config = toy_config(2, 1, 1.0);
        let params = vec![0.5, -0.5];
        let (next, report) = apply_update(&params, &batch, &[0, 1], &config).unwrap();
        assert!(!report.skipped); // rewards differ across directions
        assert_eq!(next, params);
    }

    #[test]
    fn swapping_reward_signs_negates_update() {
        let mut rng = crate::rng::rng_from(&[99]);
        let dim = 6;
        let n = 4;
        let dirs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let rp: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
        let rm: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
        let batch = PerturbationBatch {
            directions: dirs.clone(),
            rewards_plus: rp.clone(),
            rewards_minus: rm.clone(),
            rng_seed: 0,
        };
        let swapped = PerturbationBatch {
            directions: dirs,
            rewards_plus: rm,
            rewards_minus: rp,
            rng_seed: 0,
        };
        let config = toy_config(n, 1, 1.0);
        let params = vec![0.0; dim];
        let elites: Vec<usize> = (0..n).collect();
        let (a, _) = apply_update(&params, &batch, &elites, &config).unwrap();
        let (b, _) = apply_update(&params, &swapped, &elites, &config).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_rewards_skip_update() {
        let batch = PerturbationBatch {
            directions: vec![vec![1.0]],
            rewards_plus: vec![vec![1.0]],
            rewards_minus: vec![vec![1.0]],
            rng_seed: 0,
        };
        let config = toy_config(1, 1, 1.0);
        let (next, report) = apply_update(&[0.0], &batch, &[0], &config).unwrap();
        assert!(report.skipped);
        assert_eq!(next, vec![0.0]);
    }

    #[test]
    fn elite_count_matches_ceiling() {
        let c = toy_config(200, 1, 0.30);
        assert_eq!(c.elite_count(), 60);
        let c = toy_config(5, 1, 0.60);
        assert_eq!(c.elite_count(), 3);
        let c = toy_config(7, 1, 0.30);
        assert_eq!(c.elite_count(), 3); // ceil(2.1)
    }

    #[test]
    fn bgs_and_ars_agree_when_minus_is_constant() {
        let mut rng = crate::rng::rng_from(&[123]);
        for _ in 0..50 {
            let n = 8;
            let rp: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..10.0)]).collect();
            let rm: Vec<Vec<f64>> = (0..n).map(|_| vec![-5.0]).collect();
            let batch = PerturbationBatch {
                directions: vec![vec![0.0]; n],
                rewards_plus: rp,
                rewards_minus: rm,
                rng_seed: 0,
            };
            assert_eq!(
                rank_elites(&batch, EliteRule::Bgs, n),
                rank_elites(&batch, EliteRule::Ars, n)
            );
        }
    }

    #[test]
    fn quadratic_toy_converges() {
        // Maximize F(theta) = -|theta - target|^2 in dim 10.
        let dim = 10;
        let target: Vec<f64> = (0..dim).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let config = EsConfig {
            step_size: 0.02,
            perturbation_standard_deviation: 0.05,
            number_of_perturbations: 16,
            number_of_rollouts_per_perturbation: 1,
            percentage_to_keep: 0.30,
            ..EsConfig::sim_default()
        };
        for seed in 1..=5u64 {
            let theta0 = vec![0.0; dim];
            let d0: f64 = target.iter().map(|t| t * t).sum::<f64>().sqrt();
            let t = target.clone();
            let (theta, _) = optimize_objective(
                &theta0,
                move |p| -p.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                &config,
                seed,
                300,
            )
            .unwrap();
            let d: f64 = theta
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                d < 0.1 * d0,
                "seed {seed}: distance {d} not below 10% of initial {d0}"
            );
        }
    }

    #[test]
    fn train_step_reproduces_hand_update_with_single_direction() {
        // N=1, m=1: the update must equal apply_update on the observed batch.
        let config = EsConfig {
            step_size: 0.05,
            perturbation_standard_deviation: 0.1,
            ..toy_config(1, 1, 1.0)
        };
        let params = vec![0.2, -0.3, 0.7];
        let norm = Normalizer::new();
        let g = vec![1.0, -2.0, 0.5];
        let gc = g.clone();
        let mut backend = ParallelBackend(move |p: &[f64], _: &Normalizer, _: u64| RolloutOutcome {
            reward: p.iter().zip(gc.iter()).map(|(a, b)| a * b).sum(),
            normalizer_delta: Normalizer::new(),
        });
        let (next, _, report) = train_step(&params, &norm, &mut backend, &config, 42).unwrap();

        // Recompute by hand from the same sampled direction.
        let dirs = sample_orthogonal_directions(3, 1, 42);
        let d = &dirs[0];
        let rp: f64 = params
            .iter()
            .zip(d.iter())
            .map(|(p, di)| p + 0.1 * di)
            .zip(g.iter())
            .map(|(x, gi)| x * gi)
            .sum();
        let rm: f64 = params
            .iter()
            .zip(d.iter())
            .map(|(p, di)| p - 0.1 * di)
            .zip(g.iter())
            .map(|(x, gi)| x * gi)
            .sum();
        let sigma_r = ((rp - (rp + rm) / 2.0).powi(2) + (rm - (rp + rm) / 2.0).powi(2)) / 2.0;
        let sigma_r = sigma_r.sqrt();
        assert!((report.sigma_r - sigma_r).abs() < 1e-12);
        for (i, p) in params.iter().enumerate() {
            let expect = p + 0.05 / sigma_r * (rp - rm) * d[i];
            assert!((next[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_rewards_leave_theta_unchanged() {
        let config = toy_config(6, 1, 1.0);
        let params = vec![1.0, 2.0];
        let norm = Normalizer::new();
        // Reward ignores parameters entirely but varies by seed... use a
        // constant per direction pair: F depends only on |p - params| which is
        // sigma*|d| for both signs -> R+ = R- for every direction.
        let base = params.clone();
        let mut backend = ParallelBackend(move |p: &[f64], _: &Normalizer, _: u64| {
            let dist: f64 = p
                .iter()
                .zip(base.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            RolloutOutcome {
                reward: -dist,
                normalizer_delta: Normalizer::new(),
            }
        });
        let (next, _, _) = train_step(&params, &norm, &mut backend, &config, 3).unwrap();
        for (a, b) in next.iter().zip(params.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn train_step_is_deterministic() {
        let config = toy_config(8, 2, 0.5);
        let params = vec![0.1; 12];
        let norm = Normalizer::new();
        let run = || {
            let mut backend =
                ParallelBackend(move |p: &[f64], _: &Normalizer, seed: u64| RolloutOutcome {
                    reward: p.iter().sum::<f64>() + (seed % 7) as f64 * 0.01,
                    normalizer_delta: Normalizer::new(),
                });
            train_step(&params, &norm, &mut backend, &config, 11).unwrap()
        };
        let (a_params, _, a_report) = run();
        let (b_params, _, b_report) = run();
        assert_eq!(a_params, b_params);
        assert_eq!(a_report.elites, b_report.elites);
        assert_eq!(a_report.sigma_r.to_bits(), b_report.sigma_r.to_bits());
    }

    #[test]
    fn iid_gradient_estimate_aligns_with_linear_gradient() {
        // Mean update direction over seeds vs the true gradient g.
        let dim = 30;
        let mut rng = crate::rng::rng_from(&[500]);
        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let config = EsConfig {
            use_orthogonal_perturbations: false,
            number_of_perturbations: 200,
            number_of_rollouts_per_perturbation: 1,
            percentage_to_keep: 0.30,
            ..EsConfig::sim_default()
        };
        let params = vec![0.0; dim];
        let norm = Normalizer::new();
        let mut avg = vec![0.0; dim];
        for seed in 0..50u64 {
            let gc = g.clone();
            let mut backend =
                ParallelBackend(move |p: &[f64], _: &Normalizer, _: u64| RolloutOutcome {
                    reward: p.iter().zip(gc.iter()).map(|(a, b)| a * b).sum(),
                    normalizer_delta: Normalizer::new(),
                });
            let (next, _, _) = train_step(&params, &norm, &mut backend, &config, seed).unwrap();
            for (a, (n, p)) in avg.iter_mut().zip(next.iter().zip(params.iter())) {
                *a += n - p;
            }
        }
        let dot_g: f64 = avg.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        let cos = dot_g / (dot(&avg, &avg).sqrt() * dot(&g, &g).sqrt());
        assert!(cos > 0.95, "cosine similarity {cos}");
    }
}
