//! Per-channel sensor and actuation delays.
//!
//! Each channel's latency is Gaussian with the measured mean and spread,
//! sampled once per episode and held fixed. The table spreads are read as
//! standard deviations in ms by default; a flag flips the interpretation to
//! variances for sensitivity checks.

use crate::math::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Gaussian latency parameters per channel, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub ball_obs_mean_ms: f64,
    pub ball_obs_spread_ms: f64,
    pub arm_obs_mean_ms: f64,
    pub arm_obs_spread_ms: f64,
    pub gantry_obs_mean_ms: f64,
    pub gantry_obs_spread_ms: f64,
    pub arm_action_mean_ms: f64,
    pub arm_action_spread_ms: f64,
    pub gantry_action_mean_ms: f64,
    pub gantry_action_spread_ms: f64,
    /// When true, spread values are variances (ms^2) instead of std devs.
    pub spread_is_variance: bool,
    /// Disable all delays (diagnostics).
    pub disabled: bool,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            ball_obs_mean_ms: 40.0,
            ball_obs_spread_ms: 8.2,
            arm_obs_mean_ms: 29.0,
            arm_obs_spread_ms: 8.2,
            gantry_obs_mean_ms: 33.0,
            gantry_obs_spread_ms: 9.0,
            arm_action_mean_ms: 71.0,
            arm_action_spread_ms: 5.7,
            gantry_action_mean_ms: 64.5,
            gantry_action_spread_ms: 11.5,
            spread_is_variance: false,
            disabled: false,
        }
    }
}

impl LatencyModel {
    /// Identity model: everything instantaneous.
    pub fn zero() -> Self {
        Self {
            disabled: true,
            ..Self::default()
        }
    }

    fn draw(&self, mean_ms: f64, spread_ms: f64, rng: &mut ChaCha8Rng) -> f64 {
        if self.disabled {
            return 0.0;
        }
        let std = if self.spread_is_variance {
            spread_ms.max(0.0).sqrt()
        } else {
            spread_ms
        };
        let g: f64 = rng.sample(StandardNormal);
        ((mean_ms + std * g) / 1000.0).max(0.0)
    }

    /// Sample one episode's latencies, seconds, clamped at zero.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> EpisodeLatencies {
        EpisodeLatencies {
            ball_obs: self.draw(self.ball_obs_mean_ms, self.ball_obs_spread_ms, rng),
            arm_obs: self.draw(self.arm_obs_mean_ms, self.arm_obs_spread_ms, rng),
            gantry_obs: self.draw(self.gantry_obs_mean_ms, self.gantry_obs_spread_ms, rng),
            arm_action: self.draw(self.arm_action_mean_ms, self.arm_action_spread_ms, rng),
            gantry_action: self.draw(self.gantry_action_mean_ms, self.gantry_action_spread_ms, rng),
        }
    }
}

/// Realized delays for one episode, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLatencies {
    pub ball_obs: f64,
    pub arm_obs: f64,
    pub gantry_obs: f64,
    pub arm_action: f64,
    pub gantry_action: f64,
}

/// Time-stamped history with linear interpolation, clamped at the ends.
#[derive(Debug, Clone)]
pub struct History<T> {
    entries: Vec<(f64, T)>,
}

pub trait Lerp: Copy {
    fn lerp(a: Self, b: Self, s: f64) -> Self;
}

impl Lerp for Vec3 {
    fn lerp(a: Self, b: Self, s: f64) -> Self {
        a.lerp(b, s)
    }
}

impl<const N: usize> Lerp for [f64; N] {
    fn lerp(a: Self, b: Self, s: f64) -> Self {
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = a[i] + (b[i] - a[i]) * s;
        }
        out
    }
}

impl<T: Lerp> History<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, t: f64, value: T) {
        debug_assert!(
            self.entries.last().map_or(true, |(lt, _)| t > *lt),
            "history timestamps must increase"
        );
        self.entries.push((t, value));
    }

    /// Value at `t`, linearly interpolated; clamped to the recorded range.
    pub fn at(&self, t: f64) -> T {
        let entries = &self.entries;
        assert!(!entries.is_empty(), "history is empty");
        if t <= entries[0].0 {
            return entries[0].1;
        }
        if t >= entries[entries.len() - 1].0 {
            return entries[entries.len() - 1].1;
        }
        // Entries are appended at a fixed rate; binary search for the bracket.
        let idx = entries.partition_point(|(et, _)| *et <= t);
        let (t0, a) = entries[idx - 1];
        let (t1, b) = entries[idx];
        let s = (t - t0) / (t1 - t0);
        T::lerp(a, b, s)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
